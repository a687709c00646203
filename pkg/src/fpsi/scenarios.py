"""Scenario drivers: heterogeneous reservoir data, harmonic mesh extension and config-driven runs."""
from __future__ import annotations

import copy
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .assembly import (
    BoundaryLoad,
    MaterialFields,
    Sources,
    assemble_load,
    assemble_stiffness,
    assemble_system,
    assemble_weighted_mass,
    build_coupled_spaces,
    constrain,
)
from .errors import ArgumentError, FormatError
from .expressions import parse_value
from .fespace import boundary_nodes, build_space, dirichlet_bcs
from .io import write_csv, write_vtk
from .mesh import (
    Marker,
    Mesh2D,
    Region,
    build_channel_mesh,
    build_two_block_mesh,
    load_mesh,
    marker_name,
    move_nodes,
    parse_marker,
)
from .quadrature import triangle_rule
from .system import BackwardEuler, EnergyFunctional, Factorization, TransientState, interface_residual

log = logging.getLogger(__name__)

MILLIDARCY = 9.869233e-16   # m^2
SPE10_DIMS = (60, 220, 85)
PHI_CLAMP = 0.01


# -- heterogeneous material data ------------------------------------------------------
def youngs_modulus(phi, scale: float = 1.0e7, exponent: float = 2.1, floor: float = 0.02):
    """E = scale * (1 - 2 phi)^exponent; the base is floored so E stays positive for phi >= 1/2."""
    base = np.maximum(1.0 - 2.0 * np.asarray(phi, dtype=float), floor)
    return scale * base**exponent


def lame_from_youngs(E, nu: float):
    E = np.asarray(E, dtype=float)
    return E * nu / ((1 + nu) * (1 - 2 * nu)), E / (2 * (1 + nu))


@dataclass(frozen=True, eq=False)
class HeterogeneousFields:
    """Nodal porosity, permeability and Young's modulus over all mesh vertices."""

    phi: np.ndarray
    kappa: np.ndarray
    youngs: np.ndarray
    nu: float = 0.2

    @property
    def lambda_p_field(self) -> np.ndarray:
        return lame_from_youngs(self.youngs, self.nu)[0]

    @property
    def mu_p_field(self) -> np.ndarray:
        return lame_from_youngs(self.youngs, self.nu)[1]

    def check(self) -> "HeterogeneousFields":
        if not (np.all(self.phi >= PHI_CLAMP) and np.all(self.phi <= 1 - PHI_CLAMP)):
            raise ArgumentError("porosity outside the clamp range")
        if not np.all(self.kappa > 0):
            raise ArgumentError("permeability must be positive")
        if not np.all(self.youngs > 0):
            raise ArgumentError("Young's modulus must be positive")
        if not 0 <= self.nu < 0.5:
            raise ArgumentError("Poisson ratio must lie in [0, 0.5)")
        return self


def _read_reals(path, count: int, what: str) -> np.ndarray:
    text = Path(path).read_text()
    try:
        vals = np.array(text.split(), dtype=float)
    except ValueError as exc:
        raise FormatError(f"{what} file {path} holds non-numeric data: {exc}") from None
    if len(vals) < count:
        raise FormatError(f"{what} file {path} holds {len(vals)} values, expected at least {count}")
    return vals


def _affine(values: np.ndarray, target) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    a, b = float(target[0]), float(target[1])
    if hi - lo <= 0:
        return np.full_like(values, 0.5 * (a + b))
    return a + (values - lo) * (b - a) / (hi - lo)


def project_cellwise(mesh: Mesh2D, sample: Callable[[np.ndarray, np.ndarray], np.ndarray], fill: float | None = None) -> np.ndarray:
    """L2 projection onto porous P1 of a function sampled at quadrature points; returns vertex values.

    Vertices outside the porous region get ``fill`` (default: the mean of the projection).
    """
    V = build_space(mesh, Region.POROUS, "P1", 1)
    rule = triangle_rule(4)
    tri = mesh.triangles[V.cells]
    v = mesh.vertices
    p0 = v[tri[:, 0]]
    J = np.stack([v[tri[:, 1]] - p0, v[tri[:, 2]] - p0], axis=2)
    det = np.abs(J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0])
    pts = p0[:, None, :] + np.einsum("cij,qj->cqi", J, rule.xy)
    vals = sample(pts[..., 0], pts[..., 1])
    local = np.einsum("c,q,cq,qi->ci", det, rule.weights, vals, rule.points)
    rhs = np.bincount(V.cell_nodes.ravel(), weights=local.ravel(), minlength=V.dimension)
    coeffs = Factorization(assemble_weighted_mass(V, V)).solve(rhs)
    return V.vertex_values(coeffs, fill=float(np.mean(coeffs)) if fill is None else fill)[:, 0]


def load_spe10_layer(
    phi_file,
    perm_file,
    layer: int,
    target_box,
    mesh: Mesh2D,
    dims: Sequence[int] = SPE10_DIMS,
    nu: float = 0.2,
    phi_range: Sequence[float] | None = None,
    kappa_range: Sequence[float] | None = None,
    perm_unit: float = MILLIDARCY,
) -> HeterogeneousFields:
    """Porosity and x-permeability of one layer mapped onto ``target_box`` and projected to P1.

    Files hold whitespace-separated reals with x varying fastest, then y,
    then z; the permeability file holds the x, y and z blocks in sequence
    (only the x block is used). Permeability is converted with ``perm_unit``.
    Optional ranges rescale the raw layer values affinely before projection.
    """
    nx, ny, nz = (int(d) for d in dims)
    if not 1 <= int(layer) <= nz:
        raise ArgumentError(f"layer must be in [1, {nz}], got {layer}")
    n = nx * ny * nz
    phi_all = _read_reals(phi_file, n, "porosity")
    perm_all = _read_reals(perm_file, n, "permeability")
    sl = slice((layer - 1) * nx * ny, layer * nx * ny)
    phi_slab = phi_all[sl].reshape(ny, nx)
    kappa_slab = perm_all[sl].reshape(ny, nx) * perm_unit
    if phi_range is not None:
        phi_slab = _affine(phi_slab, phi_range)
    if kappa_range is not None:
        kappa_slab = _affine(kappa_slab, kappa_range)
    positive = kappa_slab[kappa_slab > 0]
    kappa_floor = float(positive.min()) if len(positive) else perm_unit
    kappa_slab = np.maximum(kappa_slab, kappa_floor)
    box = np.asarray(target_box, dtype=float)

    def nearest(slab):
        def sample(x, y):
            i = np.clip(((x - box[0, 0]) / (box[1, 0] - box[0, 0]) * nx).astype(int), 0, nx - 1)
            j = np.clip(((y - box[0, 1]) / (box[1, 1] - box[0, 1]) * ny).astype(int), 0, ny - 1)
            return slab[j, i]
        return sample

    phi = np.clip(project_cellwise(mesh, nearest(phi_slab)), PHI_CLAMP, 1 - PHI_CLAMP)
    kappa = np.maximum(project_cellwise(mesh, nearest(kappa_slab)), kappa_floor)
    return HeterogeneousFields(phi, kappa, youngs_modulus(phi), nu).check()


def write_synthetic_spe10(directory, dims: Sequence[int] = SPE10_DIMS, seed: int = 0, phi=None, perm=None) -> tuple[Path, Path]:
    """Write SPE10-format porosity and permeability files.

    ``phi``/``perm`` may be constants or arrays of ``prod(dims)`` values;
    otherwise a smooth layered random pattern is generated from ``seed``.
    Returns the two file paths.
    """
    nx, ny, nz = (int(d) for d in dims)
    n = nx * ny * nz
    rng = np.random.default_rng(seed)
    if phi is None or perm is None:
        X, Y, Z = np.meshgrid(np.linspace(0, 1, nx), np.linspace(0, 1, ny), np.arange(nz), indexing="xy")
        a, b = rng.uniform(1, 4, 2)
        c = rng.uniform(0, 2 * np.pi, nz)
        wave = np.sin(2 * np.pi * a * X + 0.1 * Z) * np.cos(2 * np.pi * b * Y + c[Z])
        noise = rng.uniform(-0.03, 0.03, wave.shape)
        gen_phi = np.clip(0.2 + 0.12 * wave + noise, 0.0, 0.5)
        gen_perm = 10.0 ** (1.0 + 2.5 * (gen_phi - 0.1) / 0.3)
        # data ordering: x fastest, then y, then z
        gen_phi = np.transpose(gen_phi, (2, 0, 1)).ravel()
        gen_perm = np.transpose(gen_perm, (2, 0, 1)).ravel()
    phi_vals = gen_phi if phi is None else np.broadcast_to(np.asarray(phi, dtype=float), (n,))
    kx = gen_perm if perm is None else np.broadcast_to(np.asarray(perm, dtype=float), (n,))
    perm_vals = np.concatenate([kx, kx, 0.1 * kx])
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = d / "spe_phi.dat", d / "spe_perm.dat"
    for p, vals in zip(paths, (phi_vals, perm_vals)):
        lines = (" ".join(f"{v:.6e}" for v in vals[i:i + 6]) for i in range(0, len(vals), 6))
        p.write_text("\n".join(lines) + "\n")
    return paths


# -- harmonic extension -----------------------------------------------------------------
def harmonic_extension(mesh: Mesh2D, interface_displacement, zero_markers: Sequence = (Marker.INLET,)) -> np.ndarray:
    """Extend an interface displacement into the Stokes region by a componentwise P1 Laplace solve.

    ``interface_displacement`` is an (n_vertices, 2) array (only interface
    rows are read) or a function of (x, y) returning two components. The
    extension equals the data at interface vertices, vanishes on edges with
    ``zero_markers`` and has zero normal derivative elsewhere. Returns an
    (n_vertices, 2) array, zero at vertices outside the Stokes region.
    """
    V = build_space(mesh, Region.STOKES, "P1", 1)
    iface = mesh.interface
    ivert = np.unique(iface.edges)
    if callable(interface_displacement):
        xy = mesh.vertices[ivert]
        d_if = np.asarray(interface_displacement(xy[:, 0], xy[:, 1]), dtype=float).reshape(2, -1).T
    else:
        d = np.asarray(interface_displacement, dtype=float)
        if d.shape != (mesh.n_vertices, 2):
            raise ArgumentError(f"displacement must have shape ({mesh.n_vertices}, 2), got {d.shape}")
        d_if = d[ivert]
    present = [m for m in zero_markers if parse_marker(m) in mesh.markers]
    zero_nodes = boundary_nodes(V, present) if present else np.zeros(0, dtype=np.int64)
    if_nodes = V.vertex_node[ivert]
    zero_nodes = np.setdiff1d(zero_nodes, if_nodes)
    dofs = np.concatenate([if_nodes, zero_nodes])
    op = constrain(assemble_stiffness(V), dofs)
    fact = Factorization(op.matrix)
    out = np.zeros((mesh.n_vertices, 2))
    for c in range(2):
        vals = np.concatenate([d_if[:, c], np.zeros(len(zero_nodes))])
        b = op.lift(np.zeros(V.dimension), vals)
        sol = fact.solve(b)
        res = fact.residual(sol, b)
        if res > 1e-10:
            log.warning("harmonic extension residual %.2e", res)
        out[:, c] = V.vertex_values(sol)[:, 0]
    out[ivert] = d_if
    return out


def global_displacement(mesh: Mesh2D, porous: np.ndarray, stokes: np.ndarray) -> np.ndarray:
    """Stitch the solid displacement (porous vertices) and its extension (Stokes vertices).

    Both agree on interface vertices; the porous value is kept there.
    """
    out = np.where(mesh.region_vertex_mask(Region.STOKES)[:, None], stokes, 0.0)
    pm = mesh.region_vertex_mask(Region.POROUS)
    out[pm] = porous[pm]
    return out


# -- configuration -----------------------------------------------------------------------
@dataclass
class EssentialBC:
    field: str
    markers: tuple
    value: Any = 0.0
    components: tuple | None = None


@dataclass
class NaturalBC:
    field: str
    markers: tuple
    traction: Any = None
    pressure: Any = None


@dataclass
class OutputSpec:
    directory: str | None = None
    vtk_every: int = 0          # 0 disables snapshots; the final state is always written when a directory is set
    timeseries: bool = True

    def __post_init__(self):
        if self.vtk_every < 0:
            raise ArgumentError("vtk_every must be nonnegative")


@dataclass
class ScenarioConfig:
    """Everything needed to run a transient coupled problem.

    ``mesh`` selects a builder (``two_block``, ``channel`` or ``file``);
    ``materials`` maps parameter names to numbers or expressions in x and y,
    and may hold an ``spe10`` block for heterogeneous data. Loads and
    boundary data may depend on t.
    """

    name: str
    mesh: dict
    materials: dict
    T: float
    tau: float
    essential: list[EssentialBC] = field(default_factory=list)
    natural: list[NaturalBC] = field(default_factory=list)
    sources: dict = field(default_factory=dict)
    viscosity_scaled_permeability: bool = False
    mesh_motion: bool = False
    max_steps: int | None = None
    output: OutputSpec = field(default_factory=OutputSpec)

    def __post_init__(self):
        if not (self.tau > 0 and self.T > 0):
            raise ArgumentError("T and tau must be positive")
        n = round(self.T / self.tau)
        if n < 1 or abs(n * self.tau - self.T) > 1e-9 * max(1.0, self.T):
            raise ArgumentError(f"T = {self.T} is not an integer multiple of tau = {self.tau}")
        for bc in [*self.essential, *self.natural]:
            if bc.field not in ("u_f", "u_r", "y_s"):
                raise ArgumentError(f"boundary data only applies to u_f, u_r or y_s, not {bc.field!r}")

    @property
    def n_steps(self) -> int:
        n = int(round(self.T / self.tau))
        return n if self.max_steps is None else min(n, int(self.max_steps))

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base_dir: str | os.PathLike | None = None) -> "ScenarioConfig":
        d = copy.deepcopy(dict(data))
        try:
            ess = [EssentialBC(b["field"], tuple(b["markers"]), b.get("value", 0.0),
                               None if b.get("components") is None else tuple(b["components"]))
                   for b in d.pop("essential", [])]
            nat = [NaturalBC(b["field"], tuple(b["markers"]), b.get("traction"), b.get("pressure"))
                   for b in d.pop("natural", [])]
            out = OutputSpec(**d.pop("output", {}))
            cfg = cls(essential=ess, natural=nat, output=out, **d)
        except (KeyError, TypeError) as exc:
            raise ArgumentError(f"invalid scenario config: {exc}") from None
        if base_dir is not None:
            cfg._resolve_paths(Path(base_dir))
        return cfg

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> "ScenarioConfig":
        p = Path(path)
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"{p}: invalid JSON ({exc})") from None
        return cls.from_dict(data, base_dir=p.parent)

    def _resolve_paths(self, base: Path) -> None:
        def fix(block, key):
            if block is not None and isinstance(block.get(key), str) and not os.path.isabs(block[key]):
                block[key] = str(base / block[key])

        fix(self.mesh, "path")
        spe = self.materials.get("spe10")
        if isinstance(spe, dict):
            fix(spe, "phi_file")
            fix(spe, "perm_file")
            fix(spe, "synthetic_dir")

    def build_mesh(self) -> Mesh2D:
        m = dict(self.mesh)
        kind = m.pop("type", None)
        if kind == "two_block":
            mesh = build_two_block_mesh(m["stokes_box"], m["porous_box"], m["nx"], m["ny"],
                                        m.get("diagonal", "right"), m.get("side_markers"))
        elif kind == "channel":
            mesh = build_channel_mesh(m["domain_box"], m["channel_box"], m["nx"], m["ny"],
                                      m.get("diagonal", "right"), m.get("side_markers"))
        elif kind == "file":
            mesh = load_mesh(m["path"])
        else:
            raise ArgumentError(f"unknown mesh type {kind!r}")
        missing = {parse_marker(mk) for bc in [*self.essential, *self.natural] for mk in bc.markers} - set(mesh.markers)
        if missing:
            raise ArgumentError(f"config references markers absent from the mesh: {[marker_name(x) for x in sorted(missing)]}")
        return mesh

    def build_materials(self, mesh: Mesh2D) -> tuple[MaterialFields, HeterogeneousFields | None]:
        m = dict(self.materials)
        spe = m.pop("spe10", None)
        het = None
        values: dict[str, Any] = {}
        xy = mesh.vertices

        def nodal(v):
            p = parse_value(v)
            if callable(p):
                return np.asarray(p(xy[:, 0], xy[:, 1], 0.0), dtype=float)
            if isinstance(p, tuple):
                raise ArgumentError("material parameters must be scalar")
            return p

        storage = m.pop("storage", None)
        nu = m.pop("nu", None)
        theta = float(m.pop("theta", 0.0))
        for k, v in m.items():
            values[k] = nodal(v)
        if spe is not None:
            het = _load_spe_block(spe, mesh, 0.2 if nu is None else float(nu))
            values["phi"], values["kappa"] = het.phi, het.kappa
            values["lambda_p"], values["mu_p"] = het.lambda_p_field, het.mu_p_field
        elif nu is not None and "youngs" in values:
            values["lambda_p"], values["mu_p"] = lame_from_youngs(values.pop("youngs"), float(nu))
        if storage is not None:
            # prescribes (1 - phi)^2 / K directly
            values["K_bulk"] = (1 - np.asarray(values["phi"])) ** 2 / float(storage)
            if np.ndim(values["K_bulk"]) == 0:
                values["K_bulk"] = float(values["K_bulk"])
        try:
            mat = MaterialFields(theta=theta, viscosity_scaled_permeability=self.viscosity_scaled_permeability, **values)
        except TypeError as exc:
            raise ArgumentError(f"invalid material parameters: {exc}") from None
        return mat.validate(mesh), het

    def build_sources(self) -> Sources | None:
        if not self.sources:
            return None
        unknown = set(self.sources) - {"f_S", "f_P", "r_S"}
        if unknown:
            raise ArgumentError(f"unsupported source terms {sorted(unknown)}")
        return Sources(**{k: parse_value(v) for k, v in self.sources.items()})

    def to_dict(self) -> dict:
        from dataclasses import asdict
        return asdict(self)


def _load_spe_block(spe: Mapping[str, Any], mesh: Mesh2D, nu: float) -> HeterogeneousFields:
    dims = tuple(spe.get("dims", SPE10_DIMS))
    if spe.get("synthetic"):
        directory = spe.get("synthetic_dir") or os.path.join(os.getcwd(), "spe10_synthetic")
        phi_file, perm_file = write_synthetic_spe10(directory, dims, seed=int(spe.get("seed", 0)))
    else:
        phi_file, perm_file = spe["phi_file"], spe["perm_file"]
    return load_spe10_layer(
        phi_file, perm_file, int(spe.get("layer", 80)), spe.get("target_box", ((0.0, 0.0), (3.048, 6.096))), mesh,
        dims=dims, nu=nu, phi_range=spe.get("phi_range"), kappa_range=spe.get("kappa_range"),
        perm_unit=float(spe.get("perm_unit", MILLIDARCY)),
    )


# -- running -----------------------------------------------------------------------------
@dataclass
class ScenarioResult:
    config: ScenarioConfig
    mesh: Mesh2D                       # final (possibly moved) mesh
    state: TransientState
    times: list[float]
    energy: list[float]
    interface_residual: list[float]    # max |b_Gamma| / |X| per step
    files: list[str]
    fields: HeterogeneousFields | None = None
    first_state: TransientState | None = None


def _vertex_fields(spaces, X: np.ndarray) -> dict[str, np.ndarray]:
    p = spaces.split(X)
    out = {}
    for name in ("u_f", "u_r", "y_s", "u_s", "p_S", "p_P"):
        V = getattr(spaces, name)
        vals = V.vertex_values(p[name])
        out[name] = vals if V.components == 2 else vals[:, 0]
    return out


def run_scenario(config: ScenarioConfig, output_dir: str | os.PathLike | None = None, progress: Callable | None = None) -> ScenarioResult:
    """Assemble and integrate ``config``; write requested outputs.

    With mesh motion, the interface displacement after each step is
    extended harmonically into the Stokes region, the Stokes vertices are
    moved, and the Stokes forms are reassembled for the next step.
    """
    mesh0 = config.build_mesh()
    materials, het = config.build_materials(mesh0)
    spaces = build_coupled_spaces(mesh0)
    system = assemble_system(spaces, materials)
    bcs = []
    for bc in config.essential:
        V = getattr(spaces, bc.field)
        bcs.append((bc.field, dirichlet_bcs(V, bc.markers, parse_value(bc.value), bc.components)))
    loads = [BoundaryLoad(bc.field, bc.markers,
                          None if bc.traction is None else parse_value(bc.traction),
                          None if bc.pressure is None else parse_value(bc.pressure))
             for bc in config.natural]
    sources = config.build_sources()
    stepper = BackwardEuler(system, config.tau, bcs)
    energy_fn = EnergyFunctional(spaces, materials)

    out_dir = output_dir if output_dir is not None else config.output.directory
    files: list[str] = []
    vertices = mesh0.vertices
    state = TransientState(0.0, np.zeros(spaces.dimension), 0)
    times, energy, resid = [0.0], [energy_fn(state)], []
    first = None
    mesh = mesh0

    def snapshot(st: TransientState):
        path = os.path.join(out_dir, f"{config.name}_{st.step_index:05d}.vtk")
        write_vtk(mesh0, _vertex_fields(spaces, st.X), path, vertices=mesh.vertices)
        files.append(path)

    if out_dir is not None and config.output.vtk_every:
        snapshot(state)
    moving = config.mesh_motion
    for n in range(config.n_steps):
        t = state.t + config.tau
        sv = vertices if moving else None
        L = assemble_load(spaces, materials, sources, t, None, loads, stokes_vertices=sv)
        new = stepper.step(state, L)
        r = interface_residual(system, new, state, config.tau)
        resid.append(r / max(float(np.linalg.norm(new.X)), 1e-300))
        times.append(new.t)
        energy.append(energy_fn(new))
        if first is None:
            first = new
        state = new
        if moving:
            y = spaces.y_s.vertex_values(spaces.split(new.X)["y_s"])
            d_hat = harmonic_extension(mesh0, y)
            mesh = move_nodes(mesh0, global_displacement(mesh0, y, d_hat), step=n + 1, region=None)
            vertices = np.where(mesh0.region_vertex_mask(Region.STOKES)[:, None], mesh.vertices, mesh0.vertices)
            system = assemble_system(spaces, materials, stokes_vertices=vertices)
            stepper.rebuild(system)
        if out_dir is not None and config.output.vtk_every and (n + 1) % config.output.vtk_every == 0:
            snapshot(state)
        if progress is not None:
            progress(n + 1, state)
    if out_dir is not None:
        if not config.output.vtk_every or config.n_steps % config.output.vtk_every:
            snapshot(state)
        if config.output.timeseries:
            path = os.path.join(out_dir, f"{config.name}_timeseries.csv")
            rows = [[i, times[i], energy[i], resid[i - 1] if i else 0.0] for i in range(len(times))]
            write_csv((["step", "t", "energy", "interface_residual"], rows), path)
            files.append(path)
    return ScenarioResult(config, mesh, state, times, energy, resid, files, het, first)


# -- built-in configurations -----------------------------------------------------------
FRACTURE_BOX = ((0.0, 0.0), (3.048, 6.096))
FRACTURE_CHANNEL = ((0.0, 2.9), (1.524, 3.2))


def fracture_config(nx: int = 16, ny: int = 32, max_steps: int | None = 20, spe10: Mapping[str, Any] | None = None) -> dict:
    """Injection into a fracture embedded in a heterogeneous reservoir slab (meters, seconds, kPa)."""
    return {
        "name": "fracture",
        "mesh": {"type": "channel", "domain_box": FRACTURE_BOX, "channel_box": FRACTURE_CHANNEL, "nx": nx, "ny": ny},
        "materials": {
            "mu_f": 1.0e-6, "rho_f": 1000.0, "rho_p": 1016.0, "alpha_bjs": 1.0, "theta": 0.0, "nu": 0.2,
            "storage": 6.89e-2,
            "spe10": dict(spe10) if spe10 is not None else {"synthetic": True, "seed": 0, "layer": 80, "target_box": FRACTURE_BOX},
        },
        "T": 36000.0,
        "tau": 30.0,
        "max_steps": max_steps,
        "viscosity_scaled_permeability": True,
        "essential": [
            {"field": "u_f", "markers": ["INLET"], "value": [10.0, 0.0]},
            {"field": "u_r", "markers": ["WALL_BOTTOM", "WALL_TOP"], "value": 0.0, "components": [1]},
            {"field": "y_s", "markers": ["WALL_BOTTOM", "WALL_TOP"], "value": 0.0, "components": [1]},
            {"field": "u_r", "markers": ["WALL_RIGHT"], "value": 0.0, "components": [0]},
            {"field": "y_s", "markers": ["WALL_RIGHT"], "value": 0.0, "components": [0]},
        ],
        "natural": [],
    }


def channel_config(nx: int = 10, ny: int = 10, mesh_motion: bool = True) -> dict:
    """Pressure-driven flow through a channel into a deformable porous plug."""
    return {
        "name": "channel",
        "mesh": {"type": "two_block", "stokes_box": ((-1.0, 0.0), (1.0, 2.0)), "porous_box": ((-1.0, -2.0), (1.0, 0.0)),
                 "nx": nx, "ny": ny, "side_markers": {"stokes_top": "INLET", "porous_bottom": "OUTLET"}},
        "materials": {
            "mu_f": 0.8, "rho_f": 1.0, "rho_p": 1.07, "phi": 0.3, "kappa": 0.005, "lambda_p": 10.0, "mu_p": 5.0,
            "alpha_bjs": 0.1, "theta": 0.0, "storage": 0.02,
        },
        "T": 2.0,
        "tau": 0.1,
        "mesh_motion": mesh_motion,
        "essential": [
            {"field": "u_f", "markers": ["WALL_LEFT", "WALL_RIGHT"], "value": 0.0},
            {"field": "u_r", "markers": ["WALL_LEFT", "WALL_RIGHT"], "value": 0.0, "components": [0]},
            {"field": "y_s", "markers": ["WALL_LEFT", "WALL_RIGHT"], "value": 0.0, "components": [0]},
        ],
        "natural": [
            {"field": "u_f", "markers": ["INLET"], "pressure": "2 * sin(pi * t)**2"},
        ],
    }


BUILTIN = {"fracture": fracture_config, "channel": channel_config}
