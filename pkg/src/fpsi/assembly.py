"""Finite element forms and the coupled block system.

Unknown ordering is ``(u_f, u_r, y_s, u_s, p_S, p_P, lam)``. Rows are test
functions, columns trial functions. The semi-discrete system reads
``E dX/dt + H X = L``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ArgumentError, BCConflict, NumericError
from .fespace import BCSet, FunctionSpace, _call, build_space, edge_shape_values, shape_grads, shape_values
from .mesh import Mesh2D, Region
from .quadrature import edge_rule, triangle_rule

VOLUME_ORDER = 6
CONSTANT_ORDER = 4
EDGE_ORDER = 5

UNKNOWNS = ("u_f", "u_r", "y_s", "u_s", "p_S", "p_P", "lam")


# -- coefficients -------------------------------------------------------------
class Coefficient:
    """Scalar field evaluated at quadrature points of cells or along edges."""

    constant = False

    def at(self, mesh: Mesh2D, cells: np.ndarray, bary: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def on_edges(self, mesh: Mesh2D, pairs: np.ndarray, s: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad(self, mesh: Mesh2D, cells: np.ndarray, vertices: np.ndarray | None = None) -> np.ndarray:
        raise ArgumentError(f"{type(self).__name__} has no gradient")


@dataclass(frozen=True)
class Const(Coefficient):
    value: float
    constant = True

    def at(self, mesh, cells, bary):
        return np.full((len(cells), len(bary)), float(self.value))

    def on_edges(self, mesh, pairs, s):
        return np.full((len(pairs), len(s)), float(self.value))

    def grad(self, mesh, cells, vertices=None):
        return np.zeros((len(cells), 2))


@dataclass(frozen=True, eq=False)
class Nodal(Coefficient):
    """Continuous P1 field given by its values at mesh vertices."""

    values: np.ndarray

    def at(self, mesh, cells, bary):
        return np.asarray(self.values)[mesh.triangles[cells]] @ np.asarray(bary).T

    def on_edges(self, mesh, pairs, s):
        v = np.asarray(self.values)
        return np.outer(v[pairs[:, 0]], 1 - s) + np.outer(v[pairs[:, 1]], s)

    def grad(self, mesh, cells, vertices=None):
        _, _, _, inv = cell_geometry(mesh, cells, vertices)
        vals = np.asarray(self.values)[mesh.triangles[cells]]          # (nc, 3)
        ref = vals @ np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])  # (nc, 2)
        return np.einsum("cj,cjk->ck", ref, inv)


class Combined(Coefficient):
    """Pointwise function of other coefficients, e.g. ``(1 - phi)**2 / K``."""

    def __init__(self, fn: Callable[..., np.ndarray], *parts: Coefficient):
        self.fn = fn
        self.parts = parts
        self.constant = all(p.constant for p in parts)

    def at(self, mesh, cells, bary):
        return np.asarray(self.fn(*(p.at(mesh, cells, bary) for p in self.parts)), dtype=float)

    def on_edges(self, mesh, pairs, s):
        return np.asarray(self.fn(*(p.on_edges(mesh, pairs, s) for p in self.parts)), dtype=float)


def as_coefficient(value, mesh: Mesh2D | None = None) -> Coefficient:
    if isinstance(value, Coefficient):
        return value
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return Const(float(arr))
    if mesh is not None and arr.shape != (mesh.n_vertices,):
        raise ArgumentError(f"nodal field must have {mesh.n_vertices} values, got shape {arr.shape}")
    return Nodal(arr)


# -- geometry and scatter -------------------------------------------------------
def cell_geometry(mesh: Mesh2D, cells: np.ndarray, vertices: np.ndarray | None = None):
    """Return (p0, J, det J, J^{-1}) for the affine maps of ``cells``."""
    v = mesh.vertices if vertices is None else vertices
    tri = mesh.triangles[cells]
    p0 = v[tri[:, 0]]
    J = np.stack([v[tri[:, 1]] - p0, v[tri[:, 2]] - p0], axis=2)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    inv = np.empty_like(J)
    inv[:, 0, 0] = J[:, 1, 1]
    inv[:, 0, 1] = -J[:, 0, 1]
    inv[:, 1, 0] = -J[:, 1, 0]
    inv[:, 1, 1] = J[:, 0, 0]
    inv /= det[:, None, None]
    return p0, J, det, inv


@dataclass
class _Volume:
    """Quadrature data shared by the volume kernels on one set of cells."""

    cells: np.ndarray
    bary: np.ndarray      # (nq, 3)
    wdet: np.ndarray      # (nc, nq) weights times |det J|
    points: np.ndarray    # (nc, nq, 2)
    inv: np.ndarray       # (nc, 2, 2)


def _volume(V: FunctionSpace, order: int, vertices: np.ndarray | None = None) -> _Volume:
    rule = triangle_rule(order)
    p0, J, det, inv = cell_geometry(V.mesh, V.cells, vertices)
    points = p0[:, None, :] + np.einsum("cij,qj->cqi", J, rule.xy)
    wdet = np.abs(det)[:, None] * rule.weights[None, :]
    return _Volume(V.cells, rule.points, wdet, points, inv)


def _phys_grads(V: FunctionSpace, vol: _Volume) -> np.ndarray:
    ref = shape_grads(V.family, vol.bary)                     # (nq, nloc, 2)
    return np.einsum("qij,cjk->cqik", ref, vol.inv)           # (nc, nq, nloc, 2)


def _scatter(local: np.ndarray, rdofs: np.ndarray, cdofs: np.ndarray, shape) -> sp.csr_matrix:
    nc, ni, nj = local.shape
    rows = np.broadcast_to(rdofs[:, :, None], (nc, ni, nj)).ravel()
    cols = np.broadcast_to(cdofs[:, None, :], (nc, ni, nj)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=shape).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def _scatter_vec(local: np.ndarray, dofs: np.ndarray, n: int) -> np.ndarray:
    return np.bincount(dofs.ravel(), weights=local.ravel(), minlength=n)


def _check_pair(V_a: FunctionSpace, V_b: FunctionSpace) -> None:
    if V_a.mesh is not V_b.mesh:
        raise ArgumentError("spaces are built on different meshes")
    if V_a.subdomain != V_b.subdomain or V_a.is_interface:
        raise ArgumentError("volume forms need two spaces on the same subdomain")


def _order(*coefs: Coefficient) -> int:
    return CONSTANT_ORDER if all(c.constant for c in coefs) else VOLUME_ORDER


def _block_diag_local(local: np.ndarray, comps: int) -> np.ndarray:
    if comps == 1:
        return local
    nc, ni, nj = local.shape
    out = np.zeros((nc, comps * ni, comps * nj))
    for c in range(comps):
        out[:, c * ni:(c + 1) * ni, c * nj:(c + 1) * nj] = local
    return out


# -- volume forms ---------------------------------------------------------------
def assemble_weighted_mass(V_a: FunctionSpace, V_b: FunctionSpace, xi=1.0, vertices=None) -> sp.csr_matrix:
    """Matrix of (xi u, v) with rows from ``V_a`` and columns from ``V_b``."""
    _check_pair(V_a, V_b)
    if V_a.components != V_b.components:
        raise ArgumentError("mass form needs matching component counts")
    xi = as_coefficient(xi, V_a.mesh)
    vol = _volume(V_a, _order(xi), vertices)
    w = vol.wdet * xi.at(V_a.mesh, vol.cells, vol.bary)
    pa, pb = shape_values(V_a.family, vol.bary), shape_values(V_b.family, vol.bary)
    local = np.einsum("cq,qi,qj->cij", w, pa, pb)
    local = _block_diag_local(local, V_a.components)
    return _scatter(local, V_a.dof_map, V_b.dof_map, (V_a.dimension, V_b.dimension))


assemble_mass = assemble_weighted_mass


def assemble_stiffness(V: FunctionSpace, coef=1.0, vertices=None) -> sp.csr_matrix:
    """Scalar Laplacian (coef grad u, grad v) on a scalar space."""
    if V.components != 1 or V.is_interface:
        raise ArgumentError("stiffness form needs a scalar volume space")
    coef = as_coefficient(coef, V.mesh)
    vol = _volume(V, _order(coef), vertices)
    G = _phys_grads(V, vol)
    w = vol.wdet * coef.at(V.mesh, vol.cells, vol.bary)
    local = np.einsum("cq,cqik,cqjk->cij", w, G, G)
    return _scatter(local, V.dof_map, V.dof_map, (V.dimension, V.dimension))


def _vector_pair(V_a, V_b):
    _check_pair(V_a, V_b)
    if V_a.components != 2 or V_b.components != 2:
        raise ArgumentError("form needs two vector spaces")


def assemble_strain(V_a: FunctionSpace, V_b: FunctionSpace, coef=1.0, vertices=None) -> sp.csr_matrix:
    """Matrix of (coef eps(u), eps(v))."""
    _vector_pair(V_a, V_b)
    coef = as_coefficient(coef, V_a.mesh)
    vol = _volume(V_a, _order(coef), vertices)
    Ga, Gb = _phys_grads(V_a, vol), _phys_grads(V_b, vol)
    w = vol.wdet * coef.at(V_a.mesh, vol.cells, vol.bary)
    nc, _, na, _ = Ga.shape
    nb = Gb.shape[2]
    lap = np.einsum("cq,cqik,cqjk->cij", w, Ga, Gb)
    local = np.empty((nc, 2 * na, 2 * nb))
    for a in range(2):
        for b in range(2):
            cross = np.einsum("cq,cqi,cqj->cij", w, Ga[..., b], Gb[..., a])
            local[:, a * na:(a + 1) * na, b * nb:(b + 1) * nb] = 0.5 * cross + (0.5 * lap if a == b else 0.0)
    return _scatter(local, V_a.dof_map, V_b.dof_map, (V_a.dimension, V_b.dimension))


def assemble_divdiv(V_a: FunctionSpace, V_b: FunctionSpace, coef=1.0, vertices=None) -> sp.csr_matrix:
    """Matrix of (coef div u, div v)."""
    _vector_pair(V_a, V_b)
    coef = as_coefficient(coef, V_a.mesh)
    vol = _volume(V_a, _order(coef), vertices)
    Ga, Gb = _phys_grads(V_a, vol), _phys_grads(V_b, vol)
    w = vol.wdet * coef.at(V_a.mesh, vol.cells, vol.bary)
    na, nb = Ga.shape[2], Gb.shape[2]
    local = np.empty((len(w), 2 * na, 2 * nb))
    for a in range(2):
        for b in range(2):
            local[:, a * na:(a + 1) * na, b * nb:(b + 1) * nb] = np.einsum("cq,cqi,cqj->cij", w, Ga[..., a], Gb[..., b])
    return _scatter(local, V_a.dof_map, V_b.dof_map, (V_a.dimension, V_b.dimension))


def assemble_stokes_viscous(V_f: FunctionSpace, mu_f, vertices=None) -> sp.csr_matrix:
    """(2 mu_f eps(u), eps(v)) on the Stokes velocity space."""
    mu = as_coefficient(mu_f, V_f.mesh)
    return assemble_strain(V_f, V_f, Combined(lambda m: 2.0 * m, mu), vertices)


def assemble_brinkman_viscous(V_a: FunctionSpace, V_b: FunctionSpace, mu_f, phi) -> sp.csr_matrix:
    """(2 mu_f phi eps(u), eps(v)) on porous vector spaces."""
    mesh = V_a.mesh
    coef = Combined(lambda m, p: 2.0 * m * p, as_coefficient(mu_f, mesh), as_coefficient(phi, mesh))
    return assemble_strain(V_a, V_b, coef)


def assemble_elasticity(V_s: FunctionSpace, mu_p, lambda_p) -> sp.csr_matrix:
    """(2 mu_p eps(y), eps(w)) + (lambda_p div y, div w)."""
    mesh = V_s.mesh
    mu = as_coefficient(mu_p, mesh)
    return assemble_strain(V_s, V_s, Combined(lambda m: 2.0 * m, mu)) + assemble_divdiv(V_s, V_s, lambda_p)


def assemble_divergence_coupling(V: FunctionSpace, Q: FunctionSpace, weight=1.0, vertices=None) -> sp.csr_matrix:
    """Matrix B with B[q_i, v_j] = -(div(weight v_j), q_i); rows from ``Q``."""
    _check_pair(V, Q)
    if V.components != 2 or Q.components != 1:
        raise ArgumentError("divergence coupling needs a vector space and a scalar space")
    wgt = as_coefficient(weight, V.mesh)
    vol = _volume(V, _order(wgt), vertices)
    G = _phys_grads(V, vol)                                    # (nc, nq, nv, 2)
    phi_v = shape_values(V.family, vol.bary)                   # (nq, nv)
    psi = shape_values(Q.family, vol.bary)                     # (nq, nq_loc)
    wq = wgt.at(V.mesh, vol.cells, vol.bary)                   # (nc, nq)
    dw = wgt.grad(V.mesh, vol.cells, vertices)                 # (nc, 2)
    blocks = []
    for b in range(2):
        integrand = wq[:, :, None] * G[..., b] + dw[:, None, None, b] * phi_v[None]
        blocks.append(-np.einsum("cq,qi,cqj->cij", vol.wdet, psi, integrand))
    local = np.concatenate(blocks, axis=2)
    return _scatter(local, Q.dof_map, V.dof_map, (Q.dimension, V.dimension))


def assemble_source(V: FunctionSpace, f, t: float = 0.0, coef=1.0, vertices=None) -> np.ndarray:
    """Vector of (coef f, v) for ``f(x, y, t)`` given per component."""
    if V.is_interface:
        raise ArgumentError("use the interface load routines for the multiplier space")
    coef = as_coefficient(coef, V.mesh)
    vol = _volume(V, VOLUME_ORDER, vertices)
    nc, nq = vol.wdet.shape
    pts = vol.points.reshape(-1, 2)
    vals = _call(f, pts[:, 0], pts[:, 1], t, V.components).reshape(V.components, nc, nq)
    if not np.all(np.isfinite(vals)):
        raise NumericError("source is not finite at a quadrature point")
    w = vol.wdet * coef.at(V.mesh, vol.cells, vol.bary)
    phi = shape_values(V.family, vol.bary)
    local = np.concatenate([np.einsum("cq,cq,qi->ci", w, vals[c], phi) for c in range(V.components)], axis=1)
    return _scatter_vec(local, V.dof_map, V.dimension)


# -- edge traces ----------------------------------------------------------------
def _trace(V: FunctionSpace, tri_ids: np.ndarray, pairs: np.ndarray, s: np.ndarray):
    """Scalar basis values of ``V`` along edges (a, b) at parameters ``s``; (ne, nq, nloc)."""
    pos = V.cell_position[tri_ids]
    if np.any(pos < 0):
        raise ArgumentError("edge is not adjacent to a cell of the space")
    tri = V.mesh.triangles[tri_ids]
    ia = np.argmax(tri == pairs[:, :1], axis=1)
    ib = np.argmax(tri == pairs[:, 1:2], axis=1)
    ne, nq = len(pairs), len(s)
    bary = np.zeros((ne, nq, 3))
    r = np.arange(ne)[:, None]
    q = np.arange(nq)[None, :]
    bary[r, q, ia[:, None]] = 1.0 - s[None, :]
    bary[r, q, ib[:, None]] = s[None, :]
    return shape_values(V.family, bary), V.dof_map[pos]


def _vector_trace(V: FunctionSpace, tri_ids, pairs, s, direction: np.ndarray | None):
    """Trace values of vector basis functions, dotted with ``direction`` (ne, 2) if given."""
    vals, dofs = _trace(V, tri_ids, pairs, s)
    if V.components == 1:
        return vals, dofs
    if direction is None:
        raise ArgumentError("vector traces need a direction")
    return np.concatenate([vals * direction[:, None, 0:1], vals * direction[:, None, 1:2]], axis=2), dofs


def _interface_side(V: FunctionSpace):
    iface = V.mesh.interface
    if V.subdomain == Region.STOKES:
        return iface.stokes_cell
    if V.subdomain == Region.POROUS:
        return iface.porous_cell
    raise ArgumentError("interface traces need a volume space")


def _edge_weights(lengths: np.ndarray, order: int = EDGE_ORDER):
    rule = edge_rule(order)
    return rule.points, lengths[:, None] * rule.weights[None, :]


def _edge_points(vertices: np.ndarray, pairs: np.ndarray, s: np.ndarray) -> np.ndarray:
    a, b = vertices[pairs[:, 0]], vertices[pairs[:, 1]]
    return a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]


def assemble_bjs(V_f: FunctionSpace, V_s: FunctionSpace, mu_f, alpha_bjs, kappa, interface=None):
    """Blocks (ff, fs, sf, ss) of the tangential slip form.

    With c = mu_f alpha / sqrt(kappa), each block is the Gram matrix
    <c (u . tau), (v . tau)> between the listed traces, so that
    ``[ff, -fs; -sf, ss]`` is the seminorm of ``u_f - w_s``.
    """
    if V_f.mesh is not V_s.mesh:
        raise ArgumentError("spaces are built on different meshes")
    mesh = V_f.mesh
    iface = mesh.interface if interface is None else interface
    s, w = _edge_weights(iface.lengths)
    kap = as_coefficient(kappa, mesh).on_edges(mesh, iface.edges, s)
    if not np.all(kap > 0):
        raise NumericError("permeability must be positive on the interface")
    mu = as_coefficient(mu_f, mesh).on_edges(mesh, iface.edges, s)
    al = as_coefficient(alpha_bjs, mesh).on_edges(mesh, iface.edges, s)
    c = w * mu * al / np.sqrt(kap)
    tf, df = _vector_trace(V_f, iface.stokes_cell, iface.edges, s, iface.tangent)
    ts, ds = _vector_trace(V_s, iface.porous_cell, iface.edges, s, iface.tangent)

    def gram(ta, da, Va, tb, db, Vb):
        local = np.einsum("eq,eqi,eqj->eij", c, ta, tb)
        return _scatter(local, da, db, (Va.dimension, Vb.dimension))

    ff = gram(tf, df, V_f, tf, df, V_f)
    fs = gram(tf, df, V_f, ts, ds, V_s)
    ss = gram(ts, ds, V_s, ts, ds, V_s)
    return ff, fs, fs.T.tocsr(), ss


def assemble_interface_coupling(V_f: FunctionSpace, V_r: FunctionSpace, V_s: FunctionSpace, Lam: FunctionSpace, interface=None):
    """Blocks B_f, B_p, B_s with entries <v . n, mu> (n_S for Stokes, n_P for porous)."""
    if Lam.subdomain != Region.INTERFACE:
        raise ArgumentError("the multiplier space must live on the interface")
    mesh = Lam.mesh
    iface = mesh.interface if interface is None else interface
    s, w = _edge_weights(iface.lengths)
    mu = edge_shape_values(Lam.family, s)                       # (nq, nl)
    ldofs = Lam.dof_map[np.arange(iface.n_edges)]
    out = []
    for V, cells, normal in (
        (V_f, iface.stokes_cell, iface.normal_s),
        (V_r, iface.porous_cell, iface.normal_p),
        (V_s, iface.porous_cell, iface.normal_p),
    ):
        tv, dv = _vector_trace(V, cells, iface.edges, s, normal)
        local = np.einsum("eq,qi,eqj->eij", w, mu, tv)
        out.append(_scatter(local, ldofs, dv, (Lam.dimension, V.dimension)))
    return tuple(out)


def interface_vector_load(V: FunctionSpace, g: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
    """Vector of <g, v> on the interface; ``g(points, n_P, tau)`` returns (ne, nq, 2) or (ne, nq)."""
    mesh = V.mesh
    iface = mesh.interface
    s, w = _edge_weights(iface.lengths)
    pts = _edge_points(mesh.vertices, iface.edges, s)
    n = np.broadcast_to(iface.normal_p[:, None, :], pts.shape)
    tau = np.broadcast_to(iface.tangent[:, None, :], pts.shape)
    vals = np.asarray(g(pts, n, tau), dtype=float)
    if V.is_interface:
        phi = edge_shape_values(V.family, s)
        local = np.einsum("eq,eq,qi->ei", w, vals, phi)
        return _scatter_vec(local, V.dof_map, V.dimension)
    cells = _interface_side(V)
    basis, dofs = _trace(V, cells, iface.edges, s)
    if V.components == 1:
        local = np.einsum("eq,eq,eqi->ei", w, vals, basis)
    else:
        local = np.concatenate([np.einsum("eq,eq,eqi->ei", w, vals[..., c], basis) for c in range(2)], axis=1)
    return _scatter_vec(local, dofs, V.dimension)


def assemble_boundary_load(V: FunctionSpace, markers: Iterable, traction=None, pressure=None, t: float = 0.0, vertices=None) -> np.ndarray:
    """Natural boundary load <g, v> on marked outer edges of the subdomain of ``V``.

    ``traction(x, y, t)`` gives the vector g directly; ``pressure(x, y, t)``
    gives g = -p n with n the outward normal.
    """
    mesh = V.mesh
    v = mesh.vertices if vertices is None else vertices
    markers = list(markers)
    from .fespace import boundary_nodes
    boundary_nodes(V, markers)  # validates the markers
    rows = mesh.marked_edges(markers)
    eids = mesh.boundary_edge_ids[rows]
    keep = V.edge_in_space[eids]
    rows, eids = rows[keep], eids[keep]
    out = np.zeros(V.dimension)
    if len(rows) == 0:
        return out
    pairs = mesh.boundary_edges[rows]
    adj = mesh.edge_triangles[eids]
    tri = np.where(V.cell_position[adj[:, 0]] >= 0, adj[:, 0], adj[:, 1])
    d = v[pairs[:, 1]] - v[pairs[:, 0]]
    lengths = np.linalg.norm(d, axis=1)
    n = np.stack([d[:, 1], -d[:, 0]], axis=1) / lengths[:, None]
    cen = v[mesh.triangles[tri]].mean(axis=1)
    n[np.einsum("ij,ij->i", cen - v[pairs[:, 0]], n) > 0] *= -1.0
    s, w = _edge_weights(lengths)
    pts = _edge_points(v, pairs, s)
    x, y = pts[..., 0].ravel(), pts[..., 1].ravel()
    ne, nq = w.shape
    g = np.zeros((ne, nq, V.components))
    if traction is not None:
        g += _call(traction, x, y, t, V.components).T.reshape(ne, nq, V.components)
    if pressure is not None:
        if V.components != 2:
            raise ArgumentError("pressure loads need a vector space")
        p = _call(pressure, x, y, t, 1).reshape(ne, nq)
        g -= p[..., None] * n[:, None, :]
    basis, dofs = _trace(V, tri, pairs, s)
    local = np.concatenate([np.einsum("eq,eq,eqi->ei", w, g[..., c], basis) for c in range(V.components)], axis=1)
    return _scatter_vec(local, dofs, V.dimension)


# -- materials ------------------------------------------------------------------
Field = float | np.ndarray


@dataclass(frozen=True, eq=False)
class MaterialFields:
    """Physical parameters; spatially varying entries are nodal arrays over all mesh vertices.

    Give either ``rho_p`` (mixture density) or ``rho_s`` (solid density);
    the other follows from rho_p = rho_s (1 - phi) + rho_f phi.
    """

    mu_f: Field
    mu_p: Field
    lambda_p: Field
    rho_f: Field
    phi: Field
    kappa: Field
    K_bulk: Field
    rho_p: Field | None = None
    rho_s: Field | None = None
    theta: float = 0.0
    alpha_bjs: Field = 1.0
    viscosity_scaled_permeability: bool = False

    def __post_init__(self):
        if (self.rho_p is None) == (self.rho_s is None):
            if self.rho_p is None:
                raise ArgumentError("one of rho_p or rho_s is required")
        phi = np.asarray(self.phi, dtype=float)
        rf = np.asarray(self.rho_f, dtype=float)
        if self.rho_p is None:
            object.__setattr__(self, "rho_p", _maybe_scalar(np.asarray(self.rho_s) * (1 - phi) + rf * phi))
        elif self.rho_s is None:
            object.__setattr__(self, "rho_s", _maybe_scalar((np.asarray(self.rho_p) - rf * phi) / (1 - phi)))

    def validate(self, mesh: Mesh2D | None = None) -> "MaterialFields":
        mask = None if mesh is None else mesh.region_vertex_mask(Region.POROUS)

        def vals(x):
            a = np.asarray(x, dtype=float)
            if a.ndim and mask is not None:
                if a.shape != (mesh.n_vertices,):
                    raise ArgumentError(f"nodal field needs {mesh.n_vertices} values, got {a.shape}")
                return a[mask]
            return a

        phi = vals(self.phi)
        if not (np.all(phi > 0) and np.all(phi < 1)):
            raise ArgumentError("porosity must lie strictly between 0 and 1")
        if not np.all(vals(self.kappa) > 0):
            raise ArgumentError("permeability must be positive")
        if not np.all(vals(self.K_bulk) > 0):
            raise ArgumentError("bulk modulus must be positive")
        if self.theta > 0:
            raise ArgumentError("theta must be nonpositive")
        if np.any(vals(self.alpha_bjs) < 0):
            raise ArgumentError("alpha_bjs must be nonnegative")
        for name in ("mu_f", "mu_p", "rho_f", "rho_s", "rho_p"):
            if not np.all(vals(getattr(self, name)) > 0):
                raise ArgumentError(f"{name} must be positive")
        if not np.all(vals(self.lambda_p) >= 0):
            raise ArgumentError("lambda_p must be nonnegative")
        mix = vals(self.rho_s) * (1 - phi) + vals(self.rho_f) * phi
        if not np.allclose(mix, vals(self.rho_p), rtol=1e-12, atol=0):
            raise ArgumentError("rho_p differs from rho_s (1 - phi) + rho_f phi")
        return self

    def coef(self, name: str, mesh: Mesh2D) -> Coefficient:
        c = lambda v: as_coefficient(v, mesh)  # noqa: E731
        phi = c(self.phi)
        if name == "rho_f_phi":
            return Combined(lambda r, p: r * p, c(self.rho_f), phi)
        if name == "rho_s_solid":
            return Combined(lambda rp, rf, p: rp - rf * p, c(self.rho_p), c(self.rho_f), phi)
        if name == "storage":
            return Combined(lambda p, k: (1 - p) ** 2 / k, phi, c(self.K_bulk))
        if name == "drag":
            if self.viscosity_scaled_permeability:
                return Combined(lambda m, p, k: m * p**2 / k, c(self.mu_f), phi, c(self.kappa))
            return Combined(lambda p, k: p**2 / k, phi, c(self.kappa))
        return c(getattr(self, name))


def _maybe_scalar(a: np.ndarray):
    return float(a) if np.ndim(a) == 0 else a


# -- coupled spaces and block system ----------------------------------------------
@dataclass(frozen=True, eq=False)
class CoupledSpaces:
    u_f: FunctionSpace
    u_r: FunctionSpace
    y_s: FunctionSpace
    u_s: FunctionSpace
    p_S: FunctionSpace
    p_P: FunctionSpace
    lam: FunctionSpace

    def __post_init__(self):
        if any(V.mesh is not self.u_f.mesh for V in self.spaces):
            raise ArgumentError("all spaces must be built on the same mesh")

    @property
    def mesh(self) -> Mesh2D:
        return self.u_f.mesh

    @property
    def spaces(self) -> tuple[FunctionSpace, ...]:
        return tuple(getattr(self, n) for n in UNKNOWNS)

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.array([V.dimension for V in self.spaces], dtype=np.int64)

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)])

    @property
    def dimension(self) -> int:
        return int(self.offsets[-1])

    def slice(self, name: str) -> slice:
        i = UNKNOWNS.index(name)
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))

    def split(self, X: np.ndarray) -> dict[str, np.ndarray]:
        return {n: X[self.slice(n)] for n in UNKNOWNS}

    def join(self, parts: Mapping[str, np.ndarray]) -> np.ndarray:
        X = np.zeros(self.dimension)
        for n, v in parts.items():
            X[self.slice(n)] = v
        return X


def build_coupled_spaces(mesh: Mesh2D) -> CoupledSpaces:
    """Taylor-Hood spaces per subdomain, P1 solid velocity and P1 multiplier."""
    return CoupledSpaces(
        u_f=build_space(mesh, Region.STOKES, "P2", 2),
        u_r=build_space(mesh, Region.POROUS, "P2", 2),
        y_s=build_space(mesh, Region.POROUS, "P2", 2),
        u_s=build_space(mesh, Region.POROUS, "P1", 2),
        p_S=build_space(mesh, Region.STOKES, "P1", 1),
        p_P=build_space(mesh, Region.POROUS, "P1", 1),
        lam=build_space(mesh, Region.INTERFACE, "P1", 1),
    )


class BlockMatrix:
    """7x7 grid of sparse blocks over the unknown ordering."""

    def __init__(self, sizes: Sequence[int]):
        self.sizes = np.asarray(sizes, dtype=np.int64)
        self.blocks: dict[tuple[int, int], sp.csr_matrix] = {}

    @staticmethod
    def _key(key) -> tuple[int, int]:
        i, j = key
        i = UNKNOWNS.index(i) if isinstance(i, str) else int(i)
        j = UNKNOWNS.index(j) if isinstance(j, str) else int(j)
        return i, j

    def __setitem__(self, key, mat):
        i, j = self._key(key)
        if mat.shape != (self.sizes[i], self.sizes[j]):
            raise ArgumentError(f"block {UNKNOWNS[i]},{UNKNOWNS[j]} has shape {mat.shape}")
        self.blocks[(i, j)] = sp.csr_matrix(mat)

    def __getitem__(self, key) -> sp.csr_matrix:
        i, j = self._key(key)
        return self.blocks.get((i, j), sp.csr_matrix((self.sizes[i], self.sizes[j])))

    def pattern(self) -> np.ndarray:
        """Boolean 7x7 map of stored blocks with at least one nonzero."""
        out = np.zeros((len(self.sizes),) * 2, dtype=bool)
        for (i, j), m in self.blocks.items():
            out[i, j] = m.count_nonzero() > 0
        return out

    def tocsr(self) -> sp.csr_matrix:
        n = len(self.sizes)
        grid = [[self.blocks.get((i, j)) for j in range(n)] for i in range(n)]
        for i in range(n):
            if grid[i][i] is None:
                grid[i][i] = sp.csr_matrix((self.sizes[i], self.sizes[i]))
        return sp.bmat(grid, format="csr")


@dataclass(eq=False)
class CoupledSystem:
    spaces: CoupledSpaces
    materials: MaterialFields
    E: BlockMatrix
    H: BlockMatrix
    parts: dict = field(default_factory=dict, repr=False)

    @cached_property
    def E_csr(self) -> sp.csr_matrix:
        return self.E.tocsr()

    @cached_property
    def H_csr(self) -> sp.csr_matrix:
        return self.H.tocsr()

    def matrix(self, tau: float) -> sp.csr_matrix:
        """Backward Euler operator E / tau + H."""
        return (self.E_csr / tau + self.H_csr).tocsr()


def assemble_system(spaces: CoupledSpaces, materials: MaterialFields, stokes_vertices: np.ndarray | None = None) -> CoupledSystem:
    """Place every form of the coupled problem into E and H.

    ``stokes_vertices`` optionally supplies moved coordinates used for the
    Stokes volume forms only; porous and interface forms stay on the
    reference mesh.
    """
    S = spaces
    if not isinstance(S, CoupledSpaces):
        raise ArgumentError("expected CoupledSpaces")
    mesh = S.mesh
    m = materials
    m.validate(mesh)
    mu_f = m.coef("mu_f", mesh)
    phi = m.coef("phi", mesh)
    theta = m.coef("theta", mesh)
    rho_fphi = m.coef("rho_f_phi", mesh)
    rho_p = m.coef("rho_p", mesh)

    A_fS = assemble_stokes_viscous(S.u_f, mu_f, vertices=stokes_vertices)
    ff, fs, sf, ss = assemble_bjs(S.u_f, S.y_s, mu_f, m.alpha_bjs, m.kappa)
    A_fP = assemble_brinkman_viscous(S.u_r, S.y_s, mu_f, phi)   # u_r and y_s share the layout
    M_theta = assemble_weighted_mass(S.u_r, S.y_s, theta)
    M_drag = assemble_weighted_mass(S.u_r, S.u_r, m.coef("drag", mesh))
    M_rfphi_rr = assemble_weighted_mass(S.u_r, S.u_r, rho_fphi)
    M_rfphi_rs = assemble_weighted_mass(S.u_r, S.u_s, rho_fphi)
    M_rp_ys = assemble_weighted_mass(S.y_s, S.u_s, rho_p)
    M_rp_sy = assemble_weighted_mass(S.u_s, S.y_s, rho_p)
    M_rp_ss = assemble_weighted_mass(S.u_s, S.u_s, rho_p)
    A_s = assemble_elasticity(S.y_s, m.coef("mu_p", mesh), m.coef("lambda_p", mesh))
    B_S = assemble_divergence_coupling(S.u_f, S.p_S, 1.0, vertices=stokes_vertices)
    B_fP = assemble_divergence_coupling(S.u_r, S.p_P, phi)
    B_sP = assemble_divergence_coupling(S.y_s, S.p_P, 1.0)
    M_store = assemble_weighted_mass(S.p_P, S.p_P, m.coef("storage", mesh))
    B_fG, B_pG, B_sG = assemble_interface_coupling(S.u_f, S.u_r, S.y_s, S.lam)

    E = BlockMatrix(S.sizes)
    E["u_f", "y_s"] = -fs
    E["u_r", "u_r"] = M_rfphi_rr
    E["u_r", "y_s"] = A_fP - M_theta
    E["u_r", "u_s"] = M_rfphi_rs
    E["y_s", "u_r"] = M_rfphi_rr
    E["y_s", "y_s"] = ss + A_fP - M_theta
    E["y_s", "u_s"] = M_rp_ys
    E["u_s", "y_s"] = -M_rp_sy
    E["p_P", "y_s"] = -B_sP
    E["p_P", "p_P"] = M_store
    E["lam", "y_s"] = -B_sG

    H = BlockMatrix(S.sizes)
    H["u_f", "u_f"] = A_fS + ff
    H["u_f", "p_S"] = B_S.T
    H["u_f", "lam"] = B_fG.T
    H["u_r", "u_r"] = A_fP - M_theta + M_drag
    H["u_r", "p_P"] = B_fP.T
    H["u_r", "lam"] = B_pG.T
    H["y_s", "u_f"] = -sf
    H["y_s", "u_r"] = A_fP - M_theta
    H["y_s", "y_s"] = A_s
    H["y_s", "p_P"] = B_sP.T
    H["y_s", "lam"] = B_sG.T
    H["u_s", "u_s"] = M_rp_ss
    H["p_S", "u_f"] = -B_S
    H["p_P", "u_r"] = -B_fP
    H["lam", "u_f"] = -B_fG
    H["lam", "u_r"] = -B_pG

    parts = {
        "B_S": B_S, "B_fP": B_fP, "B_sP": B_sP, "B_fG": B_fG, "B_pG": B_pG, "B_sG": B_sG,
        "M_store": M_store, "A_s": A_s, "A_fP": A_fP, "bjs": (ff, fs, sf, ss),
    }
    return CoupledSystem(S, m, E, H, parts)


# -- loads ------------------------------------------------------------------------
@dataclass(frozen=True)
class Sources:
    """Volume data as functions of (x, y, t).

    ``f_P`` is the porous body force per unit mass (weighted by rho_f phi on
    the relative-velocity row and rho_p on the solid row). ``f_r``/``f_s`` are
    raw per-volume loads on those rows. ``g_mass`` replaces theta / rho_f on
    the pore-pressure row when given.
    """

    f_S: object = None
    f_P: object = None
    f_r: object = None
    f_s: object = None
    r_S: object = None
    g_mass: object = None


@dataclass(frozen=True)
class BoundaryLoad:
    """Natural boundary data on marked edges for the momentum row of ``field``."""

    field: str
    markers: tuple
    traction: object = None
    pressure: object = None


def assemble_load(
    spaces: CoupledSpaces,
    materials: MaterialFields,
    sources: Sources | None,
    t: float,
    corrections: Callable | None = None,
    boundary_loads: Sequence[BoundaryLoad] = (),
    stokes_vertices: np.ndarray | None = None,
) -> np.ndarray:
    """Right-hand side L(t).

    ``corrections(points, n_P, tau, t)`` returns a dict with scalar ``m1``,
    ``m2``, ``m4``, ``m5`` arrays (ne, nq) and vector ``m3`` (ne, nq, 2).
    """
    S = spaces
    mesh = S.mesh
    src = sources or Sources()
    L = np.zeros(S.dimension)

    def add(name, vec):
        L[S.slice(name)] += vec

    if src.f_S is not None:
        add("u_f", assemble_source(S.u_f, src.f_S, t, vertices=stokes_vertices))
    if src.f_P is not None:
        add("u_r", assemble_source(S.u_r, src.f_P, t, materials.coef("rho_f_phi", mesh)))
        add("y_s", assemble_source(S.y_s, src.f_P, t, materials.coef("rho_p", mesh)))
    if src.f_r is not None:
        add("u_r", assemble_source(S.u_r, src.f_r, t))
    if src.f_s is not None:
        add("y_s", assemble_source(S.y_s, src.f_s, t))
    if src.r_S is not None:
        add("p_S", assemble_source(S.p_S, src.r_S, t, vertices=stokes_vertices))
    if src.g_mass is not None:
        add("p_P", assemble_source(S.p_P, src.g_mass, t))
    elif materials.theta != 0.0:
        rf = materials.coef("rho_f", mesh)
        add("p_P", assemble_source(S.p_P, materials.theta, t, Combined(lambda r: 1.0 / r, rf)))

    if corrections is not None:
        cache: dict = {}

        def m(points, n, tau):
            key = "v"
            if key not in cache:
                cache[key] = corrections(points, n, tau, t)
            return cache[key]

        add("u_f", interface_vector_load(S.u_f, lambda p, n, tau: -m(p, n, tau)["m4"][..., None] * tau))
        add("u_r", interface_vector_load(
            S.u_r, lambda p, n, tau: m(p, n, tau)["m2"][..., None] * n + m(p, n, tau)["m5"][..., None] * tau))
        add("y_s", interface_vector_load(
            S.y_s, lambda p, n, tau: m(p, n, tau)["m3"] + m(p, n, tau)["m4"][..., None] * tau))
        add("lam", interface_vector_load(S.lam, lambda p, n, tau: -m(p, n, tau)["m1"]))

    for bl in boundary_loads:
        V = getattr(S, bl.field)
        verts = stokes_vertices if bl.field == "u_f" else None
        add(bl.field, assemble_boundary_load(V, bl.markers, bl.traction, bl.pressure, t, vertices=verts))
    return L


# -- Dirichlet elimination ----------------------------------------------------------
def collect_bcs(spaces: CoupledSpaces, bcs: Iterable[tuple[str, BCSet]], t: float, tol: float = 1e-12):
    """Merge per-space BCSets into global (dofs, values); conflicting values raise BCConflict."""
    dofs, vals = [], []
    for name, bc in bcs:
        if bc.space is not getattr(spaces, name):
            raise ArgumentError(f"boundary set is not defined on the space of {name}")
        dofs.append(bc.dofs + spaces.offsets[UNKNOWNS.index(name)])
        vals.append(bc.values(t))
    if not dofs:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    d = np.concatenate(dofs)
    v = np.concatenate(vals)
    order = np.argsort(d, kind="stable")
    d, v = d[order], v[order]
    same = d[1:] == d[:-1]
    if np.any(same):
        diff = np.abs(v[1:] - v[:-1])[same]
        scale = np.maximum(1.0, np.abs(v[1:][same]))
        if np.any(diff > tol * scale):
            k = np.flatnonzero(same)[np.argmax(diff / scale)]
            raise BCConflict(f"dof {d[k]} is prescribed both {v[k]!r} and {v[k + 1]!r}")
        keep = np.concatenate([[True], ~same])
        d, v = d[keep], v[keep]
    return d, v


@dataclass(eq=False)
class ConstrainedOperator:
    """Matrix with Dirichlet rows and columns eliminated symmetrically.

    ``lift(rhs, values)`` moves the known columns to the right-hand side.
    """

    matrix: sp.csr_matrix
    dofs: np.ndarray
    columns: sp.csr_matrix   # original A[:, dofs]

    def lift(self, rhs: np.ndarray, values: np.ndarray) -> np.ndarray:
        b = np.array(rhs, dtype=float)
        if len(self.dofs):
            b -= self.columns @ values
            b[self.dofs] = values
        return b


def constrain(matrix: sp.spmatrix, dofs: np.ndarray) -> ConstrainedOperator:
    A = sp.csr_matrix(matrix, copy=True)
    n = A.shape[0]
    dofs = np.asarray(dofs, dtype=np.int64)
    mask = np.zeros(n, dtype=bool)
    mask[dofs] = True
    columns = A[:, dofs].tocsr()
    keep = sp.diags((~mask).astype(float))
    A = (keep @ A @ keep + sp.diags(mask.astype(float))).tocsr()
    A.eliminate_zeros()
    return ConstrainedOperator(A, dofs, columns)


def apply_dirichlet(matrix: sp.spmatrix, rhs: np.ndarray, dofs: np.ndarray, values: np.ndarray):
    """One-shot symmetric elimination; returns (constrained matrix, lifted rhs)."""
    op = constrain(matrix, dofs)
    return op.matrix, op.lift(rhs, np.asarray(values, dtype=float))
