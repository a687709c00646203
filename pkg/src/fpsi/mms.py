"""Manufactured solutions: exact fields, sources, interface residuals, error norms and studies.

Exact fields are sums of separable terms ``c * T(t) X(x) Y(y)`` whose 1D
factors have closed-form derivatives of any order.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .assembly import (
    CoupledSpaces,
    CoupledSystem,
    MaterialFields,
    Sources,
    assemble_load,
    assemble_stiffness,
    build_coupled_spaces,
    assemble_system,
    constrain,
)
from .errors import ArgumentError
from .fespace import FunctionSpace, build_space, dirichlet_bcs, edge_shape_values, interpolate, shape_grads, shape_values
from .mesh import Marker, Mesh2D, Region, build_two_block_mesh
from .quadrature import edge_rule, triangle_rule
from .system import BackwardEuler, Factorization, TransientState, interface_residual

log = logging.getLogger(__name__)


# -- 1D factors -----------------------------------------------------------------
class Factor:
    def __call__(self, s, d: int = 0):
        raise NotImplementedError


@dataclass(frozen=True)
class Sin(Factor):
    k: float

    def __call__(self, s, d=0):
        return self.k**d * np.sin(self.k * np.asarray(s) + d * np.pi / 2)


@dataclass(frozen=True)
class Cos(Factor):
    k: float

    def __call__(self, s, d=0):
        return self.k**d * np.cos(self.k * np.asarray(s) + d * np.pi / 2)


@dataclass(frozen=True)
class SinSq(Factor):
    """sin(k s)^2 = (1 - cos(2 k s)) / 2."""

    k: float

    def __call__(self, s, d=0):
        s = np.asarray(s, dtype=float)
        if d == 0:
            return np.sin(self.k * s) ** 2
        return -0.5 * (2 * self.k) ** d * np.cos(2 * self.k * s + d * np.pi / 2)


@dataclass(frozen=True)
class Pow(Factor):
    n: int

    def __call__(self, s, d=0):
        s = np.asarray(s, dtype=float)
        if d > self.n:
            return np.zeros_like(s)
        return math.perm(self.n, d) * s ** (self.n - d)


ONE = Pow(0)


@dataclass(frozen=True)
class Term:
    coef: float
    T: Factor
    X: Factor
    Y: Factor

    def __call__(self, x, y, t, dt=0, dx=0, dy=0):
        return self.coef * self.T(t, dt) * self.X(x, dx) * self.Y(y, dy)


@dataclass(frozen=True)
class ScalarField:
    terms: tuple[Term, ...]

    def __call__(self, x, y, t, dt=0, dx=0, dy=0):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape)
        for term in self.terms:
            out = out + term(x, y, t, dt, dx, dy)
        return out

    def grad(self, x, y, t, dt=0):
        return np.stack([self(x, y, t, dt, 1, 0), self(x, y, t, dt, 0, 1)])

    def laplacian(self, x, y, t, dt=0):
        return self(x, y, t, dt, 2, 0) + self(x, y, t, dt, 0, 2)


@dataclass(frozen=True)
class VectorField:
    comps: tuple[ScalarField, ScalarField]

    def __call__(self, x, y, t, dt=0):
        return np.stack([c(x, y, t, dt) for c in self.comps])

    def jacobian(self, x, y, t, dt=0):
        """J[i, j] = d u_i / d x_j."""
        return np.stack([c.grad(x, y, t, dt) for c in self.comps])

    def div(self, x, y, t, dt=0):
        return self.comps[0](x, y, t, dt, 1, 0) + self.comps[1](x, y, t, dt, 0, 1)

    def grad_div(self, x, y, t, dt=0):
        u, v = self.comps
        return np.stack([u(x, y, t, dt, 2, 0) + v(x, y, t, dt, 1, 1), u(x, y, t, dt, 1, 1) + v(x, y, t, dt, 0, 2)])

    def laplacian(self, x, y, t, dt=0):
        return np.stack([c.laplacian(x, y, t, dt) for c in self.comps])

    def strain(self, x, y, t, dt=0):
        J = self.jacobian(x, y, t, dt)
        return 0.5 * (J + np.swapaxes(J, 0, 1))

    def div_strain(self, x, y, t, dt=0):
        """div(2 eps(u)) = lap u + grad div u."""
        return self.laplacian(x, y, t, dt) + self.grad_div(x, y, t, dt)

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(tuple(ScalarField(a.terms + b.terms) for a, b in zip(self.comps, other.comps)))


def _sf(*terms: Term) -> ScalarField:
    return ScalarField(tuple(terms))


PI = np.pi


# -- the manufactured case -----------------------------------------------------------
@dataclass(frozen=True)
class ManufacturedCase:
    """Exact fields on Stokes (0,1)^2 below porous (0,1)x(1,2), with unit parameters."""

    lambda_p: float = 10.0
    mu_p: float = 10.0
    mu_f: float = 10.0
    alpha_bjs: float = 1.0
    phi: float = 0.1
    kappa: float = 1.0
    rho_p: float = 1.0
    rho_f: float = 1.0
    K_bulk: float = 1.0
    theta: float = -0.01
    viscosity_scaled_permeability: bool = False
    steady: bool = False
    interface_y: float = 1.0

    @cached_property
    def fields(self) -> dict:
        if self.steady:
            return _steady_fields()
        s1, c1, t1, t2 = Sin(1.0), Cos(1.0), Pow(1), Pow(2)
        sp_, cp_ = Sin(PI), Cos(PI)
        s4, c4, sq4, x3 = Sin(4 * PI), Cos(4 * PI), SinSq(4 * PI), Pow(3)
        return {
            "u_f": VectorField((_sf(Term(-1.0, s1, cp_, sp_)), _sf(Term(1.0, s1, sp_, cp_)))),
            "p_S": _sf(Term(1.0, s1, cp_, cp_)),
            "u_r": VectorField((
                _sf(Term(1.0, t2, ONE, sq4), Term(-1.0, t1, x3, c4)),
                _sf(Term(1.0, t2, ONE, sq4), Term(2.0, t1, x3, s4)),
            )),
            "u_s": VectorField((_sf(Term(1.0, t1, x3, c4)), _sf(Term(-2.0, t1, x3, s4)))),
            "y_s": VectorField((_sf(Term(0.5, t2, x3, c4)), _sf(Term(-1.0, t2, x3, s4)))),
            "p_P": _sf(Term(1.0, c1, sp_, sp_)),
        }

    def __getitem__(self, name: str):
        return self.fields[name]

    def materials(self) -> MaterialFields:
        return MaterialFields(
            mu_f=self.mu_f, mu_p=self.mu_p, lambda_p=self.lambda_p, rho_f=self.rho_f, rho_p=self.rho_p,
            phi=self.phi, kappa=self.kappa, K_bulk=self.K_bulk, theta=self.theta, alpha_bjs=self.alpha_bjs,
            viscosity_scaled_permeability=self.viscosity_scaled_permeability,
        )

    def exact(self, name: str) -> Callable:
        """Exact field as a function of (x, y, t) usable for interpolation."""
        f = self.fields[name]
        return lambda x, y, t: f(x, y, t)

    # stresses -------------------------------------------------------------------
    def stress_stokes(self, x, y, t):
        u, p = self["u_f"], self["p_S"]
        return 2 * self.mu_f * u.strain(x, y, t) - p(x, y, t) * _eye(x)

    def stress_fluid_porous(self, x, y, t):
        w = self["u_r"] + self["u_s"]
        return 2 * self.mu_f * self.phi * w.strain(x, y, t) - self.phi * self["p_P"](x, y, t) * _eye(x)

    def stress_solid(self, x, y, t):
        ys = self["y_s"]
        return (
            2 * self.mu_p * ys.strain(x, y, t)
            + (self.lambda_p * ys.div(x, y, t) - (1 - self.phi) * self["p_P"](x, y, t)) * _eye(x)
        )

    def time_basis(self) -> tuple[Callable[[float], float], ...]:
        """Functions of t spanning every time factor of the fields and their rates."""
        if self.steady:
            return (lambda t: 1.0,)
        return (lambda t: 1.0, lambda t: t, lambda t: t * t, math.sin, math.cos)

    def drag_coefficient(self) -> float:
        c = self.mu_f if self.viscosity_scaled_permeability else 1.0
        return c * self.phi**2 / self.kappa


def _eye(x):
    shape = np.shape(x)
    out = np.zeros((2, 2) + shape)
    out[0, 0] = 1.0
    out[1, 1] = 1.0
    return out


def _steady_fields() -> dict:
    """Time-independent variant with a static displacement and zero solid velocity."""
    one = ONE
    sp_, cp_ = Sin(PI), Cos(PI)
    zero = _sf(Term(0.0, one, one, one))
    return {
        "u_f": VectorField((_sf(Term(-1.0, one, cp_, sp_)), _sf(Term(1.0, one, sp_, cp_)))),
        "p_S": _sf(Term(1.0, one, cp_, cp_)),
        "u_r": VectorField((_sf(Term(1.0, one, Pow(2), Cos(2.0))), _sf(Term(0.5, one, Sin(1.0), Pow(1))))),
        "u_s": VectorField((zero, zero)),
        "y_s": VectorField((_sf(Term(0.3, one, Pow(2), Sin(1.0))), _sf(Term(-0.2, one, Cos(1.0), Pow(2))))),
        "p_P": _sf(Term(1.0, one, sp_, sp_)),
    }


def manufactured_sources(case: ManufacturedCase, x, y, t) -> dict[str, np.ndarray]:
    """Strong-form residuals of the exact fields.

    Returns f_S (Stokes momentum), f_r (relative-velocity momentum), f_s
    (total momentum), r_S (Stokes divergence), g_mass (pore mass balance) and
    g_kin (kinematic relation, identically zero).
    """
    c = case
    uf, pS, ur, us, ys, pP = (c[n] for n in ("u_f", "p_S", "u_r", "u_s", "y_s", "p_P"))
    w = ur + us
    phi = c.phi
    f_S = -c.mu_f * uf.div_strain(x, y, t) + pS.grad(x, y, t)
    common = -c.mu_f * phi * w.div_strain(x, y, t) - c.theta * w(x, y, t)
    f_r = (
        c.rho_f * phi * (ur(x, y, t, dt=1) + us(x, y, t, dt=1))
        + common
        + phi * pP.grad(x, y, t)
        + c.drag_coefficient() * ur(x, y, t)
    )
    f_s = (
        c.rho_f * phi * ur(x, y, t, dt=1)
        + c.rho_p * us(x, y, t, dt=1)
        + common
        - c.mu_p * ys.div_strain(x, y, t)
        - c.lambda_p * ys.grad_div(x, y, t)
        + pP.grad(x, y, t)
    )
    r_S = uf.div(x, y, t)
    g_mass = (1 - phi) ** 2 / c.K_bulk * pP(x, y, t, dt=1) + us.div(x, y, t) + phi * ur.div(x, y, t)
    g_kin = us(x, y, t) - ys(x, y, t, dt=1)
    return {"f_S": f_S, "f_r": f_r, "f_s": f_s, "r_S": r_S, "g_mass": g_mass, "g_kin": g_kin}


def interface_corrections(case: ManufacturedCase, x, y, t, normal_p=(0.0, -1.0), tangent=(1.0, 0.0)) -> dict[str, np.ndarray]:
    """Residuals of the interface conditions for the exact fields at points of the interface."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(np.abs(y - case.interface_y) > 1e-10):
        raise ArgumentError(f"points must lie on the interface y = {case.interface_y}")
    shape = np.broadcast(x, y).shape
    nP, tau = (_directions(v, shape) for v in (normal_p, tangent))
    nS = -nP
    sS = case.stress_stokes(x, y, t)
    sF = case.stress_fluid_porous(x, y, t)
    sP = case.stress_solid(x, y, t)
    matvec = lambda s, n: np.einsum("ij...,j...->i...", s, n)  # noqa: E731
    dot = lambda a, b: np.einsum("i...,i...->...", a, b)  # noqa: E731
    tS, tF, tP = matvec(sS, nS), matvec(sF, nP), matvec(sP, nP)
    uf, ur, us = (case[n](x, y, t) for n in ("u_f", "u_r", "u_s"))
    lam = -dot(tS, nS)
    return {
        "m1": dot(uf, nS) + dot(us + ur, nP),
        "m2": lam + dot(tF, nP),
        "m3": tS + tF + tP,
        "m4": -dot(tS, tau) - case.mu_f * case.alpha_bjs / np.sqrt(case.kappa) * dot(uf - us, tau),
        "m5": dot(tF, tau),
        "lambda": lam,
    }


def _directions(v, shape):
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        v = v.reshape((2,) + (1,) * len(shape))
    return np.broadcast_to(v, (2,) + shape)


def case_sources(case: ManufacturedCase) -> Sources:
    def pick(name):
        return lambda x, y, t: manufactured_sources(case, x, y, t)[name]

    return Sources(f_S=pick("f_S"), f_r=pick("f_r"), f_s=pick("f_s"), r_S=pick("r_S"), g_mass=pick("g_mass"))


def case_corrections(case: ManufacturedCase) -> Callable:
    """Adapter with the signature expected by :func:`assemble_load`."""

    def corr(points, n, tau, t):
        x, y = points[..., 0], points[..., 1]
        out = interface_corrections(case, x, y, t, np.moveaxis(n, -1, 0), np.moveaxis(tau, -1, 0))
        out["m3"] = np.moveaxis(out["m3"], 0, -1)
        return out

    return corr


# -- error norms ---------------------------------------------------------------------
def _quad(V: FunctionSpace, order: int = 6):
    rule = triangle_rule(order)
    mesh = V.mesh
    tri = mesh.triangles[V.cells]
    v = mesh.vertices
    p0 = v[tri[:, 0]]
    J = np.stack([v[tri[:, 1]] - p0, v[tri[:, 2]] - p0], axis=2)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    inv = np.linalg.inv(J)
    pts = p0[:, None, :] + np.einsum("cij,qj->cqi", J, rule.xy)
    w = np.abs(det)[:, None] * rule.weights[None, :]
    return rule, pts, w, inv


def l2_error(V: FunctionSpace, coeffs: np.ndarray, exact: Callable, t: float, order: int = 6) -> float:
    rule, pts, w, _ = _quad(V, order)
    phi = shape_values(V.family, rule.points)
    c = V.split(coeffs)
    ex = np.asarray(exact(pts[..., 0], pts[..., 1], t)).reshape(V.components, *w.shape)
    err = 0.0
    for k in range(V.components):
        uh = np.einsum("qi,ci->cq", phi, c[k][V.cell_nodes])
        err += np.sum(w * (uh - ex[k]) ** 2)
    return float(np.sqrt(err))


def h1_seminorm_error(V: FunctionSpace, coeffs: np.ndarray, exact_grad: Callable, t: float, order: int = 6) -> float:
    """``exact_grad(x, y, t)`` returns (components, 2, ...) gradients."""
    rule, pts, w, inv = _quad(V, order)
    G = np.einsum("qij,cjk->cqik", shape_grads(V.family, rule.points), inv)
    c = V.split(coeffs)
    ex = np.asarray(exact_grad(pts[..., 0], pts[..., 1], t)).reshape(V.components, 2, *w.shape)
    err = 0.0
    for k in range(V.components):
        gh = np.einsum("cqik,ci->kcq", G, c[k][V.cell_nodes])
        err += np.sum(w * ((gh - ex[k]) ** 2).sum(axis=0))
    return float(np.sqrt(err))


def h1_error(V, coeffs, exact, exact_grad, t) -> float:
    return float(np.hypot(l2_error(V, coeffs, exact, t), h1_seminorm_error(V, coeffs, exact_grad, t)))


class MultiplierNorm:
    """Discrete negative-order trace norm of an interface function.

    Solves a P1 Laplace problem on the porous subdomain with Neumann data e on
    the interface and zero Dirichlet data on the rest of its boundary, and
    returns the energy norm of the solution.
    """

    def __init__(self, mesh: Mesh2D):
        self.mesh = mesh
        self.V = build_space(mesh, Region.POROUS, "P1", 1)
        K = assemble_stiffness(self.V)
        outer = sorted(m for m in mesh.markers if m != Marker.INTERFACE)
        from .fespace import boundary_nodes
        nodes = boundary_nodes(self.V, outer)
        self.op = constrain(K, nodes)
        self.fact = Factorization(self.op.matrix)

    def __call__(self, lam_space: FunctionSpace, lam_coeffs: np.ndarray, exact: Callable, t: float) -> float:
        iface = self.mesh.interface
        rule = edge_rule(5)
        s = rule.points
        w = iface.lengths[:, None] * rule.weights[None, :]
        a, b = self.mesh.vertices[iface.edges[:, 0]], self.mesh.vertices[iface.edges[:, 1]]
        pts = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
        lam_h = np.einsum("qi,ei->eq", edge_shape_values(lam_space.family, s), lam_coeffs[lam_space.dof_map])
        e = np.asarray(exact(pts[..., 0], pts[..., 1], t)) - lam_h
        basis = edge_shape_values("P1", s)
        local = np.einsum("eq,eq,qi->ei", w, e, basis)
        dofs = self.V.vertex_node[iface.edges]
        rhs = np.bincount(dofs.ravel(), weights=local.ravel(), minlength=self.V.dimension)
        rhs = self.op.lift(rhs, np.zeros(len(self.op.dofs)))
        psi = self.fact.solve(rhs)
        return float(np.sqrt(max(psi @ (self.op.matrix @ psi), 0.0)))


VARIABLES = ("u_f", "p_S", "u_r", "p_P", "y_s", "u_s", "lam")
NORMS = {"u_f": "h1", "p_S": "l2", "u_r": "l2", "p_P": "l2", "y_s": "h1", "u_s": "l2", "lam": "hm12"}


class ErrorEvaluator:
    def __init__(self, case: ManufacturedCase, spaces: CoupledSpaces):
        self.case = case
        self.spaces = spaces
        self.lam_norm = MultiplierNorm(spaces.mesh)

    def __call__(self, X: np.ndarray, t: float) -> dict[str, float]:
        S, c = self.spaces, self.case
        p = S.split(X)
        out = {}
        for name in ("u_f", "y_s"):
            f = c[name]
            out[name] = h1_error(getattr(S, name), p[name], f, f.jacobian, t)
        for name in ("p_S", "u_r", "p_P", "u_s"):
            out[name] = l2_error(getattr(S, name), p[name], c[name], t)
        lam_exact = lambda x, y, tt: interface_corrections(c, x, y, tt)["lambda"]  # noqa: E731
        out["lam"] = self.lam_norm(S.lam, p["lam"], lam_exact, t)
        return out


def error_norms(state: TransientState, case: ManufacturedCase, spaces: CoupledSpaces) -> dict[str, float]:
    """Errors at ``state.t``: H1 for u_f and y_s, L2 for pressures and velocities, trace norm for lam."""
    return ErrorEvaluator(case, spaces)(state.X, state.t)


# -- reports -------------------------------------------------------------------------
@dataclass
class ErrorReport:
    """Errors per refinement level (or time step) with rates between consecutive rows."""

    kind: str                      # "space" or "time"
    rows: list[dict] = field(default_factory=list)

    @property
    def columns(self) -> list[str]:
        cols = ["level", "h", "tau", "dofs"]
        for v in VARIABLES:
            short = v.replace("_", "")
            norm = {"h1": "_h1", "l2": "_l2", "hm12": ""}[NORMS[v]]
            cols += [f"e_{short}{norm}", f"rate_{short}"]
        return cols

    def errors(self, var: str) -> np.ndarray:
        return np.array([r[f"e_{var}"] for r in self.rows])

    def rates(self, var: str) -> np.ndarray:
        key = "h" if self.kind == "space" else "tau"
        e = self.errors(var)
        x = np.array([r[key] for r in self.rows])
        return observed_rates(e, x)

    def final_rates(self) -> dict[str, float]:
        return {v: float(self.rates(v)[-1]) for v in VARIABLES}

    def table(self) -> list[list]:
        out = []
        for i, r in enumerate(self.rows):
            row = [r["level"], r["h"], r["tau"], r["dofs"]]
            for v in VARIABLES:
                rate = self.rates(v)[i - 1] if i > 0 else float("nan")
                row += [r[f"e_{v}"], rate]
            out.append(row)
        return out


def observed_rates(errors: Sequence[float], sizes: Sequence[float]) -> np.ndarray:
    """log(e_k / e_{k+1}) / log(s_k / s_{k+1}); equals log2 of the error ratio when sizes halve."""
    e = np.asarray(errors, dtype=float)
    s = np.asarray(sizes, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(s[:-1] / s[1:])


# -- drivers -------------------------------------------------------------------------
STOKES_BOX = ((0.0, 0.0), (1.0, 1.0))
POROUS_BOX = ((0.0, 1.0), (1.0, 2.0))
WALLS = (Marker.WALL_LEFT, Marker.WALL_RIGHT, Marker.WALL_TOP, Marker.WALL_BOTTOM)


def level_mesh(level: int) -> Mesh2D:
    """Level 1 is the 8x4-per-square mesh with h = sqrt(5)/8; each level halves h."""
    if level < 1:
        raise ArgumentError("levels start at 1")
    k = 2 ** (level - 1)
    return build_two_block_mesh(STOKES_BOX, POROUS_BOX, 8 * k, 4 * k)


class SeparableLoad:
    """Load vector L(t) = sum_k b_k(t) L_k recovered from samples of a linear-in-time assembler.

    The expansion is checked against a direct assembly at one extra time.
    """

    def __init__(self, assemble: Callable[[float], np.ndarray], basis: Sequence[Callable[[float], float]], tol: float = 1e-9):
        self.basis = tuple(basis)
        ts = np.linspace(0.15, 1.85, len(self.basis))
        A = np.array([[b(t) for b in self.basis] for t in ts])
        samples = np.array([assemble(t) for t in ts])
        self.coeffs = np.linalg.solve(A, samples)
        probe = 0.7371
        direct = assemble(probe)
        err = np.linalg.norm(self(probe) - direct)
        if err > tol * max(np.linalg.norm(direct), 1.0):
            raise ArgumentError(f"load is not spanned by the time basis (defect {err:.2e})")

    def __call__(self, t: float) -> np.ndarray:
        return np.array([b(t) for b in self.basis]) @ self.coeffs


@dataclass
class ManufacturedRun:
    """Assembled manufactured problem on one mesh with one time step."""

    case: ManufacturedCase
    mesh: Mesh2D
    tau: float

    def __post_init__(self):
        c = self.case
        self.spaces = build_coupled_spaces(self.mesh)
        self.materials = c.materials()
        self.system = assemble_system(self.spaces, self.materials)
        S = self.spaces
        self.bcs = [
            ("u_f", dirichlet_bcs(S.u_f, WALLS, c.exact("u_f"))),
            ("u_r", dirichlet_bcs(S.u_r, WALLS, c.exact("u_r"))),
            ("y_s", dirichlet_bcs(S.y_s, WALLS, c.exact("y_s"))),
        ]
        self.stepper = BackwardEuler(self.system, self.tau, self.bcs)
        self.sources = case_sources(c)
        self.corrections = case_corrections(c)
        self._load = SeparableLoad(self.assemble_load, c.time_basis())

    def initial_state(self, t0: float = 0.0) -> TransientState:
        S = self.spaces
        parts = {n: interpolate(getattr(S, n), self.case.exact(n), t0) for n in ("u_f", "u_r", "y_s", "u_s", "p_S", "p_P")}
        lam = lambda x, y, t: interface_corrections(self.case, x, np.full_like(x, self.case.interface_y), t)["lambda"]  # noqa: E731
        parts["lam"] = interpolate(S.lam, lam, t0)
        return TransientState(t0, S.join(parts), 0)

    def load(self, t: float) -> np.ndarray:
        return self._load(t)

    def assemble_load(self, t: float) -> np.ndarray:
        return assemble_load(self.spaces, self.materials, self.sources, t, self.corrections)

    def run(self, n_steps: int, on_step: Callable | None = None, t0: float = 0.0, check_interface: bool = True):
        state = self.initial_state(t0)
        self.max_interface_residual = 0.0
        for _ in range(n_steps):
            L = self.load(state.t + self.tau)
            new = self.stepper.step(state, L)
            if check_interface:
                r = interface_residual(self.system, new, state, self.tau, L[self.spaces.slice("lam")])
                self.max_interface_residual = max(self.max_interface_residual, r / max(np.linalg.norm(new.X), 1e-300))
            if on_step is not None:
                on_step(state, new)
            state = new
        return state


def spatial_convergence_study(levels: int = 4, case: ManufacturedCase | None = None, T: float = 1.0, first_level: int = 1, progress: Callable | None = None) -> ErrorReport:
    """Final-time errors on ``levels`` meshes with tau = T / ceil(T / h^2)."""
    if levels < 1 or levels > 5:
        raise ArgumentError("levels must be between 1 and 5")
    case = case or ManufacturedCase()
    report = ErrorReport("space")
    for level in range(first_level, first_level + levels):
        t0 = time.perf_counter()
        mesh = level_mesh(level)
        n_steps = int(math.ceil(T / mesh.h**2 - 1e-9))
        run = ManufacturedRun(case, mesh, T / n_steps)
        state = run.run(n_steps)
        errs = ErrorEvaluator(case, run.spaces)(state.X, state.t)
        row = {"level": level, "h": mesh.h, "tau": run.tau, "dofs": run.spaces.dimension,
               "steps": n_steps, "interface_residual": run.max_interface_residual,
               "seconds": time.perf_counter() - t0}
        row.update({f"e_{k}": v for k, v in errs.items()})
        report.rows.append(row)
        log.info("level %d: h=%.4f dofs=%d steps=%d (%.1fs)", level, mesh.h, row["dofs"], n_steps, row["seconds"])
        if progress is not None:
            progress(row)
    return report


def temporal_convergence_study(mesh_level: int = 3, tau0: float = 0.5, halvings: int = 5, case: ManufacturedCase | None = None, T: float = 1.0, progress: Callable | None = None) -> ErrorReport:
    """Cumulative errors (sum_n tau |e(t_n)|^2)^(1/2) on a fixed mesh for tau = tau0 2^-k."""
    case = case or ManufacturedCase()
    mesh = level_mesh(mesh_level)
    report = ErrorReport("time")
    spaces = None
    for k in range(halvings + 1):
        t0 = time.perf_counter()
        tau = tau0 / 2**k
        n_steps = int(round(T / tau))
        if abs(n_steps * tau - T) > 1e-9:
            raise ArgumentError(f"T = {T} is not a multiple of tau = {tau}")
        run = ManufacturedRun(case, mesh, tau)
        ev = ErrorEvaluator(case, run.spaces)
        acc = dict.fromkeys(VARIABLES, 0.0)

        def on_step(prev, new):
            for name, e in ev(new.X, new.t).items():
                acc[name] += tau * e**2

        run.run(n_steps, on_step)
        row = {"level": k, "h": mesh.h, "tau": tau, "dofs": run.spaces.dimension, "steps": n_steps,
               "interface_residual": run.max_interface_residual, "seconds": time.perf_counter() - t0}
        row.update({f"e_{v}": math.sqrt(a) for v, a in acc.items()})
        report.rows.append(row)
        log.info("tau=%.6f steps=%d (%.1fs)", tau, n_steps, row["seconds"])
        if progress is not None:
            progress(row)
    return report
