"""Sparse LU solves, backward Euler stepping and the discrete energy."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (
    UNKNOWNS,
    ConstrainedOperator,
    CoupledSpaces,
    CoupledSystem,
    MaterialFields,
    assemble_elasticity,
    assemble_weighted_mass,
    collect_bcs,
    constrain,
)
from .errors import ArgumentError, NumericError, SingularMatrix
from .fespace import BCSet

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TransientState:
    t: float
    X: np.ndarray
    step_index: int = 0

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if not np.all(np.isfinite(X)):
            raise NumericError(f"non-finite solution at step {self.step_index}")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)

    def split(self, spaces: CoupledSpaces) -> dict[str, np.ndarray]:
        if len(self.X) != spaces.dimension:
            raise ArgumentError("state size does not match the spaces")
        return spaces.split(self.X)


class Factorization:
    """Sparse LU factors with a singularity check on the pivots."""

    def __init__(self, matrix: sp.spmatrix, pivot_tol: float = 1e-14):
        A = sp.csc_matrix(matrix)
        if A.shape[0] != A.shape[1]:
            raise ArgumentError(f"matrix must be square, got {A.shape}")
        self.shape = A.shape
        self.matrix = A
        try:
            self._lu = spla.splu(A)
        except RuntimeError as exc:
            raise SingularMatrix(f"LU factorization failed: {exc}") from None
        d = np.abs(self._lu.U.diagonal())
        scale = max(float(abs(A).max()) if A.nnz else 0.0, 1.0e-300)
        small = np.flatnonzero(~(d > pivot_tol * scale))
        if len(small):
            pivot = int(self._lu.perm_c[small[0]])
            raise SingularMatrix("matrix is numerically singular", pivot=pivot)

    def solve(self, b: np.ndarray) -> np.ndarray:
        x = self._lu.solve(np.asarray(b, dtype=float))
        if not np.all(np.isfinite(x)):
            raise NumericError("linear solve produced non-finite values")
        return x

    def residual(self, x: np.ndarray, b: np.ndarray) -> float:
        nb = np.linalg.norm(b)
        return float(np.linalg.norm(self.matrix @ x - b) / (nb if nb > 0 else 1.0))


def factorize(matrix: sp.spmatrix) -> Factorization:
    return Factorization(matrix)


class BackwardEuler:
    """Fixed-step integrator for E dX/dt + H X = L with essential data.

    The constrained operator and its factorization are built once; call
    :meth:`rebuild` after the system changes (e.g. the mesh moved).
    """

    def __init__(self, system: CoupledSystem, tau: float, bcs: Sequence[tuple[str, BCSet]] = ()):
        if not tau > 0:
            raise ArgumentError(f"time step must be positive, got {tau}")
        self.tau = float(tau)
        self.bcs = list(bcs)
        self.last_residual = 0.0
        self.rebuild(system)

    def rebuild(self, system: CoupledSystem) -> None:
        self.system = system
        self.spaces = system.spaces
        self.E = system.E_csr
        dofs, _ = collect_bcs(self.spaces, self.bcs, 0.0)
        self.operator: ConstrainedOperator = constrain(system.matrix(self.tau), dofs)
        self.factorization = factorize(self.operator.matrix)

    def rhs(self, prev: TransientState, load: np.ndarray) -> np.ndarray:
        return load + (self.E @ prev.X) / self.tau

    def step(self, prev: TransientState, load: np.ndarray, check: bool = True) -> TransientState:
        t = prev.t + self.tau
        dofs, values = collect_bcs(self.spaces, self.bcs, t)
        if len(dofs) != len(self.operator.dofs) or np.any(dofs != self.operator.dofs):
            raise ArgumentError("constrained dofs changed; call rebuild()")
        b = self.operator.lift(self.rhs(prev, load), values)
        x = self.factorization.solve(b)
        if check:
            self.last_residual = self.factorization.residual(x, b)
            if self.last_residual > 1e-10:
                log.warning("step %d: relative residual %.2e", prev.step_index + 1, self.last_residual)
        return TransientState(t, x, prev.step_index + 1)


def backward_euler_step(
    system: CoupledSystem,
    state: TransientState,
    tau: float,
    load: np.ndarray,
    bcs: Sequence[tuple[str, BCSet]] = (),
    stepper: BackwardEuler | None = None,
) -> TransientState:
    """Advance one step; pass ``stepper`` to reuse its factorization."""
    if stepper is None:
        stepper = BackwardEuler(system, tau, bcs)
    elif stepper.system is not system or stepper.tau != tau:
        raise ArgumentError("stepper was built for a different system or time step")
    return stepper.step(state, load)


@dataclass
class TimeGrid:
    T: float
    tau: float

    @property
    def n_steps(self) -> int:
        n = int(round(self.T / self.tau))
        if n < 1 or abs(n * self.tau - self.T) > 1e-9 * max(1.0, self.T):
            raise ArgumentError(f"T = {self.T} is not an integer multiple of tau = {self.tau}")
        return n


def run_transient(
    stepper: BackwardEuler,
    state0: TransientState,
    n_steps: int,
    load: Callable[[float], np.ndarray],
    hooks: Iterable[Callable[[TransientState, TransientState], None]] = (),
    keep: bool = True,
) -> list[TransientState]:
    """Take ``n_steps`` steps; each hook is called as ``hook(prev, new)``."""
    if n_steps < 0:
        raise ArgumentError("number of steps must be nonnegative")
    hooks = list(hooks)
    states = [state0]
    cur = state0
    for _ in range(n_steps):
        new = stepper.step(cur, load(cur.t + stepper.tau))
        for h in hooks:
            h(cur, new)
        if keep:
            states.append(new)
        cur = new
    if not keep:
        states.append(cur)
    return states


# -- diagnostics ------------------------------------------------------------------
class EnergyFunctional:
    """Quadratic energy of the poroelastic unknowns (see :func:`discrete_energy`)."""

    def __init__(self, spaces: CoupledSpaces, materials: MaterialFields):
        mesh = spaces.mesh
        S = spaces
        rho_solid = materials.coef("rho_s_solid", mesh)
        rho_fphi = materials.coef("rho_f_phi", mesh)
        self.spaces = spaces
        self.M_us = assemble_weighted_mass(S.u_s, S.u_s, rho_solid)
        self.M_pp = assemble_weighted_mass(S.p_P, S.p_P, materials.coef("storage", mesh))
        self.A_s = assemble_elasticity(S.y_s, materials.coef("mu_p", mesh), materials.coef("lambda_p", mesh))
        self.M_rr = assemble_weighted_mass(S.u_r, S.u_r, rho_fphi)
        self.M_rs = assemble_weighted_mass(S.u_r, S.u_s, rho_fphi)
        self.M_ss = assemble_weighted_mass(S.u_s, S.u_s, rho_fphi)

    def __call__(self, state: TransientState | np.ndarray) -> float:
        X = state.X if isinstance(state, TransientState) else state
        p = self.spaces.split(X)
        us, ur, y, pp = p["u_s"], p["u_r"], p["y_s"], p["p_P"]
        e = us @ self.M_us @ us + pp @ self.M_pp @ pp + y @ self.A_s @ y
        e += ur @ self.M_rr @ ur + 2.0 * ur @ self.M_rs @ us + us @ self.M_ss @ us
        return 0.5 * float(e)


def discrete_energy(state: TransientState | np.ndarray, materials: MaterialFields, spaces: CoupledSpaces) -> float:
    """1/2 [rho_s(1-phi)|u_s|^2 + (1-phi)^2/K |p_P|^2 + 2 mu_p |eps(y)|^2 + lambda_p |div y|^2 + rho_f phi |u_s + u_r|^2]."""
    return EnergyFunctional(spaces, materials)(state)


def interface_residual(system: CoupledSystem, state: TransientState, prev: TransientState, tau: float, lam_load: np.ndarray | None = None) -> float:
    """max over multiplier basis functions of |<u_f.n_S + (u_r + d_tau y_s).n_P, mu> + F(mu)|.

    ``lam_load`` is the multiplier row of the load (zero without interface corrections).
    """
    S = system.spaces
    c, p = S.split(state.X), S.split(prev.X)
    P = system.parts
    flux = P["B_fG"] @ c["u_f"] + P["B_pG"] @ c["u_r"] + P["B_sG"] @ ((c["y_s"] - p["y_s"]) / tau)
    if lam_load is not None:
        flux = flux + lam_load
    return float(np.max(np.abs(flux))) if len(flux) else 0.0


def kinematic_defect(system: CoupledSystem, state: TransientState, prev: TransientState, tau: float) -> float:
    """Relative residual of the projected kinematic relation rho_p (u_s - d_tau y_s, v_s) = 0."""
    S = system.spaces
    c, p = S.split(state.X), S.split(prev.X)
    r = system.H["u_s", "u_s"] @ c["u_s"] + system.E["u_s", "y_s"] @ ((c["y_s"] - p["y_s"]) / tau)
    scale = np.linalg.norm(system.H["u_s", "u_s"] @ c["u_s"])
    return float(np.linalg.norm(r) / scale) if scale > 0 else float(np.linalg.norm(r))
