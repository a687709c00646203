import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from fpsi.assembly import MaterialFields, assemble_system, build_coupled_spaces, collect_bcs
from fpsi.errors import ArgumentError, NumericError, SingularMatrix
from fpsi.fespace import dirichlet_bcs, interpolate
from fpsi.mesh import Region
from fpsi.mms import WALLS, ManufacturedCase, ManufacturedRun, error_norms, level_mesh
from fpsi.system import (
    BackwardEuler,
    EnergyFunctional,
    TimeGrid,
    TransientState,
    backward_euler_step,
    discrete_energy,
    factorize,
    interface_residual,
    kinematic_defect,
    run_transient,
)


# -- factorization ---------------------------------------------------------------
def test_identity_solve(rng):
    b = rng.normal(size=7)
    np.testing.assert_array_equal(factorize(sp.identity(7)).solve(b), b)


@pytest.mark.parametrize("A", [[[1.0, 1.0], [1.0, 1.0]], [[1.0, 0.0], [0.0, 0.0]], [[1.0, 2.0], [1.0, 2.0 + 1e-17]]])
def test_singular_matrices(A):
    with pytest.raises(SingularMatrix):
        factorize(sp.csc_matrix(np.array(A)))


def test_singular_reports_pivot():
    A = sp.csc_matrix(np.diag([1.0, 1e-20, 2.0]))
    with pytest.raises(SingularMatrix) as info:
        factorize(A)
    assert info.value.pivot == 1


def test_non_square():
    with pytest.raises(ArgumentError):
        factorize(sp.csc_matrix(np.ones((2, 3))))


@pytest.fixture(scope="module")
def level1_run():
    return ManufacturedRun(ManufacturedCase(), level_mesh(1), 1 / 13)


def test_coupled_residual(level1_run, rng):
    st_ = level1_run.stepper
    assert level1_run.spaces.dimension == 1107
    b = rng.normal(size=level1_run.spaces.dimension)
    x = st_.factorization.solve(b)
    assert st_.factorization.residual(x, b) <= 1e-10


# -- stepping ------------------------------------------------------------------------
def _homogeneous(mesh, theta=0.0):
    S = build_coupled_spaces(mesh)
    m = ManufacturedCase(theta=theta).materials()
    system = assemble_system(S, m)
    bcs = [(n, dirichlet_bcs(getattr(S, n), WALLS, 0.0)) for n in ("u_f", "u_r", "y_s")]
    return S, m, system, bcs


def test_zero_data_stays_zero(coarse_mesh):
    S, m, system, bcs = _homogeneous(coarse_mesh)
    stepper = BackwardEuler(system, 0.1, bcs)
    states = run_transient(stepper, TransientState(0.0, np.zeros(S.dimension)), 5, lambda t: np.zeros(S.dimension))
    assert len(states) == 6
    assert all(not np.any(s.X) for s in states)
    assert states[-1].t == pytest.approx(0.5)
    assert states[-1].step_index == 5


def test_steady_state_is_reproduced(coarse_mesh):
    # sources synthesized from the discrete operator so the interpolated steady fields are a fixed point
    run = ManufacturedRun(ManufacturedCase(steady=True), coarse_mesh, 0.1)
    Xs = run.initial_state().X
    L = run.system.H_csr @ Xs
    state = TransientState(0.0, Xs)
    for _ in range(3):
        state = run.stepper.step(state, L)
    assert np.linalg.norm(state.X - Xs) <= 1e-9 * np.linalg.norm(Xs)


def test_single_step_errors_within_reference_magnitudes():
    mesh = level_mesh(2)
    tau = 1.0 / int(np.ceil(1.0 / mesh.h**2))
    run = ManufacturedRun(ManufacturedCase(), mesh, tau)
    state = run.run(1)
    errs = error_norms(state, run.case, run.spaces)
    reference = {"u_f": 0.0357, "p_S": 0.9008, "u_r": 0.1364, "p_P": 0.06018, "y_s": 0.1815, "u_s": 0.04864, "lam": 0.2977}
    for name, ref in reference.items():
        assert errs[name] <= 10 * ref, name


def test_one_step_run_equals_single_step(level1_run):
    run = level1_run
    s0 = run.initial_state()
    L = run.load(run.tau)
    a = backward_euler_step(run.system, s0, run.tau, L, run.bcs)
    b = run_transient(run.stepper, s0, 1, run.load)[-1]
    np.testing.assert_allclose(a.X, b.X, rtol=0, atol=1e-12 * np.abs(a.X).max())
    assert a.t == b.t == pytest.approx(run.tau)


def test_stepper_mismatch(level1_run):
    run = level1_run
    with pytest.raises(ArgumentError):
        backward_euler_step(run.system, run.initial_state(), 0.5, run.load(0.5), stepper=run.stepper)


def test_constrained_dofs_changed(level1_run):
    run = level1_run
    stepper = BackwardEuler(run.system, run.tau, run.bcs)
    stepper.bcs = run.bcs[:1]
    with pytest.raises(ArgumentError):
        stepper.step(run.initial_state(), run.load(run.tau))


def test_time_grid():
    assert TimeGrid(2.0, 0.1).n_steps == 20
    with pytest.raises(ArgumentError):
        TimeGrid(1.0, 0.3).n_steps
    with pytest.raises(ArgumentError):
        BackwardEuler.__new__(BackwardEuler).__init__(None, 0.0)


def test_nonfinite_state_rejected():
    with pytest.raises(NumericError):
        TransientState(0.0, np.array([0.0, np.nan]))


def test_state_is_read_only():
    s = TransientState(0.0, np.zeros(3))
    with pytest.raises(ValueError):
        s.X[0] = 1.0


# -- diagnostics -------------------------------------------------------------------------
def test_energy_of_zero_state(coarse_mesh):
    S = build_coupled_spaces(coarse_mesh)
    assert discrete_energy(np.zeros(S.dimension), ManufacturedCase().materials(), S) == 0.0


def test_energy_of_uniform_solid_velocity(coarse_mesh):
    S = build_coupled_spaces(coarse_mesh)
    m = MaterialFields(mu_f=10, mu_p=10, lambda_p=10, rho_f=1, rho_s=1, phi=0.1, kappa=1, K_bulk=1)
    X = S.join({"u_s": interpolate(S.u_s, (1.0, 0.0))})
    area = coarse_mesh.areas[coarse_mesh.cell_tag == Region.POROUS].sum()
    assert discrete_energy(X, m, S) == pytest.approx(0.5 * area, rel=1e-13)


def test_energy_is_nonnegative(coarse_mesh, rng):
    S = build_coupled_spaces(coarse_mesh)
    E = EnergyFunctional(S, ManufacturedCase().materials())
    for _ in range(5):
        assert E(rng.normal(size=S.dimension)) >= 0.0


@pytest.fixture(scope="module")
def decay_setup():
    S, m, system, bcs = _homogeneous(level_mesh(1))
    return S, m, BackwardEuler(system, 0.05, bcs), EnergyFunctional(S, m)


@settings(max_examples=4)
@given(seed=st.integers(0, 2**32 - 1))
def test_energy_decays_without_data(decay_setup, seed):
    S, m, stepper, energy = decay_setup
    rng = np.random.default_rng(seed)
    X0 = rng.normal(size=S.dimension)
    dofs, _ = collect_bcs(S, stepper.bcs, 0.0)
    X0[dofs] = 0.0
    zero = np.zeros(S.dimension)
    values = [energy(X0)]
    state = TransientState(0.0, X0)
    for _ in range(50):
        state = stepper.step(state, zero)
        values.append(energy(state))
    assert np.all(np.diff(values) <= 1e-10 * values[0])
    assert values[-1] < values[0]


def test_interface_and_kinematics_after_each_step(level1_run):
    run = level1_run
    state = run.initial_state()
    for _ in range(3):
        L = run.load(state.t + run.tau)
        new = run.stepper.step(state, L)
        r = interface_residual(run.system, new, state, run.tau, L[run.spaces.slice("lam")])
        assert r <= 1e-8 * np.linalg.norm(new.X)
        assert kinematic_defect(run.system, new, state, run.tau) <= 1e-9
        assert run.stepper.last_residual <= 1e-10
        state = new
