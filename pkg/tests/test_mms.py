import numpy as np
import pytest
import sympy as sy
from hypothesis import given
from hypothesis import strategies as st

import scipy.sparse.linalg as spla

from fpsi.assembly import assemble_source, assemble_weighted_mass
from fpsi.errors import ArgumentError
from fpsi.mms import (
    VARIABLES,
    ErrorEvaluator,
    ErrorReport,
    ManufacturedCase,
    ManufacturedRun,
    error_norms,
    interface_corrections,
    l2_error,
    level_mesh,
    manufactured_sources,
    observed_rates,
    spatial_convergence_study,
)

CASE = ManufacturedCase()
FIELDS = ("u_f", "p_S", "u_r", "u_s", "y_s", "p_P")
H = 1e-5


def random_points(seed=0, n=100):
    rng = np.random.default_rng(seed)
    return rng.uniform(0, 1, n), rng.uniform(0, 2, n), rng.uniform(0, 2, n)


def rel_close(got, want, tol=1e-6):
    got, want = np.asarray(got), np.asarray(want)
    scale = max(np.abs(want).max(), 1.0)
    assert np.abs(got - want).max() <= tol * scale


# -- derivative fidelity -------------------------------------------------------------
@pytest.mark.parametrize("name", FIELDS)
def test_first_derivatives_match_finite_differences(name):
    x, y, t = random_points()
    f = CASE[name]
    comps = f.comps if hasattr(f, "comps") else (f,)
    for c in comps:
        rel_close(c(x, y, t, dx=1), (c(x + H, y, t) - c(x - H, y, t)) / (2 * H))
        rel_close(c(x, y, t, dy=1), (c(x, y + H, t) - c(x, y - H, t)) / (2 * H))
        rel_close(c(x, y, t, dt=1), (c(x, y, t + H) - c(x, y, t - H)) / (2 * H))


@pytest.mark.parametrize("name", FIELDS)
def test_second_derivatives_match_finite_differences(name):
    x, y, t = random_points(1)
    f = CASE[name]
    comps = f.comps if hasattr(f, "comps") else (f,)
    for c in comps:
        for a, b in ((dict(dx=2), ("dx", "dx")), (dict(dy=2), ("dy", "dy")), (dict(dx=1, dy=1), ("dx", "dy")), (dict(dt=2), ("dt", "dt"))):
            inner, outer = b
            step = {"dx": (H, 0, 0), "dy": (0, H, 0), "dt": (0, 0, H)}[outer]
            g = lambda xx, yy, tt: c(xx, yy, tt, **{inner: 1})
            fd = (g(x + step[0], y + step[1], t + step[2]) - g(x - step[0], y - step[1], t - step[2])) / (2 * H)
            rel_close(c(x, y, t, **a), fd)


def test_vector_operators_match_finite_differences():
    x, y, t = random_points(2)
    for name in ("u_f", "u_r", "y_s"):
        v = CASE[name]
        J = v.jacobian(x, y, t)
        fdx = (v(x + H, y, t) - v(x - H, y, t)) / (2 * H)
        fdy = (v(x, y + H, t) - v(x, y - H, t)) / (2 * H)
        rel_close(J[:, 0], fdx)
        rel_close(J[:, 1], fdy)
        rel_close(v.div(x, y, t), fdx[0] + fdy[1])
        eps = v.strain(x, y, t)
        rel_close(eps[0, 1], 0.5 * (fdy[0] + fdx[1]))
        # div of the strain by differencing the hand-coded strain
        dsx = (v.strain(x + H, y, t) - v.strain(x - H, y, t)) / (2 * H)
        dsy = (v.strain(x, y + H, t) - v.strain(x, y - H, t)) / (2 * H)
        div_eps = dsx[:, 0] + dsy[:, 1]
        rel_close(v.div_strain(x, y, t), 2 * div_eps)
        gd = np.stack([(v.div(x + H, y, t) - v.div(x - H, y, t)) / (2 * H), (v.div(x, y + H, t) - v.div(x, y - H, t)) / (2 * H)])
        rel_close(v.grad_div(x, y, t), gd)


def test_solid_velocity_is_displacement_rate():
    x, y, t = random_points(3)
    diff = CASE["u_s"](x, y, t) - CASE["y_s"](x, y, t, dt=1)
    assert np.abs(diff).max() <= 1e-12


# -- symbolic oracle ----------------------------------------------------------------------
X, Y, T = sy.symbols("x y t")
PI = sy.pi
SYM = {
    "u_f": sy.Matrix([-sy.sin(T) * sy.cos(PI * X) * sy.sin(PI * Y), sy.sin(T) * sy.sin(PI * X) * sy.cos(PI * Y)]),
    "p_S": sy.sin(T) * sy.cos(PI * X) * sy.cos(PI * Y),
    "u_r": sy.Matrix([T**2 * sy.sin(4 * PI * Y) ** 2 - T * X**3 * sy.cos(4 * PI * Y),
                      T**2 * sy.sin(4 * PI * Y) ** 2 + 2 * T * X**3 * sy.sin(4 * PI * Y)]),
    "u_s": sy.Matrix([T * X**3 * sy.cos(4 * PI * Y), -2 * T * X**3 * sy.sin(4 * PI * Y)]),
    "y_s": sy.Matrix([sy.Rational(1, 2) * T**2 * X**3 * sy.cos(4 * PI * Y), -(T**2) * X**3 * sy.sin(4 * PI * Y)]),
    "p_P": sy.cos(T) * sy.sin(PI * X) * sy.sin(PI * Y),
}


def jac(v):
    return v.jacobian([X, Y])


def sym_strain(v):
    J = jac(v)
    return (J + J.T) / 2


def div(v):
    return sy.diff(v[0], X) + sy.diff(v[1], Y)


def div_tensor(S):
    return sy.Matrix([sy.diff(S[0, 0], X) + sy.diff(S[0, 1], Y), sy.diff(S[1, 0], X) + sy.diff(S[1, 1], Y)])


def sym_model(c: ManufacturedCase):
    mu_f, mu_p, lam_p, phi = c.mu_f, c.mu_p, c.lambda_p, c.phi
    I = sy.eye(2)
    uf, pS, ur, us, ys, pP = (SYM[n] for n in FIELDS)
    w = ur + us
    sig_S = 2 * mu_f * sym_strain(uf) - pS * I
    sig_F = 2 * mu_f * phi * sym_strain(w) - phi * pP * I
    sig_P = 2 * mu_p * sym_strain(ys) + (lam_p * div(ys) - (1 - phi) * pP) * I
    drag = (mu_f if c.viscosity_scaled_permeability else 1) * phi**2 / c.kappa
    sources = {
        "f_S": -div_tensor(sig_S),
        "f_r": c.rho_f * phi * sy.diff(w, T) - div_tensor(sig_F) - c.theta * w + drag * ur,
        "f_s": c.rho_f * phi * sy.diff(ur, T) + c.rho_p * sy.diff(us, T) - div_tensor(sig_F) - div_tensor(sig_P) - c.theta * w,
        "r_S": div(uf),
        "g_mass": (1 - phi) ** 2 / c.K_bulk * sy.diff(pP, T) + div(phi * ur) + div(us),
    }
    return sources, sig_S, sig_F, sig_P


@pytest.fixture(scope="module")
def symbolic():
    sources, sS, sF, sP = sym_model(CASE)
    args = (X, Y, T)
    lam = {k: sy.lambdify(args, v, "numpy") for k, v in sources.items()}
    return lam, (sS, sF, sP)


@pytest.mark.parametrize("key", ["f_S", "f_r", "f_s", "r_S", "g_mass"])
def test_sources_match_symbolic_oracle(symbolic, key):
    lam, _ = symbolic
    x, y, t = random_points(4, 30)
    got = manufactured_sources(CASE, x, y, t)[key]
    want = np.array([np.array(lam[key](a, b, c), dtype=float).reshape(-1) for a, b, c in zip(x, y, t)]).T
    rel_close(got, want.reshape(np.shape(got)), 1e-10)


def test_kinematic_source_vanishes():
    x, y, t = random_points(5)
    assert np.abs(manufactured_sources(CASE, x, y, t)["g_kin"]).max() <= 1e-12


def test_stokes_source_by_finite_difference_of_flux():
    x, y, t = np.array([0.5]), np.array([0.5]), np.pi / 2
    dsx = (CASE.stress_stokes(x + H, y, t) - CASE.stress_stokes(x - H, y, t)) / (2 * H)
    dsy = (CASE.stress_stokes(x, y + H, t) - CASE.stress_stokes(x, y - H, t)) / (2 * H)
    fd = -(dsx[:, 0] + dsy[:, 1])
    rel_close(manufactured_sources(CASE, x, y, t)["f_S"], fd, 1e-6)


def test_initial_time_sources():
    x, y, _ = random_points(6)
    for n in ("u_r", "u_s", "y_s"):
        assert not np.any(CASE[n](x, y, 0.0))
    s = manufactured_sources(CASE, x, y, 0.0)
    # only the pore-pressure gradient and the solid-velocity rate survive on the porous rows
    us_rate = CASE["u_s"](x, y, 0.0, dt=1)
    ur_rate = CASE["u_r"](x, y, 0.0, dt=1)
    gp = CASE["p_P"].grad(x, y, 0.0)
    rel_close(s["f_s"], CASE.rho_f * CASE.phi * ur_rate + CASE.rho_p * us_rate + gp, 1e-12)
    rel_close(s["f_r"], CASE.rho_f * CASE.phi * (ur_rate + us_rate) + CASE.phi * gp, 1e-12)
    np.testing.assert_allclose(s["f_S"], 0.0, atol=1e-14)


def test_corrections_vanish_at_initial_time():
    x = np.linspace(0, 1, 11)
    m = interface_corrections(CASE, x, np.ones_like(x), 0.0)
    assert np.abs(m["m1"]).max() == 0.0


def test_corrections_match_symbolic_stresses(symbolic):
    _, (sS, sF, sP) = symbolic
    nS, nP, tau = sy.Matrix([0, 1]), sy.Matrix([0, -1]), sy.Matrix([1, 0])
    uf, ur, us = SYM["u_f"], SYM["u_r"], SYM["u_s"]
    lam = -(sS * nS).dot(nS)
    exprs = {
        "m1": uf.dot(nS) + (sy.diff(SYM["y_s"], T) + ur).dot(nP),
        "m2": lam + (sF * nP).dot(nP),
        "m4": -(sS * nS).dot(tau) - CASE.mu_f * CASE.alpha_bjs / sy.sqrt(CASE.kappa) * (uf - sy.diff(SYM["y_s"], T)).dot(tau),
        "m5": (sF * nP).dot(tau),
        "lambda": lam,
    }
    vec = sS * nS + sF * nP + sP * nP
    x = np.linspace(0.05, 0.95, 7)
    for t in (0.3, 1.0):
        got = interface_corrections(CASE, x, np.ones_like(x), t)
        for k, e in exprs.items():
            f = sy.lambdify(X, e.subs({Y: 1, T: t}), "numpy")
            rel_close(got[k], np.broadcast_to(f(x), x.shape), 1e-10)
        for i in range(2):
            f = sy.lambdify(X, vec[i].subs({Y: 1, T: t}), "numpy")
            rel_close(got["m3"][i], np.broadcast_to(f(x), x.shape), 1e-10)


def test_tangential_porous_traction_is_shear_strain():
    x = np.linspace(0, 1, 9)
    y = np.ones_like(x)
    t = 0.8
    w = CASE["u_r"] + CASE["u_s"]
    m5 = interface_corrections(CASE, x, y, t)["m5"]
    rel_close(m5, -2 * CASE.mu_f * CASE.phi * w.strain(x, y, t)[0, 1], 1e-13)


def test_corrections_off_interface():
    with pytest.raises(ArgumentError):
        interface_corrections(CASE, np.array([0.5]), np.array([1.2]), 0.5)


# -- rates and reports -------------------------------------------------------------------------
@given(p=st.floats(0.2, 4.0), C=st.floats(1e-3, 1e3), n=st.integers(2, 7))
def test_rates_on_synthetic_ladders(p, C, n):
    k = np.arange(n)
    h = 0.5 ** k
    e = C * 2.0 ** (-p * k)
    np.testing.assert_allclose(observed_rates(e, h), p, atol=1e-12)


def test_report_structure():
    rows = []
    for i, h in enumerate([0.4, 0.2, 0.1]):
        row = {"level": i + 1, "h": h, "tau": h * h, "dofs": 10 * 4**i}
        row.update({f"e_{v}": 3.0 * h**2 for v in VARIABLES})
        rows.append(row)
    rep = ErrorReport("space", rows)
    assert len(rep.columns) == 4 + 2 * len(VARIABLES)
    assert rep.columns[:6] == ["level", "h", "tau", "dofs", "e_uf_h1", "rate_uf"]
    assert all(r == pytest.approx(2.0) for r in rep.final_rates().values())
    table = rep.table()
    assert len(table) == 3 and np.isnan(table[0][5]) and table[1][5] == pytest.approx(2.0)


@pytest.fixture(scope="module")
def level2_final():
    mesh = level_mesh(2)
    n = int(np.ceil(1.0 / mesh.h**2))
    run = ManufacturedRun(CASE, mesh, 1.0 / n)
    state = run.run(n)
    return run, state


def test_best_approximation_errors_below_solver_errors(level2_final):
    run, state = level2_final
    assert state.t == pytest.approx(1.0)
    solver = error_norms(state, CASE, run.spaces)
    interp = ErrorEvaluator(CASE, run.spaces)(run.initial_state(1.0).X, 1.0)
    for v in ("u_f", "y_s", "lam"):
        assert interp[v] < solver[v], v
    # in L2 the solver can beat nodal interpolation (u_r superconverges, u_s is an
    # L2 projection of the displacement rate), so use the L2 projection as oracle
    for v in ("p_S", "u_r", "p_P", "u_s"):
        V = getattr(run.spaces, v)
        M = assemble_weighted_mass(V, V).tocsc()
        proj = spla.spsolve(M, assemble_source(V, CASE.exact(v), 1.0))
        best = l2_error(V, proj, CASE[v], 1.0)
        assert best <= interp[v] and best < solver[v], v
    assert run.max_interface_residual <= 1e-8


def test_two_level_study_shape():
    rep = spatial_convergence_study(2)
    assert len(rep.rows) == 2
    assert np.isfinite(rep.rates("u_f")).sum() == 1
    assert [r["dofs"] for r in rep.rows] == [1107, 3995]
    np.testing.assert_allclose([r["h"] for r in rep.rows], [0.2795, 0.1398], atol=1e-4)


def test_levels_out_of_range():
    with pytest.raises(ArgumentError):
        spatial_convergence_study(6)


@pytest.mark.slow
def test_displacement_error_sits_at_interpolation_floor(spatial_report):
    report, _ = spatial_report
    mesh = level_mesh(4)
    run_spaces = ManufacturedRun(CASE, mesh, 1.0)  # only spaces and exact data are used
    interp = ErrorEvaluator(CASE, run_spaces.spaces)(run_spaces.initial_state(1.0).X, 1.0)
    solver = report.errors("y_s")[-1]
    assert report.rows[-1]["h"] == pytest.approx(0.0349, abs=1e-4)
    assert solver == pytest.approx(interp["y_s"], rel=0.02)
