"""End-to-end acceptance checks; each test prints one PASS/FAIL line (also listed in the terminal summary)."""
import time

import numpy as np
import pytest
import sympy as sy

from conftest import record_acceptance
from fpsi.assembly import assemble_divergence_coupling, assemble_stiffness, assemble_weighted_mass
from fpsi.fespace import build_space
from fpsi.mesh import Region, build_two_block_mesh
from fpsi.mms import ManufacturedCase, level_mesh
from fpsi.scenarios import harmonic_extension
from fpsi.system import BackwardEuler, EnergyFunctional, TransientState
from test_assembly import TRIANGLE, reference_triangle, sym_basis, sym_integral, X, Y
from test_system import _homogeneous

pytestmark = pytest.mark.acceptance


def _fmt(d: dict) -> str:
    return " ".join(f"{k}={v:.3f}" for k, v in d.items())


# 1 -----------------------------------------------------------------------------------------
SPACE_BANDS = {
    "u_f": (1.8, 2.2), "y_s": (1.8, 2.1), "p_P": (1.8, 2.2), "u_s": (1.8, 2.2),
    "u_r": (2.0, np.inf), "p_S": (2.0, np.inf), "lam": (1.8, np.inf),
}


def test_criterion_1_spatial_convergence(spatial_report):
    report, seconds = spatial_report
    rates = report.final_rates()
    bad = {v: rates[v] for v, (lo, hi) in SPACE_BANDS.items() if not lo <= rates[v] <= hi}
    ok = not bad and len(report.rows) == 4 and report.rows[-1]["h"] == pytest.approx(0.0349, abs=1e-4)
    record_acceptance(1, ok, f"final-pair rates {_fmt(rates)}; {seconds:.0f}s"
                      + (f"; out of band: {sorted(bad)}" if bad else ""))
    assert ok, bad


# 2 -----------------------------------------------------------------------------------------
# reference cumulative errors by column label; the second tabulated step is read as 0.25
REFERENCE_TIME = {
    "u_f": [0.0293, 0.0146, 0.0073, 0.0036, 0.0018, 0.0009],
    "p_S": [0.5374, 0.2688, 0.1345, 0.0673, 0.0337, 0.0169],
    "u_r": [0.0514, 0.0231, 0.0109, 0.0053, 0.0027, 0.0014],
    "p_P": [0.1013, 0.0504, 0.0251, 0.0126, 0.0063, 0.0031],
    "y_s": [1.3238, 0.5736, 0.2645, 0.1266, 0.0619, 0.0306],
    "u_s": [0.1458, 0.0729, 0.0365, 0.0182, 0.0091, 0.0046],
    "lam": [0.1505, 0.0749, 0.0374, 0.0187, 0.0093, 0.0047],
}
RATE_VARS = ("u_s", "p_P", "lam", "u_f", "p_S")


def test_criterion_2_temporal_convergence(temporal_report):
    report, seconds = temporal_report
    rates = {v: report.final_rates()[v] for v in RATE_VARS}
    bad_rates = sorted(v for v, r in rates.items() if not 0.9 <= r <= 1.1)
    off = {}
    for v, ref in REFERENCE_TIME.items():
        ratio = report.errors(v) / np.array(ref)
        if np.any(np.abs(ratio - 1) > 0.5):
            off[v] = float(ratio[np.argmax(np.abs(ratio - 1))])
    ok = not bad_rates and not off and report.rows[0]["h"] == pytest.approx(0.0699, abs=1e-4)
    detail = f"finest-pair rates {_fmt(rates)}; {seconds:.0f}s"
    if bad_rates:
        detail += f"; rates out of [0.9, 1.1]: {bad_rates}"
    if off:
        detail += "; worst error/reference ratio outside 0.5..1.5: " + _fmt(off)
    record_acceptance(2, ok, detail)
    assert ok, detail


# 3 -----------------------------------------------------------------------------------------
def test_criterion_3_energy_stability():
    t0 = time.perf_counter()
    S, m, system, bcs = _homogeneous(level_mesh(1), theta=0.0)
    stepper = BackwardEuler(system, 0.05, bcs)
    energy = EnergyFunctional(S, m)
    rng = np.random.default_rng(2024)
    X0 = rng.uniform(-1, 1, S.dimension)
    for name, bc in bcs:
        X0[S.slice(name)][bc.dofs] = 0.0
    state, values, worst = TransientState(0.0, X0), [energy(X0)], 0.0
    zero = np.zeros(S.dimension)
    for _ in range(50):
        state = stepper.step(state, zero)
        values.append(energy(state))
    jumps = np.diff(values) / values[0]
    worst = float(jumps.max())
    ok = worst <= 1e-10
    record_acceptance(3, ok, f"E0={values[0]:.4g} E50={values[-1]:.4g} max relative increase {worst:.2e}; "
                             f"{time.perf_counter() - t0:.1f}s")
    assert ok


# 4 -----------------------------------------------------------------------------------------
def test_criterion_4_interface_conservation(spatial_report, temporal_report, scenario_results):
    worst = {
        "space": max(r["interface_residual"] for r in spatial_report[0].rows),
        "time": max(r["interface_residual"] for r in temporal_report[0].rows),
        "fracture": max(scenario_results["fracture"][0].interface_residual),
        "channel": max(scenario_results["channel"][0].interface_residual),
    }
    ok = max(worst.values()) <= 1e-8
    record_acceptance(4, ok, "max |b_Gamma|/|X| " + " ".join(f"{k}={v:.1e}" for k, v in worst.items()))
    assert ok


# 5 -----------------------------------------------------------------------------------------
def test_criterion_5_element_oracles():
    t0 = time.perf_counter()
    diffs = {}
    for verts in (((0, 0), (1, 0), (0, 1)), TRIANGLE):
        mesh = reference_triangle(verts)
        for fam in ("P1", "P2"):
            V = build_space(mesh, "STOKES", fam)
            phi, perm = sym_basis(verts, fam), V.cell_nodes[0]
            n = len(phi)
            M = np.array([[float(sym_integral(phi[i] * phi[j], verts)) for j in range(n)] for i in range(n)])
            diffs[f"mass_{fam}"] = max(diffs.get(f"mass_{fam}", 0.0),
                                       np.abs(assemble_weighted_mass(V, V).toarray()[np.ix_(perm, perm)] - M).max())
        V = build_space(mesh, "STOKES", "P1")
        phi = sym_basis(verts, "P1")
        K = np.array([[float(sym_integral(sy.diff(phi[i], X) * sy.diff(phi[j], X) + sy.diff(phi[i], Y) * sy.diff(phi[j], Y), verts))
                       for j in range(3)] for i in range(3)])
        perm = V.cell_nodes[0]
        diffs["stiffness_P1"] = max(diffs.get("stiffness_P1", 0.0), np.abs(assemble_stiffness(V).toarray()[np.ix_(perm, perm)] - K).max())
        Vv, Q = build_space(mesh, "STOKES", "P2", 2), build_space(mesh, "STOKES", "P1")
        w = 1 + X + 2 * Y
        weight = 1.0 + mesh.vertices[:, 0] + 2 * mesh.vertices[:, 1]
        B = assemble_divergence_coupling(Vv, Q, weight).toarray()
        p2, p1 = sym_basis(verts, "P2"), sym_basis(verts, "P1")
        vn, qn = Vv.cell_nodes[0], Q.cell_nodes[0]
        for comp, var in ((0, X), (1, Y)):
            oracle = np.array([[float(-sym_integral(sy.diff(w * p2[j], var) * p1[i], verts)) for j in range(6)] for i in range(3)])
            d = np.abs(B[np.ix_(qn, vn + comp * Vv.n_nodes)] - oracle).max()
            diffs["divergence"] = max(diffs.get("divergence", 0.0), d)
    ok = max(diffs.values()) <= 1e-12
    record_acceptance(5, ok, "max deviation " + " ".join(f"{k}={v:.1e}" for k, v in diffs.items())
                      + f"; {time.perf_counter() - t0:.1f}s")
    assert ok


# 6 -----------------------------------------------------------------------------------------
def test_criterion_6_manufactured_fidelity():
    t0 = time.perf_counter()
    case, h = ManufacturedCase(), 1e-5
    rng = np.random.default_rng(7)
    x, y, t = rng.uniform(0, 1, 100), rng.uniform(0, 2, 100), rng.uniform(0, 2, 100)
    worst = 0.0
    for name in ("u_f", "p_S", "u_r", "u_s", "y_s", "p_P"):
        f = case[name]
        for c in getattr(f, "comps", (f,)):
            for kw, (dx, dy, dt) in (("dx", (h, 0, 0)), ("dy", (0, h, 0)), ("dt", (0, 0, h))):
                for base in ({}, {"dx": 1}, {"dy": 1}, {"dt": 1}):
                    order = dict(base)
                    order[kw] = order.get(kw, 0) + 1
                    fd = (c(x + dx, y + dy, t + dt, **base) - c(x - dx, y - dy, t - dt, **base)) / (2 * h)
                    got = c(x, y, t, **order)
                    worst = max(worst, np.abs(got - fd).max() / max(np.abs(fd).max(), 1.0))
    kin = float(np.abs(case["u_s"](x, y, t) - case["y_s"](x, y, t, dt=1)).max())
    ok = worst <= 1e-6 and kin <= 1e-12
    record_acceptance(6, ok, f"max relative derivative deviation {worst:.1e}; |u_s - dt y_s| {kin:.1e}; "
                             f"{time.perf_counter() - t0:.2f}s")
    assert ok


# 7 -----------------------------------------------------------------------------------------
def test_criterion_7_scenarios(scenario_results):
    frac, t_frac = scenario_results["fracture"]
    chan, t_chan = scenario_results["channel"]
    checks = {
        "fracture_steps": len(frac.times) == 21 and np.all(np.isfinite(frac.state.X)),
        "channel_steps": len(chan.times) == 21 and np.all(np.isfinite(chan.state.X)) and chan.mesh.areas.min() > 0,
    }
    try:
        frac.fields.check()
        checks["spe10_invariants"] = bool(np.all(np.isfinite(frac.fields.kappa)))
    except Exception:  # noqa: BLE001 - any failure is a fail line
        checks["spe10_invariants"] = False
    mesh = build_two_block_mesh(((-1, 0), (1, 2)), ((-1, -2), (1, 0)), 8, 8,
                                side_markers={"stokes_top": "INLET", "porous_bottom": "OUTLET"})
    iv = np.unique(mesh.interface.edges)
    stokes = mesh.region_vertex_mask(Region.STOKES)
    data = np.random.default_rng(11).normal(size=(mesh.n_vertices, 2))
    d = harmonic_extension(mesh, data)
    bounds = [(min(data[iv, c].min(), 0.0), max(data[iv, c].max(), 0.0)) for c in range(2)]
    checks["extension_trace"] = bool(np.array_equal(d[iv], data[iv]))
    checks["max_principle"] = all(lo - 1e-12 <= d[stokes, c].min() and d[stokes, c].max() <= hi + 1e-12
                                  for c, (lo, hi) in enumerate(bounds))
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    record_acceptance(7, ok, f"fracture {t_frac:.1f}s, channel {t_chan:.1f}s, min moved area {chan.mesh.areas.min():.3g}"
                      + (f"; failed: {failed}" if failed else ""))
    assert ok, failed
