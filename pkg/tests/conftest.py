import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fpsi.mesh import build_two_block_mesh
from fpsi.mms import level_mesh

settings.register_profile("default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=10, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

UNIT_STOKES = ((0.0, 0.0), (1.0, 1.0))
UNIT_POROUS = ((0.0, 1.0), (1.0, 2.0))


@pytest.fixture(scope="session")
def tiny_mesh():
    """Two stacked unit squares with one cell each: 4 triangles, 1 interface edge."""
    return build_two_block_mesh(UNIT_STOKES, UNIT_POROUS, 1, 1)


@pytest.fixture(scope="session")
def small_mesh():
    return build_two_block_mesh(UNIT_STOKES, UNIT_POROUS, 3, 3)


@pytest.fixture(scope="session")
def coarse_mesh():
    return level_mesh(1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CACHE: dict = {}


@pytest.fixture(scope="session")
def spatial_report():
    """Four-level spatial study, computed once per session."""
    import time

    from fpsi.mms import spatial_convergence_study

    if "space" not in _CACHE:
        t0 = time.perf_counter()
        report = spatial_convergence_study(4)
        _CACHE["space"] = (report, time.perf_counter() - t0)
    return _CACHE["space"]


@pytest.fixture(scope="session")
def temporal_report():
    import time

    from fpsi.mms import temporal_convergence_study

    if "time" not in _CACHE:
        t0 = time.perf_counter()
        report = temporal_convergence_study(mesh_level=3, tau0=0.5, halvings=5)
        _CACHE["time"] = (report, time.perf_counter() - t0)
    return _CACHE["time"]


@pytest.fixture(scope="session")
def scenario_results(tmp_path_factory):
    """Fracture (20 steps) and channel (20 steps, moving mesh) runs, computed once per session."""
    import time

    from fpsi.scenarios import ScenarioConfig, channel_config, fracture_config, run_scenario

    if "scenarios" not in _CACHE:
        base = tmp_path_factory.mktemp("scenarios")
        out = {}
        for name, data in (("fracture", fracture_config()), ("channel", channel_config())):
            if name == "fracture":
                data["materials"]["spe10"]["synthetic_dir"] = str(base / "spe10")
            t0 = time.perf_counter()
            cfg = ScenarioConfig.from_dict(data)
            cfg.output.vtk_every = 10
            out[name] = (run_scenario(cfg, output_dir=base / name), time.perf_counter() - t0)
        _CACHE["scenarios"] = out
    return _CACHE["scenarios"]


ACCEPTANCE: dict[int, str] = {}


def record_acceptance(number: int, passed: bool, summary: str) -> str:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {summary}"
    ACCEPTANCE[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
