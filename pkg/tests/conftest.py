import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def astronaut():
    from PIL import Image

    with Image.open(DATA / "astronaut_256.png") as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0


@pytest.fixture(scope="session")
def sphere_mesh():
    from hashgrid.geometry.mesh import icosphere

    return icosphere(3).normalized()


@pytest.fixture(scope="session")
def sphere_bvh(sphere_mesh):
    from hashgrid.geometry.bvh import Bvh

    return Bvh(sphere_mesh)


# --- acceptance summary: one PASS/FAIL line per criterion ----------------------------------------

N_CRITERIA = 9
_criterion_of: dict = {}
_outcomes: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion checked by the test")


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            _criterion_of[item.nodeid] = int(m.args[0])


def pytest_runtest_logreport(report):
    n = _criterion_of.get(report.nodeid)
    if n is None:
        return
    seen = _outcomes.setdefault(n, set())
    if report.failed:
        seen.add("failed")
    elif report.skipped:
        seen.add("skipped")
    elif report.when == "call":
        seen.add("passed")


def pytest_terminal_summary(terminalreporter):
    if not _criterion_of:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        seen = _outcomes.get(n, set())
        if "failed" in seen:
            verdict = "FAIL"
        elif seen == {"passed"}:
            verdict = "PASS"
        else:
            verdict = "NOT RUN"
        terminalreporter.write_line(f"criterion {n}: {verdict}")
