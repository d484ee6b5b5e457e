import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from skelnav.synthetic import generate_synthetic_map  # noqa: E402


@pytest.fixture(scope="session")
def l_room():
    return generate_synthetic_map("l_room", 200, seed=0)


@pytest.fixture(scope="session")
def corridor():
    return generate_synthetic_map("corridor", 200, seed=1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------- acceptance summary

def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")
    config._acceptance = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    n, title = mark.args
    prev = item.config._acceptance.get(n, (title, True, []))
    ok = prev[1] and not rep.failed
    if rep.when == "call" or rep.failed:
        item.config._acceptance[n] = (title, ok, prev[2] + [item.name])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_acceptance", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        title, ok, _ = results[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}")
