import time

import numpy as np
import pytest

from helpers import make_dataset

_RESULTS: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    if rep.when == "setup" and rep.skipped:
        _RESULTS[n] = {"status": "SKIP", "detail": _skip_reason(rep), "seconds": 0.0}
    elif rep.when == "call":
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        if rep.skipped:
            status, detail = "SKIP", _skip_reason(rep)
        else:
            status = "PASS" if rep.passed else "FAIL"
        _RESULTS[n] = {"status": status, "detail": detail, "seconds": rep.duration}


def _skip_reason(rep) -> str:
    if isinstance(rep.longrepr, tuple):
        return str(rep.longrepr[2]).removeprefix("Skipped: ")
    return str(rep.longrepr)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        r = _RESULTS[n]
        line = f"criterion {n}: {r['status']} ({r['seconds']:.1f} s)"
        if r["detail"]:
            line += f" {r['detail']}"
        terminalreporter.write_line(line)


@pytest.fixture
def stopwatch():
    """Callable returning seconds since the fixture was created."""
    t0 = time.perf_counter()
    return lambda: time.perf_counter() - t0


@pytest.fixture
def two_blobs():
    """200-point 2-D two-blob set, 6 sigma apart, balanced."""
    rng = np.random.default_rng(7)
    X = np.vstack([rng.standard_normal((100, 2)), rng.standard_normal((100, 2)) + [6.0 / np.sqrt(2)] * 2])
    y = np.repeat([0, 1], 100)
    return make_dataset(X, y)
