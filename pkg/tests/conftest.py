import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_basis(rng, max_skew=3.0):
    """A random unimodular basis, possibly far from reduced."""
    while True:
        B = rng.normal(size=(2, 2))
        det = np.linalg.det(B)
        if abs(det) > 0.2:
            break

    if det < 0:
        B[1] *= -1
        det = -det
    B = B / np.sqrt(det)
    k = rng.integers(-int(max_skew), int(max_skew) + 1)
    B[1] = B[1] + k * B[0]
    return B


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance report: one line per criterion ----------------------------------

_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    crit = item.get_closest_marker("criterion")
    if crit is None or not (rep.when == "call" or rep.failed):
        return
    num, title = crit.args
    _ACCEPTANCE[num] = (rep.passed, title, getattr(item, "acceptance_detail", ""))


@pytest.fixture
def report(request):
    """Call report('text') to attach measured values to the criterion line."""
    def attach(text):
        request.node.acceptance_detail = text
    return attach


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        ok, title, detail = _ACCEPTANCE[num]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {title}"
                                    + (f" | {detail}" if detail else ""))
