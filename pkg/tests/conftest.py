import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

PI = math.pi


def same_up_to_sign(a, b, atol=1e-12) -> bool:
    a, b = np.asarray(a, float), np.asarray(b, float)
    return bool(np.allclose(a, b, atol=atol) or np.allclose(a, -b, atol=atol))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance criteria: one PASS/FAIL line each at the end of the run
_CRITERIA: dict = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_") or report.when != "call" and not report.failed:
        return
    number = int(name.split("_")[2])
    detail = dict(report.user_properties).get("detail", "")
    if report.when == "call" or number not in _CRITERIA:
        _CRITERIA[number] = ("PASS" if report.passed else "FAIL", name, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, name, detail = _CRITERIA[number]
        line = f"criterion {number:2d}: {status}  {name}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
