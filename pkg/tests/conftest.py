import os
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(autouse=True)
def _quiet_runtime_warnings():
    # low-ESS warnings are expected in several Monte Carlo tests
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


def random_theta(rng, d, scale=1.0):
    from isingmix import IsingParams

    q = d * (d + 1) // 2
    return IsingParams.from_vector(scale * rng.standard_normal(q), d)


def random_table(rng, d, N=500):
    from isingmix import BinaryTable

    return BinaryTable(d, rng.multinomial(N, rng.dirichlet(np.ones(2**d))).astype(float) + 0.5)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_criterion():
    """Record a PASS/FAIL line for an acceptance criterion and print it."""

    def record(number: int, title: str, checks: dict[str, bool], details: str = "") -> bool:
        ok = all(checks.values())
        failed = [k for k, v in checks.items() if not v]
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {title}"
        if failed:
            line += f" | failed: {', '.join(failed)}"
        if details:
            line += f" | {details}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
