import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from metasr.nn import float64_mode

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def f64():
    with float64_mode():
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance(capsys):
    """Record a PASS/FAIL line for an acceptance criterion; printed live and in the summary."""

    def record(number: int, title: str, ok: bool, detail: str = "") -> None:
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}" + (f" ({detail})" if detail else "")
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
