import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=300,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for the acceptance summary."""
    lines = request.config._acceptance_lines

    def record(label, passed, detail, seconds=None):
        timing = f" [{seconds:.2f} s]" if seconds is not None else ""
        line = f"criterion {label}: {'PASS' if passed else 'FAIL'} - {detail}{timing}"
        lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
        subs = [line for line in lines if line.startswith("criterion 9")]
        if subs:
            red = sum(": FAIL" in line for line in subs)
            verdict = "PASS" if red == 0 else f"FAIL ({red} of {len(subs)} sub-checks red)"
            terminalreporter.write_line(f"criterion 9 overall: {verdict}")
