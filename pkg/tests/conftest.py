import functools

import pytest

from kinkstab.profiles import build_profiles
from kinkstab.simulator import SimConfig, run

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def profiles():
    return build_profiles()


@functools.lru_cache(maxsize=None)
def reference_run(kind: str, value: float, T: float = 400.0):
    """Shared long runs; computed once per session, on demand."""
    if kind == "phi4":
        cfg = SimConfig(initial="mode_kick", amplitude=value, T=T)
    else:
        cfg = SimConfig(model="sine_gordon_full", initial="wobbler_snapshot", alpha=value,
                        amplitude=0.0, T=T)
    return run(cfg, build_profiles())


@pytest.fixture(scope="session")
def runs():
    return reference_run


@pytest.fixture(scope="session")
def report_line():
    def emit(n, passed, detail):
        line = f"criterion {n:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
