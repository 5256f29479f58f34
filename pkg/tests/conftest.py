from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from drqkd import attacks, protocol

settings.register_profile(
    "default", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# one fixed seed for every statistical check; chosen before any run
SEED = 12345

ACCEPTANCE_LINES: list[str] = []


def report(criterion: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(autouse=True, scope="module")
def _fresh_caches():
    yield
    protocol.clear_caches()
    attacks.clear_caches()


_SESSIONS: dict = {}


@pytest.fixture(scope="session")
def session():
    """Memoized ``run_session`` shared by every module; keyed by its arguments."""

    def get(params, attack=None, n_trials=200_000, seed=SEED, threads=4):
        key = (params, attack, n_trials, seed)
        if key not in _SESSIONS:
            _SESSIONS[key] = protocol.run_session(params, attack, n_trials=n_trials, seed=seed, threads=threads)
        return _SESSIONS[key]

    return get


def within(emp: float, exp: float, n: int, k: float = 3.0) -> bool:
    """Binomial ``k``-sigma band around ``exp``."""
    import math

    return abs(emp - exp) <= k * math.sqrt(exp * (1 - exp) / n)
