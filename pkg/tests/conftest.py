import math

import numpy as np
import pytest

from alexflow import GeodesicBall, Point, euclidean, hyperbolic, sphere, spider


def sph(theta: float, rho: float) -> list:
    """Point of the unit sphere at distance rho from (1,0,0), bearing theta."""
    return [math.cos(rho), math.sin(rho) * math.cos(theta), math.sin(rho) * math.sin(theta)]


@pytest.fixture
def S2():
    return sphere(2, 1.0)


@pytest.fixture
def H2():
    return hyperbolic(2, -1.0)


@pytest.fixture
def E2():
    return euclidean(2)


@pytest.fixture
def T3():
    return spider(3)


@pytest.fixture
def cap(S2):
    return GeodesicBall(Point(S2, [1, 0, 0]), 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance lines, filled by test_acceptance.py and printed after the run
ACCEPTANCE: list = []


def record(number: int, name: str, passed: bool, seconds: float, budget: float | None, detail: str) -> bool:
    """Store one acceptance line; the criterion passes only within its time budget."""
    in_time = budget is None or seconds < budget
    ok = bool(passed) and in_time
    timing = f"{seconds:.2f}s" + (f" (budget {budget:g}s)" if budget is not None else "")
    ACCEPTANCE.append(f"[{'PASS' if ok else 'FAIL'}] {number}. {name}: {detail}; {timing}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split("] ")[1].split(".")[0])):
            terminalreporter.write_line(line)
