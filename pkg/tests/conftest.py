import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from hstori.fixtures import nondegenerate_fixture

settings.register_profile("default", max_examples=25, deadline=None, derandomize=True)
settings.load_profile("default")

ORACLE_PATH = Path(__file__).parent / "oracles" / "values.json"


@pytest.fixture(scope="session")
def oracle():
    return json.loads(ORACLE_PATH.read_text())


@pytest.fixture(scope="session")
def nondeg():
    return nondegenerate_fixture()


def as_complex(pair):
    return complex(pair[0], pair[1])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


RHOS = (0.02, 0.04, 0.08)


@pytest.fixture(scope="session")
def frames(nondeg):
    """``find_frame`` results on the nondegenerate fixture for each ``rho`` in ``RHOS``."""
    from hstori.ls_solver import find_frame

    pot, r = nondeg
    return {rho: find_frame(pot, rho, r) for rho in RHOS}


@pytest.fixture(scope="session")
def solve_005(nondeg):
    from hstori.ls_solver import solve_projected

    pot, r = nondeg
    return solve_projected(pot, 0.05, r, N=32, max_iter=50)


def loglog_slope(xs, ys) -> float:
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


ACCEPTANCE: dict = {}


def record(key: str, title: str, ok: bool, detail: str = "") -> bool:
    """Store an acceptance outcome for the end-of-run summary and return ``ok``."""
    ACCEPTANCE[key] = (title, bool(ok), detail)
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.rstrip("ab")), k)):
        title, ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key:>3} {'PASS' if ok else 'FAIL'}  {title}  {detail}")
