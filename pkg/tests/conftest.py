import numpy as np
import pytest

from symbreak.modelzoo import builtin
from symbreak.releq import find_re

ACCEPTANCE = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(passed), detail)
    print(f"ACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'} - {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} - {detail}")


@pytest.fixture(scope="session")
def setups():
    return {name: builtin(name) for name in ("pendulum", "oscillator", "oscillator-break")}


@pytest.fixture(scope="session")
def base_res(setups):
    return {name: find_re(s.model, 0.0, "full", s.seed_x, s.seed_xi, s.mu_target)
            for name, s in setups.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
