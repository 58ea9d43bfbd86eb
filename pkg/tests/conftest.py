import numpy as np
import pytest

from grazesim.nordmark import MapParams
from grazesim.smallmat import SymMat2

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def fig2():
    """tau=0.5, delta=0.05, chi=1 at mu=0.005 (period-4 window)."""
    return MapParams(0.5, 0.05, 1, 0.005)


@pytest.fixture
def identity():
    return SymMat2.identity()


def random_psd(rng) -> SymMat2:
    g = rng.normal(size=(2, 2))
    return SymMat2.from_array(g @ g.T)


def random_stable(rng, radius=0.95) -> np.ndarray:
    while True:
        k = rng.normal(size=(2, 2))
        rho = max(abs(np.linalg.eigvals(k)))
        if rho > 1e-3:
            return k * (rng.uniform(0.05, radius) / rho)
