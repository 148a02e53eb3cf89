import numpy as np
import pytest

from wavefeed.lti import StateSpaceModel


def random_stable(rng: np.random.Generator, n: int, m: int = 1, p: int = 1,
                  wmin: float = 0.1, wmax: float = 3.0, feedthrough: bool = True) -> StateSpaceModel:
    """Random real stable model with modes spread over [wmin, wmax] rad/s."""
    blocks = []
    k = n
    while k >= 2:
        w = rng.uniform(wmin, wmax)
        zeta = rng.uniform(0.05, 0.6)
        sigma, wd = -zeta * w, w * np.sqrt(1 - zeta**2)
        blocks.append(np.array([[sigma, wd], [-wd, sigma]]))
        k -= 2
    if k:
        blocks.append(np.array([[-rng.uniform(wmin, wmax)]]))
    import scipy.linalg as la

    A = la.block_diag(*blocks)
    T = rng.normal(size=(n, n)) + 3 * np.eye(n)
    A = T @ A @ np.linalg.inv(T)
    B = rng.normal(size=(n, m))
    C = rng.normal(size=(p, n))
    D = rng.normal(size=(p, m)) if feedthrough else np.zeros((p, m))
    return StateSpaceModel(A, B, C, D)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance(capsys):
    """Record one PASS/FAIL line for an acceptance criterion."""
    def record(number: int, title: str, passed: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}  [{detail}]"
        _ACCEPTANCE[number] = line
        with capsys.disabled():
            print("\n" + line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
