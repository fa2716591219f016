import numpy as np
import pytest

from bvgm.data import ChainState, Design
from bvgm.ising import build_field

# acceptance lines are collected here and echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def random_field(p: int, seed: int, scale: float = 1.0):
    """A correlated regression-derived field with a few strong couplings."""
    r = np.random.default_rng(seed)
    n = 3 * p
    X = r.standard_normal((n, p)) + 0.8 * r.standard_normal((n, 1))
    X = X - X.mean(0)
    X /= np.linalg.norm(X, axis=0)
    beta = 2 * scale * r.standard_normal(p)
    y = X[:, :3] @ beta[:3] + 0.5 * r.standard_normal(n)
    y -= y.mean()
    st = ChainState.initial(p)
    st.beta = beta
    st.phi = 1.0 / np.var(y)
    return build_field(Design.linear(X), st, y=y)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
