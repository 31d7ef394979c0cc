import numpy as np
import pytest

from sdis import LimitState


def make_limit_state(fn, dim, name=""):
    """Wrap a plain callable (vectorized or scalar) as a counted scalar
    limit state."""
    return LimitState(dim, lambda x: float(fn(x)), name=name)


def linear_limit_state(dim=2, beta=3.5):
    """G(u) = beta - sum(u)/sqrt(n); exact Pf = Phi(-beta)."""
    s = np.sqrt(dim)
    return make_limit_state(lambda x: beta - np.sum(x) / s, dim, "linear")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
