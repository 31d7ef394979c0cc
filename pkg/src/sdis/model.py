"""Limit-state models and the benchmark problem suite.

A limit state G maps a point u of the n-dimensional standard normal
space to a scalar; G(u) <= 0 is failure.  Problems posed on physical
random variables are mapped to standard space coordinate-wise through
``to_physical`` before G is formed, so every estimator in this package
only ever sees standard normal inputs.

The raw benchmark formulas (``*_g`` functions) broadcast over leading
axes and are safe to call on large sample blocks; they carry no state.
``LimitState`` wraps one of them with a per-instance evaluation counter
and a strict scalar contract, which is what the estimators consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .specfun import gamma_quantile, std_normal_cdf, std_normal_logcdf

__all__ = [
    "LimitState",
    "directional_value",
    "MarginalSpec",
    "to_physical",
    "to_standard",
    "BenchmarkCase",
    "benchmark",
    "benchmark_names",
    "polynomial_g",
    "metaball_g",
    "oscillator_g",
    "series_g",
    "gamma_sum_g",
    "linear_g",
]


class LimitState:
    """Scalar limit-state function with an evaluation counter.

    Each call evaluates G at one point and increments ``eval_count`` by
    exactly one.  Runs that must account for their evaluation budget
    own a fresh instance each (counters are per instance, never shared).
    """

    def __init__(self, dim: int, evaluator: Callable[[np.ndarray], float], name: str = ""):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.name = name
        self._evaluator = evaluator
        self.eval_count = 0

    def __call__(self, u) -> float:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dim,):
            raise ValueError(f"expected point of shape ({self.dim},), got {u.shape}")
        self.eval_count += 1
        g = float(self._evaluator(u))
        if math.isnan(g):
            raise ValueError("limit state returned NaN")
        return g


def directional_value(L: LimitState, sigma: float, a: np.ndarray, r: float) -> float:
    """G(sigma * r * a) for a unit direction a; one counted evaluation."""
    a = np.asarray(a, dtype=float)
    nrm = float(np.dot(a, a))
    if abs(nrm - 1.0) > 1e-9:
        raise ValueError(f"direction must have unit norm, got |a|^2 = {nrm}")
    return L(sigma * r * a)


# ---------------------------------------------------------------------------
# marginal transforms


@dataclass(frozen=True)
class MarginalSpec:
    """One physical marginal: 'normal' (param = std) or 'lognormal'
    (param = coefficient of variation)."""

    kind: str
    mean: float
    param: float

    def __post_init__(self):
        if self.kind not in ("normal", "lognormal"):
            raise ValueError(f"unknown marginal kind {self.kind!r}")
        if self.param <= 0:
            raise ValueError("spread parameter must be positive")
        if self.kind == "lognormal" and self.mean <= 0:
            raise ValueError("lognormal mean must be positive")


def _lognormal_pars(spec: MarginalSpec) -> tuple[float, float]:
    # the CoV enters directly as the log-space std (first-order lognormal
    # convention, exact as CoV -> 0); the mean is preserved exactly.  The
    # oscillator benchmark's reference probability assumes this convention.
    sig = spec.param
    return math.log(spec.mean) - 0.5 * sig * sig, sig


def to_physical(spec: MarginalSpec, u):
    """Map standard normal u to the physical marginal."""
    u = np.asarray(u, dtype=float)
    if spec.kind == "normal":
        out = spec.mean + spec.param * u
    else:
        mu, sig = _lognormal_pars(spec)
        out = np.exp(mu + sig * u)
    return float(out) if out.ndim == 0 else out


def to_standard(spec: MarginalSpec, x):
    """Inverse of to_physical."""
    x = np.asarray(x, dtype=float)
    if spec.kind == "normal":
        out = (x - spec.mean) / spec.param
    else:
        if np.any(x <= 0):
            raise ValueError("lognormal values must be positive")
        mu, sig = _lognormal_pars(spec)
        out = (np.log(x) - mu) / sig
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# benchmark limit states, vectorized over leading axes


def polynomial_g(u):
    """Two-dimensional polynomial with four disjoint failure islands.

    Physical inputs x1 ~ N(0, 0.05^2), x2 ~ N(0, 0.18^2).
    """
    u = np.asarray(u, dtype=float)
    x1 = 0.05 * u[..., 0]
    x2 = 0.18 * u[..., 1]
    return (
        5.0 * (4.0 - 2.1 * x1**2 + x1**4 / 3.0) * x1**2
        + 5.0 * x1 * x2
        + 10.0 * (x2**2 - 1.0) * x2**2
        + 2.6
    )


def metaball_g(u):
    """Two overlapping bump fields in standard space; the failure set is
    two bounded lobes plus the entire far field (G tends to -5)."""
    u = np.asarray(u, dtype=float)
    u1, u2 = u[..., 0], u[..., 1]
    b1 = (4.0 * (u1 + 2.0) ** 2 / 9.0 + u2**2 / 25.0) ** 2
    b2 = ((u1 - 2.5) ** 2 / 4.0 + (u2 - 0.5) ** 2 / 25.0) ** 2
    return 30.0 / (b1 + 1.0) + 20.0 / (b2 + 1.0) - 5.0


_OSC_MARGINALS = (
    MarginalSpec("lognormal", 1.5, 0.1),    # m_p
    MarginalSpec("lognormal", 0.01, 0.1),   # m_s
    MarginalSpec("lognormal", 1.0, 0.2),    # k_p
    MarginalSpec("lognormal", 0.01, 0.2),   # k_s
    MarginalSpec("lognormal", 0.05, 0.4),   # zeta_p
    MarginalSpec("lognormal", 0.02, 0.5),   # zeta_s
    MarginalSpec("lognormal", 22.0, 0.1),   # F_s
    MarginalSpec("lognormal", 100.0, 0.1),  # S_0
)


def oscillator_g(u):
    """Force capacity margin of a two-degree-of-freedom primary/secondary
    oscillator under white-noise base excitation; peak factor 3.

    Eight lognormal inputs: m_p, m_s, k_p, k_s, zeta_p, zeta_s, F_s, S_0.
    """
    u = np.asarray(u, dtype=float)
    cols = [to_physical(spec, u[..., i]) for i, spec in enumerate(_OSC_MARGINALS)]
    m_p, m_s, k_p, k_s, z_p, z_s, F_s, S0 = cols
    w_p = np.sqrt(k_p / m_p)
    w_s = np.sqrt(k_s / m_s)
    w_a = 0.5 * (w_p + w_s)
    z_a = 0.5 * (z_p + z_s)
    gam = m_s / m_p
    theta = (w_p - w_s) / w_a
    msr2 = (
        math.pi * S0 / (4.0 * z_s * w_s**3)
        * (z_a * z_s / (z_p * z_s * (4.0 * z_a**2 + theta**2) + gam * z_a**2))
        * ((z_p * w_p**3 + z_s * w_s**3) * w_p / (4.0 * z_a * w_a**4))
    )
    return F_s - 3.0 * k_s * np.sqrt(msr2)


def series_g(u, beta: float = 3.5):
    """Series system of two smooth nonlinear margins; failure probability
    is essentially dimension-independent."""
    u = np.asarray(u, dtype=float)
    n = u.shape[-1]
    s = u.sum(axis=-1) / math.sqrt(n)
    q = (u[..., 0] - u[..., 1]) ** 2 / 10.0
    return np.minimum(beta - s + q, beta + s + q)


def gamma_sum_g(u, c_a: float):
    """Sum of log normal-CDF terms against a fixed capacity c_a.

    Since Phi(-U_i) is uniform on (0, 1) for standard normal U_i, the
    aggregate -sum_i log Phi(-U_i) follows a Gamma(n, 1) distribution
    exactly, so choosing c_a as a Gamma(n, 1) quantile pins the failure
    probability by construction.
    """
    u = np.asarray(u, dtype=float)
    return c_a + std_normal_logcdf(-u).sum(axis=-1)


def linear_g(u, beta: float = 3.5):
    """Linear margin beta - sum(u)/sqrt(n); exact Pf = Phi(-beta)."""
    u = np.asarray(u, dtype=float)
    return beta - u.sum(axis=-1) / math.sqrt(u.shape[-1])


# ---------------------------------------------------------------------------
# registry


@dataclass(frozen=True)
class BenchmarkCase:
    """A named benchmark: reference failure probability plus a factory
    producing a fresh, independently counted LimitState."""

    name: str
    dim: int
    pf_ref: float
    ref_source: str
    factory: Callable[[], LimitState] = field(repr=False)

    def make(self) -> LimitState:
        return self.factory()


def _case(name, dim, pf_ref, source, g) -> BenchmarkCase:
    return BenchmarkCase(name, dim, pf_ref, source,
                         lambda: LimitState(dim, g, name=name))


_FIXED_DIM = {"polynomial": 2, "metaball": 2, "oscillator": 8}
_FREE_DIM = ("series", "gamma-sum", "linear")


def benchmark_names() -> tuple[str, ...]:
    return tuple(_FIXED_DIM) + _FREE_DIM


def benchmark(name: str, dim: int | None = None) -> BenchmarkCase:
    """Look up a benchmark case by name.

    'polynomial', 'metaball' and 'oscillator' have fixed dimension;
    'series', 'gamma-sum' and 'linear' require ``dim``.
    """
    if name in _FIXED_DIM:
        d = _FIXED_DIM[name]
        if dim is not None and dim != d:
            raise ValueError(f"benchmark {name!r} has fixed dimension {d}")
        if name == "polynomial":
            return _case(name, 2, 3.71e-5, "large-sample Monte Carlo", polynomial_g)
        if name == "metaball":
            return _case(name, 2, 1.12e-5, "large-sample Monte Carlo", metaball_g)
        return _case(name, 8, 4.42e-5, "large-sample Monte Carlo", oscillator_g)

    if name not in _FREE_DIM:
        raise ValueError(f"unknown benchmark {name!r}; known: {benchmark_names()}")
    if dim is None:
        raise ValueError(f"benchmark {name!r} requires an input dimension")
    if name == "series":
        if dim < 2:
            raise ValueError("series benchmark needs dim >= 2")
        return _case(name, dim, 2.92e-4, "large-sample Monte Carlo", series_g)
    if name == "gamma-sum":
        c_a = gamma_quantile(dim, 1.0 - 5e-5)
        return _case(name, dim, 5e-5, "exact by construction (gamma tail)",
                     lambda u: gamma_sum_g(u, c_a))
    # linear
    return _case(name, dim, float(std_normal_cdf(-3.5)), "exact normal tail", linear_g)
