"""Benchmark limit states: frozen point values, transform round trips,
and Monte Carlo cross-checks of the registry's reference probabilities."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdis import (
    LimitState,
    MarginalSpec,
    benchmark,
    benchmark_names,
    directional_value,
    gamma_cdf,
    gamma_quantile,
    std_normal_cdf,
    std_normal_logcdf,
)
from sdis.model import (
    gamma_sum_g,
    linear_g,
    metaball_g,
    oscillator_g,
    polynomial_g,
    series_g,
    to_physical,
    to_standard,
)

# ---------------------------------------------------------------------------
# frozen point values


def test_polynomial_origin_value():
    # at u = 0 every monomial vanishes, leaving the constant
    assert polynomial_g(np.zeros(2)) == pytest.approx(2.6, abs=1e-14)


def test_metaball_origin_value():
    # 30/((16/9)^2 + 1) + 20/((2.5^2/4 + 0.01)^2 + 1) - 5, by hand
    b1 = (16.0 / 9.0) ** 2
    b2 = (2.5**2 / 4.0 + 0.5**2 / 25.0) ** 2
    ref = 30.0 / (b1 + 1.0) + 20.0 / (b2 + 1.0) - 5.0
    assert ref == pytest.approx(7.9697967408, abs=1e-9)
    assert metaball_g(np.zeros(2)) == pytest.approx(ref, rel=1e-14)


def test_metaball_far_field_fails():
    assert metaball_g(np.array([40.0, 0.0])) == pytest.approx(-5.0, abs=1e-2)


def test_series_origin_and_symmetry():
    for n in (2, 10, 100):
        assert series_g(np.zeros(n)) == pytest.approx(3.5, abs=1e-14)
    u = np.array([1.0, -0.5, 0.3, 0.2])
    # flipping the sign of every input swaps the two branches only
    assert series_g(u) == pytest.approx(series_g(-u), rel=1e-14)


def test_linear_exact_values():
    u = np.array([1.0, 2.0, 3.0, -2.0])
    assert linear_g(u) == pytest.approx(3.5 - 4.0 / 2.0, rel=1e-15)
    case = benchmark("linear", 12)
    assert case.pf_ref == pytest.approx(float(std_normal_cdf(-3.5)), rel=1e-12)


def test_vectorized_matches_scalar(rng):
    fns = [
        (polynomial_g, 2),
        (metaball_g, 2),
        (oscillator_g, 8),
        (series_g, 10),
        (linear_g, 10),
        (lambda u: gamma_sum_g(u, 25.0), 10),
    ]
    for fn, d in fns:
        batch = rng.standard_normal((40, d))
        row_wise = np.array([float(fn(x)) for x in batch])
        np.testing.assert_allclose(fn(batch), row_wise, rtol=1e-13)


# ---------------------------------------------------------------------------
# marginal transforms


def test_marginal_spec_validation():
    with pytest.raises(ValueError):
        MarginalSpec("weird", 1.0, 0.1)
    with pytest.raises(ValueError):
        MarginalSpec("normal", 1.0, 0.0)
    with pytest.raises(ValueError):
        MarginalSpec("lognormal", -1.0, 0.1)


@given(
    u=st.floats(min_value=-8.0, max_value=8.0),
    mean=st.floats(min_value=0.01, max_value=100.0),
    par=st.floats(min_value=0.01, max_value=1.0),
    kind=st.sampled_from(["normal", "lognormal"]),
)
@settings(deadline=None)
def test_transform_round_trip(u, mean, par, kind):
    spec = MarginalSpec(kind, mean, par)
    x = to_physical(spec, u)
    assert to_standard(spec, x) == pytest.approx(u, abs=1e-10)


def test_lognormal_transform_moments():
    # the log-space std equals the nominal CoV and the mean is preserved
    spec = MarginalSpec("lognormal", 22.0, 0.1)
    med = to_physical(spec, 0.0)
    assert math.log(to_physical(spec, 1.0) / med) == pytest.approx(0.1, rel=1e-12)
    rng = np.random.default_rng(7)
    draws = to_physical(spec, rng.standard_normal(400_000))
    assert draws.mean() == pytest.approx(22.0, rel=5e-3)


def test_to_standard_rejects_nonpositive_lognormal():
    spec = MarginalSpec("lognormal", 1.0, 0.2)
    with pytest.raises(ValueError):
        to_standard(spec, -0.5)


# ---------------------------------------------------------------------------
# oscillator: independent scalar re-derivation


def _oscillator_reference(u):
    """Straight-line reimplementation of the oscillator margin, kept
    deliberately independent of the vectorized production code."""
    means = [1.5, 0.01, 1.0, 0.01, 0.05, 0.02, 22.0, 100.0]
    covs = [0.1, 0.1, 0.2, 0.2, 0.4, 0.5, 0.1, 0.1]
    x = [
        math.exp(math.log(m) - 0.5 * c * c + c * ui)
        for m, c, ui in zip(means, covs, u)
    ]
    m_p, m_s, k_p, k_s, z_p, z_s, F_s, S0 = x
    w_p = math.sqrt(k_p / m_p)
    w_s = math.sqrt(k_s / m_s)
    w_a = (w_p + w_s) / 2.0
    z_a = (z_p + z_s) / 2.0
    gam = m_s / m_p
    th = (w_p - w_s) / w_a
    t1 = math.pi * S0 / (4.0 * z_s * w_s**3)
    t2 = z_a * z_s / (z_p * z_s * (4.0 * z_a**2 + th**2) + gam * z_a**2)
    t3 = (z_p * w_p**3 + z_s * w_s**3) * w_p / (4.0 * z_a * w_a**4)
    return F_s - 3.0 * k_s * math.sqrt(t1 * t2 * t3)


def test_oscillator_matches_reference_implementation(rng):
    for _ in range(50):
        u = rng.standard_normal(8)
        assert oscillator_g(u) == pytest.approx(
            _oscillator_reference(u), rel=1e-12
        )


def test_oscillator_monotone_in_capacity():
    # increasing u7 raises the force capacity F_s and the margin with it
    u = np.zeros(8)
    lo = oscillator_g(u)
    u[6] = 1.0
    assert oscillator_g(u) > lo


# ---------------------------------------------------------------------------
# registry


def test_benchmark_registry_contents():
    assert set(benchmark_names()) == {
        "polynomial",
        "metaball",
        "oscillator",
        "series",
        "gamma-sum",
        "linear",
    }
    assert benchmark("polynomial").dim == 2
    assert benchmark("metaball").dim == 2
    assert benchmark("oscillator").dim == 8
    assert benchmark("series", 100).dim == 100
    refs = {
        "polynomial": 3.71e-5,
        "metaball": 1.12e-5,
        "oscillator": 4.42e-5,
    }
    for name, pf in refs.items():
        assert benchmark(name).pf_ref == pytest.approx(pf)
    assert benchmark("series", 10).pf_ref == pytest.approx(2.92e-4)
    assert benchmark("gamma-sum", 10).pf_ref == pytest.approx(5e-5)


def test_benchmark_registry_errors():
    with pytest.raises(ValueError):
        benchmark("nope")
    with pytest.raises(ValueError):
        benchmark("polynomial", 3)
    with pytest.raises(ValueError):
        benchmark("series")
    with pytest.raises(ValueError):
        benchmark("series", 1)


def test_fresh_instances_have_private_counters():
    case = benchmark("polynomial")
    a, b = case.make(), case.make()
    a(np.zeros(2))
    assert a.eval_count == 1 and b.eval_count == 0


def test_limit_state_contract():
    L = LimitState(2, lambda u: float(u[0]))
    with pytest.raises(ValueError):
        L(np.zeros(3))
    with pytest.raises(ValueError):
        LimitState(0, lambda u: 0.0)
    bad = LimitState(1, lambda u: float("nan"))
    with pytest.raises(ValueError):
        bad(np.zeros(1))
    assert L.eval_count == 0
    L(np.array([2.0, 0.0]))
    assert L.eval_count == 1


def test_directional_value_requires_unit_direction():
    L = LimitState(2, lambda u: float(u[0]))
    a = np.array([1.0, 0.0])
    assert directional_value(L, 2.0, a, 3.0) == pytest.approx(6.0)
    with pytest.raises(ValueError):
        directional_value(L, 2.0, np.array([1.0, 1.0]), 3.0)


# ---------------------------------------------------------------------------
# Monte Carlo cross-checks of reference probabilities


def _mc_pf(fn, dim, n, seed, block=200_000):
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < n:
        m = min(block, n - done)
        hits += int(np.count_nonzero(fn(rng.standard_normal((m, dim))) <= 0.0))
        done += m
    return hits / n


def test_series_reference_mc():
    n = 1_000_000
    pf = _mc_pf(series_g, 10, n, seed=314159)
    se = math.sqrt(2.92e-4 * (1 - 2.92e-4) / n)
    assert abs(pf - 2.92e-4) < 3.0 * se


def test_linear_reference_mc():
    n = 400_000
    beta = 1.5  # raised Pf so desk-scale MC resolves it
    pf = _mc_pf(lambda u: linear_g(u, beta=beta), 6, n, seed=8)
    p_ref = float(std_normal_cdf(-beta))
    se = math.sqrt(p_ref * (1 - p_ref) / n)
    assert abs(pf - p_ref) < 3.0 * se


def test_gamma_sum_failure_event_is_exact_gamma_tail(rng):
    # G(u) <= 0 is, identically, sum_i(-log Phi(-u_i)) >= c_a
    c_a = 12.0
    u = rng.standard_normal((1000, 7))
    lhs = gamma_sum_g(u, c_a) <= 0.0
    rhs = (-std_normal_logcdf(-u)).sum(axis=1) >= c_a
    assert np.array_equal(lhs, rhs)


def test_gamma_sum_inflated_probability_mc():
    # with c_a at the 1e-2 tail the construction is directly testable
    n_dim, p_target, n = 10, 1e-2, 200_000
    c_a = gamma_quantile(n_dim, 1.0 - p_target)
    assert 1.0 - gamma_cdf(n_dim, c_a) == pytest.approx(p_target, rel=1e-10)
    pf = _mc_pf(lambda u: gamma_sum_g(u, c_a), n_dim, n, seed=99)
    se = math.sqrt(p_target * (1 - p_target) / n)
    assert abs(pf - p_target) < 3.0 * se


@pytest.mark.slow
def test_oscillator_reference_mc():
    n = 20_000_000
    pf = _mc_pf(oscillator_g, 8, n, seed=271828)
    assert abs(pf / 4.42e-5 - 1.0) < 0.15


@pytest.mark.slow
def test_polynomial_reference_mc():
    n = 20_000_000
    pf = _mc_pf(polynomial_g, 2, n, seed=161803)
    assert abs(pf / 3.71e-5 - 1.0) < 0.15


@pytest.mark.slow
def test_metaball_reference_mc():
    n = 20_000_000
    pf = _mc_pf(metaball_g, 2, n, seed=141421)
    assert abs(pf / 1.12e-5 - 1.0) < 0.20
