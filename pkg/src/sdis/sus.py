"""Subset simulation with adaptive conditional sampling.

Serves two roles: a standalone baseline estimator, and the fallback
first-level estimator of the sequential directional sampler whenever
plain Monte Carlo turns out to be too expensive at the largest input
magnification.  In fallback mode the already-evaluated Monte Carlo
population is recycled verbatim as the first subset level, so the warm
start costs no new limit-state calls.

Conditional levels use the standard correlated-proposal chain
u' = rho u + sqrt(1 - rho^2) xi with the scale adapted in chain batches
toward a 44 percent acceptance rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import LimitState

__all__ = [
    "SusParams",
    "SusResult",
    "run_sus",
    "acs_chain_step",
    "update_scale",
]

ACCEPT_TARGET = 0.44
LAMBDA_INIT = 0.6


@dataclass(frozen=True)
class SusParams:
    n_level: int = 1000
    p0: float = 0.1
    max_levels: int = 30

    def __post_init__(self):
        if self.n_level < 10:
            raise ValueError("n_level must be at least 10")
        if not 0.0 < self.p0 < 1.0:
            raise ValueError("p0 must lie in (0, 1)")
        n_seed = self.p0 * self.n_level
        if abs(n_seed - round(n_seed)) > 1e-9 or round(n_seed) < 2:
            raise ValueError("p0 * n_level must be an integer >= 2")


@dataclass
class SusResult:
    pf_hat: float
    cov_hat: float
    thresholds: list[float]
    failure_points: list[tuple[np.ndarray, float]]
    total_evals: int
    levels: list[dict] = field(default_factory=list)
    accept_rates: list[float] = field(default_factory=list)


def acs_chain_step(L: LimitState, sigma: float, state: np.ndarray, b: float,
                   std: float, rng: np.random.Generator):
    """One conditional-sampling proposal targeting I(G(sigma u) <= b) phi(u).

    Consumes exactly one limit-state evaluation; returns the next state,
    its response if the move was accepted (None on rejection would lose
    information, so the proposal response is always returned), and the
    acceptance flag.
    """
    rho = math.sqrt(max(1.0 - std * std, 0.0))
    prop = rho * state + std * rng.standard_normal(state.shape)
    g = L(sigma * prop)
    if g <= b:
        return prop, g, True
    return state, g, False


def update_scale(lam: float, acc_hat: float, t: int, target: float = ACCEPT_TARGET) -> float:
    """Batch update of the proposal scale toward the target acceptance."""
    return lam * math.exp((acc_hat - target) / math.sqrt(t))


def _acs_level(L, sigma, seeds, g_seeds, b, chain_len, lam, rng, batch_frac=0.1):
    """Run one chain per seed, recording every post-step state.  Returns
    the new population (n_seeds * chain_len states), the carried scale,
    the realized acceptance rate, and the per-chain indicator layout."""
    n_chains = len(seeds)
    batch = max(1, math.ceil(batch_frac * n_chains))
    pop_u = np.empty((n_chains * chain_len, seeds.shape[1]))
    pop_g = np.empty(n_chains * chain_len)
    accepted = 0
    t_batch = 0
    done_in_batch = 0
    acc_in_batch = 0
    for i in range(n_chains):
        state, g_state = seeds[i], g_seeds[i]
        std = min(lam, 1.0)
        for t in range(chain_len):
            state, g_prop, ok = acs_chain_step(L, sigma, state, b, std, rng)
            if ok:
                g_state = g_prop
                accepted += 1
                acc_in_batch += 1
            pop_u[i * chain_len + t] = state
            pop_g[i * chain_len + t] = g_state
        done_in_batch += 1
        if done_in_batch == batch or i == n_chains - 1:
            t_batch += 1
            lam = update_scale(lam, acc_in_batch / (done_in_batch * chain_len), t_batch)
            done_in_batch = 0
            acc_in_batch = 0
    acc_rate = accepted / (n_chains * chain_len)
    return pop_u, pop_g, lam, acc_rate


def _chain_correlation(ind: np.ndarray) -> float:
    """Correlation factor gamma of chain-ordered failure indicators,
    shaped (n_chains, chain_len)."""
    n_chains, k = ind.shape
    p = float(ind.mean())
    r0 = p - p * p
    if r0 <= 0.0 or k < 2:
        return 0.0
    gamma = 0.0
    for tau in range(1, k):
        r = float((ind[:, :-tau] * ind[:, tau:]).mean()) - p * p
        gamma += 2.0 * (1.0 - tau / k) * (r / r0)
    return max(gamma, 0.0)


def run_sus(L: LimitState, sigma: float, params: SusParams, rng: np.random.Generator,
            warm_start: tuple[np.ndarray, np.ndarray] | None = None,
            final_population: bool = True) -> SusResult:
    """Estimate P(G(sigma u) <= 0) by subset simulation.

    warm_start supplies an already-evaluated first level (points, responses)
    of exactly n_level entries and is not re-evaluated.  When
    final_population is set, one extra conditional level is generated at
    threshold zero so that the returned failure points are a full
    population from the failure-conditioned density; fallback callers
    switch it off and use the failure subset of the last level instead,
    keeping the evaluation budget at n_level per conditional level.
    """
    N = params.n_level
    chain_len = round(1.0 / params.p0)
    evals0 = L.eval_count

    if warm_start is not None:
        U, g = warm_start
        U = np.asarray(U, dtype=float)
        g = np.asarray(g, dtype=float)
        if len(U) != N or len(g) != N:
            raise ValueError(f"warm start must contain exactly n_level = {N} points")
    else:
        U = rng.standard_normal((N, L.dim))
        g = np.array([L(sigma * u) for u in U])

    lam = LAMBDA_INIT
    thresholds: list[float] = []
    level_diag: list[dict] = []
    accept_rates: list[float] = []
    delta_sq = 0.0
    layout = None  # chain layout of the current population, None for MCS

    while True:
        n_pop = len(g)
        n_seed = round(params.p0 * n_pop)
        order = np.argsort(g, kind="stable")
        b = float(g[order[n_seed - 1]])
        final = b <= 0.0
        if final:
            b = 0.0
        thresholds.append(b)

        ind = (g <= b).astype(float)
        p_level = float(ind.mean()) if final else params.p0
        if layout is None:
            gamma = 0.0
        else:
            gamma = _chain_correlation(ind.reshape(layout))
        if p_level > 0.0:
            delta_sq += (1.0 - p_level) / (p_level * n_pop) * (1.0 + gamma)
        level_diag.append({"threshold": b, "p_level": p_level, "gamma": gamma,
                           "n_below": int(ind.sum())})

        if final:
            pf = params.p0 ** (len(thresholds) - 1) * p_level
            fail_mask = g <= 0.0
            if final_population and fail_mask.any():
                seeds = U[order[:n_seed]]
                g_seeds = g[order[:n_seed]]
                perm = rng.permutation(n_seed)
                U, g, lam, acc = _acs_level(L, sigma, seeds[perm], g_seeds[perm],
                                            0.0, chain_len, lam, rng)
                accept_rates.append(acc)
                failure_points = [(U[i].copy(), float(g[i])) for i in range(len(g))]
            else:
                failure_points = [(U[i].copy(), float(g[i]))
                                  for i in np.flatnonzero(fail_mask)]
            cov = math.sqrt(delta_sq) if pf > 0 else math.inf
            return SusResult(pf, cov, thresholds, failure_points,
                             L.eval_count - evals0, level_diag, accept_rates)

        if len(thresholds) >= params.max_levels:
            raise RuntimeError(f"no failure level reached within {params.max_levels} levels")

        seeds = U[order[:n_seed]]
        g_seeds = g[order[:n_seed]]
        perm = rng.permutation(n_seed)
        U, g, lam, acc = _acs_level(L, sigma, seeds[perm], g_seeds[perm],
                                    b, chain_len, lam, rng)
        accept_rates.append(acc)
        layout = (n_seed, chain_len)
