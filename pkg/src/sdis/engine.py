"""Sequential directional importance sampling over magnified limit states.

The failure probability is factored as

    P_f = P_sigma1 * prod_i S_i,

where P_sigma1 = P(G(sigma_1 u) <= 0) at the largest input magnification
sigma_1 and each S_i is the mean of directional importance weights
between consecutive magnifications.  Along a unit direction a, the
conditional failure probability is an exact chi-mass expression in the
roots of G(sigma r a) = 0, so each weight costs no limit-state calls
once the roots are known; roots found at one level are rescaled, not
recomputed, when candidate magnifications are screened.

The first factor is estimated by counting standard normal draws one at
a time until n_s failures arrive (an unbiased stopping-rule estimator);
if the failure event at sigma_1 is too rare for that to be affordable,
the already-drawn population seeds a subset-simulation fallback.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from scipy.special import gammainc, gammaincc

from .kriging import RootSet, find_roots, search_interval
from .model import LimitState
from .specfun import IntervalUnion, chi_interval_masses, sample_truncated_chi
from .sus import LAMBDA_INIT, SusParams, SusResult, acs_chain_step, run_sus, update_scale

__all__ = [
    "SdisParams",
    "FirstLevel",
    "LevelRecord",
    "RunResult",
    "MoveResult",
    "failure_intervals",
    "conditional_prob",
    "estimate_first_level",
    "adapt_sigma",
    "level_ratio",
    "resample",
    "mcmc_move",
    "run",
]


@dataclass(frozen=True)
class SdisParams:
    """Tuning constants of the sequential directional sampler."""

    sigma1: float = 3.0
    n_s: int = 150
    chain_len: int = 5
    delta_target: float = 1.5
    alpha: float = 1e-10
    eps_learn: float = 5e-4
    fallback_factor: int = 10
    p0: float = 0.1
    max_added: int = 30
    max_levels: int = 50
    init_design_size: int | None = None  # None: adaptive 3 or 4 per level

    def __post_init__(self):
        if self.sigma1 <= 1.0:
            raise ValueError("sigma1 must exceed 1")
        if self.n_s < 2:
            raise ValueError("n_s must be at least 2")
        if self.chain_len < 1:
            raise ValueError("chain_len must be at least 1")
        if not 0.0 < self.p0 < 1.0:
            raise ValueError("p0 must lie in (0, 1)")
        if self.fallback_factor * self.p0 < 1.0:
            raise ValueError("fallback_factor * p0 must be >= 1 so the fallback "
                             "level can hand over n_s failure points")
        if self.delta_target <= 0.0:
            raise ValueError("delta_target must be positive")
        if self.init_design_size not in (None, 3, 4):
            raise ValueError("init_design_size must be None, 3 or 4")


# ---------------------------------------------------------------------------
# conditional radial failure probability


def failure_intervals(roots: tuple[float, ...]) -> IntervalUnion:
    """Radial failure set implied by an ascending root list, under the
    convention that the origin is safe: odd-indexed gaps are failed, and
    an odd root count fails out to infinity."""
    roots = tuple(float(r) for r in roots)
    if any(b <= a for a, b in zip(roots, roots[1:])) or any(r < 0 for r in roots):
        raise ValueError("roots must be nonnegative and strictly ascending")
    pairs = []
    for j in range(0, len(roots) - 1, 2):
        pairs.append((roots[j], roots[j + 1]))
    if len(roots) % 2 == 1:
        pairs.append((roots[-1], math.inf))
    return IntervalUnion(tuple(pairs))


def conditional_prob(roots: tuple[float, ...], n: int) -> float:
    """P(R in failure set along the direction), R chi-distributed with n
    degrees of freedom.  Equals the alternating sum of chi CDF values at
    the roots, but is evaluated interval-wise on whichever tail is
    numerically stable."""
    F = failure_intervals(roots)
    if len(F) == 0:
        return 0.0
    return float(chi_interval_masses(n, F).sum())


class _ScaledMasses:
    """Vectorized conditional probabilities of many directions under a
    common root rescaling, for magnification screening.

    Pair endpoints are flattened once; a candidate magnification only
    rescales them, so screening hundreds of candidates costs a handful
    of vectorized incomplete-gamma calls and no limit-state work.
    """

    def __init__(self, root_sets: list[RootSet], n: int):
        lo, hi, rows = [], [], []
        for k, rs in enumerate(root_sets):
            F = failure_intervals(rs.roots)
            for a, b in F.intervals:
                lo.append(a)
                hi.append(b)
                rows.append(k)
        self.n = n
        self._lo = np.asarray(lo)
        self._hi = np.asarray(hi)
        self._gather = np.zeros((len(root_sets), len(lo)))
        for i, k in enumerate(rows):
            self._gather[k, i] = 1.0
        self.n_dirs = len(root_sets)

    def probs(self, scale) -> np.ndarray:
        """Per-direction failure mass with all roots multiplied by scale;
        scale may be a scalar or a vector of candidates."""
        scale = np.atleast_1d(np.asarray(scale, dtype=float))
        if self._lo.size == 0:
            out = np.zeros((len(scale), self.n_dirs))
            return out[0] if scale.size == 1 else out
        a = 0.5 * self.n
        y_lo = 0.5 * np.square(scale[:, None] * self._lo[None, :])
        y_hi = 0.5 * np.square(scale[:, None] * self._hi[None, :])
        cdf_lo = gammainc(a, y_lo)
        lower = cdf_lo < 0.5
        mass = np.where(lower,
                        gammainc(a, y_hi) - cdf_lo,
                        gammaincc(a, y_lo) - gammaincc(a, y_hi))
        mass = np.maximum(mass, 0.0)
        out = mass @ self._gather.T
        return out[0] if scale.size == 1 else out


# ---------------------------------------------------------------------------
# first-level estimator


@dataclass
class FirstLevel:
    method: str                 # "mcs" or "sus"
    p_hat: float
    cov: float
    points: list[tuple[np.ndarray, float]]
    n_draws: int                # standard normal draws spent before any fallback
    sus: SusResult | None = None


def estimate_first_level(L: LimitState, params: SdisParams,
                         rng: np.random.Generator) -> FirstLevel:
    """Estimate P(G(sigma_1 u) <= 0) by drawing u ~ phi_n one at a time
    until n_s failures occur: p = (n_s - 1) / (N - 1) is unbiased for the
    stopping draw count N.  If fallback_factor * n_s draws pass first,
    the population is handed to subset simulation as a free warm start.
    """
    cap = params.fallback_factor * params.n_s
    us = np.empty((cap, L.dim))
    gs = np.empty(cap)
    n_fail = 0
    for i in range(cap):
        u = rng.standard_normal(L.dim)
        g = L(params.sigma1 * u)
        us[i] = u
        gs[i] = g
        if g <= 0.0:
            n_fail += 1
            if n_fail == params.n_s:
                N = i + 1
                p = (params.n_s - 1) / (N - 1)
                cov = math.sqrt((1.0 - p) / ((N - 2) * p)) if N > 2 and p < 1.0 else 0.0
                pts = [(us[j].copy(), float(gs[j])) for j in range(N) if gs[j] <= 0.0]
                return FirstLevel("mcs", p, cov, pts, N)

    res = run_sus(L, params.sigma1, SusParams(n_level=cap, p0=params.p0), rng,
                  warm_start=(us, gs), final_population=False)
    pts = res.failure_points
    if len(pts) > params.n_s:
        keep = rng.choice(len(pts), size=params.n_s, replace=False)
        pts = [pts[int(j)] for j in keep]
    return FirstLevel("sus", res.pf_hat, res.cov_hat, pts, cap, res)


# ---------------------------------------------------------------------------
# magnification adaptation and level ratios


def _delta_w(weights: np.ndarray) -> float:
    m = float(weights.mean())
    if m <= 0.0:
        return math.inf
    return float(weights.std(ddof=1)) / m


def adapt_sigma(root_sets: list[RootSet], p_curr: np.ndarray, sigma_i: float,
                n: int, delta_target: float, grid_size: int = 200) -> float:
    """Choose the next magnification sigma in [1, sigma_i] whose weight
    CoV is closest to delta_target; returns 1 outright when even the
    final level already meets the target."""
    p_curr = np.asarray(p_curr, dtype=float)
    if not np.any(p_curr > 0.0):
        raise RuntimeError("degenerate level: no direction has failure mass")
    sm = _ScaledMasses(root_sets, n)
    valid = p_curr > 0.0

    def weights(scale_vec):
        p_next = sm.probs(scale_vec)
        w = np.zeros_like(p_next)
        w[..., valid] = p_next[..., valid] / p_curr[valid]
        return w

    if _delta_w(weights(sigma_i / 1.0)) <= delta_target:
        return 1.0

    cands = np.linspace(1.0, sigma_i, grid_size)
    w_all = weights(sigma_i / cands)
    means = w_all.mean(axis=1)
    stds = w_all.std(axis=1, ddof=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        deltas = np.where(means > 0, stds / means, math.inf)
    objective = np.abs(deltas - delta_target)
    i = int(np.argmin(objective))

    def obj(sig: float) -> float:
        # scalar scale: probs and hence weights come back 1-D already
        d = _delta_w(weights(sigma_i / sig))
        return abs(d - delta_target)

    a, b = cands[max(i - 1, 0)], cands[min(i + 1, grid_size - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c, d_ = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = obj(c), obj(d_)
    for _ in range(25):
        if fc < fd:
            b, d_, fd = d_, c, fc
            c = b - invphi * (b - a)
            fc = obj(c)
        else:
            a, c, fc = c, d_, fd
            d_ = a + invphi * (b - a)
            fd = obj(d_)
    best = 0.5 * (a + b)
    best = min(max(best, 1.0), sigma_i)
    if best - 1.0 < 1e-9:
        return 1.0
    # keep the grid point if refinement drifted off the basin floor
    if obj(best) > objective[i]:
        best = float(cands[i])
    return float(best)


def level_ratio(root_sets: list[RootSet], p_curr: np.ndarray, sigma_i: float,
                sigma_next: float, n: int) -> tuple[float, float, np.ndarray]:
    """Mean directional importance weight between magnifications, its
    estimator CoV delta_W / sqrt(n_s), and the individual weights."""
    p_curr = np.asarray(p_curr, dtype=float)
    if sigma_next == sigma_i:
        w = np.ones(len(root_sets))
        return 1.0, 0.0, w
    if not 1.0 <= sigma_next < sigma_i:
        raise ValueError("need 1 <= sigma_next < sigma_i")
    sm = _ScaledMasses(root_sets, n)
    p_next = sm.probs(sigma_i / sigma_next)
    w = np.where(p_curr > 0.0, p_next / np.where(p_curr > 0, p_curr, 1.0), 0.0)
    s_hat = float(w.mean())
    if s_hat <= 0.0:
        raise RuntimeError("degenerate ratio level: all weights vanish")
    delta_s = _delta_w(w) / math.sqrt(len(w))
    return s_hat, delta_s, w


# ---------------------------------------------------------------------------
# resample and move


def resample(dirs: list[np.ndarray], root_sets: list[RootSet], weights: np.ndarray,
             sigma_i: float, sigma_next: float, n_s: int,
             rng: np.random.Generator) -> np.ndarray:
    """Draw n_s seed points from the next level's directional importance
    density: directions multinomially by weight, radii exactly from the
    chi distribution truncated to the rescaled radial failure set."""
    weights = np.asarray(weights, dtype=float)
    total = float(weights.sum())
    if total <= 0.0:
        raise RuntimeError("cannot resample: all weights are zero")
    n = dirs[0].shape[0]
    c = sigma_i / sigma_next
    idx = rng.choice(len(weights), size=n_s, p=weights / total)
    seeds = np.empty((n_s, n))
    cache: dict[int, IntervalUnion] = {}
    for row, k in enumerate(idx):
        k = int(k)
        if k not in cache:
            cache[k] = failure_intervals(tuple(c * r for r in root_sets[k].roots))
        r = sample_truncated_chi(n, cache[k], rng)
        seeds[row] = r * dirs[k]
    return seeds


@dataclass
class MoveResult:
    states: np.ndarray
    g_values: list[float | None]   # None when a chain never accepted
    accept_rate: float
    n_evals: int


def mcmc_move(L: LimitState, sigma: float, seeds: np.ndarray, chain_len: int,
              rng: np.random.Generator, batch_frac: float = 0.1) -> MoveResult:
    """Advance every seed chain_len conditional-sampling steps targeting
    I(G(sigma u) <= 0) phi_n(u) and keep only the final states.

    Seeds are taken on trust and never evaluated; a seed placed on the
    safe side by surrogate error is repaired by its first accepted move.
    Consumes exactly len(seeds) * chain_len limit-state evaluations.
    """
    n_chains = len(seeds)
    batch = max(1, math.ceil(batch_frac * n_chains))
    finals = np.empty_like(seeds)
    g_finals: list[float | None] = [None] * n_chains
    lam = LAMBDA_INIT
    accepted = 0
    t_batch = 0
    done_in_batch = 0
    acc_in_batch = 0
    for i in range(n_chains):
        state = seeds[i]
        g_state: float | None = None
        std = min(lam, 1.0)
        for _ in range(chain_len):
            state, g_prop, ok = acs_chain_step(L, sigma, state, 0.0, std, rng)
            if ok:
                g_state = g_prop
                accepted += 1
                acc_in_batch += 1
        finals[i] = state
        g_finals[i] = g_state
        done_in_batch += 1
        if done_in_batch == batch or i == n_chains - 1:
            t_batch += 1
            lam = update_scale(lam, acc_in_batch / (done_in_batch * chain_len), t_batch)
            done_in_batch = 0
            acc_in_batch = 0
    return MoveResult(finals, g_finals, accepted / (n_chains * chain_len),
                      n_chains * chain_len)


# ---------------------------------------------------------------------------
# full run


@dataclass
class LevelRecord:
    sigma: float
    sigma_next: float
    s_hat: float
    delta_s: float
    evals_roots: int
    evals_move: int
    root_hist: dict[int, int]
    n_nonconverged: int
    mean_design_size: float
    invalid_seeds: int


@dataclass
class RunResult:
    pf_hat: float
    cov_hat: float
    total_evals: int
    first_level: FirstLevel
    levels: list[LevelRecord]
    sigma_sequence: list[float]
    fallback: bool
    converged: bool
    eval_breakdown: dict = field(default_factory=dict)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def root_histogram(self) -> dict[int, int]:
        hist: Counter = Counter()
        for rec in self.levels:
            hist.update(rec.root_hist)
        return dict(hist)


def _level_root_search(L, sigma, dirs, interval, params, origin_value):
    """Root searches for all directions of one level, with the initial
    design size adapted from the first block of directions."""
    n_s1 = max(1, round(0.2 * len(dirs)))
    sizes: list[int] = []
    root_sets: list[RootSet] = []
    invalid = 0
    use_four = False
    for i, (a, r2, g2) in enumerate(dirs):
        if params.init_design_size is not None:
            k = params.init_design_size
        elif i < n_s1:
            k = 3
        else:
            if i == n_s1:
                use_four = (sum(sizes) / n_s1) > 4.0
            k = 4 if use_four else 3
        rs = find_roots(L, sigma, a, interval, r2=r2, g_r2=g2,
                        origin_value=origin_value, init_k=k,
                        eps=params.eps_learn, max_added=params.max_added)
        if g2 is None and rs.design_y[1] > 0.0:
            invalid += 1  # resampled seed actually sat in the safe domain
        sizes.append(rs.design_size)
        root_sets.append(rs)
    return root_sets, sizes, invalid


def run(L: LimitState, params: SdisParams, rng) -> RunResult:
    """Full sequential directional importance sampling estimate of
    P(G(u) <= 0) under u ~ phi_n."""
    rng = np.random.default_rng(rng)
    evals0 = L.eval_count

    origin_value = L(np.zeros(L.dim))
    if origin_value <= 0.0:
        raise ValueError("G(0) <= 0: the origin must lie in the safe domain")

    first = estimate_first_level(L, params, rng)
    first_evals = L.eval_count - evals0 - 1

    dirs: list[tuple[np.ndarray, float, float | None]] = []
    for u, g in first.points:
        r = float(np.linalg.norm(u))
        dirs.append((u / r, r, g))

    factors = [first.p_hat]
    cov_sq = first.cov ** 2
    sigma = params.sigma1
    sigma_seq = [sigma]
    levels: list[LevelRecord] = []
    converged = True

    while True:
        interval = search_interval(L.dim, params.alpha, sigma)
        before = L.eval_count
        root_sets, sizes, invalid = _level_root_search(
            L, sigma, dirs, interval, params, origin_value)
        rf_evals = L.eval_count - before

        p_curr = np.array([conditional_prob(rs.roots, L.dim) for rs in root_sets])
        sigma_next = adapt_sigma(root_sets, p_curr, sigma, L.dim, params.delta_target)
        s_hat, delta_s, w = level_ratio(root_sets, p_curr, sigma, sigma_next, L.dim)

        factors.append(s_hat)
        cov_sq += delta_s ** 2
        rec = LevelRecord(
            sigma=sigma, sigma_next=sigma_next, s_hat=s_hat, delta_s=delta_s,
            evals_roots=rf_evals, evals_move=0,
            root_hist=dict(Counter(len(rs.roots) for rs in root_sets)),
            n_nonconverged=sum(1 for rs in root_sets if not rs.converged),
            mean_design_size=float(np.mean(sizes)), invalid_seeds=invalid)
        levels.append(rec)
        sigma_seq.append(sigma_next)
        if rec.n_nonconverged:
            converged = False

        if sigma_next <= 1.0 + 1e-9:
            break
        if len(levels) >= params.max_levels:
            converged = False
            break

        seeds = resample([d[0] for d in dirs], root_sets, w, sigma, sigma_next,
                         params.n_s, rng)
        move = mcmc_move(L, sigma_next, seeds, params.chain_len, rng)
        rec.evals_move = move.n_evals
        dirs = []
        for u, g in zip(move.states, move.g_values):
            r = float(np.linalg.norm(u))
            dirs.append((u / r, r, g))
        sigma = sigma_next

    pf = float(np.prod(factors))
    total = L.eval_count - evals0
    breakdown = {
        "origin": 1,
        "first_level": first_evals,
        "root_search": int(sum(rec.evals_roots for rec in levels)),
        "mcmc": int(sum(rec.evals_move for rec in levels)),
    }
    return RunResult(pf, math.sqrt(cov_sq), total, first, levels, sigma_seq,
                     first.method == "sus", converged, breakdown)
