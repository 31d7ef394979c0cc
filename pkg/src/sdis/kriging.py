"""One-dimensional ordinary Kriging and the active-learning multi-root finder.

Along a fixed unit direction a, the limit state restricted to the ray,
y(r) = G(sigma r a), is approximated by an ordinary Kriging model with a
Matern 5/2 correlation.  New radii are added where a misclassification
learning function is largest until the surrogate separates safe from
failed radii confidently; all roots of the posterior mean inside the
radial search interval are then extracted at once.  This resolves
directions that cross the limit-state surface several times, which a
single-root bisection would silently miss.

Root refinement bisects the posterior mean only, so it consumes no
limit-state evaluations beyond those spent on the design itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .model import LimitState, directional_value
from .specfun import chi_quantile, chi_quantile_upper, std_normal_cdf, std_normal_pdf

__all__ = [
    "SearchInterval",
    "search_interval",
    "KrigingModel",
    "fit_kriging",
    "learning_value",
    "initial_design",
    "fourth_radius",
    "RootSet",
    "find_roots",
]

# Acquisition constants.  Tolerances are relative to the interval width.
GRID_SIZE = 1000
EXCLUDE_FRAC = 1e-3      # candidate radii this close to the design are skipped
ROOT_TOL_FRAC = 1e-6     # posterior-mean bisection tolerance
MERGE_FRAC = 1e-4        # root pairs closer than this bracket negligible slivers
NUGGET0 = 1e-10
NUGGET_MAX = 1e-4
THETA_BOUNDS = (1e-2, 10.0)  # in units of the normalized design span


@dataclass(frozen=True)
class SearchInterval:
    """Radial search window [r_minus, r_plus] holding all but alpha of the
    chi mass; the lower end is additionally divided by the current
    magnification so that roots of early levels cannot fall below it."""

    r_minus: float
    r_plus: float
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.r_minus < self.r_plus:
            raise ValueError(f"need 0 <= r_minus < r_plus, got ({self.r_minus}, {self.r_plus})")

    @property
    def width(self) -> float:
        return self.r_plus - self.r_minus


def search_interval(n: int, alpha: float, sigma: float) -> SearchInterval:
    if not 0.0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 0.5)")
    if sigma < 1.0:
        raise ValueError("magnification must be >= 1")
    lo = chi_quantile(n, alpha / 2.0) / sigma
    hi = chi_quantile_upper(n, alpha / 2.0)
    return SearchInterval(lo, hi, alpha)


# ---------------------------------------------------------------------------
# ordinary Kriging


def _matern52(d, theta):
    h = math.sqrt(5.0) * d / theta
    return (1.0 + h + h * h / 3.0) * np.exp(-h)


@dataclass(frozen=True)
class KrigingModel:
    """Fitted ordinary Kriging model; immutable.

    Radii are normalized affinely to [0, 1] and responses standardized
    before fitting; ``beta0`` and ``sigma0_sq`` are reported in original
    response units.  ``degenerate`` marks an all-constant response, for
    which the prediction is that constant with zero variance.
    """

    x: np.ndarray
    y: np.ndarray
    theta: float
    beta0: float
    sigma0_sq: float
    nugget: float
    degenerate: bool
    _x0: float
    _xs: float
    _ym: float
    _ys: float
    _chol: tuple
    _w: np.ndarray          # K^-1 (y_std - beta0_std)
    _kinv_ones: np.ndarray  # K^-1 1
    _ftf: float             # 1' K^-1 1
    _beta0_std: float

    def predict(self, r):
        """Posterior mean and standard deviation at radii r."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if self.degenerate:
            mu = np.full(r.shape, self.beta0)
            return mu, np.zeros_like(mu)
        xq = (r - self._x0) / self._xs
        d = np.abs(xq[:, None] - self.x[None, :])
        k = _matern52(d, self.theta)                      # (P, M)
        kinv_k = cho_solve(self._chol, k.T, check_finite=False)  # (M, P)
        mu_std = self._beta0_std + k @ self._w
        kKk = np.einsum("pm,mp->p", k, kinv_k)
        u = k @ self._kinv_ones - 1.0
        s2_std = self._s0_std * (1.0 - kKk + u * u / self._ftf)
        s2_std = np.maximum(s2_std, 0.0)
        mu = self._ym + self._ys * mu_std
        s = self._ys * np.sqrt(s2_std)
        return mu, s

    @property
    def _s0_std(self) -> float:
        return self.sigma0_sq / (self._ys * self._ys)


def _profile_loglik(x, y, theta, nugget):
    """Profiled negative log-likelihood l(theta) = M log s0^2 + log det K,
    with beta0 and s0^2 at their closed-form optima.  Returns the pieces
    needed to finish the fit."""
    m = len(x)
    d = np.abs(x[:, None] - x[None, :])
    K = _matern52(d, theta)
    K.flat[:: m + 1] += nugget
    chol = cho_factor(K, lower=True, check_finite=False)
    ones = np.ones(m)
    kinv_ones = cho_solve(chol, ones, check_finite=False)
    kinv_y = cho_solve(chol, y, check_finite=False)
    ftf = float(ones @ kinv_ones)
    beta0 = float(ones @ kinv_y) / ftf
    resid = y - beta0
    s0 = float(resid @ cho_solve(chol, resid, check_finite=False)) / m
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol[0]))))
    ll = m * math.log(max(s0, 1e-300)) + logdet
    return ll, chol, beta0, s0, kinv_ones, ftf


def fit_kriging(x, y) -> KrigingModel:
    """Fit the model; correlation length by golden-section search on the
    profiled likelihood over log theta, nugget escalated tenfold on
    factorization failure."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("need matching 1-d arrays with at least two points")
    order = np.argsort(x)
    x, y = x[order], y[order]
    if np.any(np.diff(x) <= 0):
        raise ValueError("design radii must be distinct")

    x0, xs = float(x[0]), float(x[-1] - x[0])
    xn = (x - x0) / xs
    ym = float(np.mean(y))
    ys = float(np.std(y))
    if ys < 1e-14 * max(1.0, abs(ym)):
        return KrigingModel(xn, y, math.nan, ym, 0.0, 0.0, True,
                            x0, xs, ym, 1.0, (), np.empty(0), np.empty(0), 1.0, 0.0)
    yn = (y - ym) / ys

    nugget = NUGGET0
    while True:
        try:
            fits = {}

            def obj(lt: float) -> float:
                if lt not in fits:
                    fits[lt] = _profile_loglik(xn, yn, math.exp(lt), nugget)
                return fits[lt][0]

            lo, hi = math.log(THETA_BOUNDS[0]), math.log(THETA_BOUNDS[1])
            # coarse grid picks the basin, golden section refines inside it
            grid = np.linspace(lo, hi, 13)
            vals = [obj(t) for t in grid]
            i = int(np.argmin(vals))
            a = grid[max(i - 1, 0)]
            b = grid[min(i + 1, len(grid) - 1)]
            invphi = (math.sqrt(5.0) - 1.0) / 2.0
            c, d_ = b - invphi * (b - a), a + invphi * (b - a)
            for _ in range(10):
                if obj(c) < obj(d_):
                    b, d_ = d_, c
                    c = b - invphi * (b - a)
                else:
                    a, c = c, d_
                    d_ = a + invphi * (b - a)
            lt_best = min(fits, key=lambda t: fits[t][0])
            _, chol, b0n, s0n, kinv_ones, ftf = fits[lt_best]
            theta = math.exp(lt_best)
            w = cho_solve(chol, yn - b0n, check_finite=False)
            return KrigingModel(
                xn, y, theta, ym + ys * b0n, ys * ys * s0n, nugget, False,
                x0, xs, ym, ys, chol, w, kinv_ones, ftf, b0n)
        except np.linalg.LinAlgError:
            nugget *= 10.0
            if nugget > NUGGET_MAX:
                raise RuntimeError("correlation matrix could not be factorized")


def learning_value(mu, s):
    """Expected misclassification-risk score; zero only where the sign of
    the response is certain.  L(r) = -sgn(mu) mu Phi(-sgn(mu) mu / s)
    + s phi(mu / s), with sgn(0) taken as +1 and L = 0 where s = 0."""
    scalar = np.ndim(mu) == 0 and np.ndim(s) == 0
    mu, s = np.broadcast_arrays(np.atleast_1d(np.asarray(mu, dtype=float)),
                                np.atleast_1d(np.asarray(s, dtype=float)))
    out = np.zeros(mu.shape)
    pos = s > 0
    sgn = np.where(mu[pos] >= 0.0, 1.0, -1.0)
    with np.errstate(over="ignore"):
        # past |z| ~ 40 both terms underflow to exactly zero anyway
        z = np.clip(mu[pos] / s[pos], -40.0, 40.0)
    t = -sgn * mu[pos] * std_normal_cdf(-sgn * z) + s[pos] * std_normal_pdf(z)
    out[pos] = np.maximum(t, 0.0)  # exact L >= 0; strip fp residue
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# initial design


def initial_design(interval: SearchInterval, r2: float, k: int = 3,
                   g3: float | None = None) -> list[float]:
    """First k design radii on a direction.

    The origin and the radius of the failure sample that defined the
    direction come first; the third point balances the design toward
    whichever side of the window the failure sample leaves empty.  A
    fourth point depends on the sign of the response at the third, so
    callers requesting k = 4 must supply g3.
    """
    if k not in (3, 4):
        raise ValueError("initial design size must be 3 or 4")
    if r2 < 0:
        raise ValueError("r2 must be nonnegative")
    near_top = abs(r2 - interval.r_plus) < interval.width / 3.0
    r3 = 0.5 * (interval.r_minus + r2) if near_top else 0.5 * (interval.r_plus + r2)
    design = [0.0, float(r2), float(r3)]
    if k == 4:
        if g3 is None:
            raise ValueError("k = 4 requires the response at the third radius")
        design.append(fourth_radius(interval, r2, r3, g3))
    return design


def fourth_radius(interval: SearchInterval, r2: float, r3: float, g3: float) -> float:
    near_top = abs(r2 - interval.r_plus) < interval.width / 3.0
    if near_top and g3 > 0:
        return 0.5 * (r3 + r2)
    if near_top:
        return 0.5 * (interval.r_minus + r3)
    return 0.5 * (interval.r_minus + r2)


# ---------------------------------------------------------------------------
# active-learning root finder


@dataclass(frozen=True)
class RootSet:
    """Roots of G(sigma r a) = 0 on the search interval, ascending.

    ``n_added`` counts radii contributed by active learning; ``n_evals``
    counts every limit-state call this search consumed (initial design
    included).  The design is kept in insertion order: index 0 is the
    shared origin, index 1 the defining failure radius.
    """

    roots: tuple[float, ...]
    interval: SearchInterval
    n_added: int
    n_evals: int
    converged: bool
    design_x: tuple[float, ...]
    design_y: tuple[float, ...]

    @property
    def design_size(self) -> int:
        return len(self.design_x)


def scale_roots(rs: RootSet, sigma_from: float, sigma_to: float) -> RootSet:
    """Rescale roots between magnification levels: a root r of
    G(sigma_from r a) is a root (sigma_from / sigma_to) r of
    G(sigma_to r' a)."""
    if sigma_from <= 0 or sigma_to <= 0:
        raise ValueError("magnifications must be positive")
    c = sigma_from / sigma_to
    iv = SearchInterval(rs.interval.r_minus * c, rs.interval.r_plus * c, rs.interval.alpha)
    return RootSet(tuple(r * c for r in rs.roots), iv, 0, 0, rs.converged,
                   rs.design_x, rs.design_y)


def _bisect_mean(model: KrigingModel, lo: float, hi: float, f_lo: bool, tol: float) -> float:
    # f_* is the failure flag (posterior mean <= 0) at the endpoint
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = float(model.predict(mid)[0][0]) <= 0.0
        if f_mid == f_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _extract_roots(model: KrigingModel, interval: SearchInterval, grid: np.ndarray,
                   mu: np.ndarray) -> tuple[float, ...]:
    tol = ROOT_TOL_FRAC * interval.width
    fail = mu <= 0.0
    roots: list[float] = []
    if fail[0]:
        # already failed at the window start; the true entry lies below
        # r_minus where the chi mass is at most alpha / 2
        roots.append(interval.r_minus)
    for i in range(len(grid) - 1):
        if fail[i] != fail[i + 1]:
            roots.append(_bisect_mean(model, grid[i], grid[i + 1], fail[i], tol))
    # drop entry/exit pairs that bracket a negligible sliver (parity kept)
    merge = MERGE_FRAC * interval.width
    changed = True
    while changed and len(roots) >= 2:
        changed = False
        for i in range(len(roots) - 1):
            if roots[i + 1] - roots[i] < merge:
                del roots[i:i + 2]
                changed = True
                break
    return tuple(roots)


def find_roots(L: LimitState, sigma: float, a: np.ndarray, interval: SearchInterval,
               *, r2: float, g_r2: float | None = None, origin_value: float,
               init_k: int = 3, eps: float = 5e-4, max_added: int = 30) -> RootSet:
    """Locate all roots of G(sigma r a) = 0 for r in the search interval.

    The origin response is shared across directions and passed in; the
    response at r2 is reused when the caller already knows it.  Radii
    are added at the learning-function maximum over a 1000-point grid
    (excluding near-design candidates) until
    max L / mean|y| < eps, or max_added radii have been spent, in which
    case the result is flagged unconverged.
    """
    n_evals = 0
    xs: list[float] = [0.0]
    ys: list[float] = [float(origin_value)]

    if g_r2 is None:
        g_r2 = directional_value(L, sigma, a, r2)
        n_evals += 1
    xs.append(float(r2))
    ys.append(float(g_r2))

    dup_tol = EXCLUDE_FRAC * interval.width

    def try_add(r: float) -> float | None:
        if min(abs(r - x) for x in xs) < dup_tol:
            return None
        g = directional_value(L, sigma, a, r)
        xs.append(float(r))
        ys.append(float(g))
        return g

    init = initial_design(interval, r2, 3)
    g3 = try_add(init[2])
    if g3 is not None:
        n_evals += 1
    if init_k == 4:
        if g3 is None:  # third radius collided with the design; reuse nearest
            g3 = ys[int(np.argmin([abs(init[2] - x) for x in xs]))]
        g4 = try_add(fourth_radius(interval, r2, init[2], g3))
        if g4 is not None:
            n_evals += 1

    grid = np.linspace(interval.r_minus, interval.r_plus, GRID_SIZE)
    n_added = 0
    converged = False
    while True:
        model = fit_kriging(np.array(xs), np.array(ys))
        mu, s = model.predict(grid)
        lv = learning_value(mu, s)
        xarr = np.array(xs)
        near = np.min(np.abs(grid[:, None] - xarr[None, :]), axis=1) < dup_tol
        lv_free = np.where(near, -1.0, lv)
        best = int(np.argmax(lv_free))
        denom = max(float(np.mean(np.abs(ys))), 1e-300)
        if lv_free[best] < 0 or float(lv_free[best]) / denom < eps:
            converged = True
            break
        if n_added >= max_added:
            break
        g = try_add(float(grid[best]))
        if g is None:  # exhausted distinct candidates
            converged = True
            break
        n_evals += 1
        n_added += 1

    roots = _extract_roots(model, interval, grid, mu)
    return RootSet(roots, interval, n_added, n_evals, converged,
                   tuple(xs), tuple(ys))
