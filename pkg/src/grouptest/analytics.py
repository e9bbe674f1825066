"""Closed-form quantities, bounds and optimizations for two-stage designs.

Everything here is a deterministic function of its arguments. Powers of
``q = 1 - p`` go through ``log1p``/``expm1`` so small ``p`` stays accurate.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .core import degree_profile
from .designs import Family, optimal_params

LN2 = math.log(2.0)
LN2_SQ = LN2 * LN2
# (1 - 2|log log 2|) / (log 2)^2
H_LOWER = (1.0 - 2.0 * abs(math.log(LN2))) / LN2_SQ
H_UPPER = 2.0


@dataclass(frozen=True)
class AnalyticContext:
    defect_prob: float
    precision: float = 1e-12

    def __post_init__(self):
        if not 0.0 < self.defect_prob < 1.0:
            raise ValueError(f"defect probability must lie in (0, 1), got {self.defect_prob}")

    @property
    def p(self):
        return self.defect_prob

    @property
    def q(self):
        return 1.0 - self.defect_prob

    @property
    def log_q(self):
        return math.log1p(-self.defect_prob)


def _ctx(ctx):
    return ctx if isinstance(ctx, AnalyticContext) else AnalyticContext(float(ctx))




def _log_one_minus_q_pow(log_q, k):
    """log(1 - q**k), -inf at k = 0."""
    with np.errstate(divide="ignore"):
        return np.log(-np.expm1(np.multiply(k, log_q)))


# -- FKG bound on undetermined zeros --------------------------------------------

def bound_B(design, ctx) -> float:
    """``q * sum_i prod_{a ni i} (1 - q^(d_a - 1))``; equals E|U0| when girth >= 6."""
    ctx = _ctx(ctx)
    _, test_deg = degree_profile(design)
    # empty pools contribute no edges; clamp them to keep the log finite
    log_factor = _log_one_minus_q_pow(ctx.log_q, np.maximum(test_deg - 1.0, 0.0))
    per_var = np.zeros(design.n_variables)
    np.add.at(per_var, design.test_idx, np.repeat(log_factor, test_deg))
    return ctx.q * float(np.sum(np.exp(per_var)))


# -- the variational lower bound ------------------------------------------------

def a_coeff(i, ctx):
    """``|log(1 - (1-p)^(i-1))|`` for ``i >= 2`` (scalar or array)."""
    ctx = _ctx(ctx)
    i_arr = np.asarray(i, dtype=float)
    if np.any(i_arr < 2):
        raise ValueError("a_coeff needs i >= 2")
    out = -_log_one_minus_q_pow(ctx.log_q, i_arr - 1.0)
    return float(out) if out.ndim == 0 else out


def A_p_eval(m, ctx, n) -> float:
    """``sum_i m_i / i + q 0^(m_1) exp(-sum_{i>=2} m_i a_i)`` for a sparse ``{i: m_i}``."""
    ctx = _ctx(ctx)
    total = 0.0
    exponent = 0.0
    m1 = 0
    for i, mi in m.items():
        i, mi = int(i), int(mi)
        if mi < 0 or not 1 <= i <= n:
            raise ValueError(f"bad entry m[{i}] = {mi} for N={n}")
        if mi == 0:
            continue
        total += mi / i
        if i == 1:
            m1 = mi
        else:
            exponent += mi * a_coeff(i, ctx)
    if m1 == 0:
        total += ctx.q * math.exp(-exponent)
    return total


def A_bar_restricted(ctx, n, m_max):
    """Minimum of A_p over the zero vector, ``e_1`` and ``m_r e_r`` (2 <= r <= N, m_r <= m_max).

    Returns ``(value, argmin)`` where ``argmin`` is a dict ``{index: multiplicity}``.
    Indices ``r`` past the point where ``m_max * a_r`` underflows the relative
    precision can only tie with the zero vector and are skipped.
    """
    ctx = _ctx(ctx)
    # the m_1 >= 1 branch is worth >= 1 > q, so it never beats the zero vector
    best_val, best_m = ctx.q, {}
    # a_r ~ q^(r-1): cut where m_max * q^(r-1) < eps
    eps = 1e-17
    r_cut = 2 + math.ceil(math.log(eps / m_max) / ctx.log_q) if ctx.log_q < 0 else n
    r = np.arange(2, min(n, max(r_cut, 2)) + 1, dtype=float)
    if r.size:
        a = a_coeff(r, ctx)
        for k in range(1, int(m_max) + 1):
            vals = k / r + ctx.q * np.exp(-k * a)
            j = int(np.argmin(vals))
            if vals[j] < best_val:
                best_val, best_m = float(vals[j]), {int(r[j]): k}
    return best_val, best_m


def _u_objective(r, log_q):
    # abs, not negation: an underflowed log is +0.0 and must give +inf, not -inf
    with np.errstate(divide="ignore"):
        return 1.0 / (r * np.abs(_log_one_minus_q_pow(log_q, r - 1.0)))


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, lo, hi, xtol, max_iter=200):
    """Minimize a unimodal scalar ``f`` on ``[lo, hi]``; plateaus are fine."""
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if hi - lo <= xtol:
            break
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INV_PHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INV_PHI * (hi - lo)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def _grid_then_golden(f, lo, hi, n_grid, rtol):
    """Log grid over [lo, hi], then golden section across the best cell pair."""
    grid = np.geomspace(lo, hi, n_grid)
    vals = f(grid)
    k = int(np.argmin(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, n_grid - 1)]
    x, fx = golden_section(lambda t: float(f(t)), a, b, rtol * grid[k])
    if vals[k] < fx:
        x, fx = float(grid[k]), float(vals[k])
    return float(x), float(fx)


def U_of_p(ctx, r_max=None):
    """``min_{r >= 2} 1 / (r |log(1 - (1-p)^(r-1))|)`` over continuous r.

    Returns ``(value, argmin_r)``. The default ``r_max`` is ``8 log 2 / p``.
    """
    ctx = _ctx(ctx)
    if r_max is None:
        r_max = max(8.0 * LN2 / ctx.p, 16.0)
    if r_max <= 2.0:
        raise ValueError("r_max must exceed 2")
    log_q = ctx.log_q
    r, val = _grid_then_golden(lambda x: _u_objective(np.asarray(x), log_q), 2.0, r_max,
                               4097, math.sqrt(ctx.precision))
    return val, r


def c_of_p(ctx) -> float:
    """``min_{w >= 0} U w + q e^(-w)``: ``U (1 + log(q/U))`` if ``q > U``, else ``q``."""
    ctx = _ctx(ctx)
    u, _ = U_of_p(ctx)
    if ctx.q <= u:
        return ctx.q
    return u * (1.0 + math.log(ctx.q / u))


def lower_bound_T(n, ctx):
    """``(N min(1, c(p)), -N p log2 p)``; callers take the max."""
    ctx = _ctx(ctx)
    return n * min(1.0, c_of_p(ctx)), -n * ctx.p * math.log2(ctx.p)


# -- regular-regular upper bound ------------------------------------------------

def r_p_eval(ctx, k, l) -> float:
    """Probability a zero stays undetermined on a girth-6 (K, L)-regular graph."""
    ctx = _ctx(ctx)
    if k < 1 or l < 1:
        raise ValueError("need K >= 1 and L >= 1")
    return float(np.exp(l * _log_one_minus_q_pow(ctx.log_q, k - 1.0)))


def regular_upper_bound(n, ctx) -> float:
    """``M + N p + N q R_p`` at the optimal regular parameters."""
    ctx = _ctx(ctx)
    params = optimal_params(n, ctx.p, Family.REGULAR_REGULAR_GIRTH6)
    k = float(params.mean_test_degree)
    return params.n_tests + n * ctx.p + n * ctx.q * r_p_eval(ctx, k, params.tests_per_variable)


def normalizer(n, ctx):
    """``N p |log p|``, the scale all ratios are reported against."""
    ctx = _ctx(ctx)
    return n * ctx.p * abs(math.log(ctx.p))


def h_correction(n, ctx, t_bar):
    """``(T - N p |log p| / (log 2)^2) / (N p)`` and whether it lies in [H_LOWER, 2]."""
    ctx = _ctx(ctx)
    h = (t_bar - normalizer(n, ctx) / LN2_SQ) / (n * ctx.p)
    return h, H_LOWER <= h <= H_UPPER


# -- Poisson-Poisson ----------------------------------------------------------------

_EXACT_N = 10_000


@functools.lru_cache(maxsize=64)
def _binom_window(n, p, tail):
    """Support points, pmf and dropped tail masses of Binom(n-1, p)."""
    dist = stats.binom(n - 1, p)
    if n <= _EXACT_N or tail <= 0.0:
        r = np.arange(n, dtype=float)
        return r, dist.pmf(r), 0.0, 0.0
    # upper tail via the mirrored count n-1-R ~ Binom(n-1, 1-p); isf saturates
    mirror = stats.binom(n - 1, 1.0 - p)
    lo = max(0, int(dist.ppf(tail)) - 1)
    hi = min(n - 1, n - 1 - int(mirror.ppf(tail)) + 1)
    r = np.arange(lo, hi + 1, dtype=float)
    below = float(dist.cdf(lo - 1)) if lo > 0 else 0.0
    above = float(mirror.cdf(n - 2 - hi)) if hi < n - 1 else 0.0
    return r, dist.pmf(r), below, above


def _pp_terms(n, m, k, r):
    # (1 - x (1-x)^r)^M with x = K/N; k may be an array (broadcast over rows)
    x = np.asarray(k, dtype=float)[..., None] / n
    with np.errstate(divide="ignore", invalid="ignore"):
        # r = 0 gives (1-x)^0 = 1 even at x = 1
        inner = np.exp(np.where(r == 0, 0.0, r * np.log1p(-x)))
        return np.exp(m * np.log1p(-x * inner))


def _pp_sum(n, ctx, m, k):
    tail = 1e-30
    while True:
        r, pmf, below, above = _binom_window(n, ctx.p, tail)
        terms = _pp_terms(n, m, k, r)
        acc = terms @ pmf
        # terms increase with r and are <= 1, which bounds the dropped mass
        dropped = below * terms[..., 0] + above
        if np.all(dropped <= 1e-15 * acc) or tail <= 1e-300:
            if np.any(dropped > 1e-15 * acc):
                raise ArithmeticError("binomial truncation could not be certified")
            return acc
        tail = max(1e-300, 1e-16 * float(np.min(acc)))


def pp_expected_u0(n, ctx, m, k):
    """Mean |U0| over Poisson-Poisson designs (edge prob ``K/N``) and assignments.

    ``N sum_r Binom(N-1, r) p^r q^(N-r) (1 - (K/N)(1 - K/N)^r)^M``. Exact for
    ``N <= 10^4``; beyond that the binomial is truncated with the dropped mass
    certified below ``1e-15`` of the total. ``k`` may be an array.
    """
    ctx = _ctx(ctx)
    k_arr = np.asarray(k, dtype=float)
    if np.any(k_arr <= 0.0) or np.any(k_arr > n):
        raise ValueError(f"need 0 < K <= N, got K={k}, N={n}")
    if m < 1:
        raise ValueError("M must be >= 1")
    out = n * ctx.q * _pp_sum(int(n), ctx, m, k_arr)
    return float(out) if out.ndim == 0 else out


def pp_ratio(n, ctx, m, k):
    """``(M + E|U0| + N p) / (N p |log p|)`` for a Poisson-Poisson design."""
    ctx = _ctx(ctx)
    return (m + pp_expected_u0(n, ctx, m, k) + n * ctx.p) / normalizer(n, ctx)


def _best_k(n, ctx, m, tol):
    hi = min(float(n), 64.0 / ctx.p)
    return _grid_then_golden(lambda kk: pp_ratio(n, ctx, m, kk), hi * 1e-4, hi, 65, tol)


def pp_optimize(n, ctx, tol=1e-8):
    """Minimize the Poisson-Poisson ratio over integer M and real K.

    Nested search: for each M the best K comes from a log grid plus golden
    refinement; M is bracketed on a log grid and then narrowed by golden
    section over the integers. Returns ``(M*, K*, ratio*)``.
    """
    ctx = _ctx(ctx)
    scale = normalizer(n, ctx)
    if scale < 1.0:
        raise ValueError("degenerate (N, p): N p |log p| < 1")
    cache = {}

    def at(mm):
        mm = int(mm)
        if mm not in cache:
            k, val = _best_k(n, ctx, mm, tol)
            cache[mm] = (val, k)
        return cache[mm]

    m_hi = min(float(n), 16.0 * scale)
    grid = np.unique(np.round(np.geomspace(1.0, m_hi, 49)).astype(np.int64))
    vals = [at(g)[0] for g in grid]
    j = int(np.argmin(vals))
    a = int(grid[max(j - 1, 0)])
    b = int(grid[min(j + 1, len(grid) - 1)])
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    while b - a > 3:
        c = int(round(b - phi * (b - a)))
        d = max(c + 1, int(round(a + phi * (b - a))))
        if at(c)[0] <= at(d)[0]:
            b = d
        else:
            a = c
    best_m = min(range(a, b + 1), key=lambda mm: at(mm)[0])
    val, k = at(best_m)
    return best_m, k, val
