"""Expected test counts: exact enumeration for small N, Monte Carlo otherwise.

Monte Carlo trials are drawn in fixed blocks of ``BLOCK`` trials; block ``b``
uses the stream ``derive_seed(seed, b)``. Per-trial counts are integers and
are reduced in block order, so results do not depend on how blocks are
scheduled.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from ._rng import bernoulli_indices, derive_seed, make_rng
from .analytics import _ctx, bound_B
from .designs import DesignParams, Family, generate

BLOCK = 1024
MAX_EXHAUSTIVE_N = 24


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_error: float
    n_trials: int
    exact: bool
    seed: int | None
    mean_u0: float
    mean_u1: float
    n_tests: float
    n_designs: int = 1

    @property
    def breakdown(self):
        return self.mean_u0, self.mean_u1, self.n_tests

    def as_dict(self):
        return {
            "mean_T": self.mean, "se": self.std_error, "trials": self.n_trials,
            "exact": self.exact, "seed": self.seed, "mean_U0": self.mean_u0,
            "mean_U1": self.mean_u1, "M": self.n_tests, "designs": self.n_designs,
        }


# -- exact enumeration --------------------------------------------------------

@functools.lru_cache(maxsize=256)
def undetermined_tallies(design):
    """Sums of |U0| and |U1| over all assignments, grouped by number of defectives.

    Independent of ``p``; the exact means are ``sum_k p^k q^(N-k) tally[k]``.
    """
    n = design.n_variables
    if n > MAX_EXHAUSTIVE_N:
        raise ValueError(f"exhaustive enumeration needs N <= {MAX_EXHAUSTIVE_N}, got {n}")
    t0, t1 = kernels.exhaustive_tallies(*design.arrays(), n)
    t0.setflags(write=False)
    t1.setflags(write=False)
    return t0, t1


def _class_weights(n, p):
    k = np.arange(n + 1, dtype=float)
    return np.exp(k * math.log(p) + (n - k) * math.log1p(-p))


def exhaustive_expected_tests(design, ctx) -> Estimate:
    """Exact E[T], E|U0|, E|U1| under the Bernoulli(p) product measure."""
    ctx = _ctx(ctx)
    t0, t1 = undetermined_tallies(design)
    w = _class_weights(design.n_variables, ctx.p)
    u0 = math.fsum(w * t0)
    u1 = math.fsum(w * t1)
    return Estimate(design.n_tests + u0 + u1, 0.0, 1 << design.n_variables, True, None,
                    u0, u1, float(design.n_tests))


def fkg_gap(design, ctx) -> float:
    """Exact E|U0| minus its FKG lower bound; zero when the girth is >= 6."""
    ctx = _ctx(ctx)
    return exhaustive_expected_tests(design, ctx).mean_u0 - bound_B(design, ctx)


# -- Monte Carlo over assignments ---------------------------------------------------

def _block_sizes(trials):
    full, rest = divmod(trials, BLOCK)
    return [BLOCK] * full + ([rest] if rest else [])


def sample_assignments(rng, batch, n, p):
    x = np.zeros(batch * n, dtype=np.uint8)
    x[bernoulli_indices(rng, batch * n, p)] = 1
    return x.reshape(batch, n)


def mc_counts(design, p, trials, seed):
    """Per-trial ``(|U0|, |U1|)`` arrays for ``trials`` seeded assignments."""
    arrays = design.arrays()
    u0_parts, u1_parts = [], []
    for b, size in enumerate(_block_sizes(trials)):
        rng = make_rng(seed, b)
        x = sample_assignments(rng, size, design.n_variables, p)
        u0, u1 = kernels.count_undetermined_batch(*arrays, x)
        u0_parts.append(u0)
        u1_parts.append(u1)
    return np.concatenate(u0_parts), np.concatenate(u1_parts)


def _summarize(u0, u1, n_tests, seed, n_designs=1):
    n = u0.shape[0]
    total = u0 + u1
    se = float(np.std(total, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    m0 = int(u0.sum()) / n
    m1 = int(u1.sum()) / n
    return Estimate(n_tests + m0 + m1, se, n, False, seed, m0, m1, float(n_tests), n_designs)


def mc_expected_tests(design, ctx, trials, seed) -> Estimate:
    """Sample-mean estimate of E[T] with its standard error."""
    ctx = _ctx(ctx)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    u0, u1 = mc_counts(design, ctx.p, trials, seed)
    return _summarize(u0, u1, design.n_tests, seed)


# -- averaging over random designs ------------------------------------------------------

def design_seed(seed, s):
    return derive_seed(seed, s, 0)


def trial_seed(seed, s):
    return derive_seed(seed, s, 1)


def mc_family_expected_tests(params: DesignParams, ctx, design_samples, trials_per_design,
                             seed) -> Estimate:
    """Two-level estimate: mean over random designs of the per-design mean.

    Design ``s`` is drawn with seed ``design_seed(seed, s)`` and simulated with
    ``trial_seed(seed, s)``. With equal trials per design, the spread of the
    per-design means already carries both variance components, so the
    standard error is their sample std over ``sqrt(S)``.
    """
    ctx = _ctx(ctx)
    if params.family is Family.REGULAR_REGULAR_GIRTH6:
        raise ValueError("family averages are defined for random families (rp, pp)")
    if design_samples < 1 or trials_per_design < 1:
        raise ValueError("sample counts must be positive")
    means, m0s, m1s = [], [], []
    last = None
    for s in range(design_samples):
        design = generate(params.with_seed(design_seed(seed, s)))
        last = mc_expected_tests(design, ctx, trials_per_design, trial_seed(seed, s))
        means.append(last.mean)
        m0s.append(last.mean_u0)
        m1s.append(last.mean_u1)
    if design_samples == 1:
        return last
    means = np.array(means)
    se = float(np.std(means, ddof=1) / math.sqrt(design_samples))
    return Estimate(float(np.mean(means)), se, design_samples * trials_per_design, False, seed,
                    float(np.mean(m0s)), float(np.mean(m1s)), float(params.n_tests), design_samples)


def mc_joint_expected_tests(n, m, edge_prob, ctx, samples, seed, chunk=65536) -> Estimate:
    """Joint Monte Carlo over (Poisson-Poisson design, assignment) pairs.

    Every sample draws a fresh dense ``N x M`` design with iid edges and a
    fresh assignment, so it targets the family mean directly. Meant for small
    ``N * M``. Returns ``(estimate, se_u0)``; the second item is the standard
    error of the |U0| mean alone.
    """
    ctx = _ctx(ctx)
    if n * m > 4096:
        raise ValueError("joint dense sampling is for small designs (N*M <= 4096)")
    u0_parts, u1_parts = [], []
    for b, start in enumerate(range(0, samples, chunk)):
        size = min(chunk, samples - start)
        rng = make_rng(seed, b)
        c = rng.random((size, n, m)) < edge_prob
        x = rng.random((size, n)) < ctx.p
        u0, u1 = kernels.count_undetermined_dense(c, x)
        u0_parts.append(u0)
        u1_parts.append(u1)
    u0 = np.concatenate(u0_parts)
    u1 = np.concatenate(u1_parts)
    est = _summarize(u0, u1, m, seed)
    return est, float(np.std(u0, ddof=1) / math.sqrt(samples))
