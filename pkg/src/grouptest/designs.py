"""Pool-design families and their optimal parameters.

Three families:

* ``rr6`` regular-regular with girth >= 6, built by progressive edge growth;
* ``rp``  regular-Poisson: each variable joins a uniform L-subset of the tests;
* ``pp``  Poisson-Poisson: each (variable, test) edge is present with prob. L/M.
"""

from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from . import kernels
from ._rng import bernoulli_indices, make_rng
from .core import PoolDesign, degree_profile, girth_at_least_6

log = logging.getLogger(__name__)

LN2 = math.log(2.0)


class Family(str, enum.Enum):
    REGULAR_REGULAR_GIRTH6 = "rr6"
    REGULAR_POISSON = "rp"
    POISSON_POISSON = "pp"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {
            "rr6": cls.REGULAR_REGULAR_GIRTH6, "regular-regular": cls.REGULAR_REGULAR_GIRTH6,
            "regularregulargirth6": cls.REGULAR_REGULAR_GIRTH6,
            "rp": cls.REGULAR_POISSON, "regular-poisson": cls.REGULAR_POISSON,
            "regularpoisson": cls.REGULAR_POISSON,
            "pp": cls.POISSON_POISSON, "poisson-poisson": cls.POISSON_POISSON,
            "poissonpoisson": cls.POISSON_POISSON,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown design family {value!r}") from None


class ConstructionError(RuntimeError):
    """Girth-6 construction gave up; carries the feasibility evaluation."""

    def __init__(self, message, feasibility):
        super().__init__(f"{message} (feasibility condition "
                         f"{'satisfied' if feasibility.satisfied else 'violated'}: "
                         f"M={feasibility.n_tests} vs required {feasibility.required:.4g})")
        self.feasibility = feasibility


@dataclass(frozen=True)
class DesignParams:
    family: Family
    n_variables: int
    defect_prob: float
    tests_per_variable: float
    n_tests: int
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.defect_prob < 1.0:
            raise ValueError(f"defect probability must lie in (0, 1), got {self.defect_prob}")
        if self.n_variables < 1 or self.n_tests < 1:
            raise ValueError("N and M must be positive")
        if self.tests_per_variable <= 0:
            raise ValueError("L must be positive")
        if self.family is not Family.POISSON_POISSON:
            if int(self.tests_per_variable) != self.tests_per_variable:
                raise ValueError("regular families need an integer L")
            if not self.tests_per_variable <= self.n_tests:
                raise ValueError(f"need L <= M, got L={self.tests_per_variable}, M={self.n_tests}")
        elif self.tests_per_variable > self.n_tests:
            raise ValueError("edge probability L/M exceeds 1")

    @property
    def mean_test_degree(self) -> Fraction:
        """K = N L / M."""
        return Fraction(self.n_variables) * Fraction(self.tests_per_variable) / self.n_tests

    def with_seed(self, seed):
        return replace(self, seed=int(seed))


def optimal_params(n, p, family, seed=0) -> DesignParams:
    """Asymptotically optimal (L, M) for the family, rounded down.

    Regular families: ``L = [|log p| / log 2]``, ``M = [N p |log p| / (log 2)^2]``.
    Poisson-Poisson:  ``L = [e |log p|]``,       ``M = [e N p |log p|]``.
    """
    family = Family.parse(family)
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if n < 1:
        raise ValueError("N must be positive")
    bits = -math.log2(p)  # |log p| / log 2, exact for powers of two
    if family is Family.POISSON_POISSON:
        l = math.floor(math.e * bits * LN2)
        m = math.floor(math.e * n * p * bits * LN2)
    else:
        l = math.floor(bits)
        m = math.floor(n * p * bits / LN2)
    if l < 1 or m < 1:
        raise ValueError(f"p too large for asymptotic design (L={l}, M={m} at N={n}, p={p})")
    if l > m:
        raise ValueError(f"N too small for asymptotic design (L={l} > M={m} at N={n}, p={p})")
    return DesignParams(family, int(n), float(p), l, m, int(seed))


@dataclass(frozen=True)
class Feasibility:
    n_tests: int
    required: float
    satisfied: bool


def girth_condition(n, l, m) -> Feasibility:
    """Evaluate ``M >= (L-1) K / (L K - L - K)`` with ``K = N L / M``.

    A non-positive denominator counts as not satisfied.
    """
    k = n * l / m
    denom = l * k - l - k
    if denom <= 0:
        return Feasibility(int(m), math.inf, False)
    required = (l - 1) * k / denom
    return Feasibility(int(m), required, m >= required)


# -- regular-regular, girth >= 6 -------------------------------------------------

class _PegState:
    """Mutable bookkeeping for one progressive-edge-growth attempt."""

    def __init__(self, n, l, m, rng):
        self.n, self.l, self.m = n, l, m
        self.rng = rng
        self.base, self.extra = divmod(n * l, m)
        self.load = np.zeros(m, dtype=np.int64)
        self.n_full = 0
        self.members = [[] for _ in range(m)]
        self.var_tests = [[] for _ in range(n)]
        self.stamp = np.full(m, -1, dtype=np.int64)
        self.token = 0

    def open_mask(self):
        if self.extra == 0:
            return self.load < self.base
        return (self.load < self.base) | ((self.load == self.base) & (self.n_full < self.extra))

    def can_take(self, a):
        ld = self.load[a]
        return ld < self.base or (self.extra > 0 and ld == self.base and self.n_full < self.extra)

    def _bump(self, a, delta):
        before = self.load[a]
        self.load[a] = before + delta
        if self.extra:
            if delta > 0 and before == self.base:
                self.n_full += 1
            elif delta < 0 and before == self.base + 1:
                self.n_full -= 1

    def add(self, i, a):
        self.members[a].append(i)
        self.var_tests[i].append(a)
        self._bump(a, 1)

    def remove(self, i, a):
        self.members[a].remove(i)
        self.var_tests[i].remove(a)
        self._bump(a, -1)

    def new_token(self, i):
        """Fresh stamp marking every test that would close a 4-cycle through i."""
        self.token += 1
        t = self.token
        for a in self.var_tests[i]:
            self.stamp[a] = t
            for j in self.members[a]:
                if j != i:
                    for b in self.var_tests[j]:
                        self.stamp[b] = t
        return t

    def block_after_join(self, i, a, t):
        self.stamp[a] = t
        for j in self.members[a]:
            if j != i:
                for b in self.var_tests[j]:
                    self.stamp[b] = t

    def neighbors(self, j, skip=None):
        out = set()
        for b in self.var_tests[j]:
            if b != skip:
                out.update(self.members[b])
        out.discard(j)
        return out


def _choose(state, t, jitter):
    avail = state.open_mask() & (state.stamp != t)
    if not avail.any():
        return -1
    lo = state.load[avail].min()
    cands = np.flatnonzero(avail & (state.load <= lo + (1 if jitter else 0)))
    return int(cands[state.rng.integers(cands.size)])


def _repair(state, i, t, journal):
    """Free a slot for ``i``: move some j from an unblocked full test b into a
    test a that still has capacity, then let i take j's place in b."""
    rng = state.rng
    spare = np.flatnonzero(state.open_mask())
    full = np.flatnonzero(~state.open_mask() & (state.stamp != t))
    if spare.size == 0 or full.size == 0:
        return -1
    mine = set(state.var_tests[i])
    for a in rng.permutation(spare):
        a = int(a)
        if a in mine:
            continue
        in_a = set(state.members[a])
        for b in rng.permutation(full):
            b = int(b)
            for j in rng.permutation(state.members[b]):
                j = int(j)
                if j in in_a:
                    continue
                if state.neighbors(j, skip=b) & in_a:
                    continue
                state.remove(j, b)
                state.add(j, a)
                journal.append(("move", j, b, a))
                return b
    return -1


def _place(state, i, jitter, journal):
    t = state.new_token(i)
    for _ in range(state.l):
        a = _choose(state, t, jitter)
        if a < 0:
            a = _repair(state, i, t, journal)
            if a < 0:
                return False
        state.add(i, a)
        journal.append(("add", i, a))
        state.block_after_join(i, a, t)
    return True


def _undo(state, journal):
    for op in reversed(journal):
        if op[0] == "add":
            state.remove(op[1], op[2])
        else:
            _, j, b, a = op
            state.remove(j, a)
            state.add(j, b)
    journal.clear()


def _peg_attempt(n, l, m, rng, max_backtracks):
    state = _PegState(n, l, m, rng)
    journals = [[] for _ in range(n)]
    for i in range(n):
        if _place(state, i, False, journals[i]):
            continue
        _undo(state, journals[i])
        placed = False
        for _ in range(max_backtracks if i > 0 else 0):
            _undo(state, journals[i - 1])
            if _place(state, i - 1, True, journals[i - 1]) and _place(state, i, True, journals[i]):
                placed = True
                break
            _undo(state, journals[i])
        if not placed:
            log.debug("PEG attempt stuck at variable %d", i)
            return None
    return state


def gen_regular_regular_girth6(n, l, m, seed=0, max_restarts=10, max_backtracks=4) -> PoolDesign:
    """Variable-regular design with no 4-cycles, by progressive edge growth.

    Variables are placed in order; each takes ``l`` tests, preferring the
    least-loaded test that closes no 4-cycle (ties broken at random). Test
    degrees are ``N l / M`` when divisible, otherwise floor/ceil of it. When a
    variable gets stuck we try a local edge swap, then re-place the previous
    variable, then restart with a fresh stream, up to ``max_restarts`` attempts.
    """
    n, l, m = int(n), int(l), int(m)
    if not 1 <= l <= m:
        raise ValueError(f"need 1 <= L <= M, got L={l}, M={m}")
    feas = girth_condition(n, l, m)
    if l > 1 and not feas.satisfied:
        warnings.warn(f"girth feasibility condition violated: M={m} < {feas.required:.4g}",
                      stacklevel=2)
    for attempt in range(max(1, max_restarts)):
        rng = make_rng(seed, attempt)
        state = _peg_attempt(n, l, m, rng, max_backtracks)
        if state is None:
            continue
        pools = [sorted(mem) for mem in state.members]
        design = PoolDesign(n, pools, family=Family.REGULAR_REGULAR_GIRTH6.value, seed=seed)
        var_deg, test_deg = degree_profile(design)
        if not (np.all(var_deg == l) and girth_at_least_6(design)
                and test_deg.min() >= state.base and test_deg.max() <= state.base + (state.extra > 0)):
            raise AssertionError("PEG produced a design violating its postconditions")
        log.debug("girth-6 design built on attempt %d", attempt + 1)
        return design
    raise ConstructionError(f"no girth-6 design for N={n}, L={l}, M={m} after "
                            f"{max(1, max_restarts)} attempts", feas)


# -- random families -------------------------------------------------------------

def gen_regular_poisson(n, m, l, seed=0) -> PoolDesign:
    """Each variable joins a uniformly random ``l``-subset of the ``m`` tests."""
    n, m, l = int(n), int(m), int(l)
    if not 1 <= l <= m:
        raise ValueError(f"need 1 <= L <= M, got L={l}, M={m}")
    rng = make_rng(seed)
    subsets = kernels.sample_l_subsets(rng.random((n, l)), m)
    variables = np.repeat(np.arange(n, dtype=np.int64), l)
    return PoolDesign.from_edges(n, m, variables, subsets.ravel(),
                                 family=Family.REGULAR_POISSON.value, seed=seed)


def gen_poisson_poisson(n, m, l, seed=0) -> PoolDesign:
    """Every edge (i, a) present independently with probability ``l / m``."""
    n, m = int(n), int(m)
    if not 0 < l <= m:
        raise ValueError(f"need 0 < L <= M, got L={l}, M={m}")
    rng = make_rng(seed)
    cells = bernoulli_indices(rng, n * m, l / m)
    # cell = a * N + i keeps edges in test-major order
    tests, variables = np.divmod(cells, n)
    ptr = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(np.bincount(tests, minlength=m), out=ptr[1:])
    return PoolDesign.from_csr(n, ptr, variables, family=Family.POISSON_POISSON.value, seed=seed)


def generate(params: DesignParams, max_restarts=10) -> PoolDesign:
    """Draw one design for ``params`` (uses ``params.seed``)."""
    fam = params.family
    n, m, s = params.n_variables, params.n_tests, params.seed
    if fam is Family.REGULAR_REGULAR_GIRTH6:
        return gen_regular_regular_girth6(n, int(params.tests_per_variable), m, s, max_restarts)
    if fam is Family.REGULAR_POISSON:
        return gen_regular_poisson(n, m, int(params.tests_per_variable), s)
    return gen_poisson_poisson(n, m, params.tests_per_variable, s)
