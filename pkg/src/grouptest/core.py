"""Pool designs, decode results and graph-structure queries.

A design is a bipartite graph between ``N`` variables (items) and ``M`` tests
(pools). It is stored sparsely: per-test sorted member lists in CSR form,
plus a derived per-variable view. Indices are 0-based everywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from . import kernels


class DesignError(ValueError):
    """Invalid design contents (indices, duplicates, N/M mismatch)."""


class DesignFormatError(DesignError):
    """Malformed design file."""

    def __init__(self, message, *, path=None, line=None, field=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{': '.join(where)}: {message}" if where else message)
        self.path = path
        self.line = line
        self.field = field


def _readonly(a):
    a.setflags(write=False)
    return a


class PoolDesign:
    """Immutable pool design (connectivity matrix ``c[i, a]`` in sparse form).

    Parameters
    ----------
    n_variables : int
        Number of items ``N``.
    tests : iterable of iterables of int
        One pool per test; each pool lists the variable indices it contains.
        Pools are sorted on construction; duplicates are rejected.
    n_tests : int, optional
        Declared ``M``; must equal ``len(tests)`` when given.
    family, seed
        Provenance: generator tag and the seed it was called with.
    """

    def __init__(self, n_variables, tests, *, n_tests=None, family="custom", seed=0):
        pools = [np.asarray(sorted(int(v) for v in t), dtype=np.int64) for t in tests]
        if n_tests is not None and n_tests != len(pools):
            raise DesignError(f"n_tests={n_tests} but {len(pools)} pools given")
        sizes = np.fromiter((len(p) for p in pools), dtype=np.int64, count=len(pools))
        ptr = np.zeros(len(pools) + 1, dtype=np.int64)
        np.cumsum(sizes, out=ptr[1:])
        idx = np.concatenate(pools) if pools else np.empty(0, dtype=np.int64)
        self._init_arrays(n_variables, ptr, idx, family, seed)

    @classmethod
    def from_csr(cls, n_variables, test_ptr, test_idx, *, family="custom", seed=0):
        """Build from CSR arrays (``test_idx[test_ptr[a]:test_ptr[a+1]]`` is pool ``a``)."""
        self = cls.__new__(cls)
        self._init_arrays(n_variables, np.asarray(test_ptr, dtype=np.int64),
                          np.asarray(test_idx, dtype=np.int64), family, seed)
        return self

    @classmethod
    def from_edges(cls, n_variables, n_tests, variables, tests, *, family="custom", seed=0):
        """Build from parallel arrays of edge endpoints (any order)."""
        variables = np.asarray(variables, dtype=np.int64)
        tests = np.asarray(tests, dtype=np.int64)
        if variables.size and (tests.min() < 0 or tests.max() >= n_tests):
            raise DesignError(f"test index out of range [0, {n_tests})")
        order = np.lexsort((variables, tests))
        ptr = np.zeros(n_tests + 1, dtype=np.int64)
        np.cumsum(np.bincount(tests, minlength=n_tests), out=ptr[1:])
        return cls.from_csr(n_variables, ptr, variables[order], family=family, seed=seed)

    def _init_arrays(self, n, ptr, idx, family, seed):
        n = int(n)
        if n < 1:
            raise DesignError(f"n_variables must be >= 1, got {n}")
        m = ptr.shape[0] - 1
        if m < 1:
            raise DesignError("a design needs at least one test")
        if ptr[0] != 0 or ptr[-1] != idx.shape[0] or np.any(np.diff(ptr) < 0):
            raise DesignError("inconsistent test pointer array")
        if idx.size:
            if idx.min() < 0 or idx.max() >= n:
                bad = int(idx[(idx < 0) | (idx >= n)][0])
                raise DesignError(f"variable index {bad} out of range [0, {n})")
            inner = np.ones(idx.shape[0], dtype=bool)
            inner[ptr[:-1][ptr[:-1] < idx.shape[0]]] = False
            steps = np.diff(idx)
            if np.any(steps[inner[1:]] <= 0):
                e = int(np.flatnonzero((steps <= 0) & inner[1:])[0]) + 1
                a = int(np.searchsorted(ptr, e, side="right") - 1)
                if steps[e - 1] == 0:
                    raise DesignError(f"duplicate variable {int(idx[e])} in pool {a}")
                raise DesignError(f"pool {a} is not sorted")
        self._n = n
        self._m = m
        self._ptr = _readonly(ptr.copy())
        self._idx = _readonly(idx.copy())
        self.family = str(family)
        self.seed = int(seed)

    # -- sizes and views -------------------------------------------------

    @property
    def n_variables(self) -> int:
        return self._n

    @property
    def n_tests(self) -> int:
        return self._m

    @property
    def n_edges(self) -> int:
        return int(self._idx.shape[0])

    @property
    def test_ptr(self):
        return self._ptr

    @property
    def test_idx(self):
        return self._idx

    @cached_property
    def _var_view(self):
        edge_test = np.repeat(np.arange(self._m, dtype=np.int64), np.diff(self._ptr))
        order = np.argsort(self._idx, kind="stable")
        ptr = np.zeros(self._n + 1, dtype=np.int64)
        np.cumsum(np.bincount(self._idx, minlength=self._n), out=ptr[1:])
        return _readonly(ptr), _readonly(edge_test[order])

    @property
    def var_ptr(self):
        return self._var_view[0]

    @property
    def var_idx(self):
        return self._var_view[1]

    def pool(self, a):
        return self._idx[self._ptr[a]:self._ptr[a + 1]]

    def tests_of(self, i):
        ptr, idx = self._var_view
        return idx[ptr[i]:ptr[i + 1]]

    @cached_property
    def tests(self):
        """Pools as a tuple of sorted tuples."""
        return tuple(tuple(int(v) for v in self.pool(a)) for a in range(self._m))

    def arrays(self):
        """``(test_ptr, test_idx, var_ptr, var_idx)`` for the kernels."""
        return self._ptr, self._idx, self.var_ptr, self.var_idx

    def to_dense(self):
        c = np.zeros((self._n, self._m), dtype=bool)
        c[self._idx, np.repeat(np.arange(self._m), np.diff(self._ptr))] = True
        return c

    # -- value semantics -------------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, PoolDesign):
            return NotImplemented
        return (self._n == other._n and self._m == other._m
                and self.family == other.family and self.seed == other.seed
                and np.array_equal(self._ptr, other._ptr)
                and np.array_equal(self._idx, other._idx))

    def __hash__(self):
        return hash((self._n, self._m, self.family, self.seed,
                     self._ptr.tobytes(), self._idx.tobytes()))

    def __repr__(self):
        return (f"PoolDesign(N={self._n}, M={self._m}, edges={self.n_edges}, "
                f"family={self.family!r}, seed={self.seed})")


@dataclass(frozen=True)
class DecodeResult:
    """Outcome of the two-stage decode for one assignment."""

    sure_zeros: tuple
    sure_ones: tuple
    undetermined_zeros: tuple
    undetermined_ones: tuple
    total_tests: int

    def as_dict(self):
        return {
            "sure_zeros": list(self.sure_zeros),
            "sure_ones": list(self.sure_ones),
            "undetermined_zeros": list(self.undetermined_zeros),
            "undetermined_ones": list(self.undetermined_ones),
            "total_tests": self.total_tests,
        }


@dataclass(frozen=True)
class CycleCensus:
    """Length-4 loops through one variable.

    ``four_cycle_count`` counts triples ``(j, a, b)`` with ``j != i``, ``a < b``
    and both ``i`` and ``j`` in tests ``a`` and ``b``. ``has_type_d`` flags a
    partner sharing three or more tests with ``i``.
    """

    variable: int
    four_cycle_count: int
    has_type_d: bool
    tests_on_cycles: tuple
    tests_off_cycles: tuple

    def exceeds(self, n):
        """Indicator of the event "more than ``n`` loops of length 4 contain i"."""
        return self.four_cycle_count > n


def as_assignment(x, n=None):
    """Coerce a 0/1 vector to ``uint8``; check its length against ``n``."""
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ValueError("assignment must be one-dimensional")
    if arr.dtype != bool and arr.size and not np.all((arr == 0) | (arr == 1)):
        raise ValueError("assignment entries must be 0 or 1")
    arr = arr.astype(np.uint8)
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"assignment has length {arr.shape[0]}, design has N={n}")
    return arr


# -- graph queries -----------------------------------------------------------

def degree_profile(design):
    """Variable degrees and test degrees ``d_a``."""
    return np.diff(design.var_ptr), np.diff(design.test_ptr)


def four_cycle_counts(design):
    """Per-variable 4-cycle counts and type-D flags for every variable."""
    return kernels.four_cycle_counts(*design.arrays(), design.n_variables)


def girth_at_least_6(design) -> bool:
    """True iff no two distinct variables share two distinct tests."""
    counts, _ = four_cycle_counts(design)
    return not counts.any()


def four_cycle_census(design, variable) -> CycleCensus:
    i = int(variable)
    if not 0 <= i < design.n_variables:
        raise IndexError(f"variable {i} out of range [0, {design.n_variables})")
    mine = design.tests_of(i)
    shared = {}
    for a in mine:
        for j in design.pool(a):
            if j != i:
                shared.setdefault(int(j), []).append(int(a))
    count = 0
    on = set()
    type_d = False
    for common in shared.values():
        s = len(common)
        if s >= 2:
            count += s * (s - 1) // 2
            on.update(common)
        type_d |= s >= 3
    on_cycles = tuple(sorted(on))
    off_cycles = tuple(int(a) for a in mine if int(a) not in on)
    return CycleCensus(i, count, type_d, on_cycles, off_cycles)


# -- serialization -----------------------------------------------------------

def _format_for(path, fmt):
    if fmt is not None:
        fmt = fmt.lower()
        if fmt in {"json"}:
            return "json"
        if fmt in {"adj", "text", "txt", "adjacency"}:
            return "adj"
        raise ValueError(f"unknown design format {fmt!r}")
    return "json" if Path(path).suffix.lower() == ".json" else "adj"


def design_to_dict(design):
    return {
        "n_variables": design.n_variables,
        "n_tests": design.n_tests,
        "tests": [list(t) for t in design.tests],
        "family": design.family,
        "seed": design.seed,
    }


def design_from_dict(data, path=None):
    if not isinstance(data, dict):
        raise DesignFormatError("top level must be an object", path=path)
    for key, kind in (("n_variables", int), ("n_tests", int), ("tests", list)):
        if key not in data:
            raise DesignFormatError("missing field", path=path, field=key)
        if not isinstance(data[key], kind) or isinstance(data[key], bool):
            raise DesignFormatError(f"expected {kind.__name__}", path=path, field=key)
    n = data["n_variables"]
    tests = data["tests"]
    for a, pool in enumerate(tests):
        if not isinstance(pool, list):
            raise DesignFormatError("pool must be a list", path=path, field=f"tests[{a}]")
        for k, v in enumerate(pool):
            if not isinstance(v, int) or isinstance(v, bool):
                raise DesignFormatError("index must be an integer", path=path,
                                        field=f"tests[{a}][{k}]")
            if not 0 <= v < n:
                raise DesignError(f"tests[{a}][{k}]: variable index {v} out of range [0, {n})")
        if len(set(pool)) != len(pool):
            raise DesignError(f"tests[{a}]: duplicate variable index in pool")
    seed = data.get("seed", 0)
    if seed is None:
        seed = 0
    return PoolDesign(n, tests, n_tests=data["n_tests"],
                      family=data.get("family", "custom"), seed=seed)


def save_design(design, path, fmt=None):
    """Write ``design`` as JSON or adjacency text (chosen by ``fmt`` or suffix)."""
    path = Path(path)
    if _format_for(path, fmt) == "json":
        path.write_text(json.dumps(design_to_dict(design)) + "\n")
        return path
    lines = [f"# family={design.family} seed={design.seed}",
             f"{design.n_variables} {design.n_tests}"]
    lines.extend(" ".join(map(str, t)) for t in design.tests)
    path.write_text("\n".join(lines) + "\n")
    return path


def load_design(path, fmt=None) -> PoolDesign:
    path = Path(path)
    text = path.read_text()
    if _format_for(path, fmt) == "json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DesignFormatError(exc.msg, path=path, line=exc.lineno) from None
        return design_from_dict(data, path)
    return _parse_adjacency(text, path)


def _parse_adjacency(text, path=None):
    # leading '#' lines may carry "key=value" provenance; after the header,
    # every line (blank included) is one pool
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    meta = {}
    k = 0
    while k < len(lines) and lines[k].startswith("#"):
        for tok in lines[k][1:].split():
            key, sep, val = tok.partition("=")
            if sep:
                meta[key] = val
        k += 1
    if k >= len(lines):
        raise DesignFormatError("missing 'N M' header", path=path, line=k + 1)
    header = lines[k].split()
    if len(header) != 2:
        raise DesignFormatError("header must be 'N M'", path=path, line=k + 1)
    try:
        n, m = int(header[0]), int(header[1])
    except ValueError:
        raise DesignFormatError("header must hold two integers", path=path, line=k + 1) from None
    body = lines[k + 1:]
    if len(body) != m:
        raise DesignError(f"{path or 'design'}: header declares M={m} but {len(body)} pool lines follow")
    pools = []
    for off, line in enumerate(body):
        lineno = k + 2 + off
        try:
            pool = [int(tok) for tok in line.split()]
        except ValueError:
            raise DesignFormatError("non-integer index", path=path, line=lineno) from None
        for v in pool:
            if not 0 <= v < n:
                raise DesignError(f"line {lineno}: variable index {v} out of range [0, {n})")
        if len(set(pool)) != len(pool):
            raise DesignError(f"line {lineno}: duplicate variable index in pool")
        pools.append(pool)
    try:
        seed = int(meta.get("seed", 0))
    except ValueError:
        raise DesignFormatError("bad seed in metadata", path=path, line=1) from None
    return PoolDesign(n, pools, n_tests=m, family=meta.get("family", "custom"), seed=seed)
