"""First-stage test evaluation and the two-stage sure-zero / sure-one decode."""

import numpy as np

from . import kernels
from .core import DecodeResult, as_assignment


def run_tests(design, x):
    """OR of each pool under assignment ``x``; an empty pool reads 0."""
    x = as_assignment(x, design.n_variables)
    hits = np.bincount(np.repeat(np.arange(design.n_tests), np.diff(design.test_ptr)),
                       weights=x[design.test_idx], minlength=design.n_tests)
    return (hits > 0).astype(np.uint8)


def _sure_masks(design, x, outcomes):
    n, m = design.n_variables, design.n_tests
    edge_test = np.repeat(np.arange(m), np.diff(design.test_ptr))
    members = design.test_idx

    sure0 = np.bincount(members, weights=outcomes[edge_test] == 0, minlength=n) > 0
    free = np.bincount(edge_test, weights=~sure0[members], minlength=m)
    # positive test whose only non-sure-zero member is the variable itself
    witness = (outcomes == 1) & (free == 1)
    sure1 = (np.bincount(members, weights=witness[edge_test], minlength=n) > 0) & ~sure0
    return sure0, sure1


def decode_two_stage(design, x):
    """Sure zeros, sure ones and the undetermined sets for one assignment.

    Sure ones are computed in a single pass after the sure zeros; there is
    no iterated peeling.
    """
    x = as_assignment(x, design.n_variables)
    outcomes = run_tests(design, x)
    sure0, sure1 = _sure_masks(design, x, outcomes)
    ones = x.astype(bool)
    if np.any(sure0 & ones) or np.any(sure1 & ~ones):
        raise AssertionError("decoder soundness violated")

    def idx(mask):
        return tuple(int(v) for v in np.flatnonzero(mask))

    u0 = ~ones & ~sure0
    u1 = ones & ~sure1
    return DecodeResult(
        sure_zeros=idx(sure0),
        sure_ones=idx(sure1),
        undetermined_zeros=idx(u0),
        undetermined_ones=idx(u1),
        total_tests=design.n_tests + int(u0.sum()) + int(u1.sum()),
    )


def count_undetermined(design, x):
    """``(|U0|, |U1|)`` for one assignment, or arrays of them for a 2-D batch."""
    arr = np.asarray(x)
    if arr.ndim == 1:
        arr = as_assignment(arr, design.n_variables)[None, :]
        u0, u1 = kernels.count_undetermined_batch(*design.arrays(), arr)
        return int(u0[0]), int(u1[0])
    if arr.ndim != 2 or arr.shape[1] != design.n_variables:
        raise ValueError(f"batch must have shape (B, {design.n_variables}), got {arr.shape}")
    return kernels.count_undetermined_batch(*design.arrays(), np.ascontiguousarray(arr, dtype=np.uint8))


def parse_assignment(text, n):
    """Parse ``--x`` values: a binary string (char k is x_k) or ``0x`` hex (bit k is x_k)."""
    s = text.strip().replace("_", "")
    if s.lower().startswith("0x"):
        value = int(s[2:], 16)
        if value >> n:
            raise ValueError(f"hex assignment has bits beyond N={n}")
        return np.array([(value >> k) & 1 for k in range(n)], dtype=np.uint8)
    if not s or set(s) - {"0", "1"}:
        raise ValueError("assignment must be a 0/1 string or 0x-prefixed hex")
    return as_assignment([int(ch) for ch in s], n)
