"""Hot loops, dispatched to numba when available.

Set ``GROUPTEST_DISABLE_NUMBA=1`` to force the pure-numpy implementations.
Both backends return identical results for identical inputs.
"""

import logging
import os

from . import _numpy

log = logging.getLogger(__name__)

_disabled = os.environ.get("GROUPTEST_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

if _disabled:
    _impl = _numpy
else:
    try:
        from . import _numba as _impl
    except ImportError:  # pragma: no cover - numba is a declared dependency
        log.warning("numba unavailable, using numpy kernels")
        _impl = _numpy

BACKEND = "numpy" if _impl is _numpy else "numba"

count_undetermined_batch = _impl.count_undetermined_batch
exhaustive_tallies = _impl.exhaustive_tallies
count_undetermined_dense = _impl.count_undetermined_dense
four_cycle_counts = _impl.four_cycle_counts
sample_l_subsets = _impl.sample_l_subsets

__all__ = [
    "BACKEND",
    "count_undetermined_batch",
    "exhaustive_tallies",
    "count_undetermined_dense",
    "four_cycle_counts",
    "sample_l_subsets",
]
