"""Seed derivation and Bernoulli sampling shared by generators and simulators."""

import numpy as np

MASK64 = (1 << 64) - 1


def mix64(z):
    """splitmix64 finalizer."""
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master, *keys):
    """Child seed for ``(master, k1, k2, ...)``: each key is xor-ed in and mixed.

    Independent of call order, so streams can be handed to workers in any
    order without changing results.
    """
    s = int(master) & MASK64
    for k in keys:
        s = mix64(s ^ (int(k) & MASK64))
    return s


def make_rng(seed, *keys):
    return np.random.default_rng(derive_seed(seed, *keys) if keys else int(seed) & MASK64)


def bernoulli_indices(rng, n_cells, prob):
    """Sorted indices of the successes among ``n_cells`` iid Bernoulli(prob) cells.

    Small ``prob`` uses geometric skips so the work is O(n_cells * prob).
    """
    if prob >= 1.0:
        return np.arange(n_cells, dtype=np.int64)
    if prob <= 0.0 or n_cells == 0:
        return np.empty(0, dtype=np.int64)
    if prob > 0.25:
        return np.flatnonzero(rng.random(n_cells) < prob).astype(np.int64)

    out = []
    pos = -1
    expected = n_cells * prob
    chunk = int(expected + 6.0 * np.sqrt(expected) + 16)
    while True:
        # clip so tiny probabilities cannot overflow the cumulative sum;
        # a gap past the end stops the scan either way
        gaps = np.minimum(rng.geometric(prob, size=chunk), n_cells + 1)
        steps = pos + np.cumsum(gaps)
        if steps[-1] >= n_cells:
            out.append(steps[steps < n_cells])
            break
        out.append(steps)
        pos = int(steps[-1])
        chunk = max(16, chunk // 4)
    return np.concatenate(out).astype(np.int64)
