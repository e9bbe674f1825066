"""Pure-numpy kernels. Same signatures and bit-identical results as ``_numba``."""

import numpy as np

# cap on batch * edges per chunk, keeps temporaries around 100 MB
_CHUNK_CELLS = 1 << 22


def _segment_sum(vals, seg, n_seg):
    """Row-wise ``bincount``: out[b, s] = sum of vals[b, e] over e with seg[e] == s."""
    b = vals.shape[0]
    flat = (np.arange(b, dtype=np.int64)[:, None] * n_seg + seg[None, :]).ravel()
    out = np.bincount(flat, weights=vals.ravel(), minlength=b * n_seg)
    return out.reshape(b, n_seg)


def _counts(test_ptr, test_idx, var_ptr, var_idx, x):
    n = var_ptr.shape[0] - 1
    m = test_ptr.shape[0] - 1
    edge_test = np.repeat(np.arange(m), np.diff(test_ptr))
    xb = x.astype(bool)

    positive = _segment_sum(xb[:, test_idx], edge_test, m) > 0
    # edge (i, a) in test-major order: i = test_idx[e], a = edge_test[e]
    sure0 = _segment_sum(~positive[:, edge_test], test_idx, n) > 0
    free = _segment_sum(~sure0[:, test_idx], edge_test, m)
    single = positive & (free == 1)
    witness = _segment_sum(single[:, edge_test], test_idx, n) > 0
    sure1 = witness & ~sure0

    u0 = np.count_nonzero(~xb & ~sure0, axis=1)
    u1 = np.count_nonzero(xb & ~sure1, axis=1)
    return u0.astype(np.int64), u1.astype(np.int64)


def count_undetermined_batch(test_ptr, test_idx, var_ptr, var_idx, x):
    batch = x.shape[0]
    step = max(1, _CHUNK_CELLS // max(1, test_idx.shape[0], x.shape[1]))
    u0 = np.empty(batch, dtype=np.int64)
    u1 = np.empty(batch, dtype=np.int64)
    for s in range(0, batch, step):
        u0[s:s + step], u1[s:s + step] = _counts(test_ptr, test_idx, var_ptr, var_idx, x[s:s + step])
    return u0, u1


def exhaustive_tallies(test_ptr, test_idx, var_ptr, var_idx, n):
    total = 1 << n
    t0 = np.zeros(n + 1, dtype=np.int64)
    t1 = np.zeros(n + 1, dtype=np.int64)
    shifts = np.arange(n, dtype=np.int64)
    step = max(1, _CHUNK_CELLS // max(1, test_idx.shape[0], n))
    for start in range(0, total, step):
        codes = np.arange(start, min(total, start + step), dtype=np.int64)
        x = ((codes[:, None] >> shifts[None, :]) & 1).astype(np.uint8)
        k = x.sum(axis=1)
        u0, u1 = count_undetermined_batch(test_ptr, test_idx, var_ptr, var_idx, x)
        t0 += np.bincount(k, weights=u0, minlength=n + 1).astype(np.int64)
        t1 += np.bincount(k, weights=u1, minlength=n + 1).astype(np.int64)
    return t0, t1


def count_undetermined_dense(c, x):
    """Batched decode for small dense designs: c is (S, N, M) bool, x is (S, N)."""
    c = c.astype(bool)
    xb = x.astype(bool)
    positive = (c & xb[:, :, None]).any(axis=1)
    sure0 = (c & ~positive[:, None, :]).any(axis=2)
    free = (c & ~sure0[:, :, None]).sum(axis=1)
    single = positive & (free == 1)
    sure1 = (c & single[:, None, :]).any(axis=2) & ~sure0
    u0 = np.count_nonzero(~xb & ~sure0, axis=1)
    u1 = np.count_nonzero(xb & ~sure1, axis=1)
    return u0.astype(np.int64), u1.astype(np.int64)


def four_cycle_counts(test_ptr, test_idx, var_ptr, var_idx, n):
    m = test_ptr.shape[0] - 1
    deg = np.diff(test_ptr)
    edge_test = np.repeat(np.arange(m), deg)
    rep = deg[edge_test]
    total = int(rep.sum())
    left = np.repeat(test_idx, rep)
    start = np.repeat(test_ptr[edge_test], rep)
    within = np.arange(total) - np.repeat(np.cumsum(rep) - rep, rep)
    right = test_idx[start + within]
    keep = left != right
    keys = left[keep].astype(np.int64) * n + right[keep]
    pairs, shared = np.unique(keys, return_counts=True)
    owner = pairs // n
    counts = np.bincount(owner, weights=shared * (shared - 1) // 2, minlength=n).astype(np.int64)
    type_d = np.bincount(owner, weights=shared >= 3, minlength=n) > 0
    return counts, type_d


def sample_l_subsets(uniforms, m):
    n, l = uniforms.shape
    out = np.empty((n, l), dtype=np.int64)
    perm = np.arange(m, dtype=np.int64)
    picks = np.empty(l, dtype=np.int64)
    for i in range(n):
        for k in range(l):
            j = k + int(uniforms[i, k] * (m - k))
            if j >= m:
                j = m - 1
            picks[k] = j
            perm[k], perm[j] = perm[j], perm[k]
        out[i] = np.sort(perm[:l])
        for k in range(l - 1, -1, -1):
            j = picks[k]
            perm[k], perm[j] = perm[j], perm[k]
    return out
