"""numba-compiled kernels. Must agree exactly with ``_numpy``."""

import numpy as np
from numba import njit


@njit(cache=True)
def _undetermined_one(test_ptr, test_idx, var_ptr, var_idx, x, positive, sure0, free):
    m = test_ptr.shape[0] - 1
    n = var_ptr.shape[0] - 1
    for a in range(m):
        t = 0
        for e in range(test_ptr[a], test_ptr[a + 1]):
            if x[test_idx[e]]:
                t = 1
                break
        positive[a] = t
    for i in range(n):
        s = 0
        for e in range(var_ptr[i], var_ptr[i + 1]):
            if positive[var_idx[e]] == 0:
                s = 1
                break
        sure0[i] = s
    for a in range(m):
        c = 0
        for e in range(test_ptr[a], test_ptr[a + 1]):
            if sure0[test_idx[e]] == 0:
                c += 1
        free[a] = c
    u0 = 0
    u1 = 0
    for i in range(n):
        if sure0[i]:
            continue
        if x[i] == 0:
            u0 += 1
            continue
        determined = False
        for e in range(var_ptr[i], var_ptr[i + 1]):
            a = var_idx[e]
            if positive[a] == 1 and free[a] == 1:
                determined = True
                break
        if not determined:
            u1 += 1
    return u0, u1


@njit(cache=True)
def count_undetermined_batch(test_ptr, test_idx, var_ptr, var_idx, x):
    batch = x.shape[0]
    m = test_ptr.shape[0] - 1
    n = var_ptr.shape[0] - 1
    positive = np.empty(m, dtype=np.uint8)
    sure0 = np.empty(n, dtype=np.uint8)
    free = np.empty(m, dtype=np.int64)
    u0 = np.empty(batch, dtype=np.int64)
    u1 = np.empty(batch, dtype=np.int64)
    for b in range(batch):
        u0[b], u1[b] = _undetermined_one(test_ptr, test_idx, var_ptr, var_idx, x[b],
                                         positive, sure0, free)
    return u0, u1


@njit(cache=True)
def exhaustive_tallies(test_ptr, test_idx, var_ptr, var_idx, n):
    m = test_ptr.shape[0] - 1
    positive = np.empty(m, dtype=np.uint8)
    sure0 = np.empty(n, dtype=np.uint8)
    free = np.empty(m, dtype=np.int64)
    x = np.empty(n, dtype=np.uint8)
    t0 = np.zeros(n + 1, dtype=np.int64)
    t1 = np.zeros(n + 1, dtype=np.int64)
    for code in range(1 << n):
        k = 0
        for i in range(n):
            bit = (code >> i) & 1
            x[i] = bit
            k += bit
        u0, u1 = _undetermined_one(test_ptr, test_idx, var_ptr, var_idx, x, positive, sure0, free)
        t0[k] += u0
        t1[k] += u1
    return t0, t1


@njit(cache=True)
def count_undetermined_dense(c, x):
    s_count, n, m = c.shape
    u0 = np.zeros(s_count, dtype=np.int64)
    u1 = np.zeros(s_count, dtype=np.int64)
    positive = np.empty(m, dtype=np.bool_)
    sure0 = np.empty(n, dtype=np.bool_)
    free = np.empty(m, dtype=np.int64)
    for s in range(s_count):
        for a in range(m):
            t = False
            for i in range(n):
                if c[s, i, a] and x[s, i]:
                    t = True
                    break
            positive[a] = t
        for i in range(n):
            z = False
            for a in range(m):
                if c[s, i, a] and not positive[a]:
                    z = True
                    break
            sure0[i] = z
        for a in range(m):
            f = 0
            for i in range(n):
                if c[s, i, a] and not sure0[i]:
                    f += 1
            free[a] = f
        for i in range(n):
            if sure0[i]:
                continue
            if not x[s, i]:
                u0[s] += 1
                continue
            determined = False
            for a in range(m):
                if c[s, i, a] and positive[a] and free[a] == 1:
                    determined = True
                    break
            if not determined:
                u1[s] += 1
    return u0, u1


@njit(cache=True)
def four_cycle_counts(test_ptr, test_idx, var_ptr, var_idx, n):
    counts = np.zeros(n, dtype=np.int64)
    type_d = np.zeros(n, dtype=np.bool_)
    shared = np.zeros(n, dtype=np.int64)
    touched = np.empty(n, dtype=np.int64)
    for i in range(n):
        nt = 0
        for e in range(var_ptr[i], var_ptr[i + 1]):
            a = var_idx[e]
            for f in range(test_ptr[a], test_ptr[a + 1]):
                j = test_idx[f]
                if j == i:
                    continue
                if shared[j] == 0:
                    touched[nt] = j
                    nt += 1
                shared[j] += 1
        c = 0
        d = False
        for t in range(nt):
            j = touched[t]
            s = shared[j]
            c += s * (s - 1) // 2
            if s >= 3:
                d = True
            shared[j] = 0
        counts[i] = c
        type_d[i] = d
    return counts, type_d


@njit(cache=True)
def sample_l_subsets(uniforms, m):
    n, l = uniforms.shape
    out = np.empty((n, l), dtype=np.int64)
    perm = np.arange(m)
    picks = np.empty(l, dtype=np.int64)
    for i in range(n):
        for k in range(l):
            j = k + int(uniforms[i, k] * (m - k))
            if j >= m:
                j = m - 1
            picks[k] = j
            tmp = perm[k]
            perm[k] = perm[j]
            perm[j] = tmp
        out[i] = np.sort(perm[:l])
        for k in range(l - 1, -1, -1):
            j = picks[k]
            tmp = perm[k]
            perm[k] = perm[j]
            perm[j] = tmp
    return out
