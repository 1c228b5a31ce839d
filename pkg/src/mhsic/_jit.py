"""Compiled inner loops.

Every reduction here runs in a fixed sequential order so results are
bit-reproducible and independent of how the caller blocks the work.
Functions with ``lower`` in the name only read (or only fill) the lower
triangle and diagonal of a symmetric matrix; ``packed`` ones store that
triangle row by row in a flat vector.
"""

import math

import numba
import numpy as np

_jit = numba.njit(cache=True, nogil=True)


@_jit
def mirror_lower(out):
    # tiled so both the reads and the writes stay cache-resident
    n = out.shape[0]
    tile = 64
    for ib in range(0, n, tile):
        for jb in range(0, ib + 1, tile):
            for i in range(ib, min(ib + tile, n)):
                for j in range(jb, min(jb + tile, i)):
                    out[j, i] = out[i, j]
    return out


@_jit
def _count_top_bits(bits, base, i, top):
    for j in range(i):
        v = bits[base + j]
        if v > 0:
            top[v >> 48] += 1


@_jit
def sqdist_packed(xt, top):
    """Row-packed squared L2 distances (row ``i`` starts at ``i*(i+1)/2``).

    ``xt`` is the ``(q, n)`` transposed sample, so the inner loop streams
    over contiguous memory.  The diagonal is exactly zero.  A nonempty
    ``top`` receives the histogram used by :func:`packed_lower_median`,
    filled while each row is still in cache.
    """
    q, n = xt.shape
    out = np.empty(n * (n + 1) // 2)
    bits = out.view(np.int64)
    for i in range(n):
        base = i * (i + 1) // 2
        for j in range(i + 1):
            out[base + j] = 0.0
        for k in range(q):
            xi = xt[k, i]
            row = xt[k]
            for j in range(i):
                t = row[j] - xi
                out[base + j] += t * t
        if top.size:
            _count_top_bits(bits, base, i, top)
    return out


@_jit
def l1dist_packed(xt, top):
    q, n = xt.shape
    out = np.empty(n * (n + 1) // 2)
    bits = out.view(np.int64)
    for i in range(n):
        base = i * (i + 1) // 2
        for j in range(i + 1):
            out[base + j] = 0.0
        for k in range(q):
            xi = xt[k, i]
            row = xt[k]
            for j in range(i):
                out[base + j] += abs(row[j] - xi)
        if top.size:
            _count_top_bits(bits, base, i, top)
    return out


@_jit
def packed_lower_median(p, n, top):
    """Lower median of the off-diagonal entries of a nonnegative packed triangle.

    Positive doubles order like their int64 bit patterns.  ``top`` counts
    positive entries by their top 16 bits; one pass gathers the bucket
    holding the target rank, and a second 16-bit radix step narrows it
    before the final sort, so the result is exact.  Falls back to the lower
    median of the positive entries when the median is zero, and returns
    -1.0 when no entry is positive.
    """
    npos = top.sum()
    if npos == 0:
        return -1.0
    m = n * (n - 1) // 2
    zeros = m - npos
    k = (m - 1) // 2
    rank = k - zeros if k >= zeros else (npos - 1) // 2
    b1 = 0
    while rank >= top[b1]:
        rank -= top[b1]
        b1 += 1
    bits = p.view(np.int64)
    cand = np.empty(top[b1], np.int64)
    c = 0
    for i in range(1, n):
        base = i * (i + 1) // 2
        for j in range(i):
            v = bits[base + j]
            if v > 0 and v >> 48 == b1:
                cand[c] = v
                c += 1
    mid = np.zeros(1 << 16, np.int64)
    for v in cand:
        mid[(v >> 32) & 0xFFFF] += 1
    b2 = 0
    while rank >= mid[b2]:
        rank -= mid[b2]
        b2 += 1
    key = (b1 << 16) | b2
    last = np.empty(mid[b2], np.int64)
    c = 0
    for v in cand:
        if v >> 32 == key:
            last[c] = v
            c += 1
    last.sort()
    return last[rank : rank + 1].view(np.float64)[0]


@_jit
def packed_row_sums_into(p, r, i0, i1):
    """Add rows ``i0 <= i < i1`` of a packed symmetric matrix into row sums ``r``."""
    for i in range(i0, i1):
        base = i * (i + 1) // 2
        s = 0.0
        for j in range(i):
            v = p[base + j]
            s += v
            r[j] += v
        r[i] += s + p[base + i]


@_jit
def packed_row_means(p, n):
    """Row means of a symmetric matrix stored row-packed."""
    r = np.zeros(n)
    packed_row_sums_into(p, r, 0, n)
    return r / n


@_jit
def unpack_symmetric(p, n):
    out = np.empty((n, n))
    for i in range(n):
        base = i * (i + 1) // 2
        for j in range(i + 1):
            out[i, j] = p[base + j]
    return mirror_lower(out)


@_jit
def pack_lower(k):
    n = k.shape[0]
    out = np.empty(n * (n + 1) // 2)
    for i in range(n):
        base = i * (i + 1) // 2
        for j in range(i + 1):
            out[base + j] = k[i, j]
    return out, sym_row_means(k)


@_jit
def gaussian_gram_cross(a, b, bandwidth):
    na, q = a.shape
    nb = b.shape[0]
    out = np.empty((na, nb))
    scale = 1.0 / (2.0 * bandwidth * bandwidth)
    for i in range(na):
        for j in range(nb):
            s = 0.0
            for k in range(q):
                t = a[i, k] - b[j, k]
                s += t * t
            out[i, j] = math.exp(-s * scale)
    return out


@_jit
def laplace_gram_cross(a, b, bandwidth):
    na, q = a.shape
    nb = b.shape[0]
    out = np.empty((na, nb))
    scale = 1.0 / bandwidth
    for i in range(na):
        for j in range(nb):
            s = 0.0
            for k in range(q):
                s += abs(a[i, k] - b[j, k])
            out[i, j] = math.exp(-s * scale)
    return out


@_jit
def gaussian_from_inner(g, sq_a, sq_b, bandwidth, symmetric):
    """Turn an inner-product matrix into a Gaussian Gram matrix in place."""
    na, nb = g.shape
    scale = 1.0 / (2.0 * bandwidth * bandwidth)
    for i in range(na):
        for j in range(nb):
            d2 = sq_a[i] + sq_b[j] - 2.0 * g[i, j]
            if d2 < 0.0:
                d2 = 0.0
            g[i, j] = math.exp(-d2 * scale)
        if symmetric:
            g[i, i] = 1.0
    return g


@_jit
def sym_row_means(k):
    """Row means read from the lower triangle, summed as in :func:`packed_row_means`."""
    n = k.shape[0]
    r = np.zeros(n)
    for i in range(n):
        s = 0.0
        for j in range(i):
            v = k[i, j]
            s += v
            r[j] += v
        r[i] += s + k[i, i]
    return r / n


@_jit
def center_inplace(k, row_mean, col_mean, grand):
    n, m = k.shape
    # grand - (r_i + c_j) keeps the result exactly symmetric when r == c
    for i in range(n):
        ri = row_mean[i]
        for j in range(m):
            k[i, j] += grand - (ri + col_mean[j])
    return k


@_jit
def lower_row_sums(p):
    """Row sums of the strict lower triangle; the diagonal is never read."""
    n = p.shape[0]
    out = np.zeros(n)
    for i in range(1, n):
        s = 0.0
        for j in range(i):
            s += p[i, j]
        out[i] = s
    return out


@_jit
def centred_pair_packed_row_sums(a, ra, ga, b, rb, gb):
    """``lower_row_sums`` of the product of two packed Grams centred on the fly."""
    n = ra.shape[0]
    out = np.zeros(n)
    for i in range(1, n):
        base = i * (i + 1) // 2
        ai = ra[i]
        bi = rb[i]
        s = 0.0
        for j in range(i):
            s += (a[base + j] + (ga - (ai + ra[j]))) * (b[base + j] + (gb - (bi + rb[j])))
        out[i] = s
    return out


@_jit
def center_packed_inplace(k, row_mean, grand):
    n = row_mean.shape[0]
    for i in range(n):
        base = i * (i + 1) // 2
        ri = row_mean[i]
        for j in range(i + 1):
            k[base + j] += grand - (ri + row_mean[j])
    return k


@_jit
def reindexed_inner(a, b, perm):
    """sum_ij a[i, j] * b[perm[i], perm[j]] for symmetric a and b.

    ``a`` is row-packed (see :func:`sqdist_packed`); ``b`` is a full
    matrix, so row ``perm[i]`` of ``b`` is gathered in one sweep.
    """
    n = b.shape[0]
    off = 0.0
    diag = 0.0
    for i in range(n):
        base = i * (i + 1) // 2
        pi = perm[i]
        s = 0.0
        for j in range(i):
            s += a[base + j] * b[pi, perm[j]]
        off += s
        diag += a[base + i] * b[pi, pi]
    return 2.0 * off + diag
