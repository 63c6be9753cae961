"""Numba-compiled kernels.  Signatures mirror ``_numpy`` exactly."""

import math

import numpy as np
from numba import njit, prange

_U1 = np.uint64(1)
_U0 = np.uint64(0)


@njit(cache=True, inline="always")
def _mask(m):
    return np.uint64(0xFFFFFFFFFFFFFFFF) >> np.uint64(64 - m)


@njit(cache=True, inline="always")
def _gf_mul(a, b, m, poly_low, mask):
    top = np.uint64(m - 1)
    r = _U0
    for _ in range(m):
        if b & _U1:
            r ^= a
        b >>= _U1
        carry = (a >> top) & _U1
        a = (a << _U1) & mask
        if carry:
            a ^= poly_low
    return r


@njit(cache=True)
def gf_mul_array(a, b, m, poly_low):
    mask = _mask(m)
    out = np.empty(a.shape[0], dtype=np.uint64)
    for i in range(a.shape[0]):
        out[i] = _gf_mul(a[i], b[i], m, poly_low, mask)
    return out


@njit(cache=True, inline="always")
def _reduce_table(m, poly_low, mask):
    # R[o] = o(x) * x^m mod f, for folding the 4 bits shifted out of the top
    R = np.empty(16, dtype=np.uint64)
    for o in range(16):
        R[o] = _gf_mul(np.uint64(o) << np.uint64(m - 4), np.uint64(16), m, poly_low, mask)
    return R


@njit(cache=True, inline="always")
def _fill_window(T, a, m, poly_low, mask):
    # T[w] = a * w(x) for every 4-bit w
    top = np.uint64(m - 1)
    T[0] = _U0
    p = a  # a * x^bit
    for bit in range(4):
        base = 1 << bit
        for w in range(base):
            T[base + w] = T[w] ^ p
        carry = (p >> top) & _U1
        p = (p << _U1) & mask
        if carry:
            p ^= poly_low


@njit(cache=True, inline="always")
def _gf_mul_window(T, R, v, m, mask, nib):
    shift = np.uint64(4 * (nib - 1))
    r = T[(v >> shift) & np.uint64(15)]
    hi = np.uint64(m - 4)
    for t in range(nib - 2, -1, -1):
        o = r >> hi
        r = ((r << np.uint64(4)) & mask) ^ R[o]
        r ^= T[(v >> np.uint64(4 * t)) & np.uint64(15)]
    return r


@njit(cache=True, inline="always")
def _expand_into(buf, x0, ha, hb, k, m, poly_low, mask, T, R):
    # buf[2i], buf[2i+1] <- buf[i], h_j(buf[i]) for j = k..1
    buf[0] = x0
    size = 1
    nib = (m + 3) // 4
    windowed = m >= 4
    if windowed:
        T[0] = _U0
    for j in range(k - 1, -1, -1):
        a = ha[j]
        b = hb[j]
        if windowed:
            _fill_window(T, a, m, poly_low, mask)
        for i in range(size - 1, -1, -1):
            v = buf[i]
            buf[2 * i] = v
            if windowed:
                buf[2 * i + 1] = _gf_mul_window(T, R, v, m, mask, nib) ^ b
            else:
                buf[2 * i + 1] = _gf_mul(a, v, m, poly_low, mask) ^ b
        size *= 2


@njit(cache=True, parallel=True)
def nisan_expand_batch(x0, ha, hb, m, poly_low):
    S = x0.shape[0]
    k = ha.shape[1]
    mask = _mask(m)
    out = np.empty((S, 1 << k), dtype=np.uint64)
    R = _reduce_table(m, poly_low, mask) if m >= 4 else np.zeros(16, dtype=np.uint64)
    for s in prange(S):
        T = np.empty(16, dtype=np.uint64)
        _expand_into(out[s], x0[s], ha[s], hb[s], k, m, poly_low, mask, T, R)
    return out


@njit(cache=True, inline="always")
def _read_bits(buf, m, off, nbits):
    res = _U0
    pos = off
    left = nbits
    while left > 0:
        blk = pos // m
        within = pos - blk * m
        take = min(m - within, left)
        chunk = (buf[blk] >> np.uint64(m - within - take)) & _mask(take)
        if take == 64:
            res = chunk
        else:
            res = (res << np.uint64(take)) | chunk
        pos += take
        left -= take
    return res


@njit(cache=True, inline="always")
def _grid_gaussian(j, k, N, Nf):
    if j >= N - j:
        t = (float(N - j) - 0.5) / Nf
        L = -math.log1p(-t)
    else:
        L = -math.log((float(j) + 0.5) / Nf)
    theta = (float(k) + 0.5) / Nf
    return math.sqrt(2.0 * L) * math.cos(2.0 * math.pi * theta)


@njit(cache=True, parallel=True)
def grid_gaussian_batch(j, k, N):
    Nf = float(N)
    out = np.empty(j.shape[0])
    for i in prange(j.shape[0]):
        out[i] = _grid_gaussian(j[i], k[i], N, Nf)
    return out


@njit(cache=True, inline="always")
def _family_into(dst, buf, n, bpv, bpu, N, Nf, m):
    stride = bpv * m
    for v in range(n):
        off = v * stride
        jj = _read_bits(buf, m, off, bpu) % N
        kk = _read_bits(buf, m, off + bpu, bpu) % N
        dst[v] = _grid_gaussian(jj, kk, N, Nf)


@njit(cache=True, parallel=True)
def family_batch(words, m, poly_low, n, bpv, bpu, N):
    S, ell, nw = words.shape
    k = (nw - 1) // 2
    mask = _mask(m)
    Nf = float(N)
    out = np.empty((S, ell, n))
    R = _reduce_table(m, poly_low, mask) if m >= 4 else np.zeros(16, dtype=np.uint64)
    for s in prange(S):
        T = np.empty(16, dtype=np.uint64)
        buf = np.empty(1 << k, dtype=np.uint64)
        ha = np.empty(k, dtype=np.uint64)
        hb = np.empty(k, dtype=np.uint64)
        for f in range(ell):
            for j in range(k):
                ha[j] = words[s, f, 1 + 2 * j]
                hb[j] = words[s, f, 2 + 2 * j]
            _expand_into(buf, words[s, f, 0], ha, hb, k, m, poly_low, mask, T, R)
            _family_into(out[s, f], buf, n, bpv, bpu, N, Nf, m)
    return out


@njit(cache=True, parallel=True)
def composed_batch(words, m, poly_low, n, bpv, bpu, N, weights, normalizer):
    S, ell, nw = words.shape
    k = (nw - 1) // 2
    mask = _mask(m)
    Nf = float(N)
    out = np.empty((S, n))
    R = _reduce_table(m, poly_low, mask) if m >= 4 else np.zeros(16, dtype=np.uint64)
    for s in prange(S):
        T = np.empty(16, dtype=np.uint64)
        buf = np.empty(1 << k, dtype=np.uint64)
        ha = np.empty(k, dtype=np.uint64)
        hb = np.empty(k, dtype=np.uint64)
        fam = np.empty(n)
        acc = np.zeros(n)
        comp = np.zeros(n)
        for f in range(ell):
            for j in range(k):
                ha[j] = words[s, f, 1 + 2 * j]
                hb[j] = words[s, f, 2 + 2 * j]
            _expand_into(buf, words[s, f, 0], ha, hb, k, m, poly_low, mask, T, R)
            _family_into(fam, buf, n, bpv, bpu, N, Nf, m)
            w = weights[f]
            for v in range(n):
                # Kahan step
                y = w * fam[v] - comp[v]
                t = acc[v] + y
                comp[v] = (t - acc[v]) - y
                acc[v] = t
        for v in range(n):
            out[s, v] = acc[v] / normalizer
    return out


@njit(cache=True, parallel=True)
def robp_run_batch(transitions, accept, start, blocks):
    S, n = blocks.shape
    out = np.empty(S, dtype=np.bool_)
    for s in prange(S):
        state = start
        for t in range(n):
            state = transitions[t, state, blocks[s, t]]
        out[s] = accept[state]
    return out


@njit(cache=True)
def jacobi_eigh(a, rel_tol, max_sweeps):
    n = a.shape[0]
    A = a.copy()
    V = np.eye(n)
    fro = math.sqrt(np.sum(A * A))
    sweeps = 0
    while True:
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += 2.0 * A[p, q] * A[p, q]
        if math.sqrt(off) <= rel_tol * fro or fro == 0.0:
            return np.diag(A).copy(), V, sweeps
        if sweeps >= max_sweeps:
            return np.diag(A).copy(), V, -1
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for r in range(n):
                    arp = A[r, p]
                    arq = A[r, q]
                    A[r, p] = c * arp - s * arq
                    A[r, q] = s * arp + c * arq
                for r in range(n):
                    apr = A[p, r]
                    aqr = A[q, r]
                    A[p, r] = c * apr - s * aqr
                    A[q, r] = s * apr + c * aqr
                for r in range(n):
                    vrp = V[r, p]
                    vrq = V[r, q]
                    V[r, p] = c * vrp - s * vrq
                    V[r, q] = s * vrp + c * vrq


@njit(cache=True, inline="always")
def _h(d, x):
    if d == 0:
        return 1.0
    if d == 1:
        return x
    x2 = x * x
    if d == 2:
        return (x2 - 1.0) / math.sqrt(2.0)
    if d == 3:
        return (x2 * x - 3.0 * x) / math.sqrt(6.0)
    return (x2 * x2 - 6.0 * x2 + 3.0) / math.sqrt(24.0)


@njit(cache=True, parallel=True)
def hermite_moments(Y, var_idx, degs):
    """Per multi-index sum and sum of squares of prod_t h_{degs[t]}(Y[:, var_idx[t]])."""
    S, n = Y.shape
    K, width = var_idx.shape
    sums = np.zeros(K)
    sq = np.zeros(K)
    for q in prange(K):
        acc = 0.0
        acc2 = 0.0
        for s in range(S):
            v = 1.0
            for t in range(width):
                d = degs[q, t]
                if d > 0:
                    v *= _h(d, Y[s, var_idx[q, t]])
            acc += v
            acc2 += v * v
        sums[q] = acc
        sq[q] = acc2
    return sums, sq
