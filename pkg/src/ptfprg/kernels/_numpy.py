"""Pure-numpy kernels, vectorised over the batch axis.

Slower than the compiled path.  Integer kernels (GF multiply, Nisan
expansion, ROBP runs) are bit-identical to it; float outputs can differ in
the last ulp because numpy's vectorised log/cos are not libm.
"""

import numpy as np

_U1 = np.uint64(1)


def _mask(m):
    return np.uint64(0xFFFFFFFFFFFFFFFF) >> np.uint64(64 - m)


def gf_mul_array(a, b, m, poly_low):
    a = np.array(a, dtype=np.uint64)
    b = np.array(b, dtype=np.uint64)
    mask = _mask(m)
    top = np.uint64(m - 1)
    poly_low = np.uint64(poly_low)
    r = np.zeros_like(a)
    with np.errstate(over="ignore"):
        for _ in range(m):
            r ^= a * (b & _U1)
            b = b >> _U1
            carry = (a >> top) & _U1
            a = (a << _U1) & mask
            a ^= poly_low * carry
    return r


def _expand(x0, ha, hb, m, poly_low):
    S, k = ha.shape
    out = np.empty((S, 1 << k), dtype=np.uint64)
    out[:, 0] = x0
    size = 1
    for j in range(k - 1, -1, -1):
        cur = out[:, :size].copy()
        hashed = np.empty_like(cur)
        for i in range(size):
            hashed[:, i] = gf_mul_array(ha[:, j], cur[:, i], m, poly_low) ^ hb[:, j]
        out[:, 0:2 * size:2] = cur
        out[:, 1:2 * size:2] = hashed
        size *= 2
    return out


def nisan_expand_batch(x0, ha, hb, m, poly_low):
    return _expand(np.asarray(x0, dtype=np.uint64), np.asarray(ha, dtype=np.uint64),
                   np.asarray(hb, dtype=np.uint64), m, poly_low)


def _read_bits(blocks, m, off, nbits):
    res = np.zeros(blocks.shape[0], dtype=np.uint64)
    pos, left = off, nbits
    while left > 0:
        blk, within = divmod(pos, m)
        take = min(m - within, left)
        chunk = (blocks[:, blk] >> np.uint64(m - within - take)) & _mask(take)
        res = chunk if take == 64 else (res << np.uint64(take)) | chunk
        pos += take
        left -= take
    return res


def grid_gaussian_batch(j, k, N):
    j = np.asarray(j, dtype=np.uint64)
    k = np.asarray(k, dtype=np.uint64)
    N = np.uint64(N)
    Nf = float(N)
    upper = j >= N - j
    with np.errstate(divide="ignore", invalid="ignore"):
        t = ((N - j).astype(np.float64) - 0.5) / Nf
        low = -np.log((j.astype(np.float64) + 0.5) / Nf)
        L = np.where(upper, -np.log1p(-t), low)
    theta = (k.astype(np.float64) + 0.5) / Nf
    return np.sqrt(2.0 * L) * np.cos(2.0 * np.pi * theta)


def _family(blocks, n, bpv, bpu, N, m):
    N = np.uint64(N)
    out = np.empty((blocks.shape[0], n))
    for v in range(n):
        off = v * bpv * m
        jj = _read_bits(blocks, m, off, bpu) % N
        kk = _read_bits(blocks, m, off + bpu, bpu) % N
        out[:, v] = grid_gaussian_batch(jj, kk, N)
    return out


def _family_blocks(words, f, m, poly_low):
    k = (words.shape[2] - 1) // 2
    return _expand(words[:, f, 0], words[:, f, 1::2][:, :k], words[:, f, 2::2][:, :k],
                   m, poly_low)


def family_batch(words, m, poly_low, n, bpv, bpu, N):
    S, ell, _ = words.shape
    out = np.empty((S, ell, n))
    for f in range(ell):
        out[:, f, :] = _family(_family_blocks(words, f, m, poly_low), n, bpv, bpu, N, m)
    return out


def composed_batch(words, m, poly_low, n, bpv, bpu, N, weights, normalizer):
    S, ell, _ = words.shape
    acc = np.zeros((S, n))
    comp = np.zeros((S, n))
    for f in range(ell):
        fam = _family(_family_blocks(words, f, m, poly_low), n, bpv, bpu, N, m)
        y = weights[f] * fam - comp
        t = acc + y
        comp = (t - acc) - y
        acc = t
    return acc / normalizer


def robp_run_batch(transitions, accept, start, blocks):
    state = np.full(blocks.shape[0], start, dtype=np.int64)
    for t in range(blocks.shape[1]):
        state = transitions[t, state, blocks[:, t]]
    return accept[state]


def jacobi_eigh(a, rel_tol, max_sweeps):
    A = np.array(a, dtype=np.float64)
    n = A.shape[0]
    V = np.eye(n)
    fro = np.sqrt(np.sum(A * A))
    sweeps = 0
    iu = np.triu_indices(n, 1)
    while True:
        off = np.sqrt(2.0 * np.sum(A[iu] ** 2))
        if off <= rel_tol * fro or fro == 0.0:
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
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                cp, cq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                rp, rq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq


_H = (
    lambda x: np.ones_like(x),
    lambda x: x,
    lambda x: (x * x - 1.0) / np.sqrt(2.0),
    lambda x: (x * x * x - 3.0 * x) / np.sqrt(6.0),
    lambda x: (x * x * x * x - 6.0 * x * x + 3.0) / np.sqrt(24.0),
)


def hermite_moments(Y, var_idx, degs):
    K, width = var_idx.shape
    sums = np.zeros(K)
    sq = np.zeros(K)
    for q in range(K):
        v = np.ones(Y.shape[0])
        for t in range(width):
            d = degs[q, t]
            if d > 0:
                v = v * _H[d](Y[:, var_idx[q, t]])
        sums[q] = v.sum()
        sq[q] = (v * v).sum()
    return sums, sq
