"""Pure numpy implementation of the decoding kernels.

Mirrors ``_kernels.pyx`` operation for operation (same message order, same
leave-one-out products) so the two backends agree to rounding in the
transcendental functions.
"""

from __future__ import annotations

import numpy as np

LLR_CLAMP = 30.0
INDEX_TIES = -1
# soft values closer than this rank as ties
SOFT_QUANTUM = 2.0**-40
_M64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


def tie_keys(syndrome: np.ndarray, n: int, seed: int) -> np.ndarray:
    """Secondary sort key for OSD columns with equal soft values.

    ``seed == INDEX_TIES`` gives plain column order. Otherwise each column
    gets a pseudo-random key derived from ``seed`` and the syndrome, so ties
    are resolved deterministically but independently of qubit labels.
    """
    if seed == INDEX_TIES:
        return np.arange(n, dtype=np.uint64)
    h = splitmix64(seed & _M64)
    for c in np.flatnonzero(np.asarray(syndrome)):
        h = splitmix64(h ^ (int(c) + 1))
    return np.array([splitmix64(h ^ (j + 1)) for j in range(n)], dtype=np.uint64)


class Graph:
    """Padded edge layout of a parity-check matrix.

    Edges are numbered check-major. ``check_edges`` and ``bit_edges`` index
    into message arrays of length ``n_edges + 1``; the extra slot is padding.
    """

    def __init__(self, h: np.ndarray):
        h = np.ascontiguousarray(h, dtype=np.uint8)
        self.h = h
        self.m, self.n = h.shape
        rows, cols = np.nonzero(h)
        self.edge_check = rows.astype(np.int64)
        self.edge_bit = cols.astype(np.int64)
        self.n_edges = len(rows)
        pad = self.n_edges
        dc = np.bincount(rows, minlength=self.m)
        dv = np.bincount(cols, minlength=self.n)
        self.check_ptr = np.concatenate([[0], np.cumsum(dc)]).astype(np.int64)
        self.check_edges = np.full((self.m, max(int(dc.max(initial=0)), 1)), pad, dtype=np.int64)
        for c in range(self.m):
            k = self.check_ptr[c + 1] - self.check_ptr[c]
            self.check_edges[c, :k] = np.arange(self.check_ptr[c], self.check_ptr[c + 1])
        order = np.argsort(cols, kind="stable")
        self.bit_ptr = np.concatenate([[0], np.cumsum(dv)]).astype(np.int64)
        self.bit_edge_list = order.astype(np.int64)
        self.bit_edges = np.full((self.n, max(int(dv.max(initial=0)), 1)), pad, dtype=np.int64)
        for v in range(self.n):
            lo, hi = self.bit_ptr[v], self.bit_ptr[v + 1]
            self.bit_edges[v, : hi - lo] = order[lo:hi]


def bp_decode(g: Graph, syndrome: np.ndarray, llr_prior: np.ndarray, max_iter: int):
    """Flooding sum-product BP. Returns ``(posterior_llr, hard, converged, iterations)``."""
    s = np.asarray(syndrome, dtype=np.uint8)
    prior = np.asarray(llr_prior, dtype=np.float64)
    sign = np.where(s[g.edge_check] != 0, -1.0, 1.0)
    c2v = np.zeros(g.n_edges + 1)
    posterior = prior.copy()
    hard = np.zeros(g.n, dtype=np.uint8)
    tanh_buf = np.ones(g.n_edges + 1)
    for it in range(1, max_iter + 1):
        v2c = posterior[g.edge_bit] - c2v[:-1]
        np.clip(v2c, -LLR_CLAMP, LLR_CLAMP, out=v2c)
        tanh_buf[:-1] = np.tanh(0.5 * v2c)
        t = tanh_buf[g.check_edges]
        width = t.shape[1]
        prefix = np.ones_like(t)
        suffix = np.ones_like(t)
        for k in range(1, width):
            prefix[:, k] = prefix[:, k - 1] * t[:, k - 1]
        for k in range(width - 2, -1, -1):
            suffix[:, k] = suffix[:, k + 1] * t[:, k + 1]
        loo = prefix * suffix
        flat = np.empty(g.n_edges + 1)
        flat[g.check_edges] = loo
        with np.errstate(divide="ignore"):
            msg = 2.0 * np.arctanh(flat[:-1])
        np.clip(msg, -LLR_CLAMP, LLR_CLAMP, out=msg)
        c2v[:-1] = sign * msg
        c2v[-1] = 0.0
        incoming = c2v[g.bit_edges]
        posterior = prior.copy()
        for k in range(incoming.shape[1]):
            posterior += incoming[:, k]
        hard = (posterior < 0).astype(np.uint8)
        check = np.zeros(g.m, dtype=np.uint8)
        np.bitwise_xor.at(check, g.edge_check, hard[g.edge_bit])
        if np.array_equal(check, s):
            return posterior, hard, True, it
    return posterior, hard, False, max_iter


def osd0(h: np.ndarray, syndrome: np.ndarray, order: np.ndarray) -> np.ndarray:
    """Eliminate columns in ``order``; solve on the first independent set found.

    Raises ``ValueError`` if the syndrome is outside the column space.
    """
    h = np.asarray(h, dtype=np.uint8)
    m, n = h.shape
    # rows packed as ints: bit t = column order[t], bit n = syndrome
    rows = []
    for i in range(m):
        w = 0
        for t, c in enumerate(order):
            if h[i, c]:
                w |= 1 << t
        if syndrome[i]:
            w |= 1 << n
        rows.append(w)
    r = 0
    pivots = []
    for t in range(n):
        if r == m:
            break
        bit = 1 << t
        piv = next((i for i in range(r, m) if rows[i] & bit), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        for i in range(m):
            if i != r and rows[i] & bit:
                rows[i] ^= rows[r]
        pivots.append(t)
        r += 1
    rhs = 1 << n
    if any(rows[i] & rhs for i in range(r, m)):
        raise ValueError("syndrome is not in the column space of the check matrix")
    out = np.zeros(n, dtype=np.uint8)
    for i, t in enumerate(pivots):
        if rows[i] & rhs:
            out[order[t]] = 1
    return out


def soft_order(soft: np.ndarray, keys: np.ndarray | None = None) -> np.ndarray:
    """Column order: most likely flips first.

    Columns whose soft values lie within ``SOFT_QUANTUM`` of the first member
    of their run count as tied and are reordered by ascending ``keys``
    (default: index).
    """
    soft = np.asarray(soft, dtype=np.float64)
    order = np.argsort(-soft, kind="stable")
    keys = np.arange(len(soft), dtype=np.uint64) if keys is None else np.asarray(keys, dtype=np.uint64)
    out = []
    i = 0
    while i < len(order):
        j = i + 1
        while j < len(order) and soft[order[i]] - soft[order[j]] <= SOFT_QUANTUM:
            j += 1
        run = order[i:j]
        out.extend(run[np.argsort(keys[run], kind="stable")])
        i = j
    return np.array(out, dtype=np.int64)


def bposd_batch(g: Graph, syndromes: np.ndarray, llr_prior: np.ndarray, max_iter: int, tie_seed: int = INDEX_TIES):
    """Decode each row of ``syndromes``.

    Returns ``(corrections, soft, converged, iterations)`` stacked per row.
    """
    syndromes = np.atleast_2d(np.asarray(syndromes, dtype=np.uint8))
    count = syndromes.shape[0]
    corr = np.zeros((count, g.n), dtype=np.uint8)
    soft = np.zeros((count, g.n))
    conv = np.zeros(count, dtype=bool)
    iters = np.zeros(count, dtype=np.int64)
    for k in range(count):
        post, hard, ok, it = bp_decode(g, syndromes[k], llr_prior, max_iter)
        soft[k] = 1.0 / (1.0 + np.exp(post))
        conv[k] = ok
        iters[k] = it
        if ok:
            corr[k] = hard
        else:
            keys = tie_keys(syndromes[k], g.n, tie_seed)
            corr[k] = osd0(g.h, syndromes[k], soft_order(soft[k], keys))
    return corr, soft, conv, iters
