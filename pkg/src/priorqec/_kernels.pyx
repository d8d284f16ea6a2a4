# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled BP and OSD-0 kernels. Same interface as ``_fallback``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport tanh, atanh, exp
from libc.stdlib cimport malloc, free

cnp.import_array()

from ._fallback import Graph, INDEX_TIES

cdef double LLR_CLAMP = 30.0
cdef double SOFT_QUANTUM = 2.0 ** -40


cdef inline double _clamp(double x) noexcept nogil:
    if x > LLR_CLAMP:
        return LLR_CLAMP
    if x < -LLR_CLAMP:
        return -LLR_CLAMP
    return x


cdef inline unsigned long long _splitmix64(unsigned long long x) noexcept nogil:
    cdef unsigned long long z = x + 0x9E3779B97F4A7C15ULL
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef void _tie_keys(const unsigned char[::1] s, Py_ssize_t n, long long seed,
                    unsigned long long[::1] keys) noexcept nogil:
    cdef Py_ssize_t c, j
    cdef unsigned long long h
    if seed == -1:
        for j in range(n):
            keys[j] = j
        return
    h = _splitmix64(<unsigned long long> seed)
    for c in range(s.shape[0]):
        if s[c]:
            h = _splitmix64(h ^ <unsigned long long> (c + 1))
    for j in range(n):
        keys[j] = _splitmix64(h ^ <unsigned long long> (j + 1))


cdef int _bp(
    Py_ssize_t m, Py_ssize_t n,
    const long long[::1] check_ptr, const long long[::1] edge_bit,
    const long long[::1] bit_ptr, const long long[::1] bit_edge_list,
    const unsigned char[::1] s, const double[::1] prior, int max_iter,
    double[::1] c2v, double[::1] tbuf, double[::1] pre, double[::1] post,
    unsigned char[::1] hard, int* iterations,
) noexcept nogil:
    cdef Py_ssize_t c, v, e, k, lo, hi, deg
    cdef int it
    cdef double acc, suf, sgn, val, msg
    cdef unsigned char par
    cdef int ok
    for e in range(c2v.shape[0]):
        c2v[e] = 0.0
    for v in range(n):
        post[v] = prior[v]
    for it in range(1, max_iter + 1):
        for e in range(check_ptr[m]):
            tbuf[e] = tanh(0.5 * _clamp(post[edge_bit[e]] - c2v[e]))
        for c in range(m):
            lo = check_ptr[c]
            hi = check_ptr[c + 1]
            deg = hi - lo
            sgn = -1.0 if s[c] else 1.0
            acc = 1.0
            for k in range(deg):
                pre[lo + k] = acc
                acc = acc * tbuf[lo + k]
            suf = 1.0
            for k in range(deg - 1, -1, -1):
                val = pre[lo + k] * suf
                msg = 2.0 * atanh(val)
                c2v[lo + k] = sgn * _clamp(msg)
                suf = suf * tbuf[lo + k]
        for v in range(n):
            acc = prior[v]
            for k in range(bit_ptr[v], bit_ptr[v + 1]):
                acc = acc + c2v[bit_edge_list[k]]
            post[v] = acc
            hard[v] = 1 if acc < 0 else 0
        ok = 1
        for c in range(m):
            par = 0
            for e in range(check_ptr[c], check_ptr[c + 1]):
                par ^= hard[edge_bit[e]]
            if par != s[c]:
                ok = 0
                break
        if ok:
            iterations[0] = it
            return 1
    iterations[0] = max_iter
    return 0


cdef int _osd0(
    const unsigned char[:, ::1] h, const unsigned char[::1] s,
    const long long[::1] order, unsigned char[:, ::1] work,
    unsigned char[::1] out,
) noexcept nogil:
    # work is m x (n + 1); column t holds h[:, order[t]], column n the syndrome
    cdef Py_ssize_t m = h.shape[0]
    cdef Py_ssize_t n = h.shape[1]
    cdef Py_ssize_t i, j, t, r = 0, piv
    cdef unsigned char tmp
    cdef long long* pivots = <long long*> malloc((m + 1) * sizeof(long long))
    if pivots == NULL:
        return -1
    for i in range(m):
        for t in range(n):
            work[i, t] = h[i, order[t]]
        work[i, n] = s[i]
    for t in range(n):
        if r == m:
            break
        piv = -1
        for i in range(r, m):
            if work[i, t]:
                piv = i
                break
        if piv < 0:
            continue
        if piv != r:
            for j in range(n + 1):
                tmp = work[r, j]
                work[r, j] = work[piv, j]
                work[piv, j] = tmp
        for i in range(m):
            if i != r and work[i, t]:
                for j in range(t, n + 1):
                    work[i, j] ^= work[r, j]
        pivots[r] = t
        r += 1
    for i in range(r, m):
        if work[i, n]:
            free(pivots)
            return 0
    for j in range(n):
        out[j] = 0
    for i in range(r):
        if work[i, n]:
            out[order[pivots[i]]] = 1
    free(pivots)
    return 1


def _arrays(g):
    return (
        np.ascontiguousarray(g.check_ptr, dtype=np.int64),
        np.ascontiguousarray(g.edge_bit, dtype=np.int64),
        np.ascontiguousarray(g.bit_ptr, dtype=np.int64),
        np.ascontiguousarray(g.bit_edge_list, dtype=np.int64),
    )


def bp_decode(g, syndrome, llr_prior, int max_iter):
    """Flooding sum-product BP. Returns ``(posterior_llr, hard, converged, iterations)``."""
    cp, eb, bp, bel = _arrays(g)
    cdef const unsigned char[::1] s = np.ascontiguousarray(syndrome, dtype=np.uint8)
    cdef const double[::1] prior = np.ascontiguousarray(llr_prior, dtype=np.float64)
    post = np.empty(g.n)
    hard = np.zeros(g.n, dtype=np.uint8)
    ne = g.n_edges
    c2v = np.zeros(ne + 1)
    tbuf = np.ones(ne + 1)
    pre = np.ones(ne + 1)
    cdef int iters = 0
    cdef int ok
    ok = _bp(g.m, g.n, cp, eb, bp, bel, s, prior, max_iter, c2v, tbuf, pre, post, hard, &iters)
    return post, hard, bool(ok), iters


cdef void _soft_order(Py_ssize_t n, const double[::1] soft, const unsigned long long[::1] keys,
                      long long[::1] order) noexcept nogil:
    """Descending soft value; runs within SOFT_QUANTUM of their first member reorder by key."""
    cdef Py_ssize_t a, b, i, j
    cdef long long cur
    for a in range(n):
        order[a] = a
    for a in range(1, n):
        cur = order[a]
        b = a - 1
        while b >= 0 and soft[order[b]] < soft[cur]:
            order[b + 1] = order[b]
            b -= 1
        order[b + 1] = cur
    i = 0
    while i < n:
        j = i + 1
        while j < n and soft[order[i]] - soft[order[j]] <= SOFT_QUANTUM:
            j += 1
        for a in range(i + 1, j):
            cur = order[a]
            b = a - 1
            while b >= i and keys[order[b]] > keys[cur]:
                order[b + 1] = order[b]
                b -= 1
            order[b + 1] = cur
        i = j


def osd0(h, syndrome, order):
    """Eliminate columns in ``order``; solve on the first independent set found."""
    cdef const unsigned char[:, ::1] hv = np.ascontiguousarray(h, dtype=np.uint8)
    cdef const unsigned char[::1] s = np.ascontiguousarray(syndrome, dtype=np.uint8)
    cdef const long long[::1] o = np.ascontiguousarray(order, dtype=np.int64)
    work = np.zeros((hv.shape[0], hv.shape[1] + 1), dtype=np.uint8)
    out = np.zeros(hv.shape[1], dtype=np.uint8)
    rc = _osd0(hv, s, o, work, out)
    if rc < 0:
        raise MemoryError()
    if rc == 0:
        raise ValueError("syndrome is not in the column space of the check matrix")
    return out


def bposd_batch(g, syndromes, llr_prior, int max_iter, long long tie_seed=INDEX_TIES):
    """Decode each row of ``syndromes``.

    Returns ``(corrections, soft, converged, iterations)`` stacked per row.
    """
    cp, eb, bp, bel = _arrays(g)
    cdef const long long[::1] cpv = cp
    cdef const long long[::1] ebv = eb
    cdef const long long[::1] bpv = bp
    cdef const long long[::1] belv = bel
    cdef const unsigned char[:, ::1] syn = np.ascontiguousarray(np.atleast_2d(syndromes), dtype=np.uint8)
    cdef const unsigned char[:, ::1] hv = np.ascontiguousarray(g.h, dtype=np.uint8)
    cdef const double[::1] prior = np.ascontiguousarray(llr_prior, dtype=np.float64)
    cdef Py_ssize_t count = syn.shape[0]
    cdef Py_ssize_t m = g.m
    cdef Py_ssize_t n = g.n
    cdef Py_ssize_t ne = g.n_edges
    corr_a = np.zeros((count, n), dtype=np.uint8)
    soft_a = np.zeros((count, n))
    conv_a = np.zeros(count, dtype=np.uint8)
    iters_a = np.zeros(count, dtype=np.int64)
    cdef unsigned char[:, ::1] corr = corr_a
    cdef double[:, ::1] soft = soft_a
    cdef unsigned char[::1] conv = conv_a
    cdef long long[::1] iters = iters_a
    cdef double[::1] c2v = np.zeros(ne + 1)
    cdef double[::1] tbuf = np.ones(ne + 1)
    cdef double[::1] pre = np.ones(ne + 1)
    cdef double[::1] post = np.zeros(n)
    cdef unsigned char[::1] hard = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[:, ::1] work = np.zeros((m, n + 1), dtype=np.uint8)
    cdef long long[::1] order = np.zeros(n, dtype=np.int64)
    cdef unsigned long long[::1] keys = np.zeros(n, dtype=np.uint64)
    cdef Py_ssize_t k, v
    cdef int it = 0
    cdef int ok, rc
    for k in range(count):
        ok = _bp(m, n, cpv, ebv, bpv, belv, syn[k], prior, max_iter, c2v, tbuf, pre, post, hard, &it)
        for v in range(n):
            soft[k, v] = 1.0 / (1.0 + exp(post[v]))
        conv[k] = ok
        iters[k] = it
        if ok:
            for v in range(n):
                corr[k, v] = hard[v]
            continue
        _tie_keys(syn[k], n, tie_seed, keys)
        _soft_order(n, soft[k], keys, order)
        rc = _osd0(hv, syn[k], order, work, corr[k])
        if rc < 0:
            raise MemoryError()
        if rc == 0:
            raise ValueError("syndrome is not in the column space of the check matrix")
    return corr_a, soft_a, conv_a.astype(bool), iters_a
