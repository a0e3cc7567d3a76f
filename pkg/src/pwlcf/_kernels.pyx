# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.  Arithmetic mirrors ``_kernels_py.py`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()

NAME = "cython"


cdef inline double _law(const double[::1] la, const double[::1] lb,
                        const double[::1] ua, const double[::1] ub, double y) noexcept nogil:
    cdef Py_ssize_t k
    cdef double hi = la[0] * y + lb[0]
    cdef double lo = ua[0] * y + ub[0]
    cdef double v
    for k in range(1, la.shape[0]):
        v = la[k] * y + lb[k]
        if v > hi:
            hi = v
    for k in range(1, ua.shape[0]):
        v = ua[k] * y + ub[k]
        if v < lo:
            lo = v
    return hi if hi >= lo else lo


def law_eval(la, lb, ua, ub, y):
    cdef const double[::1] a1 = np.ascontiguousarray(la, dtype=np.float64)
    cdef const double[::1] b1 = np.ascontiguousarray(lb, dtype=np.float64)
    cdef const double[::1] a2 = np.ascontiguousarray(ua, dtype=np.float64)
    cdef const double[::1] b2 = np.ascontiguousarray(ub, dtype=np.float64)
    arr = np.ascontiguousarray(y, dtype=np.float64)
    flat = arr.reshape(-1)
    out = np.empty_like(flat)
    cdef const double[::1] yv = flat
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    for i in range(yv.shape[0]):
        ov[i] = _law(a1, b1, a2, b2, yv[i])
    return out.reshape(arr.shape)


cdef void _advance(const double[::1] x, double[::1] out,
                   const double[::1] la, const double[::1] lb,
                   const double[::1] ua, const double[::1] ub,
                   Py_ssize_t m, const double[::1] disc, bint on_spacing,
                   bint ring, double length, double lead_speed) noexcept nogil:
    cdef Py_ssize_t nu = x.shape[0]
    cdef Py_ssize_t n, j, lead, depth, first
    cdef double dx, term, best
    cdef bint wrap
    if nu == 0:
        return
    if ring:
        first = 0
    else:
        first = 1
        out[0] = x[0] + lead_speed
    for n in range(first, nu):
        if ring:
            depth = m if m < nu - 1 else nu - 1
            if nu == 1:
                depth = 1
        else:
            depth = m if m < n else n
        best = INFINITY
        for j in range(1, depth + 1):
            lead = n - j
            wrap = lead < 0
            if wrap:
                lead = lead + nu
            dx = x[lead] - x[n]
            if wrap:
                dx = dx + length
            if on_spacing:
                term = disc[j - 1] * (dx / <double>j)
            else:
                term = disc[j - 1] * _law(la, lb, ua, ub, dx / <double>j)
            if term < best:
                best = term
        if on_spacing:
            best = _law(la, lb, ua, ub, best)
        out[n] = x[n] + best


def advance(x, la, lb, ua, ub, Py_ssize_t m, disc, bint on_spacing, bint ring,
            double length, double lead_speed):
    xa = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty_like(xa)
    _advance(xa, out, np.ascontiguousarray(la, dtype=np.float64), np.ascontiguousarray(lb, dtype=np.float64),
             np.ascontiguousarray(ua, dtype=np.float64), np.ascontiguousarray(ub, dtype=np.float64),
             m, np.ascontiguousarray(disc, dtype=np.float64), on_spacing, ring, length, lead_speed)
    return out


def simulate(x0, Py_ssize_t horizon, la, lb, ua, ub, Py_ssize_t m, disc, bint on_spacing,
             bint ring, double length, lead_speeds):
    cdef const double[::1] a1 = np.ascontiguousarray(la, dtype=np.float64)
    cdef const double[::1] b1 = np.ascontiguousarray(lb, dtype=np.float64)
    cdef const double[::1] a2 = np.ascontiguousarray(ua, dtype=np.float64)
    cdef const double[::1] b2 = np.ascontiguousarray(ub, dtype=np.float64)
    cdef const double[::1] dv = np.ascontiguousarray(disc, dtype=np.float64)
    cdef const double[::1] sp
    xa = np.array(x0, dtype=np.float64)
    cdef Py_ssize_t nu = xa.shape[0]
    pos = np.empty((nu, horizon + 1))
    pos[:, 0] = xa
    if ring:
        sp = np.zeros(max(horizon, 1))
    else:
        sp = np.ascontiguousarray(lead_speeds, dtype=np.float64)
    cur = xa
    nxt = np.empty(nu)
    cdef double[::1] cv = cur
    cdef double[::1] nv = nxt
    cdef double[:, ::1] pv = pos
    cdef double[::1] tmp
    cdef Py_ssize_t t, i
    with nogil:
        for t in range(horizon):
            _advance(cv, nv, a1, b1, a2, b2, m, dv, on_spacing, ring, length, sp[t])
            for i in range(nu):
                pv[i, t + 1] = nv[i]
            tmp = cv
            cv = nv
            nv = tmp
    return pos


def cost_matrix(cnt_, my_, mv_, cyy_, cyv_, cvv_):
    cdef const double[::1] cnt = np.ascontiguousarray(cnt_, dtype=np.float64)
    cdef const double[::1] my = np.ascontiguousarray(my_, dtype=np.float64)
    cdef const double[::1] mv = np.ascontiguousarray(mv_, dtype=np.float64)
    cdef const double[::1] cyy = np.ascontiguousarray(cyy_, dtype=np.float64)
    cdef const double[::1] cyv = np.ascontiguousarray(cyv_, dtype=np.float64)
    cdef const double[::1] cvv = np.ascontiguousarray(cvv_, dtype=np.float64)
    cdef Py_ssize_t B = cnt.shape[0]
    cost = np.full((B, B), np.inf)
    cdef double[:, ::1] cm = cost
    cdef double[::1] sn = np.empty(B)
    cdef double[::1] smy = np.empty(B)
    cdef double[::1] smv = np.empty(B)
    cdef double[::1] syy = np.empty(B)
    cdef double[::1] syv = np.empty(B)
    cdef double[::1] svv = np.empty(B)
    cdef Py_ssize_t i, j
    cdef double na, nb, n, dy, d_v, f, a, sse
    with nogil:
        for j in range(B):
            nb = cnt[j]
            for i in range(j):
                na = sn[i]
                n = na + nb
                dy = my[j] - smy[i]
                d_v = mv[j] - smv[i]
                f = na * nb / n
                smy[i] = smy[i] + dy * nb / n
                smv[i] = smv[i] + d_v * nb / n
                syy[i] = syy[i] + cyy[j] + dy * dy * f
                syv[i] = syv[i] + cyv[j] + dy * d_v * f
                svv[i] = svv[i] + cvv[j] + d_v * d_v * f
                sn[i] = n
            sn[j] = nb
            smy[j] = my[j]
            smv[j] = mv[j]
            syy[j] = cyy[j]
            syv[j] = cyv[j]
            svv[j] = cvv[j]
            for i in range(j + 1):
                a = syy[i]
                if a > 0.0:
                    sse = svv[i] - syv[i] * syv[i] / a
                else:
                    sse = svv[i]
                cm[i, j] = sse if sse > 0.0 else 0.0
    return cost


def partition(cost_, double phi):
    cdef const double[:, ::1] cost = np.ascontiguousarray(cost_, dtype=np.float64)
    cdef Py_ssize_t B = cost.shape[0]
    G_ = np.zeros(B + 1)
    cnt_ = np.zeros(B + 1, dtype=np.int64)
    end = np.zeros(B, dtype=np.int64)
    cdef double[::1] G = G_
    cdef long long[::1] cnt = cnt_
    cdef long long[::1] ev = end
    cdef Py_ssize_t i, j, bj
    cdef long long c, bc
    cdef double best, val
    with nogil:
        for i in range(B - 1, -1, -1):
            best = INFINITY
            bc = 0
            bj = -1
            for j in range(i, B):
                val = (cost[i, j] + phi) + G[j + 1]
                c = cnt[j + 1] + 1
                if bj < 0 or val < best or (val == best and c <= bc):
                    best = val
                    bc = c
                    bj = j
            G[i] = best
            cnt[i] = bc
            ev[i] = bj
    return end, float(G[0]), int(cnt[0])
