# cython: language_level=3
"""Compiled hot loops; see ``_pykernels.py`` for the reference versions."""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, fabs

cnp.import_array()

cdef double TIE_RTOL = 1e-12


cdef inline double _delay_factor(double rho, int K) noexcept nogil:
    cdef double term = 1.0
    cdef double series = 0.0
    cdef double gap, tail
    cdef int n
    for n in range(K):
        series += term
        if n < K - 1:
            term = term * rho / (n + 1)
    gap = K - rho
    tail = term * rho / gap
    return term / (2.0 * gap * gap * (series + tail))


def delay_factor(double rho, int K):
    return _delay_factor(rho, K)


def search_assignments(opt_ptr, opt_idx, lam, smean, ssecond, travel, K, cap, long long budget):
    cdef const cnp.int64_t[::1] ptr = np.ascontiguousarray(opt_ptr, dtype=np.int64)
    cdef const cnp.int64_t[::1] idx = np.ascontiguousarray(opt_idx, dtype=np.int64)
    cdef const double[::1] lm = np.ascontiguousarray(lam, dtype=np.float64)
    cdef const double[:, ::1] s1 = np.ascontiguousarray(smean, dtype=np.float64)
    cdef const double[:, ::1] s2 = np.ascontiguousarray(ssecond, dtype=np.float64)
    cdef const double[:, ::1] tr = np.ascontiguousarray(travel, dtype=np.float64)
    cdef const cnp.int64_t[::1] kk = np.ascontiguousarray(K, dtype=np.int64)
    cdef const double[::1] cp = np.ascontiguousarray(cap, dtype=np.float64)
    cdef Py_ssize_t n = lm.shape[0]
    cdef Py_ssize_t nb = kk.shape[0]

    cdef double[:, ::1] eta = np.zeros((n + 1, nb))
    cdef double[:, ::1] rho = np.zeros((n + 1, nb))
    cdef double[:, ::1] sec = np.zeros((n + 1, nb))
    cdef double[::1] trav = np.zeros(n + 1)
    cdef cnp.int64_t[::1] choice = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] y = np.full(n, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] best_y = np.full(n, -1, dtype=np.int64)
    cdef double best = INFINITY
    cdef double prune_above = INFINITY
    cdef double improve_below = INFINITY
    cdef long long leaves = 0
    cdef long long pruned = 0
    cdef Py_ssize_t depth, i, j, b
    cdef double value
    cdef bint exhausted = False

    depth = 0
    choice[0] = ptr[0]
    with nogil:
        while depth >= 0:
            if choice[depth] >= ptr[depth + 1]:
                depth -= 1
                if depth >= 0:
                    choice[depth] += 1
                continue
            j = idx[choice[depth]]
            i = depth
            for b in range(nb):
                eta[i + 1, b] = eta[i, b]
                rho[i + 1, b] = rho[i, b]
                sec[i + 1, b] = sec[i, b]
            eta[i + 1, j] = eta[i, j] + lm[i]
            rho[i + 1, j] = rho[i, j] + lm[i] * s1[i, j]
            sec[i + 1, j] = sec[i, j] + lm[i] * s2[i, j]
            trav[i + 1] = trav[i] + lm[i] * tr[i, j]
            y[i] = j
            if rho[i + 1, j] > cp[j]:
                pruned += 1
                choice[depth] += 1
                continue
            value = trav[i + 1]
            for b in range(nb):
                if kk[b] > 0 and sec[i + 1, b] > 0.0:
                    value += eta[i + 1, b] * sec[i + 1, b] * _delay_factor(rho[i + 1, b], <int>kk[b])
            if value > prune_above:
                pruned += 1
                choice[depth] += 1
                continue
            if depth == n - 1:
                leaves += 1
                if value < improve_below:
                    best = value
                    for b in range(n):
                        best_y[b] = y[b]
                    prune_above = best + TIE_RTOL * fabs(best)
                    improve_below = best - TIE_RTOL * fabs(best)
                if leaves >= budget:
                    exhausted = True
                    break
                choice[depth] += 1
                continue
            depth += 1
            choice[depth] = ptr[depth]
    return best, [int(v) for v in best_y], leaves, pruned, bool(exhausted)


def simulate_core(arr_time, dist, xi, double takeoff, double landing, double v, double beta):
    cdef const double[::1] at = np.ascontiguousarray(arr_time, dtype=np.float64)
    cdef const double[:, ::1] dd = np.ascontiguousarray(dist, dtype=np.float64)
    cdef const double[::1] xs = np.ascontiguousarray(xi, dtype=np.float64)
    cdef Py_ssize_t nreq = dd.shape[0]
    cdef Py_ssize_t ndr = dd.shape[1]

    free_at_arr = np.zeros(ndr)
    dispatch_arr = np.full(nreq, -1.0)
    drone_arr = np.full(nreq, -1, dtype=np.int64)
    cdef double[::1] free_at = free_at_arr
    cdef double[::1] dispatch = dispatch_arr
    cdef cnp.int64_t[::1] drone = drone_arr
    cdef cnp.uint8_t[::1] busy = np.zeros(ndr, dtype=np.uint8)
    cdef cnp.int64_t[::1] seq = np.zeros(ndr, dtype=np.int64)
    cdef cnp.int64_t[::1] queue = np.full(max(nreq, 1), -1, dtype=np.int64)
    cdef Py_ssize_t qtail = 0
    cdef Py_ssize_t qhead = 0
    cdef long long qlen = 0
    cdef long long q_max = 0
    cdef long long counter = 0
    cdef double q_area = 0.0
    cdef double last_t = 0.0
    cdef double t
    cdef Py_ssize_t nxt = 0
    cdef Py_ssize_t d, dnext, best, k, p, pos
    cdef bint reachable

    with nogil:
        while True:
            dnext = -1
            for d in range(ndr):
                if busy[d]:
                    if dnext < 0 or free_at[d] < free_at[dnext] or (
                        free_at[d] == free_at[dnext] and seq[d] < seq[dnext]
                    ):
                        dnext = d
            if nxt < nreq and (dnext < 0 or at[nxt] < free_at[dnext]):
                t = at[nxt]
                q_area += qlen * (t - last_t)
                last_t = t
                k = nxt
                nxt += 1
                best = -1
                for d in range(ndr):
                    if not busy[d] and dd[k, d] < INFINITY:
                        if best < 0 or dd[k, d] < dd[k, best]:
                            best = d
                if best < 0:
                    reachable = False
                    for d in range(ndr):
                        if dd[k, d] < INFINITY:
                            reachable = True
                            break
                    if reachable:
                        queue[qtail] = k
                        qtail += 1
                        qlen += 1
                        if qlen > q_max:
                            q_max = qlen
                    continue
                dispatch[k] = t
                drone[k] = best
                busy[best] = 1
                free_at[best] = t + takeoff + beta * dd[k, best] / v + landing + xs[k]
                seq[best] = counter
                counter += 1
            elif dnext >= 0:
                t = free_at[dnext]
                q_area += qlen * (t - last_t)
                last_t = t
                busy[dnext] = 0
                while qlen > 0:
                    pos = -1
                    best = -1
                    for p in range(qhead, qtail):
                        k = queue[p]
                        if k < 0:
                            continue
                        for d in range(ndr):
                            if not busy[d] and dd[k, d] < INFINITY:
                                if best < 0 or dd[k, d] < dd[k, best]:
                                    best = d
                        if best >= 0:
                            pos = p
                            break
                    if pos < 0:
                        break
                    k = queue[pos]
                    queue[pos] = -1
                    qlen -= 1
                    while qhead < qtail and queue[qhead] < 0:
                        qhead += 1
                    dispatch[k] = t
                    drone[k] = best
                    busy[best] = 1
                    free_at[best] = t + takeoff + beta * dd[k, best] / v + landing + xs[k]
                    seq[best] = counter
                    counter += 1
            else:
                break

    return dispatch_arr, drone_arr, free_at_arr, q_area, int(q_max), int(qlen)
