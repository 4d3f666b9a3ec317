"""Pure-Python hot loops.

These mirror ``_ckernels.pyx`` operation for operation so both backends
return bit-identical results; keep them in sync.
"""
import math

import numpy as np

INF = math.inf
TIE_RTOL = 1e-12


def delay_factor(rho, K):
    term = 1.0
    series = 0.0
    for n in range(K):
        series += term
        if n < K - 1:
            term = term * rho / (n + 1)
    gap = K - rho
    tail = term * rho / gap
    return term / (2.0 * gap * gap * (series + tail))


def search_assignments(opt_ptr, opt_idx, lam, smean, ssecond, travel, K, cap, budget):
    """Depth-first search over assignments of demands to their open bases.

    Returns ``(best, best_y, leaves, pruned, exhausted)`` where ``best`` is
    the minimal ``sum_i lam_i * E[R_i]`` over stable assignments (``inf`` if
    none) and ``exhausted`` flags that the leaf budget ran out.
    Demand 0 is the most significant digit, so among equal objectives the
    lexicographically smallest assignment is returned.
    """
    n = len(lam)
    nb = len(K)
    K = [int(k) for k in K]
    cap = [float(c) for c in cap]
    lam = [float(v) for v in lam]
    smean = np.asarray(smean, dtype=float).tolist()
    ssecond = np.asarray(ssecond, dtype=float).tolist()
    travel = np.asarray(travel, dtype=float).tolist()
    opt_ptr = [int(v) for v in opt_ptr]
    opt_idx = [int(v) for v in opt_idx]

    # accumulators per depth: rate, load (rho) and lam * E[S^2] per base, travel sum
    eta = [[0.0] * nb for _ in range(n + 1)]
    rho = [[0.0] * nb for _ in range(n + 1)]
    sec = [[0.0] * nb for _ in range(n + 1)]
    trav = [0.0] * (n + 1)
    choice = [0] * n
    y = [-1] * n
    best = INF
    best_y = [-1] * n
    leaves = 0
    pruned = 0

    prune_above = INF
    improve_below = INF
    depth = 0
    choice[0] = opt_ptr[0]
    while depth >= 0:
        if choice[depth] >= opt_ptr[depth + 1]:
            depth -= 1
            if depth >= 0:
                choice[depth] += 1
            continue
        j = opt_idx[choice[depth]]
        i = depth
        prev_e = eta[i]
        prev_r = rho[i]
        prev_s = sec[i]
        cur_e = eta[i + 1]
        cur_r = rho[i + 1]
        cur_s = sec[i + 1]
        for b in range(nb):
            cur_e[b] = prev_e[b]
            cur_r[b] = prev_r[b]
            cur_s[b] = prev_s[b]
        cur_e[j] = prev_e[j] + lam[i]
        cur_r[j] = prev_r[j] + lam[i] * smean[i][j]
        cur_s[j] = prev_s[j] + lam[i] * ssecond[i][j]
        trav[i + 1] = trav[i] + lam[i] * travel[i][j]
        y[i] = j
        if cur_r[j] > cap[j]:
            pruned += 1
            choice[depth] += 1
            continue
        # partial value never decreases as more demands are assigned
        value = trav[i + 1]
        for b in range(nb):
            if K[b] > 0 and cur_s[b] > 0.0:
                value += cur_e[b] * cur_s[b] * delay_factor(cur_r[b], K[b])
        if value > prune_above:
            pruned += 1
            choice[depth] += 1
            continue
        if depth == n - 1:
            leaves += 1
            if value < improve_below:
                best = value
                best_y = list(y)
                prune_above = best + TIE_RTOL * abs(best)
                improve_below = best - TIE_RTOL * abs(best)
            if leaves >= budget:
                return best, best_y, leaves, pruned, True
            choice[depth] += 1
            continue
        depth += 1
        choice[depth] = opt_ptr[depth]
    return best, best_y, leaves, pruned, False


def simulate_core(arr_time, dist, xi, takeoff, landing, v, beta):
    """Event loop of the dispatch simulator.

    ``dist[k, d]`` is the flight distance from drone ``d`` to request ``k``
    or ``inf`` when the drone may not serve it.  Requests must be sorted by
    arrival time.  A drone busy interval is
    ``takeoff + beta * d / v + landing + xi[k]``.

    Returns ``(dispatch, drone, busy_until, q_area, q_max, queued_end)``.
    """
    arr_time = [float(t) for t in arr_time]
    dist = np.asarray(dist, dtype=float)
    nreq, ndr = dist.shape
    dist = dist.tolist()
    xi = [float(v) for v in xi]

    free_at = [0.0] * ndr
    busy = [False] * ndr
    seq = [0] * ndr
    counter = 0
    dispatch = [-1.0] * nreq
    drone = [-1] * nreq
    queue = []
    qhead = 0
    qlen = 0
    q_area = 0.0
    q_max = 0
    last_t = 0.0
    nxt = 0

    while True:
        # next availability event: earliest busy drone, ties by insertion order
        dnext = -1
        for d in range(ndr):
            if busy[d]:
                if dnext < 0 or free_at[d] < free_at[dnext] or (
                    free_at[d] == free_at[dnext] and seq[d] < seq[dnext]
                ):
                    dnext = d
        if nxt < nreq and (dnext < 0 or arr_time[nxt] < free_at[dnext]):
            t = arr_time[nxt]
            q_area += qlen * (t - last_t)
            last_t = t
            k = nxt
            nxt += 1
            row = dist[k]
            best = -1
            for d in range(ndr):
                if not busy[d] and row[d] < INF:
                    if best < 0 or row[d] < row[best]:
                        best = d
            if best < 0:
                reachable = False
                for d in range(ndr):
                    if row[d] < INF:
                        reachable = True
                        break
                if reachable:
                    queue.append(k)
                    qlen += 1
                    if qlen > q_max:
                        q_max = qlen
                continue
            dispatch[k] = t
            drone[k] = best
            busy[best] = True
            free_at[best] = t + takeoff + beta * row[best] / v + landing + xi[k]
            seq[best] = counter
            counter += 1
        elif dnext >= 0:
            t = free_at[dnext]
            q_area += qlen * (t - last_t)
            last_t = t
            busy[dnext] = False
            # serve queued requests, oldest first, while some idle drone covers one
            while qlen > 0:
                pos = -1
                best = -1
                for p in range(qhead, len(queue)):
                    k = queue[p]
                    if k < 0:
                        continue
                    row = dist[k]
                    for d in range(ndr):
                        if not busy[d] and row[d] < INF:
                            if best < 0 or row[d] < row[best]:
                                best = d
                    if best >= 0:
                        pos = p
                        break
                if pos < 0:
                    break
                k = queue[pos]
                queue[pos] = -1
                qlen -= 1
                while qhead < len(queue) and queue[qhead] < 0:
                    qhead += 1
                row = dist[k]
                dispatch[k] = t
                drone[k] = best
                busy[best] = True
                free_at[best] = t + takeoff + beta * row[best] / v + landing + xi[k]
                seq[best] = counter
                counter += 1
        else:
            break

    return (
        np.array(dispatch),
        np.array(drone, dtype=np.int64),
        np.array(free_at),
        q_area,
        q_max,
        qlen,
    )
