"""Pure numpy implementations of the hot kernels.

Every expression here mirrors ``_kernels.pyx`` operation for operation so
the two backends agree bit for bit.  Keep them in sync.
"""

import numpy as np

NAME = "python"


def law_eval(la, lb, ua, ub, y):
    hi = la[0] * y + lb[0]
    for k in range(1, la.shape[0]):
        hi = np.maximum(hi, la[k] * y + lb[k])
    lo = ua[0] * y + ub[0]
    for k in range(1, ua.shape[0]):
        lo = np.minimum(lo, ua[k] * y + ub[k])
    return np.maximum(hi, lo)


def advance(x, la, lb, ua, ub, m, disc, on_spacing, ring, length, lead_speed):
    """One update of all cars; returns the new position vector."""
    x = np.asarray(x, dtype=np.float64)
    nu = x.shape[0]
    out = np.empty(nu)
    if nu == 0:
        return out
    if ring:
        depth = min(m, nu - 1) if nu > 1 else 1
        cars = np.arange(nu)
        first = 0
    else:
        depth = min(m, nu - 1)
        cars = np.arange(1, nu)
        first = 1
        out[0] = x[0] + lead_speed
    if cars.shape[0] == 0:
        return out
    best = np.full(cars.shape[0], np.inf)
    for j in range(1, depth + 1):
        if ring:
            sel = slice(None)
            lead = cars - j
            wrap = lead < 0
            dx = x[lead % nu] - x[cars]
            dx[wrap] = dx[wrap] + length
        else:
            # open road: car n only sees j <= n leaders
            sel = slice(j - first, None)
            c = cars[sel]
            dx = x[c - j] - x[c]
        if on_spacing:
            term = disc[j - 1] * (dx / j)
        else:
            term = disc[j - 1] * law_eval(la, lb, ua, ub, dx / j)
        best[sel] = np.minimum(best[sel], term)
    if on_spacing:
        best = law_eval(la, lb, ua, ub, best)
    out[first:] = x[first:] + best
    return out


def simulate(x0, horizon, la, lb, ua, ub, m, disc, on_spacing, ring, length, lead_speeds):
    """Iterate :func:`advance`; returns positions of shape ``(nu, horizon + 1)``."""
    x = np.array(x0, dtype=np.float64)
    pos = np.empty((x.shape[0], horizon + 1))
    pos[:, 0] = x
    for t in range(horizon):
        x = advance(x, la, lb, ua, ub, m, disc, on_spacing, ring, length, 0.0 if ring else lead_speeds[t])
        pos[:, t + 1] = x
    return pos


def cost_matrix(cnt, my, mv, cyy, cyv, cvv):
    """Least-squares line-fit error for every contiguous run of bins.

    Inputs are per-bin count, means and centered second moments.  Entry
    ``[i, j]`` (``j >= i``) is the residual sum of squares of one line fitted
    to bins ``i..j``; entries below the diagonal are ``inf``.
    """
    B = cnt.shape[0]
    cost = np.full((B, B), np.inf)
    sn = np.empty(B)
    smy = np.empty(B)
    smv = np.empty(B)
    syy = np.empty(B)
    syv = np.empty(B)
    svv = np.empty(B)
    for j in range(B):
        if j > 0:
            na = sn[:j]
            nb = cnt[j]
            n = na + nb
            dy = my[j] - smy[:j]
            dv = mv[j] - smv[:j]
            f = na * nb / n
            smy[:j] = smy[:j] + dy * nb / n
            smv[:j] = smv[:j] + dv * nb / n
            syy[:j] = syy[:j] + cyy[j] + dy * dy * f
            syv[:j] = syv[:j] + cyv[j] + dy * dv * f
            svv[:j] = svv[:j] + cvv[j] + dv * dv * f
            sn[:j] = n
        sn[j] = cnt[j]
        smy[j] = my[j]
        smv[j] = mv[j]
        syy[j] = cyy[j]
        syv[j] = cyv[j]
        svv[j] = cvv[j]
        a = syy[: j + 1]
        safe = np.where(a > 0.0, a, 1.0)
        sse = np.where(a > 0.0, svv[: j + 1] - syv[: j + 1] * syv[: j + 1] / safe, svv[: j + 1])
        cost[: j + 1, j] = np.maximum(sse, 0.0)
    return cost


def partition(cost, phi):
    """Optimal partition of bins into runs under cost ``run_error + phi``.

    Backward recursion ``G[i] = min_j (cost[i, j] + phi) + G[j + 1]`` with
    ``G[B] = 0``.  Ties prefer fewer runs, then a later end for the first run.
    Returns ``(end, value, runs)`` where ``end[i]`` is the last bin of the run
    starting at ``i``.
    """
    B = cost.shape[0]
    G = [0.0] * (B + 1)
    cnt = [0] * (B + 1)
    end = np.zeros(B, dtype=np.int64)
    for i in range(B - 1, -1, -1):
        best = np.inf
        bc = 0
        bj = -1
        row = cost[i]
        for j in range(i, B):
            val = (float(row[j]) + phi) + G[j + 1]
            c = cnt[j + 1] + 1
            if bj < 0 or val < best or (val == best and c <= bc):
                best = val
                bc = c
                bj = j
        G[i] = best
        cnt[i] = bc
        end[i] = bj
    return end, G[0], cnt[0]
