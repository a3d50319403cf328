"""Compiled inner loops. Each function mirrors a pure-numpy reference path."""
import numpy as np
from numba import njit

RUNNING, COST_TOL, U_TOL, MAX_ITERS, STALLED = 0, 1, 2, 3, 4


@njit(cache=True)
def advance(rows, cols, vals, alpha, beta, x, y, t0, steps, max_iters,
            cost_tol, u_tol, stall_iters, cost, umean, ucss, disagree, ext, track):
    """Advance VLS in place by up to ``steps`` iterations starting at ``t0``.

    Diagnostics of state ``t0 + k`` go to index ``k`` of the output arrays.
    Returns ``(k, status)`` where ``k`` indexes the last state written.
    A negative tolerance disables that stopping rule. ``track`` carries
    ``(best cost, iterations since best)`` across calls for the stall rule,
    which fires after ``stall_iters`` iterations without a new minimum cost.
    """
    n = x.shape[0]
    m = rows.shape[0]
    num = np.empty(n)
    den = np.empty(n)
    k = 0
    while True:
        # diagnostics of the current state
        for i in range(n):
            den[i] = 0.0
        for e in range(m):
            yj = y[cols[e]]
            den[rows[e]] += yj * yj
        c = 0.0
        for e in range(m):
            r = x[rows[e]] * y[cols[e]] - vals[e]
            c += r * r
        cost[k] = c
        s = 0.0
        umin = np.inf
        umax = -np.inf
        for i in range(n):
            u = x[i] / alpha[i]
            s += u
            umin = min(umin, u)
            umax = max(umax, u)
            ext[0] = min(ext[0], x[i])
            ext[1] = max(ext[1], x[i])
            ext[2] = min(ext[2], y[i])
            ext[3] = max(ext[3], y[i])
            v = y[i] / beta[i]
            ext[6] = min(ext[6], v)
            ext[7] = max(ext[7], v)
        ext[4] = min(ext[4], umin)
        ext[5] = max(ext[5], umax)
        mean = s / n
        css = 0.0
        wsum = 0.0
        wu = 0.0
        for i in range(n):
            u = x[i] / alpha[i]
            css += (u - mean) * (u - mean)
            w = alpha[i] * x[i] * den[i]
            wsum += w
            wu += w * u
        umean[k] = mean
        ucss[k] = css
        pmean = wu / wsum
        d = 0.0
        for i in range(n):
            u = x[i] / alpha[i]
            d += (u - pmean) * (u - pmean)
        disagree[k] = np.sqrt(d)

        # index 0 of a later call repeats the previous call's last state
        if k > 0 or track[0] == np.inf:
            if c < track[0]:
                track[0] = c
                track[1] = 0.0
            else:
                track[1] += 1.0

        t = t0 + k
        if stall_iters > 0 and track[1] >= stall_iters:
            return k, STALLED
        if cost_tol >= 0.0 and c <= cost_tol:
            return k, COST_TOL
        if u_tol >= 0.0 and umax - umin <= u_tol * mean:
            return k, U_TOL
        if t >= max_iters:
            return k, MAX_ITERS
        if k == steps:
            return k, RUNNING

        # x-update from y_t, then y-update from x_{t+1}
        for i in range(n):
            num[i] = 0.0
        for e in range(m):
            num[rows[e]] += vals[e] * y[cols[e]]
        for i in range(n):
            x[i] = num[i] / den[i]
        for j in range(n):
            num[j] = 0.0
            den[j] = 0.0
        for e in range(m):
            xi = x[rows[e]]
            num[cols[e]] += vals[e] * xi
            den[cols[e]] += xi * xi
        for j in range(n):
            y[j] = num[j] / den[j]
        k += 1


@njit(cache=True)
def jacobi_eigh(a, tol, max_sweeps):
    """Cyclic Jacobi on a symmetric matrix (overwritten).

    Returns ``(eigenvalues, eigenvectors, sweeps)``; ``sweeps`` is -1 when the
    off-diagonal Frobenius norm did not drop to ``tol`` within ``max_sweeps``.
    """
    n = a.shape[0]
    v = np.eye(n)
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += 2.0 * a[p, q] * a[p, q]
        if np.sqrt(off) <= tol:
            return np.diag(a).copy(), v, sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                tt = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    tt = -tt
                c = 1.0 / np.sqrt(tt * tt + 1.0)
                s = tt * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    return np.diag(a).copy(), v, -1
