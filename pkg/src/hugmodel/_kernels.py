"""Jitted hot loop of the sampler.

These mirror :mod:`hugmodel.geometry`, :mod:`hugmodel.model` and the
reference :func:`hugmodel.sampler.mh_step` operation for operation; the test
suite checks they agree.  Sources live in a fixed-capacity buffer ``S`` whose
first ``n`` rows are the current configuration.

Random numbers are drawn outside and passed in.  Per MH step the kernel reads
``u`` (uniforms, ``N_UNIFORM_FIXED + K`` slots) and ``z`` (K normals):

    u[0]  move type        u[1]  which source
    u[2]  acceptance       u[3]  radius of the change proposal
    u[4:4+K]  birth location
    z         direction of the change proposal (K normals; the first two
              are used when the ball lives in the active plane)
"""
import math

import numpy as np
from numba import njit

N_UNIFORM_FIXED = 4
TOL = 1e-12

# move codes, used as indices into the acceptance counters
BIRTH, DEATH, CHANGE = 0, 1, 2


@njit(cache=True)
def convex_hull(xs, ys, n, hx, hy, order, px, py):
    """Monotone chain on the first ``n`` points; returns the vertex count.

    ``order``, ``px`` and ``py`` are scratch space of length >= n; ``hx`` and
    ``hy`` receive the counter-clockwise vertices and need 2n slots.
    """
    if n == 0:
        return 0
    for i in range(n):
        order[i] = i
    for i in range(1, n):
        k = order[i]
        j = i - 1
        while j >= 0 and (
            xs[order[j]] > xs[k] or (xs[order[j]] == xs[k] and ys[order[j]] > ys[k])
        ):
            order[j + 1] = order[j]
            j -= 1
        order[j + 1] = k
    u = 0
    for i in range(n):
        x = xs[order[i]]
        y = ys[order[i]]
        if u > 0 and px[u - 1] == x and py[u - 1] == y:
            continue
        px[u] = x
        py[u] = y
        u += 1
    if u < 3:
        for i in range(u):
            hx[i] = px[i]
            hy[i] = py[i]
        return u
    # lower chain then upper chain; workspace needs 2u slots
    h = 0
    for i in range(u):
        while h >= 2 and (
            (hx[h - 1] - hx[h - 2]) * (py[i] - hy[h - 2])
            - (hy[h - 1] - hy[h - 2]) * (px[i] - hx[h - 2])
        ) <= 0:
            h -= 1
        hx[h] = px[i]
        hy[h] = py[i]
        h += 1
    lower = h
    for i in range(u - 2, -1, -1):
        while h > lower and (
            (hx[h - 1] - hx[h - 2]) * (py[i] - hy[h - 2])
            - (hy[h - 1] - hy[h - 2]) * (px[i] - hx[h - 2])
        ) <= 0:
            h -= 1
        hx[h] = px[i]
        hy[h] = py[i]
        h += 1
    return h - 1


@njit(cache=True)
def polygon_area(hx, hy, h):
    if h < 3:
        return 0.0
    s = 0.0
    for i in range(h):
        j = i + 1
        if j == h:
            j = 0
        s += hx[i] * hy[j] - hx[j] * hy[i]
    return abs(s) / 2.0


@njit(cache=True)
def count_inside(hx, hy, h, px, py, m, flag):
    """Points inside or on the hull; ``flag`` is int scratch of length >= m."""
    cnt = 0
    if h >= 3:
        # edges in the outer loop keep the inner loop branch-free
        for k in range(m):
            flag[k] = 1
        for i in range(h):
            j = i + 1
            if j == h:
                j = 0
            ax = hx[i]
            ay = hy[i]
            ex = hx[j] - ax
            ey = hy[j] - ay
            for k in range(m):
                if ex * (py[k] - ay) - ey * (px[k] - ax) < -TOL:
                    flag[k] = 0
        for k in range(m):
            cnt += flag[k]
    elif h == 2:
        dx = hx[1] - hx[0]
        dy = hy[1] - hy[0]
        ll = dx * dx + dy * dy
        for k in range(m):
            cr = dx * (py[k] - hy[0]) - dy * (px[k] - hx[0])
            t = dx * (px[k] - hx[0]) + dy * (py[k] - hy[0])
            if abs(cr) <= TOL and t >= -TOL and t <= ll + TOL:
                cnt += 1
    elif h == 1:
        for k in range(m):
            if abs(px[k] - hx[0]) <= TOL and abs(py[k] - hy[0]) <= TOL:
                cnt += 1
    return cnt


def make_workspace(cap, m):
    """Float rows: xs, ys, hull x, hull y, two sort buffers, saved source.
    Int rows: sort order, containment flags."""
    size = max(2 * cap + 2, m)
    return np.empty((7, size)), np.empty((2, size), dtype=np.int64)


@njit(cache=True)
def plane_statistics(S, n, i1, i2, dxy, data_area, r, work, iwork):
    """(g, n_e, n, n_r) of the first ``n`` rows of ``S`` on plane (i1, i2)."""
    m = dxy.shape[1]
    if n == 0:
        return 1.0, 1.0, 0, 0
    xs = work[0]
    ys = work[1]
    hx = work[2]
    hy = work[3]
    for a in range(n):
        xs[a] = S[a, i1]
        ys[a] = S[a, i2]
    h = convex_hull(xs, ys, n, hx, hy, iwork[0], work[4], work[5])
    g = abs(polygon_area(hx, hy, h) / data_area - 1.0)
    n_e = 1.0 - count_inside(hx, hy, h, dxy[0], dxy[1], m, iwork[1]) / m
    r2 = r * r
    n_r = 0
    for a in range(n):
        for b in range(a + 1, n):
            ddx = xs[a] - xs[b]
            ddy = ys[a] - ys[b]
            if ddx * ddx + ddy * ddy <= r2:
                n_r += 1
    return g, n_e, n, n_r


@njit(cache=True)
def plane_energy(S, n, i1, i2, dxy, data_area, theta, r, work, iwork):
    g, n_e, nn, n_r = plane_statistics(S, n, i1, i2, dxy, data_area, r, work, iwork)
    return (theta[0] * g + theta[1] * n_e) + (theta[2] * nn + theta[3] * n_r)


@njit(cache=True)
def mh_step(S, n, U, u, z, i1, i2, dxy, data_area, theta, r, T,
            pb, pd, pc, rc, min_n, full, counts, work, iwork):
    """One birth/death/change update.  Returns the new (n, U)."""
    K = S.shape[1]
    vol = 1.0
    um = u[0]
    if um < pb:
        if n >= S.shape[0]:
            return n, U
        for k in range(K):
            S[n, k] = u[N_UNIFORM_FIXED + k]
        U_new = plane_energy(S, n + 1, i1, i2, dxy, data_area, theta, r, work, iwork)
        log_r = -(U_new - U) / T + math.log(pd * vol / (pb * (n + 1)))
        if log_r >= 0.0 or u[2] < math.exp(log_r):
            counts[BIRTH] += 1
            return n + 1, U_new
        return n, U
    elif um < pb + pd:
        if n == 0 or n <= min_n:
            return n, U
        idx = int(u[1] * n)
        last = n - 1
        for k in range(K):
            tmp = S[idx, k]
            S[idx, k] = S[last, k]
            S[last, k] = tmp
        U_new = plane_energy(S, n - 1, i1, i2, dxy, data_area, theta, r, work, iwork)
        log_r = -(U_new - U) / T + math.log(pb * n / (pd * vol))
        if log_r >= 0.0 or u[2] < math.exp(log_r):
            counts[DEATH] += 1
            return n - 1, U_new
        for k in range(K):
            tmp = S[idx, k]
            S[idx, k] = S[last, k]
            S[last, k] = tmp
        return n, U
    elif um < pb + pd + pc:
        if n == 0:
            return n, U
        idx = int(u[1] * n)
        old = work[6]
        nz = 0.0
        if full:
            for k in range(K):
                nz += z[k] * z[k]
        else:
            nz = z[0] * z[0] + z[1] * z[1]
        nz = math.sqrt(nz)
        if nz == 0.0:
            return n, U
        for k in range(K):
            old[k] = S[idx, k]
        if full:
            # uniform in the K-ball of radius rc around the source
            rad = rc * u[3] ** (1.0 / K)
            for k in range(K):
                c = old[k] + rad * z[k] / nz
                if c < 0.0 or c > 1.0:
                    return n, U
            for k in range(K):
                S[idx, k] = old[k] + rad * z[k] / nz
        else:
            # uniform in the disc of radius rc within the active plane
            rad = rc * math.sqrt(u[3])
            c1 = old[i1] + rad * z[0] / nz
            c2 = old[i2] + rad * z[1] / nz
            if c1 < 0.0 or c1 > 1.0 or c2 < 0.0 or c2 > 1.0:
                return n, U
            S[idx, i1] = c1
            S[idx, i2] = c2
        U_new = plane_energy(S, n, i1, i2, dxy, data_area, theta, r, work, iwork)
        log_r = -(U_new - U) / T
        if log_r >= 0.0 or u[2] < math.exp(log_r):
            counts[CHANGE] += 1
            return n, U_new
        for k in range(K):
            S[idx, k] = old[k]
        return n, U
    return n, U


@njit(cache=True)
def run_iterations(S, n, planes, thetas, temps, urand, zrand, pairs, dplanes,
                   areas, r, pb, pd, pc, rc, min_n, full, counts, work, iwork):
    """Run ``len(temps)`` annealing iterations of G Gibbs calls with M steps each.

    ``planes`` is (B, G) of 0-based plane indices, ``urand`` is (B, G, M, 4+K)
    and ``zrand`` is (B, G, M, K).  Returns the final source count.
    """
    B = temps.shape[0]
    G = planes.shape[1]
    M = urand.shape[2]
    for b in range(B):
        theta = thetas[b]
        T = temps[b]
        for g in range(G):
            v = planes[b, g]
            i1 = pairs[v, 0]
            i2 = pairs[v, 1]
            dxy = dplanes[v]
            area = areas[v]
            U = plane_energy(S, n, i1, i2, dxy, area, theta, r, work, iwork)
            for k in range(M):
                n, U = mh_step(S, n, U, urand[b, g, k], zrand[b, g, k], i1, i2,
                               dxy, area, theta, r, T, pb, pd, pc, rc, min_n, full, counts,
                               work, iwork)
    return n
