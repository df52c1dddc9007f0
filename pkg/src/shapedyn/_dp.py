"""Compiled kernels for elastic (reparameterization) matching.

The lattice has nodes ``(i, j)`` for ``0 <= i, j <= N``: ``i`` indexes the
samples of the template ``q1`` and ``j`` the position along ``q2``. A step
``(di, dj)`` matches samples ``i .. i+di-1`` of ``q1`` with ``q2`` evaluated
on the straight segment to ``(i+di, j+dj)``, scaled by ``sqrt(dj/di)``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# slopes dj/di within [1/3, 3], reduced fractions only
STEPS = np.array(
    [[1, 1], [1, 2], [2, 1], [1, 3], [3, 1], [2, 3], [3, 2]], dtype=np.int64)


@njit(cache=True)
def dp_match_costs(costs, steps):
    """Minimal-cost monotone lattice path from (0, 0) to (N, N).

    Returns ``(cost, path_i, path_j)`` with the path listed from the origin.
    """
    n = costs.shape[1] - 1
    big = np.inf
    cost = np.full((n + 1, n + 1), big)
    back = np.full((n + 1, n + 1), -1, dtype=np.int64)
    cost[0, 0] = 0.0
    nsteps = steps.shape[0]
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            best = big
            arg = -1
            for s in range(nsteps):
                pi = i - steps[s, 0]
                pj = j - steps[s, 1]
                if pi < 0 or pj < 0:
                    continue
                c = cost[pi, pj] + costs[s, pi, pj]
                if c < best:
                    best = c
                    arg = s
            cost[i, j] = best
            back[i, j] = arg
    pi_rev = np.empty(n + 1, dtype=np.int64)
    pj_rev = np.empty(n + 1, dtype=np.int64)
    i, j, k = n, n, 0
    pi_rev[0] = n
    pj_rev[0] = n
    while i > 0 or j > 0:
        s = back[i, j]
        i -= steps[s, 0]
        j -= steps[s, 1]
        k += 1
        pi_rev[k] = i
        pj_rev[k] = j
    return cost[n, n], pi_rev[: k + 1][::-1].copy(), pj_rev[: k + 1][::-1].copy()


@njit(cache=True)
def edge_costs(q1, q2, steps):
    """Cost of every lattice step, shape ``(len(steps), N+1, N+1)``.

    ``out[s, i, j]`` is the cost of step ``steps[s]`` leaving node ``(i, j)``;
    steps that would overrun ``i`` are inf.
    """
    n = q1.shape[0]
    nsteps = steps.shape[0]
    out = np.full((nsteps, n + 1, n + 1), np.inf)
    shifted = np.empty((n + 1, 2))
    for s in range(nsteps):
        di = steps[s, 0]
        dj = steps[s, 1]
        slope = dj / di
        root = np.sqrt(slope)
        rows = n - di + 1
        for i in range(rows):
            for j in range(n + 1):
                out[s, i, j] = 0.0
        for m in range(di):
            off = m * slope
            for j in range(n + 1):
                g = j + off
                k = int(np.floor(g))
                f = g - k
                a = k % n
                b = (k + 1) % n
                shifted[j, 0] = root * ((1.0 - f) * q2[a, 0] + f * q2[b, 0])
                shifted[j, 1] = root * ((1.0 - f) * q2[a, 1] + f * q2[b, 1])
            for i in range(rows):
                x = q1[i + m, 0]
                y = q1[i + m, 1]
                for j in range(n + 1):
                    ex = x - shifted[j, 0]
                    ey = y - shifted[j, 1]
                    out[s, i, j] += (ex * ex + ey * ey) / n
    return out


def dp_match(q1: np.ndarray, q2: np.ndarray, steps: np.ndarray = STEPS):
    """Optimal warp path of ``q2`` onto ``q1``; see :func:`dp_match_costs`."""
    costs = edge_costs(np.ascontiguousarray(q1, dtype=float),
                       np.ascontiguousarray(q2, dtype=float), steps)
    return dp_match_costs(costs, steps)


@njit(cache=True)
def path_to_warp(path_i, path_j, n):
    """Per-sample warp positions (in ``q2`` index units) and slopes of a path.

    ``positions`` has ``n + 1`` entries (the last is ``n``); ``slopes`` has
    ``n`` entries, the slope of the segment covering each sample.
    """
    positions = np.empty(n + 1)
    slopes = np.empty(n)
    for a in range(len(path_i) - 1):
        i0, i1 = path_i[a], path_i[a + 1]
        j0, j1 = path_j[a], path_j[a + 1]
        s = (j1 - j0) / (i1 - i0)
        for m in range(i0, i1):
            positions[m] = j0 + (m - i0) * s
            slopes[m] = s
    positions[n] = n
    return positions, slopes


def apply_warp(q: np.ndarray, positions: np.ndarray, slopes: np.ndarray) -> np.ndarray:
    """``sqrt(gamma') * q(gamma)`` with periodic linear interpolation of ``q``."""
    n = len(q)
    g = positions[:n]
    k = np.floor(g).astype(np.int64)
    f = (g - k)[:, None]
    vals = (1 - f) * q[k % n] + f * q[(k + 1) % n]
    return np.sqrt(slopes)[:, None] * vals


@njit(cache=True)
def dcc_loglik_kernel(eps, a, b, qbar):
    """DCC quasi log-likelihood by a single pass over time.

    Returns ``(loglik, ok)``; ``ok`` is False when a correlation matrix
    fails its Cholesky factorization (not positive definite).
    """
    T, d = eps.shape
    q = qbar.copy()
    lam = np.empty((d, d))
    chol = np.zeros((d, d))
    y = np.empty(d)
    total = 0.0
    for t in range(T):
        if t > 0:
            for i in range(d):
                for j in range(d):
                    q[i, j] = (1 - a - b) * qbar[i, j] + a * eps[t - 1, i] * eps[t - 1, j] + b * q[i, j]
        for i in range(d):
            for j in range(d):
                lam[i, j] = q[i, j] / np.sqrt(q[i, i] * q[j, j])
        logdet = 0.0
        for j in range(d):
            s = lam[j, j]
            for k in range(j):
                s -= chol[j, k] * chol[j, k]
            if s <= 0.0:
                return -np.inf, False
            chol[j, j] = np.sqrt(s)
            logdet += 2.0 * np.log(chol[j, j])
            for i in range(j + 1, d):
                s = lam[i, j]
                for k in range(j):
                    s -= chol[i, k] * chol[j, k]
                chol[i, j] = s / chol[j, j]
        quad = 0.0
        for i in range(d):
            s = eps[t, i]
            for k in range(i):
                s -= chol[i, k] * y[k]
            y[i] = s / chol[i, i]
            quad += y[i] * y[i]
        total += logdet + quad
    return -0.5 * total, True
