"""Compiled inner loop of the event-driven dynamics.

Mirrors :func:`influence.combined_influence`, :func:`dynamics.softmax_update`
and :func:`influence.apply_preference_change` operation for operation so the
two engines agree to rounding.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _rebuild(degree, h, undecided, S, usum):
    n, K = h.shape
    for k in range(K):
        S[k] = 0.0
        usum[k] = 0.0
    for w in range(n):
        dw = float(degree[w])
        for k in range(K):
            S[k] += dw * h[w, k]
    for i in range(undecided.shape[0]):
        w = undecided[i]
        for k in range(K):
            usum[k] += h[w, k]


@njit(cache=True)
def event_loop(indptr, indices, degree, undecided, h, S, usum, voters,
               theta, beta, two_m, rebuild_every, updates,
               record, rec_z, rec_before, rec_after):
    K = h.shape[1]
    acc = np.empty(K)
    z = np.empty(K)
    wts = np.empty(K)
    two_m_sq = two_m * two_m
    for e in range(voters.shape[0]):
        u = voters[e]
        for k in range(K):
            acc[k] = 0.0
        for j in range(indptr[u], indptr[u + 1]):
            w = indices[j]
            for k in range(K):
                acc[k] += h[w, k]
        ku = float(degree[u])
        coef = beta * ku / two_m_sq
        for k in range(K):
            z[k] = acc[k] / two_m - coef * (S[k] - ku * h[u, k])

        shift = -np.inf
        for k in range(K):
            if h[u, k] > 0.0:
                x = theta * z[k]
                if x > shift:
                    shift = x
        total = 0.0
        for k in range(K):
            if h[u, k] > 0.0:
                wts[k] = math.exp(theta * z[k] - shift) * h[u, k]
            else:
                wts[k] = 0.0
            total += wts[k]

        if record:
            for k in range(K):
                rec_z[e, k] = z[k]
                rec_before[e, k] = h[u, k]
        for k in range(K):
            new = wts[k] / total
            old = h[u, k]
            S[k] += ku * (new - old)
            usum[k] += new - old
            h[u, k] = new
            if record:
                rec_after[e, k] = new
        updates += 1
        if updates % rebuild_every == 0:
            _rebuild(degree, h, undecided, S, usum)
    return updates
