"""Compiled inner loops for the check-node products and edge-weight gradients."""

import numpy as np
from numba import njit


@njit(cache=True)
def excl_prod(t, table):
    batch = t.shape[0]
    checks, dmax = table.shape
    out = np.empty_like(t)
    pre = np.empty(dmax + 1)
    for b in range(batch):
        for c in range(checks):
            d = 0
            while d < dmax and table[c, d] >= 0:
                d += 1
            pre[0] = 1.0
            for j in range(d):
                pre[j + 1] = pre[j] * t[b, table[c, j]]
            suf = 1.0
            for j in range(d - 1, -1, -1):
                e = table[c, j]
                out[b, e] = pre[j] * suf
                suf *= t[b, e]
    return out


@njit(cache=True)
def excl_prod_grad(t, table, g):
    """d/dt_k of sum_j g_j * prod_{i != j} t_i, per check."""
    batch = t.shape[0]
    checks, dmax = table.shape
    out = np.zeros_like(t)
    pre = np.empty(dmax + 1)
    suf = np.empty(dmax + 1)
    for b in range(batch):
        for c in range(checks):
            d = 0
            while d < dmax and table[c, d] >= 0:
                d += 1
            pre[0] = 1.0
            for j in range(d):
                pre[j + 1] = pre[j] * t[b, table[c, j]]
            suf[d] = 1.0
            for j in range(d - 1, -1, -1):
                suf[j] = suf[j + 1] * t[b, table[c, j]]
            # terms with j > k, then j < k
            acc = 0.0
            for k in range(d - 2, -1, -1):
                acc = g[b, table[c, k + 1]] * suf[k + 2] + t[b, table[c, k + 1]] * acc
                out[b, table[c, k]] += pre[k] * acc
            acc = 0.0
            for k in range(1, d):
                acc = g[b, table[c, k - 1]] * pre[k - 1] + t[b, table[c, k - 1]] * acc
                out[b, table[c, k]] += suf[k + 1] * acc
    return out


@njit(cache=True)
def pair_grad(g_target, x_source, target, source):
    """sum_b g_target[b, target[p]] * x_source[b, source[p]] for every pair p."""
    out = np.zeros(target.size)
    for b in range(g_target.shape[0]):
        for p in range(target.size):
            out[p] += g_target[b, target[p]] * x_source[b, source[p]]
    return out
