"""Edge-indexed Tanner graph and precomputed exclusion neighbourhoods.

Edges are numbered by a row-major scan of H, so edge ``e`` is the ``e``-th
one encountered reading H check by check. Every decoder in the package
indexes messages by this order, and weight files carry a checksum of it.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .codes import as_binary_matrix


@dataclass(frozen=True, eq=False)
class TannerGraph:
    h: np.ndarray
    edge_check: np.ndarray
    edge_var: np.ndarray
    var_edges: tuple[np.ndarray, ...]
    check_edges: tuple[np.ndarray, ...]
    # Ordered pairs (target, source) of distinct edges sharing a variable node,
    # sorted by target then source; these index the trainable edge weights.
    pair_target: np.ndarray
    pair_source: np.ndarray
    # checks x max_degree table of edge ids, padded with -1
    check_table: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_vars(self) -> int:
        return self.h.shape[1]

    @property
    def n_checks(self) -> int:
        return self.h.shape[0]

    @property
    def e_total(self) -> int:
        return self.edge_var.size

    @property
    def n_pairs(self) -> int:
        return self.pair_target.size

    @property
    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.edge_var.tolist(), self.edge_check.tolist()))

    def var_degrees(self) -> np.ndarray:
        return np.array([len(e) for e in self.var_edges])

    def check_degrees(self) -> np.ndarray:
        return np.array([len(e) for e in self.check_edges])

    def checksum(self) -> str:
        """SHA-256 of the canonical edge list, used to bind weight files to H."""
        payload = f"{self.n_checks}x{self.n_vars}:" + ",".join(
            f"{v}.{c}" for v, c in zip(self.edge_var.tolist(), self.edge_check.tolist())
        )
        return hashlib.sha256(payload.encode()).hexdigest()

    @property
    def check_sign(self) -> np.ndarray:
        """Per-edge factor (-1)**deg(check).

        LLRs here are log P1/P0, so the tanh rule flips sign on odd-degree checks.
        """
        return self._sparse(
            "check_sign",
            lambda: np.where(self.check_degrees()[self.edge_check] % 2 == 0, 1.0, -1.0),
        )

    # sparse operators, built lazily and cached
    def _sparse(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    @property
    def var_incidence(self) -> sp.csr_matrix:
        """(E, n) one-hot map from edge to its variable; ``x @ A`` sums edges per variable."""
        return self._sparse(
            "var_incidence",
            lambda: sp.csr_matrix(
                (np.ones(self.e_total), (np.arange(self.e_total), self.edge_var)),
                shape=(self.e_total, self.n_vars),
            ),
        )

    def pair_matrix(self, weights=None) -> sp.csr_matrix:
        """(E, E) matrix with ``M[target, source] = w`` over the exclusion pattern.

        ``x @ M.T`` gives the weighted exclusion sum for every target edge.
        """
        base = self._sparse(
            "pair_matrix",
            lambda: sp.csr_matrix(
                (np.ones(self.n_pairs), (self.pair_target, self.pair_source)),
                shape=(self.e_total, self.e_total),
            ),
        )
        if weights is None:
            return base
        m = base.copy()
        m.data = np.asarray(weights, dtype=float)  # csr data is already in pair order
        return m


def build(h) -> TannerGraph:
    h = as_binary_matrix(h)
    checks, variables = np.nonzero(h)  # row-major
    if checks.size == 0:
        raise ValueError("parity-check matrix has no ones; Tanner graph would have no edges")
    e_ids = np.arange(checks.size)
    var_edges = tuple(e_ids[variables == v] for v in range(h.shape[1]))
    check_edges = tuple(e_ids[checks == c] for c in range(h.shape[0]))

    tgt, src = [], []
    for e in range(checks.size):
        others = var_edges[variables[e]]
        others = others[others != e]
        tgt.append(np.full(others.size, e))
        src.append(others)
    pair_target = np.concatenate(tgt).astype(np.int64)
    pair_source = np.concatenate(src).astype(np.int64)

    dmax = max(len(x) for x in check_edges)
    table = np.full((h.shape[0], dmax), -1, dtype=np.int64)
    for c, es in enumerate(check_edges):
        table[c, : len(es)] = es

    for arr in (checks, variables, pair_target, pair_source, table, *var_edges, *check_edges):
        arr.setflags(write=False)
    h.setflags(write=False)
    return TannerGraph(
        h=h,
        edge_check=checks.astype(np.int64),
        edge_var=variables.astype(np.int64),
        var_edges=var_edges,
        check_edges=check_edges,
        pair_target=pair_target,
        pair_source=pair_source,
        check_table=table,
    )


def _check_edge(g: TannerGraph, edge_id: int):
    if not 0 <= edge_id < g.e_total:
        raise IndexError(f"edge id {edge_id} out of range 0..{g.e_total - 1}")


def exclusion_edges_at_variable(g: TannerGraph, edge_id: int) -> list[int]:
    _check_edge(g, edge_id)
    es = g.var_edges[g.edge_var[edge_id]]
    return [int(e) for e in es if e != edge_id]


def exclusion_edges_at_check(g: TannerGraph, edge_id: int) -> list[int]:
    _check_edge(g, edge_id)
    es = g.check_edges[g.edge_check[edge_id]]
    return [int(e) for e in es if e != edge_id]


# ---------------------------------------------------------------------------
# check-node exclusion products


def _to_table(g: TannerGraph, t: np.ndarray) -> np.ndarray:
    """Gather (B, E) edge values into (B, checks, dmax), padding with 1."""
    padded = np.concatenate([t, np.ones((t.shape[0], 1))], axis=1)
    return padded[:, g.check_table]  # index -1 hits the padding column


def exclusion_products(g: TannerGraph, t: np.ndarray):
    """Product over each edge's check-exclusion set; the empty product is 1.

    ``t`` is (B, E). Returns ``(prod, saved)`` where ``saved`` feeds
    :func:`exclusion_products_grad`.
    """
    t = np.ascontiguousarray(t, dtype=float)
    return _kernels.excl_prod(t, g.check_table), t


def exclusion_products_grad(g: TannerGraph, grad_prod: np.ndarray, saved) -> np.ndarray:
    """Reverse-mode gradient of :func:`exclusion_products` with respect to ``t``."""
    return _kernels.excl_prod_grad(saved, g.check_table, np.ascontiguousarray(grad_prod, dtype=float))


def exclusion_products_scan(g: TannerGraph, t: np.ndarray):
    """Vectorised prefix/suffix-scan version of :func:`exclusion_products`."""
    tab = _to_table(g, t)
    ones = np.ones(tab.shape[:2] + (1,))
    prefix = np.concatenate([ones, np.cumprod(tab[..., :-1], axis=-1)], axis=-1)
    suffix = np.concatenate(
        [np.cumprod(tab[..., :0:-1], axis=-1)[..., ::-1], ones], axis=-1
    )
    excl = prefix * suffix
    prod = np.empty_like(t)
    mask = g.check_table >= 0
    prod[:, g.check_table[mask]] = excl[:, mask]
    return prod, (tab, prefix, suffix)


def exclusion_products_scan_grad(g: TannerGraph, grad_prod: np.ndarray, saved) -> np.ndarray:
    tab, prefix, suffix = saved
    mask = g.check_table >= 0
    gp = np.zeros_like(tab)
    gp[:, mask] = grad_prod[:, g.check_table[mask]]
    g_pre = gp * suffix
    g_suf = gp * prefix
    d = tab.shape[-1]
    gt = np.zeros_like(tab)
    # prefix[j] = prod_{i<j} t_i:  d/dt_k = prefix[k] * R_k,
    # R_k = g_pre[k+1] + t[k+1] * R_{k+1}
    acc = np.zeros(tab.shape[:2])
    for k in range(d - 2, -1, -1):
        acc = g_pre[..., k + 1] + tab[..., k + 1] * acc
        gt[..., k] += prefix[..., k] * acc
    # suffix[j] = prod_{i>j} t_i:  d/dt_k = suffix[k] * Q_k,
    # Q_k = g_suf[k-1] + t[k-1] * Q_{k-1}
    acc = np.zeros(tab.shape[:2])
    for k in range(1, d):
        acc = g_suf[..., k - 1] + tab[..., k - 1] * acc
        gt[..., k] += suffix[..., k] * acc
    out = np.zeros((tab.shape[0], g.e_total))
    out[:, g.check_table[mask]] = gt[:, mask]
    return out
