"""Flooding sum-product decoder in the LLR domain.

All functions accept a single frame of shape (n,) / (E,) or a batch of
shape (B, n) / (B, E).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tanner import TannerGraph, exclusion_products

DEFAULT_CLIP = 9.9
# atanh argument is kept inside (-1, 1) by this margin
ATANH_BOUND = 1.0 - 1e-12


@dataclass(frozen=True)
class DecoderConfig:
    iterations: int = 5
    clip: float | None = DEFAULT_CLIP
    early_stop: bool = True

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.clip is not None and not 0 < self.clip < 10:
            raise ValueError("clip must satisfy 0 < A < 10 (or be None to disable)")


@dataclass
class DecodeOutput:
    soft: np.ndarray
    hard: np.ndarray
    converged: np.ndarray | bool
    iterations_used: np.ndarray | int


def _batch(x):
    x = np.asarray(x, dtype=float)
    return (x[None, :], True) if x.ndim == 1 else (x, False)


def _clip(x, a):
    return x if a is None else np.clip(x, -a, a)


def variable_update(graph: TannerGraph, llr, check_messages, clip=DEFAULT_CLIP) -> np.ndarray:
    """Variable-to-check messages: channel LLR plus all other incoming check messages."""
    l, single = _batch(llr)
    xc, _ = _batch(check_messages)
    totals = xc @ graph.var_incidence  # (B, n)
    out = _clip(l[:, graph.edge_var] + totals[:, graph.edge_var] - xc, clip)
    return out[0] if single else out


def check_update(graph: TannerGraph, variable_messages, clip=DEFAULT_CLIP) -> np.ndarray:
    """Check-to-variable messages by the tanh rule over the other edges of each check."""
    xv, single = _batch(variable_messages)
    prod, _ = exclusion_products(graph, np.tanh(0.5 * xv))
    prod *= graph.check_sign
    out = _clip(2.0 * np.arctanh(np.clip(prod, -ATANH_BOUND, ATANH_BOUND)), clip)
    return out[0] if single else out


def marginalize(graph: TannerGraph, llr, check_messages) -> np.ndarray:
    l, single = _batch(llr)
    xc, _ = _batch(check_messages)
    out = l + np.asarray(xc @ graph.var_incidence)
    return out[0] if single else out


def _syndrome_ok(graph: TannerGraph, hard: np.ndarray) -> np.ndarray:
    return ~(hard.astype(np.int64) @ graph.h.T.astype(np.int64) % 2).any(axis=1)


def decode(graph: TannerGraph, llr, config: DecoderConfig = DecoderConfig()) -> DecodeOutput:
    l, single = _batch(llr)
    if l.shape[1] != graph.n_vars:
        raise ValueError(f"llr length {l.shape[1]} does not match n={graph.n_vars}")
    batch = l.shape[0]
    soft = l.copy()
    iters = np.full(batch, config.iterations)
    converged = np.zeros(batch, dtype=bool)

    active = np.arange(batch)
    xc = np.zeros((batch, graph.e_total))
    for it in range(1, config.iterations + 1):
        xv = variable_update(graph, l[active], xc, config.clip)
        xc = check_update(graph, xv, config.clip)
        o = marginalize(graph, l[active], xc)
        soft[active] = o
        if config.early_stop:
            ok = _syndrome_ok(graph, (o > 0).astype(np.uint8))
            done = active[ok]
            converged[done] = True
            iters[done] = it
            active, xc = active[~ok], xc[~ok]
            if active.size == 0:
                break

    hard = (soft > 0).astype(np.uint8)
    if not config.early_stop:
        converged = _syndrome_ok(graph, hard)
    if single:
        return DecodeOutput(soft[0], hard[0], bool(converged[0]), int(iters[0]))
    return DecodeOutput(soft, hard, converged, iters)
