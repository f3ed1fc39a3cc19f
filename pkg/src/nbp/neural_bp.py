"""Weighted sum-product decoders: feed-forward (per-iteration weights) and
recurrent (one weight copy shared by every time step).

Messages live on the Tanner graph edges in canonical order. Each time step
runs a variable layer (tanh domain) and a check layer (LLR domain); the
output taps are sigmoids of a weighted marginalisation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .decoder_bp import ATANH_BOUND, DEFAULT_CLIP
from .tanner import TannerGraph, exclusion_products

FF = "ff"
RNN = "rnn"
FORMAT_TAG = "nbp-weights/1"


class WeightFileError(ValueError):
    pass


@dataclass
class WeightSet:
    """Trainable decoder parameters.

    ``w_edge[k, p]`` weighs source edge ``pair_source[p]`` into target edge
    ``pair_target[p]``; ``w_out_v[k, v]`` and ``w_out_edge[k, e]`` form the
    output marginalisation. ``k`` indexes the copy: always 0 for the
    recurrent variant, the iteration for the feed-forward one. Input weights
    on the channel LLR are fixed to one and not stored.
    """

    variant: str
    unfold: int
    w_edge: np.ndarray
    w_out_v: np.ndarray
    w_out_edge: np.ndarray

    def __post_init__(self):
        if self.variant not in (FF, RNN):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.unfold < 1:
            raise ValueError("unfold must be >= 1")
        self.w_edge = np.atleast_2d(np.asarray(self.w_edge, dtype=float))
        self.w_out_v = np.atleast_2d(np.asarray(self.w_out_v, dtype=float))
        self.w_out_edge = np.atleast_2d(np.asarray(self.w_out_edge, dtype=float))
        copies = 1 if self.variant == RNN else self.unfold
        for name in ("w_edge", "w_out_v", "w_out_edge"):
            if getattr(self, name).shape[0] != copies:
                raise ValueError(f"{name} must have {copies} copies for variant {self.variant}")

    @classmethod
    def unit(cls, graph: TannerGraph, variant: str = RNN, unfold: int = 5) -> "WeightSet":
        copies = 1 if variant == RNN else unfold
        return cls(
            variant,
            unfold,
            np.ones((copies, graph.n_pairs)),
            np.ones((copies, graph.n_vars)),
            np.ones((copies, graph.e_total)),
        )

    @property
    def copies(self) -> int:
        return self.w_edge.shape[0]

    def copy_index(self, step: int) -> int:
        """Weight copy used at 1-based time step ``step``."""
        if self.variant == RNN:
            return 0
        if not 1 <= step <= self.copies:
            raise ValueError(f"feed-forward weights have {self.copies} iterations, step {step} requested")
        return step - 1

    @property
    def n_params(self) -> int:
        return self.w_edge.size + self.w_out_v.size + self.w_out_edge.size

    def params(self) -> dict[str, np.ndarray]:
        return {"w_edge": self.w_edge, "w_out_v": self.w_out_v, "w_out_edge": self.w_out_edge}

    def copy(self) -> "WeightSet":
        return WeightSet(self.variant, self.unfold, self.w_edge.copy(), self.w_out_v.copy(), self.w_out_edge.copy())

    def check_graph(self, graph: TannerGraph):
        if self.w_edge.shape[1] != graph.n_pairs or self.w_out_edge.shape[1] != graph.e_total \
                or self.w_out_v.shape[1] != graph.n_vars:
            raise ValueError("weight shapes do not match the Tanner graph")


def save_weights(path, weights: WeightSet, graph: TannerGraph) -> None:
    weights.check_graph(graph)
    doc = {
        "format": FORMAT_TAG,
        "variant": weights.variant,
        "unfold": weights.unfold,
        "edge_order_checksum": graph.checksum(),
        "n_vars": graph.n_vars,
        "n_edges": graph.e_total,
        "w_edge": weights.w_edge.tolist(),
        "w_out_v": weights.w_out_v.tolist(),
        "w_out_edge": weights.w_out_edge.tolist(),
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_weights(path, graph: TannerGraph) -> WeightSet:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise WeightFileError(f"{path}: not a weight file ({exc})") from None
    if doc.get("format") != FORMAT_TAG:
        raise WeightFileError(f"{path}: unrecognised format tag {doc.get('format')!r}")
    if doc["edge_order_checksum"] != graph.checksum():
        raise WeightFileError(
            f"{path}: edge_order_checksum does not match the loaded parity-check matrix; "
            "the weights were trained on a different H (or a different row/column order)"
        )
    w = WeightSet(doc["variant"], doc["unfold"], doc["w_edge"], doc["w_out_v"], doc["w_out_edge"])
    w.check_graph(graph)
    return w


# ---------------------------------------------------------------------------
# layers


def _batch(x):
    x = np.asarray(x, dtype=float)
    return (x[None, :], True) if x.ndim == 1 else (x, False)


def neural_variable_layer(graph, llr, prev_check_messages, weights: WeightSet, step: int,
                          clip=DEFAULT_CLIP) -> np.ndarray:
    """tanh(0.5 * (l_v + weighted exclusion sum)) on every edge."""
    u, _ = _variable_layer(graph, *_pair(llr, prev_check_messages), weights, step, clip)
    return u[0] if np.ndim(llr) == 1 else u


def _pair(llr, xc):
    l, _ = _batch(llr)
    x, _ = _batch(xc)
    return l, x


def _variable_layer(graph, l, xc_prev, weights, step, clip):
    k = weights.copy_index(step)
    a = l[:, graph.edge_var] + np.asarray(xc_prev @ graph.pair_matrix(weights.w_edge[k]).T)
    if clip is None:
        live = np.ones(a.shape, dtype=bool)
    else:
        live = np.abs(a) <= clip
        a = np.clip(a, -clip, clip)
    return np.tanh(0.5 * a), live


def neural_check_layer(graph, tanh_messages, clip=DEFAULT_CLIP) -> np.ndarray:
    """2 * atanh of the exclusion product of tanh-domain messages, clipped to [-A, A]."""
    u, single = _batch(tanh_messages)
    xc, *_ = _check_layer(graph, u, clip)
    return xc[0] if single else xc


def _check_layer(graph, u, clip):
    prod, saved = exclusion_products(graph, u)
    prod = prod * graph.check_sign
    p = np.clip(prod, -ATANH_BOUND, ATANH_BOUND)
    x = 2.0 * np.arctanh(p)
    live = np.abs(prod) < ATANH_BOUND
    if clip is not None:
        live &= np.abs(x) <= clip
        x = np.clip(x, -clip, clip)
    return x, p, live, saved


def neural_marginal_logit(graph, llr, check_messages, weights: WeightSet, step: int) -> np.ndarray:
    """Pre-sigmoid output: w_out_v * l_v + sum of weighted incoming check messages."""
    l, xc = _pair(llr, check_messages)
    k = weights.copy_index(step)
    z = weights.w_out_v[k] * l + np.asarray((xc * weights.w_out_edge[k]) @ graph.var_incidence)
    return z[0] if np.ndim(llr) == 1 else z


def neural_marginalize(graph, llr, check_messages, weights: WeightSet, step: int) -> np.ndarray:
    return expit(neural_marginal_logit(graph, llr, check_messages, weights, step))


# ---------------------------------------------------------------------------
# forward pass


@dataclass
class StepRecord:
    xc_prev: np.ndarray
    u: np.ndarray
    v_live: np.ndarray
    prod_saved: tuple
    p: np.ndarray
    c_live: np.ndarray
    xc: np.ndarray
    z: np.ndarray | None = None
    o: np.ndarray | None = None


@dataclass
class ForwardTrace:
    llr: np.ndarray
    steps: list[StepRecord]
    taps: list[int]  # 1-based steps whose outputs were recorded
    weights: WeightSet
    clip: float | None
    single: bool = field(default=False, repr=False)

    @property
    def variable_activations(self) -> list[np.ndarray]:
        return [s.u for s in self.steps]

    @property
    def check_activations(self) -> list[np.ndarray]:
        return [s.xc for s in self.steps]

    @property
    def outputs(self) -> list[np.ndarray]:
        """Sigmoid outputs at every recorded tap, in time order."""
        return [self.steps[t - 1].o for t in self.taps]

    @property
    def logits(self) -> list[np.ndarray]:
        return [self.steps[t - 1].z for t in self.taps]

    @property
    def soft(self) -> np.ndarray:
        """Pre-sigmoid output at the final step (LLR domain)."""
        z = self.steps[-1].z
        return z[0] if self.single else z

    @property
    def hard(self) -> np.ndarray:
        h = (self.steps[-1].z > 0).astype(np.uint8)
        return h[0] if self.single else h


def forward(graph: TannerGraph, llr, weights: WeightSet, T: int | None = None,
            multiloss_outputs: bool = False, clip=DEFAULT_CLIP) -> ForwardTrace:
    T = weights.unfold if T is None else T
    if T < 1:
        raise ValueError("T must be >= 1")
    l, single = _batch(llr)
    if l.shape[1] != graph.n_vars:
        raise ValueError(f"llr length {l.shape[1]} does not match n={graph.n_vars}")
    xc = np.zeros((l.shape[0], graph.e_total))
    steps = []
    taps = list(range(1, T + 1)) if multiloss_outputs else [T]
    for t in range(1, T + 1):
        u, v_live = _variable_layer(graph, l, xc, weights, t, clip)
        xc_new, p, c_live, saved = _check_layer(graph, u, clip)
        rec = StepRecord(xc, u, v_live, saved, p, c_live, xc_new)
        if t in taps:
            rec.z = neural_marginal_logit(graph, l, xc_new, weights, t)
            rec.o = expit(rec.z)
        steps.append(rec)
        xc = xc_new
    return ForwardTrace(l, steps, taps, weights, clip, single)


def neural_decode(graph: TannerGraph, llr, weights: WeightSet, T: int | None = None,
                  clip=DEFAULT_CLIP):
    """Hard decisions and pre-sigmoid soft output after ``T`` steps."""
    tr = forward(graph, llr, weights, T, clip=clip)
    return tr.hard, tr.soft
