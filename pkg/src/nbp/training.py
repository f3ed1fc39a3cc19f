"""Cross-entropy losses, backpropagation through the unrolled decoder, RMSProp
and the zero-codeword training loop."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import channel
from .codes import LinearCode
from .decoder_bp import DEFAULT_CLIP
from .neural_bp import RNN, ForwardTrace, WeightSet, forward, save_weights
from ._kernels import pair_grad
from .tanner import TannerGraph, exclusion_products_grad

log = logging.getLogger(__name__)

LOG_EPS = 1e-12

# (batch size, learning rate) keyed by code
PRESETS = {
    "n63": (120, 0.001),
    "127_99": (80, 0.0003),
    "127_64": (40, 0.003),
}


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 120
    learning_rate: float = 0.001
    snr_grid_db: tuple[float, ...] = (1, 2, 3, 4, 5, 6, 7, 8)
    unfold: int = 5
    multiloss: bool = True
    variant: str = RNN
    rms_decay: float = 0.9
    rms_epsilon: float = 1e-8
    steps: int = 10_000
    clip: float = DEFAULT_CLIP
    seed: int = 0
    log_every: int = 100
    snapshot_every: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0 < self.rms_decay < 1:
            raise ValueError("rms_decay must lie in (0, 1)")
        if not self.snr_grid_db:
            raise ValueError("snr grid must be nonempty")

    @classmethod
    def preset(cls, name: str, **overrides) -> "TrainConfig":
        try:
            batch, lr = PRESETS[name]
        except KeyError:
            raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
        return cls(batch_size=batch, learning_rate=lr, **overrides)


def generate_batch(code: LinearCode, batch_size: int, snr_grid, rng: np.random.Generator,
                   offset: int = 0):
    """Noisy all-zero codewords; example ``i`` uses ``snr_grid[(offset + i) % len]``."""
    snr = np.asarray(snr_grid, dtype=float)
    if snr.size == 0:
        raise ValueError("snr grid must be nonempty")
    idx = (offset + np.arange(batch_size)) % snr.size
    sigma = np.array([channel.sigma_from_ebn0(s, code.rate) for s in snr])[idx]
    y = 1.0 + sigma[:, None] * rng.standard_normal((batch_size, code.n))
    llr = -2.0 * y / sigma[:, None] ** 2
    return llr, np.zeros((batch_size, code.n))


# ---------------------------------------------------------------------------
# losses


def _check_probs(o):
    o = np.asarray(o, dtype=float)
    if not np.all(np.isfinite(o)) or (o < 0).any() or (o > 1).any():
        raise ValueError("outputs must be finite probabilities in [0, 1]")
    return o


def _cross_entropy(o, y):
    o = _check_probs(o)
    y = np.asarray(y, dtype=float)
    return -(y * np.log(np.maximum(o, LOG_EPS)) + (1 - y) * np.log(np.maximum(1 - o, LOG_EPS)))


def loss_last(o, y) -> float:
    """Mean binary cross entropy over bits (and over batch rows, if any)."""
    ce = _cross_entropy(o, y)
    return float(ce.mean(axis=-1).mean())


def loss_multi(outputs, y) -> float:
    """Sum over time steps of :func:`loss_last`."""
    if len(outputs) < 1:
        raise ValueError("need at least one time step")
    return float(sum(loss_last(o, y) for o in outputs))


def trace_loss(trace: ForwardTrace, y, multiloss: bool) -> float:
    outs = trace.outputs if multiloss else trace.outputs[-1:]
    return loss_multi(outs, y)


def _grad_logit(o, y, scale):
    """d(cross entropy)/d(logit) with the log guards' zero derivative where they bind."""
    return scale * (-y * (1 - o) * (o > LOG_EPS) + (1 - y) * o * ((1 - o) > LOG_EPS))


# ---------------------------------------------------------------------------
# backward


@dataclass
class GradientSet:
    w_edge: np.ndarray
    w_out_v: np.ndarray
    w_out_edge: np.ndarray

    def params(self) -> dict[str, np.ndarray]:
        return {"w_edge": self.w_edge, "w_out_v": self.w_out_v, "w_out_edge": self.w_out_edge}


def backward(graph: TannerGraph, trace: ForwardTrace, targets, multiloss: bool) -> GradientSet:
    """Exact reverse-mode gradient of the (multi)loss of ``trace``.

    Loss is averaged over the batch. Clipped activations pass zero gradient.
    """
    w = trace.weights
    l = trace.llr
    y = np.broadcast_to(np.asarray(targets, dtype=float), l.shape)
    batch, n = l.shape
    scale = 1.0 / (batch * n)
    T = len(trace.steps)
    taps = set(trace.taps if multiloss else trace.taps[-1:])
    if T not in trace.taps:
        raise ValueError("trace does not record the final output")
    if multiloss and len(trace.taps) != T:
        raise ValueError("multiloss needs outputs at every step; rerun forward with multiloss_outputs")

    g_edge = np.zeros_like(w.w_edge)
    g_out_v = np.zeros_like(w.w_out_v)
    g_out_edge = np.zeros_like(w.w_out_edge)
    ev = graph.edge_var
    src, tgt = graph.pair_source, graph.pair_target

    g_xc = np.zeros((batch, graph.e_total))
    for t in range(T, 0, -1):
        s = trace.steps[t - 1]
        k = w.copy_index(t)
        if t in taps:
            if s.o is None:
                raise ValueError(f"trace has no output at step {t}; rerun forward with multiloss_outputs")
            gz = _grad_logit(s.o, y, scale)
            g_out_v[k] += (gz * l).sum(axis=0)
            gz_e = gz[:, ev]
            g_out_edge[k] += (gz_e * s.xc).sum(axis=0)
            g_xc = g_xc + gz_e * w.w_out_edge[k]
        # check layer: x = 2 atanh(p)
        g_p = g_xc * s.c_live * 2.0 / (1.0 - s.p**2)
        g_u = exclusion_products_grad(graph, g_p * graph.check_sign, s.prod_saved)
        # variable layer: u = tanh(a / 2)
        g_a = g_u * s.v_live * 0.5 * (1.0 - s.u**2)
        g_edge[k] += pair_grad(g_a, s.xc_prev, tgt, src)
        g_xc = np.asarray(g_a @ graph.pair_matrix(w.w_edge[k]))

    grads = GradientSet(g_edge, g_out_v, g_out_edge)
    for name, arr in grads.params().items():
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            raise TrainingError(f"non-finite gradient in {name} at flat index {int(bad[0])}")
    return grads


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class OptimizerState:
    r: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def zeros_like(cls, weights: WeightSet) -> "OptimizerState":
        return cls({k: np.zeros_like(v) for k, v in weights.params().items()})


def rmsprop_step(weights: WeightSet, grads: GradientSet, state: OptimizerState,
                 lr: float, decay: float = 0.9, eps: float = 1e-8) -> tuple[WeightSet, OptimizerState]:
    """r <- decay * r + (1 - decay) * g**2;  w <- w - lr * g / sqrt(r + eps)."""
    new_w = weights.copy()
    new_r = {}
    gp = grads.params()
    for name, w in new_w.params().items():
        g = gp[name]
        if g.shape != w.shape:
            raise ValueError(f"gradient shape {g.shape} does not match {name} shape {w.shape}")
        r = decay * state.r.get(name, np.zeros_like(w)) + (1 - decay) * g * g
        w -= lr * g / np.sqrt(r + eps)
        new_r[name] = r
    return new_w, OptimizerState(new_r)


# ---------------------------------------------------------------------------
# loop


@dataclass
class TrainResult:
    weights: WeightSet
    log: list[tuple[int, float, str]]


def evaluate_loss(code, graph, weights, config: TrainConfig, rng, batches: int = 1) -> float:
    total = 0.0
    for b in range(batches):
        llr, y = generate_batch(code, config.batch_size, config.snr_grid_db, rng, offset=b)
        tr = forward(graph, llr, weights, config.unfold, multiloss_outputs=config.multiloss, clip=config.clip)
        total += trace_loss(tr, y, config.multiloss)
    return total / batches


def train(code: LinearCode, graph: TannerGraph, config: TrainConfig,
          log_path=None, snapshot_dir=None, initial: WeightSet | None = None) -> TrainResult:
    """Train from unit weights (plain BP) on noisy all-zero codewords.

    Every ``log_every`` steps a ``step, loss, snapshot_path`` line is appended
    to the returned log and, if given, to ``log_path``.
    """
    weights = initial.copy() if initial is not None else WeightSet.unit(graph, config.variant, config.unfold)
    state = OptimizerState.zeros_like(weights)
    rng = np.random.default_rng(config.seed)
    entries: list[tuple[int, float, str]] = []
    fh = open(log_path, "a") if log_path is not None else None
    try:
        for step in range(1, config.steps + 1):
            llr, y = generate_batch(code, config.batch_size, config.snr_grid_db, rng)
            tr = forward(graph, llr, weights, config.unfold, multiloss_outputs=config.multiloss, clip=config.clip)
            loss = trace_loss(tr, y, config.multiloss)
            if not math.isfinite(loss):
                raise TrainingError(f"loss became non-finite at step {step}")
            grads = backward(graph, tr, y, config.multiloss)
            weights, state = rmsprop_step(weights, grads, state, config.learning_rate,
                                          config.rms_decay, config.rms_epsilon)
            if step % config.log_every == 0 or step == config.steps:
                snap = ""
                if snapshot_dir is not None and config.snapshot_every and step % config.snapshot_every == 0:
                    snap = str(Path(snapshot_dir) / f"step{step:07d}.nbp")
                    save_weights(snap, weights, graph)
                entries.append((step, loss, snap))
                log.info("step %d loss %.6f", step, loss)
                if fh is not None:
                    fh.write(f"{step}, {loss:.10g}, {snap}\n")
                    fh.flush()
    finally:
        if fh is not None:
            fh.close()
    return TrainResult(weights, entries)

