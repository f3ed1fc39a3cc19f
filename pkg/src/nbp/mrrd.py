"""Multiple-bases random redundant decoding (mRRD) and its recurrent-decoder variant.

Each of ``m`` branches runs up to ``c`` short decoder blocks, drawing a fresh
random code automorphism before each block. Messages start from zero in every
block; the block's input is the permuted soft output of the previous block
(or the permuted channel LLR when ``carry_soft`` is off). A branch stops at the
first block whose hard decision satisfies every check. The least-metric
selector then picks, among the branch outputs, the word closest to the
channel output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import channel
from .codes import random_automorphism
from .decoder_bp import DEFAULT_CLIP, DecoderConfig, decode
from .neural_bp import WeightSet, forward
from .tanner import TannerGraph


@dataclass(frozen=True)
class MrrdConfig:
    m: int = 1
    c: int = 30
    bp_iterations_per_block: int = 2
    weights: WeightSet | None = None  # None: plain BP blocks
    seed: int = 0
    clip: float = DEFAULT_CLIP
    early_exit: bool = True
    identity_permutations: bool = False
    carry_soft: bool = True

    def __post_init__(self):
        if self.m < 1 or self.c < 1:
            raise ValueError("m and c must be >= 1")
        if self.bp_iterations_per_block < 1:
            raise ValueError("bp_iterations_per_block must be >= 1")


@dataclass
class BranchResult:
    candidate: np.ndarray
    valid: bool
    bp_iterations_spent: int


@dataclass
class ComplexityStats:
    total_bp_iterations: int
    per_branch: list[int] = field(default_factory=list)


def branch_rng(seed: int, frame_key: tuple[int, ...], branch: int) -> np.random.Generator:
    return channel.frame_rng(seed, *frame_key, branch)


def _draw_maps(n: int, config: MrrdConfig, rng: np.random.Generator) -> np.ndarray:
    if config.identity_permutations:
        return np.tile(np.arange(n), (config.c, 1))
    return np.stack([random_automorphism(n, rng).map for _ in range(config.c)])


def _block_decode(graph: TannerGraph, llr: np.ndarray, config: MrrdConfig):
    """Soft output (LLR domain) and hard decision of one block."""
    if config.weights is None:
        out = decode(graph, llr, DecoderConfig(config.bp_iterations_per_block, config.clip, early_stop=False))
        return out.soft, out.hard
    tr = forward(graph, llr, config.weights, config.bp_iterations_per_block, clip=config.clip)
    return tr.soft, tr.hard


def _permute_rows(v: np.ndarray, maps: np.ndarray) -> np.ndarray:
    out = np.empty_like(v)
    np.put_along_axis(out, maps, v, axis=1)
    return out


def _run_branches(graph, llr, maps, config):
    """Core loop for a batch of frames sharing one branch index.

    ``maps`` is (B, c, n): the automorphism drawn for each frame and stage.
    Returns candidates (B, n), valid flags (B,), iterations (B,).
    """
    batch, n = llr.shape
    h = graph.h.T.astype(np.int64)
    cum = np.tile(np.arange(n), (batch, 1))  # cumulative permutation per frame
    work = llr.copy()  # block input, in the current permuted coordinates
    cand = np.zeros((batch, n), dtype=np.uint8)
    valid = np.zeros(batch, dtype=bool)
    iters = np.zeros(batch, dtype=np.int64)
    active = np.arange(batch)
    for j in range(config.c):
        rho = maps[active, j]
        cum[active] = np.take_along_axis(rho, cum[active], axis=1)
        if config.carry_soft:
            work[active] = _permute_rows(work[active], rho)
        else:
            work[active] = _permute_rows(llr[active], cum[active])
        soft, hard = _block_decode(graph, work[active], config)
        iters[active] += config.bp_iterations_per_block
        # back to original coordinates: original[i] = hard[cum[i]]
        cand[active] = np.take_along_axis(hard, cum[active], axis=1)
        work[active] = soft
        ok = ~(hard.astype(np.int64) @ h % 2).any(axis=1)
        if config.early_exit:
            valid[active[ok]] = True
            active = active[~ok]
        else:
            valid[active] = ok
        if active.size == 0:
            break
    return cand, valid, iters


def run_branch(graph: TannerGraph, llr, config: MrrdConfig, rng: np.random.Generator) -> BranchResult:
    l = np.asarray(llr, dtype=float)
    if l.shape != (graph.n_vars,):
        raise ValueError("run_branch expects a single LLR vector of length n")
    maps = _draw_maps(graph.n_vars, config, rng)[None]
    cand, valid, iters = _run_branches(graph, l[None], maps, config)
    return BranchResult(cand[0], bool(valid[0]), int(iters[0]))


def least_metric_select(candidates, y) -> int:
    """Index of the candidate whose BPSK image is nearest to ``y`` (first on ties)."""
    cands = np.asarray(candidates)
    if cands.size == 0 or len(cands) == 0:
        raise ValueError("least_metric_select needs at least one candidate")
    d = ((np.asarray(y, dtype=float)[None, :] - channel.modulate(cands)) ** 2).sum(axis=1)
    return int(np.argmin(d))


def mrrd_decode(graph: TannerGraph, llr, y=None, config: MrrdConfig = MrrdConfig(),
                frame_key: tuple[int, ...] = ()):
    """Decode one frame; returns ``(bits, ComplexityStats)``.

    ``y`` defaults to ``-llr``, which ranks candidates identically for BPSK/AWGN.
    Branch ``b`` draws its permutations from the stream ``(seed, *frame_key, b)``.
    """
    l = np.asarray(llr, dtype=float)
    y = -l if y is None else np.asarray(y, dtype=float)
    bits, stats, _ = mrrd_decode_batch(graph, l[None], y[None], config, [frame_key])
    return bits[0], stats[0]


def mrrd_decode_batch(graph: TannerGraph, llr, y, config: MrrdConfig, frame_keys):
    """Decode a batch of frames. Returns ``(bits (B, n), [ComplexityStats], candidates (B, m, n))``."""
    l = np.asarray(llr, dtype=float)
    y = np.asarray(y, dtype=float)
    batch, n = l.shape
    if len(frame_keys) != batch:
        raise ValueError("one frame key per frame required")
    cands = np.zeros((batch, config.m, n), dtype=np.uint8)
    iters = np.zeros((batch, config.m), dtype=np.int64)
    for b in range(config.m):
        maps = np.stack([_draw_maps(n, config, branch_rng(config.seed, tuple(k), b)) for k in frame_keys])
        cands[:, b], _, iters[:, b] = _run_branches(graph, l, maps, config)
    dist = ((y[:, None, :] - channel.modulate(cands)) ** 2).sum(axis=2)
    choice = np.argmin(dist, axis=1)
    bits = cands[np.arange(batch), choice]
    stats = [ComplexityStats(int(iters[i].sum()), iters[i].tolist()) for i in range(batch)]
    return bits, stats, cands


def lms_metric(candidate, y) -> float:
    return float(((np.asarray(y, dtype=float) - channel.modulate(candidate)) ** 2).sum())

