"""Monte-Carlo BER/FER sweeps over AWGN and CSV output.

Every frame draws its message and noise from its own counter-based stream
keyed by (seed, snr index, frame index), and frames are simulated in fixed
chunks, so the results do not depend on how many worker processes share the
work.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import channel
from .codes import LinearCode
from .decoder_bp import DEFAULT_CLIP, DecoderConfig, decode
from .mrrd import MrrdConfig, mrrd_decode_batch
from .neural_bp import WeightSet, forward
from .tanner import TannerGraph, build

DECODERS = ("hard", "bp", "ff", "rnn", "mrrd", "mrrd-rnn")
CSV_COLUMNS = ("snr_db", "frames", "bit_errors", "frame_errors", "ber", "fer", "avg_bp_iterations")


@dataclass(frozen=True)
class DecoderSpec:
    kind: str = "bp"
    iterations: int = 5
    unfold: int = 5
    clip: float = DEFAULT_CLIP
    early_stop: bool = True
    weights: WeightSet | None = None
    m: int = 1
    c: int = 30
    block_iters: int = 2

    def __post_init__(self):
        if self.kind not in DECODERS:
            raise ValueError(f"unknown decoder {self.kind!r}; choose from {DECODERS}")
        if self.kind in ("ff", "rnn", "mrrd-rnn") and self.weights is None:
            raise ValueError(f"decoder {self.kind!r} needs a weight set")


@dataclass(frozen=True)
class SweepConfig:
    snr_points_db: tuple[float, ...]
    max_frames: int = 100_000
    min_bit_errors: int = 100
    min_frame_errors: int = 0
    source: str = "zero"  # or "random"
    seed: int = 0
    workers: int = 1
    chunk: int = 1000
    noise_sigma: float | None = None  # overrides the SNR-derived sigma when set

    def __post_init__(self):
        if not self.snr_points_db:
            raise ValueError("snr list must be nonempty")
        if self.min_bit_errors < 1:
            raise ValueError("min_bit_errors must be >= 1")
        if self.source not in ("zero", "random"):
            raise ValueError("source must be 'zero' or 'random'")
        if self.workers < 1 or self.chunk < 1 or self.max_frames < 1:
            raise ValueError("workers, chunk and max_frames must be >= 1")


@dataclass
class BerRecord:
    snr_db: float
    frames: int = 0
    bit_errors: int = 0
    frame_errors: int = 0
    n: int = 1
    bp_iterations: int = 0
    errors_per_frame: list[int] = field(default_factory=list, repr=False)

    @property
    def ber(self) -> float:
        return self.bit_errors / (self.frames * self.n) if self.frames else 0.0

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames if self.frames else 0.0

    @property
    def avg_bp_iterations(self) -> float:
        return self.bp_iterations / self.frames if self.frames else 0.0


def run_decoder(graph: TannerGraph, spec: DecoderSpec, llr, y, frame_keys, seed: int = 0):
    """Decode a batch; returns ``(bits (B, n), bp_iterations (B,))``."""
    llr = np.asarray(llr, dtype=float)
    batch = llr.shape[0]
    if spec.kind == "hard":
        return channel.hard_decision(llr), np.zeros(batch, dtype=np.int64)
    if spec.kind == "bp":
        out = decode(graph, llr, DecoderConfig(spec.iterations, spec.clip, spec.early_stop))
        return out.hard, np.asarray(out.iterations_used)
    if spec.kind in ("ff", "rnn"):
        tr = forward(graph, llr, spec.weights, spec.unfold, clip=spec.clip)
        return tr.hard, np.full(batch, spec.unfold)
    cfg = MrrdConfig(m=spec.m, c=spec.c, bp_iterations_per_block=spec.block_iters,
                     weights=spec.weights if spec.kind == "mrrd-rnn" else None,
                     seed=seed, clip=spec.clip)
    bits, stats, _ = mrrd_decode_batch(graph, llr, y, cfg, frame_keys)
    return bits, np.array([s.total_bp_iterations for s in stats])


def simulate_frames(code: LinearCode, sigma: float, source: str, seed: int, snr_index: int, frames):
    """Transmitted codewords, channel outputs and LLRs for the given frame indices."""
    frames = list(frames)
    n = code.n
    cw = np.zeros((len(frames), n), dtype=np.uint8)
    y = np.empty((len(frames), n))
    g = code.generator() if source == "random" else None
    for row, f in enumerate(frames):
        rng = channel.frame_rng(seed, snr_index, f)
        if g is not None:
            msg = rng.integers(0, 2, g.shape[0])
            cw[row] = msg @ g % 2
        y[row] = channel.transmit(channel.modulate(cw[row]), sigma, rng)
    return cw, y, channel.llr(y, sigma)


def _work(args):
    code, graph, spec, sigma, source, seed, snr_index, frames = args
    cw, y, llr = simulate_frames(code, sigma, source, seed, snr_index, frames)
    keys = [(snr_index, f) for f in frames]
    bits, iters = run_decoder(graph, spec, llr, y, keys, seed)
    return (bits != cw).sum(axis=1), iters


def ber_sweep(code: LinearCode, spec: DecoderSpec, sweep: SweepConfig,
              graph: TannerGraph | None = None, keep_frame_errors: bool = False) -> list[BerRecord]:
    graph = graph if graph is not None else build(code.h)
    records = []
    pool = ProcessPoolExecutor(sweep.workers) if sweep.workers > 1 else None
    try:
        for s_idx, snr in enumerate(sweep.snr_points_db):
            sigma = sweep.noise_sigma or channel.sigma_from_ebn0(snr, code.rate)
            rec = BerRecord(float(snr), n=code.n)
            start = 0
            while start < sweep.max_frames and (rec.bit_errors < sweep.min_bit_errors
                                                or rec.frame_errors < sweep.min_frame_errors):
                stop = min(start + sweep.chunk, sweep.max_frames)
                parts = np.array_split(np.arange(start, stop), sweep.workers)
                jobs = [(code, graph, spec, sigma, sweep.source, sweep.seed, s_idx, p.tolist())
                        for p in parts if p.size]
                results = pool.map(_work, jobs) if pool else map(_work, jobs)
                for errs, iters in results:
                    rec.frames += errs.size
                    rec.bit_errors += int(errs.sum())
                    rec.frame_errors += int((errs > 0).sum())
                    rec.bp_iterations += int(iters.sum())
                    if keep_frame_errors:
                        rec.errors_per_frame.extend(errs.tolist())
                start = stop
            records.append(rec)
    finally:
        if pool is not None:
            pool.shutdown()
    return records


def emit_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([repr(float(r.snr_db)), r.frames, r.bit_errors, r.frame_errors,
                    repr(r.ber), repr(r.fer), repr(r.avg_bp_iterations)])
    return buf.getvalue()


def parse_snr_range(text: str) -> tuple[float, ...]:
    """``lo:hi:step`` (inclusive) or a single value."""
    parts = text.split(":")
    if len(parts) == 1:
        return (float(parts[0]),)
    if len(parts) != 3:
        raise ValueError(f"SNR range must look like lo:hi:step, got {text!r}")
    lo, hi, step = map(float, parts)
    if step <= 0 or hi < lo:
        raise ValueError(f"bad SNR range {text!r}")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return tuple(round(lo + i * step, 10) for i in range(count))


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return centre - half, centre + half
