"""Command-line entry point: ``nbp {train,evaluate,decode-one,mrrd,info}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import channel, harness
from .codes import AlistError, LinearCode
from .decoder_bp import DEFAULT_CLIP, DecoderConfig, decode
from .mrrd import MrrdConfig, mrrd_decode
from .neural_bp import WeightFileError, forward, load_weights, save_weights
from .tanner import build
from .training import PRESETS, TrainConfig, train


class CliError(Exception):
    pass


def resolve_alist(name: str) -> Path:
    """A path, or the stem of a bundled matrix (e.g. ``bch63_36_cr``)."""
    p = Path(name)
    if p.exists():
        return p
    bundled = resources.files("nbp") / "data" / f"{p.stem}.alist"
    if bundled.is_file():
        return Path(str(bundled))
    raise CliError(f"alist file not found: {name} (bundled matrices: {', '.join(bundled_matrices())})")


def bundled_matrices() -> list[str]:
    return sorted(p.name[:-6] for p in (resources.files("nbp") / "data").iterdir() if p.name.endswith(".alist"))


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("NBP_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise CliError(f"NBP_SEED must be an integer, got {env!r}") from None


def _load(args):
    code = LinearCode.from_alist(resolve_alist(args.alist))
    return code, build(code.h)


def _weights(args, graph, required: bool):
    if args.weights is None:
        if required:
            raise CliError(f"--decoder {args.decoder} needs --weights PATH (produced by `nbp train`)")
        return None
    if not Path(args.weights).exists():
        raise CliError(f"weight file not found: {args.weights}")
    return load_weights(args.weights, graph)


def _spec(args, graph) -> harness.DecoderSpec:
    needs = args.decoder in ("ff", "rnn", "mrrd-rnn")
    w = _weights(args, graph, needs)
    unfold = args.unfold if args.unfold is not None else (w.unfold if w is not None else 5)
    return harness.DecoderSpec(
        kind=args.decoder, iterations=args.iters, unfold=unfold, clip=args.clip,
        early_stop=not args.no_early_stop, weights=w, m=args.m, c=args.c, block_iters=args.block_iters,
    )


def _write(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args):
    code, graph = _load(args)
    overrides = dict(unfold=args.unfold or 5, multiloss=args.multiloss, variant=args.variant,
                     steps=args.steps, clip=args.clip, seed=_seed(args), log_every=args.log_every,
                     snapshot_every=args.snapshot_every)
    if args.preset:
        cfg = TrainConfig.preset(args.preset, **overrides)
    else:
        cfg = TrainConfig(batch_size=args.batch_size or 120, learning_rate=args.lr or 0.001, **overrides)
    if args.batch_size:
        cfg = TrainConfig(**{**cfg.__dict__, "batch_size": args.batch_size})
    if args.lr:
        cfg = TrainConfig(**{**cfg.__dict__, "learning_rate": args.lr})
    out = Path(args.out)
    log_path = args.log or out.with_suffix(".log")
    snap_dir = None
    if cfg.snapshot_every:
        snap_dir = out.parent / (out.stem + "_snapshots")
        snap_dir.mkdir(parents=True, exist_ok=True)
    res = train(code, graph, cfg, log_path=log_path, snapshot_dir=snap_dir)
    save_weights(out, res.weights, graph)
    last = res.log[-1][1] if res.log else float("nan")
    print(f"trained {cfg.variant} ({cfg.steps} steps, final loss {last:.6g}) -> {out}; log -> {log_path}")


def cmd_evaluate(args):
    code, graph = _load(args)
    spec = _spec(args, graph)
    sweep = harness.SweepConfig(
        snr_points_db=harness.parse_snr_range(args.snr), max_frames=args.max_frames,
        min_bit_errors=args.min_errors, source=args.source, seed=_seed(args), workers=args.workers,
    )
    records = harness.ber_sweep(code, spec, sweep, graph)
    _write(harness.emit_csv(records), args.out)


def cmd_mrrd(args):
    if args.decoder not in ("mrrd", "mrrd-rnn"):
        args.decoder = "mrrd-rnn" if args.weights else "mrrd"
    cmd_evaluate(args)


def cmd_decode_one(args):
    code, graph = _load(args)
    seed = _seed(args)
    if args.llr is not None:
        llr = np.array([float(v) for v in args.llr.replace(",", " ").split()])
        if llr.size != code.n:
            raise CliError(f"--llr has {llr.size} values, code length is {code.n}")
        y = -llr
        sent = None
    else:
        sigma = channel.sigma_from_ebn0(args.snr, code.rate)
        sent, y, llr = harness.simulate_frames(code, sigma, args.source, seed, 0, [0])
        sent, y, llr = sent[0], y[0], llr[0]
    result = {"decoder": args.decoder}
    if args.decoder == "bp":
        out = decode(graph, llr, DecoderConfig(args.iters, args.clip, not args.no_early_stop))
        result.update(soft=out.soft.tolist(), hard=out.hard.tolist(), converged=out.converged,
                      iterations_used=out.iterations_used)
    elif args.decoder in ("ff", "rnn"):
        w = _weights(args, graph, True)
        tr = forward(graph, llr, w, args.unfold or w.unfold, clip=args.clip)
        hard = tr.hard
        result.update(soft=tr.soft.tolist(), hard=hard.tolist(),
                      converged=bool(code.is_codeword(hard)), iterations_used=args.unfold or w.unfold)
    elif args.decoder in ("mrrd", "mrrd-rnn"):
        w = _weights(args, graph, args.decoder == "mrrd-rnn")
        cfg = MrrdConfig(m=args.m, c=args.c, bp_iterations_per_block=args.block_iters,
                         weights=w if args.decoder == "mrrd-rnn" else None, seed=seed, clip=args.clip)
        bits, stats = mrrd_decode(graph, llr, y, cfg)
        result.update(hard=bits.tolist(), converged=bool(code.is_codeword(bits)),
                      iterations_used=stats.total_bp_iterations, per_branch=stats.per_branch)
    else:
        hard = channel.hard_decision(llr)
        result.update(hard=hard.tolist(), converged=bool(code.is_codeword(hard)), iterations_used=0)
    if sent is not None:
        result["bit_errors"] = int((np.asarray(result["hard"]) != sent).sum())
    print(json.dumps(result))


def cmd_info(args):
    lines = []
    if args.alist:
        code, graph = _load(args)
        vd, cd = graph.var_degrees(), graph.check_degrees()
        lines += [
            f"matrix: {args.alist}",
            f"n={code.n} k={code.k} rate={code.rate:.4f} checks={graph.n_checks}",
            f"edges E={graph.e_total} exclusion pairs={graph.n_pairs}",
            f"variable degree min/max={vd.min()}/{vd.max()}  check degree min/max={cd.min()}/{cd.max()}",
            f"RNN trainable parameters={graph.n_pairs + graph.e_total + graph.n_vars}",
            f"edge_order_checksum={graph.checksum()}",
        ]
    lines += [
        f"bundled matrices: {', '.join(bundled_matrices())}",
        "training presets (batch, learning rate): "
        + ", ".join(f"{k}=({b}, {lr})" for k, (b, lr) in PRESETS.items()),
        "training defaults: unfold=5, multiloss on, RMSProp decay=0.9 eps=1e-8, SNR grid 1..8 dB, "
        "10000 steps, unit-weight initialisation",
        f"decoder defaults: iters=5, clip A={DEFAULT_CLIP}, early stop on for evaluation",
        "mRRD defaults: m=1, c=30, block iterations=2",
        "Monte-Carlo stopping rule: 100 bit errors or --max-frames (default 100000), whichever first",
        "SNR convention: Eb/N0 in dB, sigma = 1/sqrt(2 * rate * 10^(dB/10))",
    ]
    print("\n".join(lines))


# ---------------------------------------------------------------------------


def _common(p, alist_required=True):
    p.add_argument("--alist", required=alist_required, help="parity-check matrix (path or bundled name)")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (falls back to $NBP_SEED, then 0)")
    p.add_argument("--clip", type=float, default=DEFAULT_CLIP, help="message clipping constant A (< 10)")
    p.add_argument("--unfold", type=int, default=None, help="recurrent/feed-forward time steps T")


def _decoding(p, default="bp"):
    p.add_argument("--decoder", choices=harness.DECODERS, default=default)
    p.add_argument("--weights", default=None, help="weight file from `nbp train`")
    p.add_argument("--iters", type=int, default=5, help="plain BP iterations L")
    p.add_argument("--no-early-stop", action="store_true", help="disable syndrome early stopping for BP")
    p.add_argument("--m", type=int, default=1, help="mRRD branches")
    p.add_argument("--c", type=int, default=30, help="mRRD blocks per branch")
    p.add_argument("--block-iters", type=int, default=2, help="BP iterations per mRRD block")
    p.add_argument("--source", choices=("zero", "random"), default="zero", help="transmitted codewords")


def _sweep(p):
    p.add_argument("--snr", default="1:8:1", help="Eb/N0 points in dB, lo:hi:step")
    p.add_argument("--min-errors", type=int, default=100)
    p.add_argument("--max-frames", type=int, default=100_000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None, help="CSV output path (default stdout)")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nbp", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a BP-RNN / BP-FF decoder on noisy zero codewords")
    _common(p)
    p.add_argument("--preset", choices=sorted(PRESETS), default=None)
    p.add_argument("--variant", choices=("rnn", "ff"), default="rnn")
    p.add_argument("--multiloss", action=argparse.BooleanOptionalAction, default=True,
                   help="sum the loss over every time step (default on)")
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--log", default=None, help="training log path (default OUT with .log suffix)")
    p.add_argument("--log-every", type=int, default=100)
    p.add_argument("--snapshot-every", type=int, default=0)
    p.add_argument("--out", required=True, help="weight file to write")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="Monte-Carlo BER/FER sweep, CSV output")
    _common(p)
    _decoding(p)
    _sweep(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("mrrd", help="BER sweep of mRRD (mRRD-RNN with --weights)")
    _common(p)
    _decoding(p, default="mrrd")
    _sweep(p)
    p.set_defaults(func=cmd_mrrd)

    p = sub.add_parser("decode-one", help="decode a single frame and print JSON")
    _common(p)
    _decoding(p)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--llr", default=None, help="comma/space separated channel LLRs")
    g.add_argument("--snr", type=float, default=None, help="simulate one frame at this Eb/N0")
    p.set_defaults(func=cmd_decode_one)

    p = sub.add_parser("info", help="describe a matrix and list defaults")
    _common(p, alist_required=False)
    p.set_defaults(func=cmd_info)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if getattr(args, "clip", None) is not None and not 0 < args.clip < 10:
            raise CliError("--clip must satisfy 0 < A < 10")
        args.func(args)
    except (CliError, AlistError, WeightFileError, ValueError, OSError) as exc:
        print(f"nbp: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
