"""Command-line entry point wrapping the protocol pipeline.

Subcommands cover the operator workflow: simulate rounds to a log, certify
a stored log, extract from a raw bit file, run the full protocol, monitor a
stream in windows, and emit figure/scan CSVs. Exit code 0 means every
requested block (or window) passed; 1 signals a failed self-test; 2 a usage
or data error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import backend
from .boundary import scan_violation_region
from .extractor import (read_packed_bits, seed_length, toeplitz_extract,
                        write_packed_bits)
from .model import CertificateError
from .pipeline import (_block_record, _write_csv, certify_counts,
                       emit_figures, load_config, monitor, run_protocol,
                       write_output_bits, write_report)
from .roundlog import RoundLog, RoundLogError
from .optics import sample_block


def _emit(record: dict, fh=None) -> None:
    (fh or sys.stdout).write(
        json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    n = args.rounds if args.rounds is not None else config.rounds_per_block
    seed = args.seed if args.seed is not None else config.seed
    log, counts = sample_block(config.params, n, seed, config.drift)
    log.write(args.out)
    _emit({
        "record": "simulate",
        "n": n,
        "seed": log.seed,
        "counts": [list(row) for row in counts.n],
        "log": str(args.out),
        "log_sha256": log.content_digest(),
    })
    return 0


def cmd_certify(args) -> int:
    config = load_config(args.config)
    log = RoundLog.read(args.log)
    if log.params_digest != config.params.digest():
        raise ValueError(
            f"round log params digest mismatch: {args.log} was not written "
            f"with the configured device parameters")
    block = certify_counts(log.counts(), config)
    record = _block_record(0, block, log.seed, str(args.log))
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            _emit(record, fh)
    _emit(record)
    return 0 if block.passed else 1


def cmd_extract(args) -> int:
    raw = read_packed_bits(args.infile)
    k = args.input_bits if args.input_bits is not None else raw.size
    if k > raw.size:
        raise ValueError(f"{args.infile} holds {raw.size} bits, need {k}")
    v = raw[:k]
    need = seed_length(k, args.len)
    seed = read_packed_bits(args.seed_file, need)
    out = toeplitz_extract(v, seed, args.len)
    write_packed_bits(args.out, out)
    _emit({
        "record": "extract",
        "input_bits": int(k),
        "seed_bits": int(need),
        "output_bits": int(args.len),
        "out": str(args.out),
    })
    return 0


def cmd_run(args) -> int:
    config = load_config(args.config)
    result = run_protocol(config, workers=args.workers)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_report(result, outdir / config.report_name)
    write_output_bits(result, outdir / config.bits_name)
    for rec in result.records:
        _emit(rec)
    print(f"throughput: {result.rounds_per_s:.4g} rounds/s "
          f"({result.elapsed_s:.2f} s wall clock)", file=sys.stderr)
    return 0 if result.all_passed else 1


def cmd_monitor(args) -> int:
    config = load_config(args.config)
    result = monitor(args.log, config.bounds, config.cert, args.window,
                     p1=config.params.p1)
    out = open(args.report, "w", encoding="utf-8") if args.report else None
    try:
        for rec in result.records:
            _emit({
                "record": "window",
                "index": rec.index,
                "n": rec.n,
                "witness_value": rec.witness_value,
                "passed": rec.passed,
                "incomplete": rec.incomplete,
            }, out)
        if result.alarm_index is not None:
            _emit({"record": "alarm", "window": result.alarm_index}, out)
    finally:
        if out:
            out.close()
    return 0 if result.all_passed else 1


def cmd_figures(args) -> int:
    config = load_config(args.config)
    written = emit_figures(
        config, args.outdir, phase_points=args.phase_points,
        mc_phases=args.mc_phases, mc_rounds=args.mc_rounds,
        grid_steps=args.grid_steps, mc_seed=args.seed)
    for path in written:
        print(path)
    return 0


def cmd_scan(args) -> int:
    alphas = np.linspace(args.alpha_range[0], args.alpha_range[1], args.steps)
    betas = np.linspace(args.beta_range[0], args.beta_range[1], args.steps)
    rows = scan_violation_region(args.eta, args.t2, args.p1, alphas, betas)
    if args.out:
        _write_csv(args.out, "alpha,beta,lhs,rhs,margin", rows)
        print(args.out)
    else:
        sys.stdout.write("alpha,beta,lhs,rhs,margin\n")
        for row in rows:
            sys.stdout.write(",".join(repr(float(v)) for v in row) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ebqrng",
        description="Self-testing QRNG pipeline based on an energy bound.")
    parser.add_argument("--backend", choices=("py", "ext"),
                        help="force a kernel backend (default: compiled if available)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one block to a round log")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rounds", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("certify", help="self-test a stored round log")
    p.add_argument("--config", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("extract", help="Toeplitz-hash a packed bit file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--seed-file", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--len", type=int, required=True)
    p.add_argument("--input-bits", type=int,
                   help="use only the first K bits of the input file")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("run", help="run the full protocol from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--outdir", required=True)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("monitor", help="windowed self-test over a round log")
    p.add_argument("--config", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--window", type=int, required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("figures", help="emit the figure CSV bundle")
    p.add_argument("--config", required=True)
    p.add_argument("--outdir", required=True)
    p.add_argument("--phase-points", type=int, default=181)
    p.add_argument("--mc-phases", type=int, default=50)
    p.add_argument("--mc-rounds", type=int, default=10**6)
    p.add_argument("--grid-steps", type=int, default=41)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_figures)

    p = sub.add_parser("scan", help="setup-inequality scan over (alpha, beta)")
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--t2", type=float, required=True)
    p.add_argument("--alpha-range", type=float, nargs=2, required=True,
                   metavar=("LO", "HI"))
    p.add_argument("--beta-range", type=float, nargs=2, required=True,
                   metavar=("LO", "HI"))
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--p1", type=float, default=0.25)
    p.add_argument("--out")
    p.set_defaults(func=cmd_scan)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.backend:
        backend.set_backend(args.backend)
    try:
        return args.func(args)
    except (ValueError, RoundLogError, CertificateError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
