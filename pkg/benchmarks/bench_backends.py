"""Throughput comparison of the compiled and pure-numpy kernel backends.

Times block simulation (constant and drifting phase), packed-log counting,
and Toeplitz extraction on the desk-scale block shape, then optionally the
multi-worker protocol scaling. Rates are medians over --repeat timings.

Usage: python benchmarks/bench_backends.py [--rounds N] [--repeat R]
       [--extract-blocks B] [--workers-scaling]
"""
from __future__ import annotations

import argparse
import statistics
import time
from pathlib import Path

import numpy as np

import ebqrng
from ebqrng import DriftModel, backend, load_config, run_protocol, sample_block
from ebqrng.extractor import seed_length, toeplitz_extract

DESK_CONFIG = Path(ebqrng.__file__).parent / "configs" / "desk_scale.json"


def _time(fn, repeat: int) -> float:
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def bench_simulation(params, rounds: int, repeat: int) -> dict:
    out = {}
    for drift, label in ((DriftModel(), "const"),
                         (DriftModel("linear", 1e-7), "linear"),
                         (DriftModel("random-walk", 1e-4), "walk")):
        dt = _time(lambda: sample_block(params, rounds, seed=1, drift=drift),
                   repeat)
        out[label] = rounds / dt
    return out


def bench_counting(params, rounds: int, repeat: int) -> float:
    log, _ = sample_block(params, rounds, seed=2)
    dt = _time(log.counts, repeat)
    return rounds / dt


def bench_extraction(blocks: int, repeat: int) -> float:
    k, l = 10 ** 6, 34015
    rng = np.random.default_rng(3)
    data = [(rng.integers(0, 2, size=k).astype(np.uint8),
             rng.integers(0, 2, size=seed_length(k, l)).astype(np.uint8))
            for _ in range(blocks)]

    def run():
        for v, seed in data:
            toeplitz_extract(v, seed, l)

    dt = _time(run, repeat)
    return blocks * l / dt


def bench_worker_scaling(config_path, workers_list) -> dict:
    config = load_config(config_path)
    out = {}
    for workers in workers_list:
        t0 = time.perf_counter()
        run_protocol(config, workers=workers)
        out[workers] = time.perf_counter() - t0
    return out


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rounds", type=int, default=4 * 10 ** 6,
                        help="rounds per simulated block (default 4e6)")
    parser.add_argument("--repeat", type=int, default=3,
                        help="timings per cell, median reported (default 3)")
    parser.add_argument("--extract-blocks", type=int, default=4,
                        help="desk-shaped blocks per extraction timing")
    parser.add_argument("--workers-scaling", action="store_true",
                        help="also time the desk protocol at 1/2/4 workers")
    args = parser.parse_args()

    config = load_config(DESK_CONFIG)
    params = config.params
    names = backend.available_backends()
    previous = backend.get_backend().NAME
    results = {}
    try:
        for name in names:
            backend.set_backend(name)
            sim = bench_simulation(params, args.rounds, args.repeat)
            cnt = bench_counting(params, args.rounds, args.repeat)
            ext = bench_extraction(args.extract_blocks, args.repeat)
            results[name] = (sim, cnt, ext)
    finally:
        backend.set_backend(previous)

    print(f"{'backend':<8} {'sim const':>12} {'sim linear':>12} "
          f"{'sim walk':>12} {'count':>12} {'extract':>12}")
    print(f"{'':<8} {'rounds/s':>12} {'rounds/s':>12} {'rounds/s':>12} "
          f"{'rounds/s':>12} {'Mbit/s':>12}")
    for name in names:
        sim, cnt, ext = results[name]
        print(f"{name:<8} {sim['const']:>12.3g} {sim['linear']:>12.3g} "
              f"{sim['walk']:>12.3g} {cnt:>12.3g} {ext / 1e6:>12.3g}")
    if len(names) == 2:
        sim_p, cnt_p, ext_p = results["py"]
        sim_e, cnt_e, ext_e = results["ext"]
        print(f"\next/py speedup: sim const x{sim_e['const'] / sim_p['const']:.2f}, "
              f"count x{cnt_e / cnt_p:.2f}, extract x{ext_e / ext_p:.2f}")

    if args.workers_scaling:
        print("\ndesk protocol wall time by worker count (shared-core "
              "sandboxes will not scale):")
        for workers, dt in bench_worker_scaling(DESK_CONFIG, (1, 2, 4)).items():
            print(f"  workers={workers}: {dt:.2f} s")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
