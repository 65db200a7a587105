"""Protocol orchestration: simulate or ingest blocks, certify, extract.

A protocol run processes independent blocks. Each block yields counts, the
witness is evaluated against the certificate threshold, passing blocks
certify min-entropy via the finite-size bound and are hashed down to their
output budget; failing blocks are flagged and contribute nothing. The
NDJSON report contains no timing, so fixed seeds give byte-identical
reports and output files; wall-clock throughput lives on the returned
result object only.
"""
from __future__ import annotations

import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import backend
from .bits import pack_bits, unpack_bits, unpack_rounds
from .boundary import classical_bound, scan_violation_region
from .certify import (certified_min_entropy, finite_size_rate,
                      honest_entropy_heatmap, pass_test, witness_value)
from .extractor import (output_length, read_packed_bits, seed_length,
                        toeplitz_extract, write_packed_bits)
from .model import (CertifiedBlock, CorrelationCounts, DeviceParams,
                    EnergyBounds, WitnessCertificate, counts_to_frequencies,
                    load_device_params, load_energy_bounds,
                    load_witness_certificate)
from .optics import (DriftModel, correlation_function, correlation_sigma,
                     no_click_probability, sample_block,
                     scan_correlation_vs_phase)
from .roundlog import RoundLog, RoundLogReader, scan_counts

__all__ = [
    "ProtocolConfig",
    "ProtocolResult",
    "MonitorRecord",
    "MonitorResult",
    "load_config",
    "certify_counts",
    "run_protocol",
    "ingest_round_log",
    "monitor",
    "emit_figures",
    "nominal_rates",
    "write_report",
    "write_output_bits",
]

_MASK64 = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class ProtocolConfig:
    """Validated protocol configuration.

    Blocks are simulated with per-block seeds seed + i, or ingested from
    round_logs when given. The extractor seed stream comes from a seeded
    generator (extractor_seed) unless seed_file supplies packed seed bits;
    seed material is consumed sequentially per block unless
    allow_seed_reuse opts in to reusing one seed for every block.
    """

    params: DeviceParams
    bounds: EnergyBounds
    cert: WitnessCertificate
    blocks: int
    rounds_per_block: int
    seed: int
    extractor_seed: int
    drift: DriftModel = DriftModel()
    workers: int = 1
    round_logs: tuple[str, ...] | None = None
    seed_file: str | None = None
    allow_seed_reuse: bool = False
    report_name: str = "report.ndjson"
    bits_name: str = "certified_bits.bin"


def _require_fields(d: dict, required, what: str) -> None:
    missing = [f for f in required if f not in d]
    if missing:
        raise ValueError(f"missing {what} field(s): {missing}")


def _check_seed(value, name: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise ValueError(f"{name} must be an integer")
    if not 0 <= value <= _MASK64:
        raise ValueError(f"{name} must fit in 64 bits")
    return value


def load_config(source) -> ProtocolConfig:
    """Parse a config file (path) or pre-parsed dict; unknown fields error."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    else:
        cfg = source
    known = ("device", "energy", "certificate", "protocol", "output")
    unknown = set(cfg) - set(known)
    if unknown:
        raise ValueError(f"unknown config section(s): {sorted(unknown)}")
    _require_fields(cfg, ("device", "certificate", "protocol"), "config")

    params = load_device_params(cfg["device"])
    cert = load_witness_certificate(cfg["certificate"])

    energy = cfg.get("energy")
    if energy is None:
        bounds = EnergyBounds.from_device(params)
    elif "margin" in energy:
        extra = set(energy) - {"margin"}
        if extra:
            raise ValueError(
                f"energy margin excludes explicit bounds: {sorted(extra)}")
        bounds = EnergyBounds.from_device(params, margin=energy["margin"])
    else:
        e = dict(energy)
        e.setdefault("p1", params.p1)
        bounds = load_energy_bounds(e)
    if not math.isclose(bounds.p1, params.p1, rel_tol=1e-12):
        raise ValueError("energy bounds p1 must match device p1")

    proto = cfg["protocol"]
    allowed = ("blocks", "rounds_per_block", "seed", "extractor_seed",
               "drift", "workers", "round_logs", "seed_file",
               "allow_seed_reuse")
    unknown = set(proto) - set(allowed)
    if unknown:
        raise ValueError(f"unknown protocol field(s): {sorted(unknown)}")

    round_logs = proto.get("round_logs")
    if round_logs is not None:
        clash = {"blocks", "rounds_per_block", "seed", "drift"} & set(proto)
        if clash:
            raise ValueError(
                f"round_logs excludes simulation field(s): {sorted(clash)}")
        if not round_logs:
            raise ValueError("round_logs must list at least one path")
        blocks = len(round_logs)
        rounds_per_block = 0
        seed = 0
        drift = DriftModel()
    else:
        _require_fields(proto, ("blocks", "rounds_per_block", "seed"),
                        "protocol")
        blocks = proto["blocks"]
        rounds_per_block = proto["rounds_per_block"]
        if blocks < 1:
            raise ValueError("blocks must be >= 1")
        if rounds_per_block < 1:
            raise ValueError("rounds_per_block must be >= 1")
        seed = _check_seed(proto["seed"], "seed")
        d = proto.get("drift")
        if d is None:
            drift = DriftModel()
        else:
            extra = set(d) - {"kind", "rate"}
            if extra:
                raise ValueError(f"unknown drift field(s): {sorted(extra)}")
            drift = DriftModel(kind=d.get("kind", "none"),
                               rate=d.get("rate", 0.0))

    _require_fields(proto, ("extractor_seed",), "protocol")
    extractor_seed = _check_seed(proto["extractor_seed"], "extractor_seed")
    workers = proto.get("workers", 1)
    if workers < 1:
        raise ValueError("workers must be >= 1")

    out = cfg.get("output") or {}
    unknown = set(out) - {"report", "bits"}
    if unknown:
        raise ValueError(f"unknown output field(s): {sorted(unknown)}")

    return ProtocolConfig(
        params=params, bounds=bounds, cert=cert,
        blocks=blocks, rounds_per_block=rounds_per_block, seed=seed,
        extractor_seed=extractor_seed, drift=drift, workers=workers,
        round_logs=tuple(round_logs) if round_logs is not None else None,
        seed_file=proto.get("seed_file"),
        allow_seed_reuse=bool(proto.get("allow_seed_reuse", False)),
        report_name=out.get("report", "report.ndjson"),
        bits_name=out.get("bits", "certified_bits.bin"),
    )


def certify_counts(counts: CorrelationCounts,
                   config: ProtocolConfig) -> CertifiedBlock:
    """Witness, verdict, and output budget for one block of counts."""
    freq = counts_to_frequencies(counts, config.params.p1)
    value = witness_value(freq, config.bounds, config.cert)
    passed = pass_test(value, config.cert)
    if passed:
        me = certified_min_entropy(counts.n_total, config.cert)
        ext = output_length(me, config.cert.epsilon)
    else:
        me, ext = 0.0, 0
    return CertifiedBlock(counts=counts, witness_value=value, passed=passed,
                          epsilon=config.cert.epsilon, min_entropy_bits=me,
                          extract_len=ext)


def nominal_rates(config: ProtocolConfig, n: int | None = None) -> dict:
    """Declared per-block rates implied by the configuration alone.

    Certified rate counts min-entropy before extraction; the output rate
    subtracts the leftover-hash penalty. Both scale to bits per second at
    the device's nominal repetition rate.
    """
    if n is None:
        n = config.rounds_per_block
    rate = finite_size_rate(n, config.cert)
    out_bits = output_length(n * rate, config.cert.epsilon)
    return {
        "rounds_per_block": n,
        "certified_bits_per_round": rate,
        "certified_bits_per_s": rate * config.params.rep_rate_hz,
        "output_bits_per_round": out_bits / n,
        "output_bits_per_s": out_bits / n * config.params.rep_rate_hz,
    }


@dataclass(frozen=True)
class ProtocolResult:
    """Outcome of run_protocol; records serialize to the NDJSON report."""

    blocks: list[CertifiedBlock]
    output_bits: np.ndarray
    all_passed: bool
    records: list[dict]
    elapsed_s: float
    rounds_per_s: float


def _simulate_block_task(args) -> tuple[bytes, tuple, int]:
    params, n, seed, drift = args
    log, counts = sample_block(params, n, seed, drift)
    return log.payload.tobytes(), counts.n, log.seed


class _SeedSource:
    """Deterministic extractor-seed provider (generator or packed file)."""

    def __init__(self, config: ProtocolConfig):
        self._reuse = config.allow_seed_reuse
        self._file_bits = None
        self._pos = 0
        if config.seed_file is not None:
            self._file_bits = read_packed_bits(config.seed_file)
        else:
            self._rng = np.random.Generator(
                np.random.PCG64(config.extractor_seed))

    def take(self, nbits: int) -> np.ndarray:
        if self._file_bits is None:
            raw = self._rng.bytes((nbits + 7) // 8)
            return unpack_bits(np.frombuffer(raw, dtype=np.uint8), nbits)
        start = 0 if self._reuse else self._pos
        end = start + nbits
        if end > self._file_bits.size:
            raise ValueError(
                f"seed file exhausted: need bits [{start}, {end}) "
                f"but it holds {self._file_bits.size}")
        if not self._reuse:
            self._pos = end
        return self._file_bits[start:end]


def _block_record(index: int, block: CertifiedBlock, seed: int | None,
                  source: str) -> dict:
    return {
        "record": "block",
        "index": index,
        "source": source,
        "seed": seed,
        "n": block.counts.n_total,
        "counts": [list(row) for row in block.counts.n],
        "witness_value": block.witness_value,
        "passed": block.passed,
        "epsilon": block.epsilon,
        "min_entropy_bits": block.min_entropy_bits,
        "extract_len": block.extract_len,
    }


def _iter_block_data(config: ProtocolConfig, workers: int):
    """Yield (payload, counts, seed, source) per block in index order."""
    if config.round_logs is not None:
        for path in config.round_logs:
            log = RoundLog.read(path)
            if log.params_digest != config.params.digest():
                raise ValueError(
                    f"round log params digest mismatch: {path} was not "
                    f"written with the configured device parameters")
            yield log.payload, log.counts(), log.seed, str(path)
        return
    tasks = [(config.params, config.rounds_per_block,
              (config.seed + i) & _MASK64, config.drift)
             for i in range(config.blocks)]
    if workers > 1 and config.blocks > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for payload, nmat, seed in pool.map(_simulate_block_task, tasks):
                yield (np.frombuffer(payload, dtype=np.uint8),
                       CorrelationCounts.from_matrix(nmat), seed, "simulated")
    else:
        for params, n, seed, drift in tasks:
            log, counts = sample_block(params, n, seed, drift)
            yield log.payload, counts, seed, "simulated"


def run_protocol(config: ProtocolConfig,
                 workers: int | None = None) -> ProtocolResult:
    """Execute the full protocol and assemble the deterministic report."""
    if workers is None:
        workers = config.workers
    t0 = time.perf_counter()
    seeds = _SeedSource(config)
    blocks: list[CertifiedBlock] = []
    records: list[dict] = []
    out_pieces: list[np.ndarray] = []
    total_rounds = 0
    first_n = None

    for index, (payload, counts, seed, source) in enumerate(
            _iter_block_data(config, workers)):
        n = counts.n_total
        first_n = n if first_n is None else first_n
        block = certify_counts(counts, config)
        # nominal budget; seed bits advance identically whatever the verdict
        nominal_len = output_length(certified_min_entropy(n, config.cert),
                                    config.cert.epsilon)
        if nominal_len > 0:
            seg = seeds.take(seed_length(n, nominal_len))
        if block.passed and block.extract_len > 0:
            _, b = unpack_rounds(payload, n)
            out_pieces.append(
                toeplitz_extract(b, seg, block.extract_len))
        blocks.append(block)
        records.append(_block_record(index, block, seed, source))
        total_rounds += n

    elapsed = time.perf_counter() - t0
    output_bits = (np.concatenate(out_pieces) if out_pieces
                   else np.empty(0, dtype=np.uint8))
    all_passed = all(b.passed for b in blocks)
    passed_blocks = sum(b.passed for b in blocks)
    out_digest = hashlib.sha256(
        pack_bits(output_bits).tobytes() if output_bits.size else b"").hexdigest()
    summary = {
        "record": "summary",
        "blocks": len(blocks),
        "passed_blocks": passed_blocks,
        "pass_rate": passed_blocks / len(blocks),
        "total_rounds": total_rounds,
        "total_min_entropy_bits": sum(b.min_entropy_bits for b in blocks),
        "total_output_bits": int(output_bits.size),
        "epsilon": config.cert.epsilon,
        "soundness_product": config.cert.epsilon,
        "output_sha256": out_digest,
        "params_digest": config.params.digest().hex(),
        "backend": backend.get_backend().NAME,
    }
    summary.update({f"nominal_{k}": v
                    for k, v in nominal_rates(config, first_n).items()})
    records.append(summary)
    return ProtocolResult(
        blocks=blocks, output_bits=output_bits, all_passed=all_passed,
        records=records, elapsed_s=elapsed,
        rounds_per_s=total_rounds / elapsed if elapsed > 0 else float("inf"),
    )


def write_report(result: ProtocolResult, path) -> None:
    """Newline-delimited JSON, one record per block plus a summary."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in result.records:
            fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")))
            fh.write("\n")


def write_output_bits(result: ProtocolResult, path) -> int:
    """Write the certified output as a packed bit file; returns bit count."""
    if result.output_bits.size == 0:
        with open(path, "wb"):
            pass
        return 0
    write_packed_bits(path, result.output_bits)
    return int(result.output_bits.size)


def ingest_round_log(path) -> tuple[CorrelationCounts, RoundLogReader]:
    """Counts from a full scan plus a fresh streaming reader at round 0."""
    counts, _seed, _digest = scan_counts(path)
    return counts, RoundLogReader(path)


@dataclass(frozen=True)
class MonitorRecord:
    index: int
    n: int
    witness_value: float
    passed: bool
    incomplete: bool


@dataclass(frozen=True)
class MonitorResult:
    records: list[MonitorRecord]
    alarm_index: int | None

    @property
    def all_passed(self) -> bool:
        return self.alarm_index is None


def monitor(stream, bounds: EnergyBounds, cert: WitnessCertificate,
            window: int, p1: float = 0.25) -> MonitorResult:
    """Tumbling-window self-test over a round stream.

    Every full window of rounds gets a witness value and verdict; a
    trailing partial window is flagged incomplete. The alarm index is the
    first failing window, so detection latency is at most one window.
    """
    if window < 1000:
        raise ValueError("window must be >= 1000 rounds")
    own_reader = isinstance(stream, (str, Path))
    reader = RoundLogReader(stream) if own_reader else stream
    records: list[MonitorRecord] = []
    alarm = None

    def emit(codes: np.ndarray, incomplete: bool) -> None:
        nonlocal alarm
        mat = np.bincount(codes, minlength=4).reshape(2, 2)
        counts = CorrelationCounts.from_matrix(mat)
        freq = counts_to_frequencies(counts, p1)
        value = witness_value(freq, bounds, cert)
        passed = pass_test(value, cert)
        idx = len(records)
        records.append(MonitorRecord(index=idx, n=counts.n_total,
                                     witness_value=value, passed=passed,
                                     incomplete=incomplete))
        if alarm is None and not passed:
            alarm = idx

    try:
        buf = np.empty(0, dtype=np.uint8)
        for x, b in reader.iter_chunks():
            buf = np.concatenate([buf, x + 2 * b])
            while buf.size >= window:
                emit(buf[:window], incomplete=False)
                buf = buf[window:]
        if buf.size:
            emit(buf, incomplete=True)
    finally:
        if own_reader:
            reader.close()
    return MonitorResult(records=records, alarm_index=alarm)


def _write_csv(path, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def emit_figures(config: ProtocolConfig, outdir, *, phase_points: int = 181,
                 mc_phases: int = 50, mc_rounds: int = 10**6,
                 grid_steps: int = 41, mc_seed: int | None = None) -> list:
    """Write the CSV bundle behind the standard plots.

    correlation_vs_phase.csv: closed-form E over a dense phase grid.
    correlation_monte_carlo.csv: sampled E per phase with its binomial
      sigma, alongside the classically allowed band: the input-oblivious
      baseline E0 bracketed by the correlator bound 2*(omega0 + omega1).
      Classical devices under the energy bounds stay strictly inside an
      even tighter band (halfwidth scaled by p1), so points outside the
      emitted band certify non-classical statistics.
    violation_region.csv / entropy_heatmap.csv: (alpha, beta) scans of the
      two-preparation bound margin and the honest Shannon rate; the grid
      always contains the prescribed violation point alpha = eta*t/2,
      beta = 1/r.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    params = config.params
    written = []

    phases = np.linspace(0.0, 2.0 * math.pi, phase_points)
    path = outdir / "correlation_vs_phase.csv"
    _write_csv(path, "phase_rad,E", scan_correlation_vs_phase(params, phases))
    written.append(path)

    if mc_seed is None:
        mc_seed = (config.seed + 777) & _MASK64
    pnc0 = no_click_probability(0, params, 0.0)
    e0 = (1.0 - 2.0 * params.p1) * (2.0 * pnc0 - 1.0)
    half = classical_bound(config.bounds)
    rows = []
    for i, phase in enumerate(np.linspace(0.0, 2.0 * math.pi, mc_phases)):
        point = replace(params, rel_phase=float(phase))
        _, counts = sample_block(point, mc_rounds, (mc_seed + i) & _MASK64)
        n = counts.n
        e_mc = (n[0][0] + n[1][1] - n[0][1] - n[1][0]) / counts.n_total
        rows.append((phase, correlation_function(params, float(phase)), e_mc,
                     correlation_sigma(params, float(phase), mc_rounds),
                     e0 - half, e0 + half))
    path = outdir / "correlation_monte_carlo.csv"
    _write_csv(path, "phase_rad,E,e_mc,e_sigma,band_lo,band_hi", rows)
    written.append(path)

    t = math.sqrt(params.t2)
    r = math.sqrt(params.r2)
    alphas = np.unique(np.append(np.linspace(0.0, 0.5, grid_steps),
                                 params.eta * t / 2.0))
    betas = np.unique(np.append(np.linspace(0.0, 12.0, grid_steps), 1.0 / r))
    path = outdir / "violation_region.csv"
    _write_csv(path, "alpha,beta,lhs,rhs,margin",
               scan_violation_region(params.eta, params.t2, params.p1,
                                     alphas, betas))
    written.append(path)

    path = outdir / "entropy_heatmap.csv"
    _write_csv(path, "alpha,beta,entropy_bits",
               honest_entropy_heatmap(params.eta, params.t2, params.p1,
                                      alphas, betas))
    written.append(path)
    return written
