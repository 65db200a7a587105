import json
import math

import numpy as np
import pytest

from ebqrng import (DeviceParams, DriftModel, EnergyBounds, MonitorResult,
                    certified_min_entropy, certify_counts,
                    correlator_certificate, emit_figures, ingest_round_log,
                    load_config, monitor, nominal_rates, output_length,
                    correlation_function, run_protocol, sample_block,
                    write_output_bits, write_report)
from ebqrng.extractor import read_packed_bits, write_packed_bits
from ebqrng.model import CorrelationCounts
from ebqrng.roundlog import RoundLogReader

from conftest import TEST_DEVICE as DEVICE
from conftest import config_path, make_config


# ---------------------------------------------------------------- config


def test_load_shipped_configs():
    desk = load_config(config_path("desk_scale.json"))
    assert desk.blocks == 35
    assert desk.rounds_per_block == 10 ** 6
    assert desk.cert.h == 0.04
    assert desk.bounds.omega1 == pytest.approx(0.0025)
    assert desk.bounds.omega0 == pytest.approx(0.0025 * 10 ** (-2.3))
    lab = load_config(config_path("lab_scale.json"))
    assert lab.rounds_per_block == 10 ** 8
    assert lab.cert.h == 0.117
    assert lab.cert.c == 12.0 and lab.cert.d == 30000.0


def test_load_config_rejects_unknown_fields():
    with pytest.raises(ValueError, match="unknown config section"):
        load_config(make_config(devices={"x": 1}))
    with pytest.raises(ValueError, match="unknown device field"):
        load_config(make_config(device={"gain": 2.0}))
    with pytest.raises(ValueError, match="unknown protocol field"):
        load_config(make_config(protocol={"retries": 3}))
    with pytest.raises(ValueError, match="unknown output field"):
        load_config(make_config(output={"plots": "x.png"}))
    with pytest.raises(ValueError, match="unknown certificate field"):
        cfg = make_config()
        cfg["certificate"]["slope"] = 1.0
        load_config(cfg)


def test_load_config_missing_required():
    cfg = make_config()
    del cfg["certificate"]
    with pytest.raises(ValueError, match="missing config field"):
        load_config(cfg)
    cfg = make_config()
    del cfg["protocol"]["seed"]
    with pytest.raises(ValueError, match="missing protocol field"):
        load_config(cfg)
    cfg = make_config()
    del cfg["protocol"]["extractor_seed"]
    with pytest.raises(ValueError, match="missing protocol field"):
        load_config(cfg)


def test_load_config_energy_policy():
    # margin scales the honest device bounds
    cfg = load_config(make_config(energy={"margin": 1.2}))
    assert cfg.bounds.omega1 == pytest.approx(1.2 * 0.0025)
    # margin and explicit bounds are mutually exclusive
    with pytest.raises(ValueError, match="energy margin excludes explicit"):
        load_config(make_config(energy={"margin": 1.0, "omega1": 0.003}))
    # explicit bounds pick up the device bias by default
    cfg = load_config(make_config(energy={"omega0": 0.0, "omega1": 0.003}))
    assert cfg.bounds.omega1 == 0.003 and cfg.bounds.p1 == 0.25
    # a conflicting explicit bias is rejected
    with pytest.raises(ValueError, match="p1 must match device p1"):
        load_config(make_config(
            energy={"omega0": 0.0, "omega1": 0.003, "p1": 0.5}))
    # omitting the section entirely uses the honest bounds
    cfg = make_config()
    del cfg["energy"]
    assert load_config(cfg).bounds.omega1 == pytest.approx(0.0025)


def test_load_config_protocol_validation():
    with pytest.raises(ValueError, match="blocks must be >= 1"):
        load_config(make_config(protocol={"blocks": 0}))
    with pytest.raises(ValueError, match="rounds_per_block"):
        load_config(make_config(protocol={"rounds_per_block": 0}))
    with pytest.raises(ValueError, match="seed must be an integer"):
        load_config(make_config(protocol={"seed": "abc"}))
    with pytest.raises(ValueError, match="seed must be an integer"):
        load_config(make_config(protocol={"seed": True}))
    with pytest.raises(ValueError, match="fit in 64 bits"):
        load_config(make_config(protocol={"extractor_seed": 1 << 64}))
    with pytest.raises(ValueError, match="workers"):
        load_config(make_config(protocol={"workers": 0}))
    with pytest.raises(ValueError, match="unknown drift field"):
        load_config(make_config(protocol={"drift": {"kind": "linear",
                                                    "speed": 1.0}}))
    cfg = load_config(make_config(protocol={"drift": {"kind": "linear",
                                                      "rate": 0.25}}))
    assert cfg.drift == DriftModel("linear", 0.25)


def test_load_config_round_logs_rules(tmp_path):
    proto = {"round_logs": ["a.qrl"], "extractor_seed": 7}
    cfg = make_config()
    cfg["protocol"] = proto
    loaded = load_config(cfg)
    assert loaded.round_logs == ("a.qrl",)
    assert loaded.blocks == 1
    with pytest.raises(ValueError, match="excludes simulation field"):
        cfg = make_config()
        cfg["protocol"] = {"round_logs": ["a.qrl"], "seed": 1,
                           "extractor_seed": 7}
        load_config(cfg)
    with pytest.raises(ValueError, match="at least one path"):
        cfg = make_config()
        cfg["protocol"] = {"round_logs": [], "extractor_seed": 7}
        load_config(cfg)


# ---------------------------------------------------------------- blocks


def test_certify_counts_verdicts():
    config = load_config(make_config())
    # synthetic counts: strong correlation, passes
    good = CorrelationCounts.from_matrix([[27000, 5000], [10500, 7500]])
    block = certify_counts(good, config)
    assert block.passed
    assert block.min_entropy_bits == pytest.approx(
        certified_min_entropy(50000, config.cert))
    assert block.extract_len == output_length(block.min_entropy_bits, 1e-10)
    # uncorrelated counts fail and certify nothing
    flat = CorrelationCounts.from_matrix([[18750, 6250], [18750, 6250]])
    block = certify_counts(flat, config)
    assert not block.passed
    assert block.min_entropy_bits == 0 and block.extract_len == 0


def test_run_protocol_conservation(tmp_path):
    config = load_config(make_config())
    result = run_protocol(config)
    assert result.all_passed
    assert len(result.blocks) == 3
    assert all(b.passed for b in result.blocks)
    total = sum(b.extract_len for b in result.blocks)
    assert result.output_bits.size == total > 0
    summary = result.records[-1]
    assert summary["record"] == "summary"
    assert summary["total_output_bits"] == total
    assert summary["pass_rate"] == 1.0
    assert summary["total_rounds"] == 150_000
    assert summary["total_min_entropy_bits"] == pytest.approx(
        sum(b.min_entropy_bits for b in result.blocks))
    # wall-clock timing lives on the result object, never in the report
    assert all("elapsed" not in k for rec in result.records for k in rec)
    assert result.elapsed_s > 0


def test_run_protocol_deterministic_reruns(tmp_path):
    config = load_config(make_config())
    a = run_protocol(config)
    b = run_protocol(config)
    ra, rb = tmp_path / "a.ndjson", tmp_path / "b.ndjson"
    write_report(a, ra)
    write_report(b, rb)
    assert ra.read_bytes() == rb.read_bytes()
    ba, bb = tmp_path / "a.bin", tmp_path / "b.bin"
    assert write_output_bits(a, ba) == write_output_bits(b, bb)
    assert ba.read_bytes() == bb.read_bytes()


def test_run_protocol_workers_equivalent():
    config = load_config(make_config(protocol={"blocks": 2}))
    serial = run_protocol(config, workers=1)
    parallel = run_protocol(config, workers=2)
    assert serial.records == parallel.records
    assert np.array_equal(serial.output_bits, parallel.output_bits)


def test_run_protocol_failing_device(tmp_path):
    cfg = make_config(device={"eta": 0.0})
    config = load_config(cfg)
    result = run_protocol(config)
    assert not result.all_passed
    assert all(not b.passed for b in result.blocks)
    assert result.output_bits.size == 0
    summary = result.records[-1]
    assert summary["passed_blocks"] == 0
    assert summary["total_output_bits"] == 0
    out = tmp_path / "bits.bin"
    assert write_output_bits(result, out) == 0
    assert out.stat().st_size == 0


def test_run_protocol_block_records():
    config = load_config(make_config())
    result = run_protocol(config)
    recs = result.records[:-1]
    assert [r["index"] for r in recs] == [0, 1, 2]
    for i, rec in enumerate(recs):
        assert rec["record"] == "block"
        assert rec["source"] == "simulated"
        assert rec["seed"] == 4242 + i
        assert rec["n"] == 50_000
        assert sum(sum(row) for row in rec["counts"]) == 50_000
        assert rec["passed"] is True
        assert rec["epsilon"] == 1e-10
        assert rec["extract_len"] == output_length(rec["min_entropy_bits"],
                                                   1e-10)


def test_seed_file_modes(tmp_path):
    config = load_config(make_config())
    baseline = run_protocol(config)
    need = sum(50_000 + b.extract_len - 1 for b in baseline.blocks)

    rng = np.random.default_rng(31337)
    seed_bits = rng.integers(0, 2, size=need).astype(np.uint8)
    seed_path = tmp_path / "seed.bin"
    write_packed_bits(seed_path, seed_bits)

    cfg = make_config(protocol={"seed_file": str(seed_path)})
    filed = run_protocol(load_config(cfg))
    assert filed.all_passed
    assert filed.output_bits.size == baseline.output_bits.size
    # different seed material, different output
    assert not np.array_equal(filed.output_bits, baseline.output_bits)
    # deterministic given the same file
    again = run_protocol(load_config(cfg))
    assert np.array_equal(filed.output_bits, again.output_bits)

    # a file sized for one block suffices when reuse is explicit
    one = tmp_path / "one.bin"
    write_packed_bits(one, seed_bits[:50_000 + baseline.blocks[0].extract_len - 1])
    reuse_cfg = make_config(protocol={"seed_file": str(one),
                                      "allow_seed_reuse": True})
    reused = run_protocol(load_config(reuse_cfg))
    assert reused.all_passed
    with pytest.raises(ValueError, match="seed file exhausted"):
        run_protocol(load_config(make_config(
            protocol={"seed_file": str(one)})))


def test_round_log_ingestion_matches_simulation(tmp_path):
    sim_cfg = load_config(make_config(protocol={"blocks": 2}))
    simulated = run_protocol(sim_cfg)

    paths = []
    for i in range(2):
        log, _ = sample_block(sim_cfg.params, 50_000, seed=4242 + i)
        p = tmp_path / f"block{i}.qrl"
        log.write(p)
        paths.append(str(p))
    cfg = make_config()
    cfg["protocol"] = {"round_logs": paths, "extractor_seed": 999}
    ingested = run_protocol(load_config(cfg))

    assert np.array_equal(ingested.output_bits, simulated.output_bits)
    for rec, path in zip(ingested.records[:-1], paths):
        assert rec["source"] == path
        assert rec["seed"] == 4242 + ingested.records.index(rec)
    assert (ingested.records[-1]["output_sha256"]
            == simulated.records[-1]["output_sha256"])


def test_round_log_digest_mismatch(tmp_path):
    other = DeviceParams(**{**DEVICE, "eta": 0.54,
                            "extinction_db": DEVICE["extinction_db"]})
    log, _ = sample_block(other, 5000, seed=1)
    p = tmp_path / "foreign.qrl"
    log.write(p)
    cfg = make_config()
    cfg["protocol"] = {"round_logs": [str(p)], "extractor_seed": 999}
    with pytest.raises(ValueError, match="params digest mismatch"):
        run_protocol(load_config(cfg))


def test_ingest_round_log(tmp_path, desk_params):
    log, counts = sample_block(desk_params, 12_000, seed=5)
    p = tmp_path / "b.qrl"
    log.write(p)
    got, reader = ingest_round_log(p)
    assert got == counts
    with reader:
        x, b = next(reader.iter_chunks())
        assert x.size == 12_000


# ---------------------------------------------------------------- rates


def test_nominal_rates_lab_declaration():
    config = load_config(config_path("lab_scale.json"))
    rates = nominal_rates(config)
    assert rates["rounds_per_block"] == 10 ** 8
    assert abs(rates["certified_bits_per_round"] - 0.1) < 0.005
    assert abs(rates["certified_bits_per_s"] - 1.25e6) < 62500
    assert rates["output_bits_per_round"] <= rates["certified_bits_per_round"]
    assert rates["output_bits_per_s"] == pytest.approx(
        rates["output_bits_per_round"] * 12.5e6)


def test_nominal_rates_in_summary():
    config = load_config(make_config())
    result = run_protocol(config)
    summary = result.records[-1]
    rates = nominal_rates(config)
    for key, value in rates.items():
        assert summary[f"nominal_{key}"] == value


# ---------------------------------------------------------------- report


def test_report_is_valid_ndjson(tmp_path):
    config = load_config(make_config())
    result = run_protocol(config)
    path = tmp_path / "report.ndjson"
    write_report(result, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 4
    records = [json.loads(line) for line in lines]
    for rec in records[:-1]:
        for key in ("record", "index", "source", "seed", "n", "counts",
                    "witness_value", "passed", "epsilon",
                    "min_entropy_bits", "extract_len"):
            assert key in rec
    summary = records[-1]
    for key in ("blocks", "passed_blocks", "pass_rate", "total_rounds",
                "total_min_entropy_bits", "total_output_bits", "epsilon",
                "soundness_product", "output_sha256", "params_digest",
                "backend"):
        assert key in summary
    assert summary["backend"] in ("ext", "py")


# ---------------------------------------------------------------- monitor


def _monitor_setup(tmp_path, drift=None, n=400_000):
    params = DeviceParams(**{**DEVICE, "extinction_db": 23.0})
    log, _ = sample_block(params, n, seed=2024, drift=drift or DriftModel())
    path = tmp_path / "mon.qrl"
    log.write(path)
    bounds = EnergyBounds.from_device(params)
    cert = correlator_certificate(0.25, 1.0, h=0.02, c=0.1, d=2.0,
                                  epsilon=1e-10)
    return path, bounds, cert


def test_monitor_stationary_all_pass(tmp_path):
    path, bounds, cert = _monitor_setup(tmp_path)
    result = monitor(path, bounds, cert, window=100_000)
    assert isinstance(result, MonitorResult)
    assert len(result.records) == 4
    assert all(r.passed and not r.incomplete for r in result.records)
    assert all(r.n == 100_000 for r in result.records)
    assert result.alarm_index is None and result.all_passed
    assert [r.index for r in result.records] == [0, 1, 2, 3]


def test_monitor_partial_window(tmp_path):
    path, bounds, cert = _monitor_setup(tmp_path, n=250_000)
    result = monitor(path, bounds, cert, window=100_000)
    assert len(result.records) == 3
    assert result.records[-1].incomplete
    assert result.records[-1].n == 50_000
    # stream shorter than one window: single incomplete verdict
    short, _, _ = _monitor_setup(tmp_path, n=3_000)
    result = monitor(short, bounds, cert, window=4096)
    assert len(result.records) == 1
    assert result.records[0].incomplete and result.records[0].n == 3_000


def test_monitor_window_validation(tmp_path):
    path, bounds, cert = _monitor_setup(tmp_path, n=5_000)
    with pytest.raises(ValueError, match="window must be >= 1000"):
        monitor(path, bounds, cert, window=999)


def test_monitor_drift_alarm(tmp_path):
    drift = DriftModel("linear", math.pi / 200_000)
    path, bounds, cert = _monitor_setup(tmp_path, drift=drift)
    result = monitor(path, bounds, cert, window=100_000)
    assert result.alarm_index is not None
    assert not result.all_passed
    first_fail = next(i for i, r in enumerate(result.records) if not r.passed)
    assert result.alarm_index == first_fail
    # the sweep starts aligned, so the first window still passes; the
    # window straddling the anti-aligned phase around pi must fail
    assert result.records[0].passed
    assert not result.records[1].passed


def test_monitor_accepts_open_reader(tmp_path):
    path, bounds, cert = _monitor_setup(tmp_path, n=100_000)
    with RoundLogReader(path) as reader:
        result = monitor(reader, bounds, cert, window=50_000)
    assert len(result.records) == 2


# ---------------------------------------------------------------- figures


def test_emit_figures_bundle(tmp_path):
    config = load_config(make_config())
    out = tmp_path / "figs"
    written = emit_figures(config, out, phase_points=41, mc_phases=7,
                           mc_rounds=20_000, grid_steps=11)
    names = [p.name for p in written]
    assert names == ["correlation_vs_phase.csv", "correlation_monte_carlo.csv",
                     "violation_region.csv", "entropy_heatmap.csv"]
    for p in written:
        assert p.exists()

    lines = (out / "correlation_vs_phase.csv").read_text().splitlines()
    assert lines[0] == "phase_rad,E"
    assert len(lines) == 42
    for line in lines[1:]:
        phase, e = map(float, line.split(","))
        assert e == pytest.approx(
            correlation_function(config.params, phase), abs=1e-12)

    lines = (out / "correlation_monte_carlo.csv").read_text().splitlines()
    assert lines[0] == "phase_rad,E,e_mc,e_sigma,band_lo,band_hi"
    assert len(lines) == 8
    half = 2 * (config.bounds.omega0 + config.bounds.omega1)
    for line in lines[1:]:
        phase, e, e_mc, e_sigma, lo, hi = map(float, line.split(","))
        assert hi - lo == pytest.approx(2 * half, rel=1e-12)
        assert abs(e_mc - e) <= 5 * e_sigma

    lines = (out / "violation_region.csv").read_text().splitlines()
    assert lines[0] == "alpha,beta,lhs,rhs,margin"
    rows = np.array([list(map(float, l.split(","))) for l in lines[1:]])
    t = math.sqrt(config.params.t2)
    r = math.sqrt(config.params.r2)
    star = rows[(np.isclose(rows[:, 0], config.params.eta * t / 2))
                & (np.isclose(rows[:, 1], 1 / r))]
    assert star.shape[0] == 1
    assert star[0, 4] > 0

    lines = (out / "entropy_heatmap.csv").read_text().splitlines()
    assert lines[0] == "alpha,beta,entropy_bits"
    ent = np.array([float(l.split(",")[2]) for l in lines[1:]])
    assert np.all((ent >= 0) & (ent <= 1))


def test_emit_figures_deterministic(tmp_path):
    config = load_config(make_config())
    a = emit_figures(config, tmp_path / "a", phase_points=11, mc_phases=3,
                     mc_rounds=5_000, grid_steps=5)
    b = emit_figures(config, tmp_path / "b", phase_points=11, mc_phases=3,
                     mc_rounds=5_000, grid_steps=5)
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()
