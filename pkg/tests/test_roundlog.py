import numpy as np
import pytest

from ebqrng import (RoundLog, RoundLogError, RoundLogReader, sample_block,
                    scan_counts)
from ebqrng.bits import pack_rounds
from ebqrng.roundlog import HEADER_SIZE


def _make_log(n=1000, seed=41):
    rng = np.random.default_rng(4)
    x = rng.integers(0, 2, size=n).astype(np.uint8)
    b = rng.integers(0, 2, size=n).astype(np.uint8)
    payload = pack_rounds(x, b)
    return RoundLog(n=n, seed=seed, params_digest=bytes(range(32)),
                    payload=payload), x, b


def test_roundtrip(tmp_path):
    log, x, b = _make_log()
    path = tmp_path / "run.qrl"
    log.write(path)
    assert path.stat().st_size == HEADER_SIZE + 250
    back = RoundLog.read(path)
    assert (back.n, back.seed, back.params_digest) == (log.n, log.seed,
                                                       log.params_digest)
    assert np.array_equal(back.payload, log.payload)
    rx, rb = back.bits()
    assert np.array_equal(rx, x) and np.array_equal(rb, b)
    assert back.content_digest() == log.content_digest()


def test_records_and_counts(tmp_path):
    log, x, b = _make_log(n=517)
    recs = list(log.records())
    assert len(recs) == 517
    assert recs[0].x == x[0] and recs[0].b == b[0]
    counts = log.counts()
    manual = np.zeros((2, 2), dtype=int)
    for xi, bi in zip(x, b):
        manual[bi][xi] += 1
    assert np.array_equal(np.array(counts.n), manual)
    assert counts.n_total == 517


def test_content_digest_sensitivity():
    log, _, _ = _make_log()
    other = RoundLog(n=log.n, seed=log.seed + 1,
                     params_digest=log.params_digest, payload=log.payload)
    assert other.content_digest() != log.content_digest()
    tweaked = log.payload.copy()
    tweaked[0] ^= 1
    assert RoundLog(n=log.n, seed=log.seed, params_digest=log.params_digest,
                    payload=tweaked).content_digest() != log.content_digest()


def test_constructor_validation():
    payload = np.zeros(250, dtype=np.uint8)
    with pytest.raises(RoundLogError, match="no data"):
        RoundLog(n=0, seed=1, params_digest=bytes(32), payload=payload)
    with pytest.raises(RoundLogError, match="32 bytes"):
        RoundLog(n=1000, seed=1, params_digest=b"short", payload=payload)
    with pytest.raises(RoundLogError, match="payload must be 250"):
        RoundLog(n=1000, seed=1, params_digest=bytes(32),
                 payload=np.zeros(249, dtype=np.uint8))


def test_header_rejections(tmp_path):
    log, _, _ = _make_log()
    path = tmp_path / "run.qrl"
    log.write(path)
    raw = bytearray(path.read_bytes())

    bad = tmp_path / "bad.qrl"
    bad.write_bytes(b"NOPE" + bytes(raw[4:]))
    with pytest.raises(RoundLogError, match="bad magic"):
        RoundLog.read(bad)

    vers = bytearray(raw)
    vers[4] = 99
    bad.write_bytes(bytes(vers))
    with pytest.raises(RoundLogError, match="unsupported version 99"):
        RoundLog.read(bad)

    zero = bytearray(raw)
    zero[5:13] = (0).to_bytes(8, "little")
    bad.write_bytes(bytes(zero))
    with pytest.raises(RoundLogError, match="zero rounds"):
        RoundLog.read(bad)

    bad.write_bytes(bytes(raw[:20]))
    with pytest.raises(RoundLogError, match="truncated at round 0"):
        RoundLog.read(bad)


def test_payload_truncation_names_first_missing_round(tmp_path):
    log, _, _ = _make_log(n=1000)
    path = tmp_path / "run.qrl"
    log.write(path)
    cut = tmp_path / "cut.qrl"
    cut.write_bytes(path.read_bytes()[:HEADER_SIZE + 100])
    with pytest.raises(RoundLogError, match="truncated at round 400"):
        RoundLog.read(cut)
    # empty payload: zero complete rounds present
    cut.write_bytes(path.read_bytes()[:HEADER_SIZE])
    with pytest.raises(RoundLogError, match="truncated at round 0"):
        RoundLog.read(cut)


def test_trailing_bytes_rejected(tmp_path):
    log, _, _ = _make_log()
    path = tmp_path / "run.qrl"
    log.write(path)
    with open(path, "ab") as fh:
        fh.write(b"\x00")
    with pytest.raises(RoundLogError, match="trailing bytes"):
        RoundLog.read(path)


def test_reader_iter_chunks(tmp_path):
    log, x, b = _make_log(n=10_000)
    path = tmp_path / "run.qrl"
    log.write(path)
    xs, bs = [], []
    with RoundLogReader(path) as reader:
        assert reader.n == 10_000
        assert reader.seed == 41
        for cx, cb in reader.iter_chunks(rounds_per_chunk=4096):
            xs.append(cx)
            bs.append(cb)
    assert len(xs) == 3
    assert np.array_equal(np.concatenate(xs), x)
    assert np.array_equal(np.concatenate(bs), b)
    with RoundLogReader(path) as reader:
        with pytest.raises(ValueError, match="multiple of 4"):
            next(reader.iter_chunks(rounds_per_chunk=3))


def test_scan_counts_matches_in_memory(tmp_path, desk_params):
    log, counts = sample_block(desk_params, 50_000, seed=909)
    path = tmp_path / "block.qrl"
    log.write(path)
    scanned, seed, digest = scan_counts(path)
    assert scanned == counts
    assert seed == 909
    assert digest == desk_params.digest()
