"""Packed binary log of (input, outcome) round pairs.

Layout: 4-byte magic "QRNG", version u8, round count u64 LE, seed u64 LE,
32-byte device parameter digest, then ceil(n/4) payload bytes. Each round
occupies two bits (input bit first, then outcome bit), four rounds per byte,
least significant bits first. Trailing pad bits in the final byte are zero.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .backend import get_backend
from .bits import unpack_rounds
from .model import CorrelationCounts, RoundRecord

__all__ = ["RoundLog", "RoundLogError", "RoundLogReader", "scan_counts"]

MAGIC = b"QRNG"
VERSION = 1
_HEADER = struct.Struct("<4sBQQ32s")
HEADER_SIZE = _HEADER.size


class RoundLogError(ValueError):
    """Malformed or truncated round log."""


def _payload_bytes(n: int) -> int:
    return (2 * n + 7) // 8


@dataclass(frozen=True)
class RoundLog:
    """In-memory round log with the on-disk header fields."""

    n: int
    seed: int
    params_digest: bytes
    payload: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise RoundLogError("no data: log must contain at least one round")
        if len(self.params_digest) != 32:
            raise RoundLogError("params digest must be 32 bytes")
        if self.payload.dtype != np.uint8 or self.payload.size != _payload_bytes(self.n):
            raise RoundLogError(
                f"payload must be {_payload_bytes(self.n)} uint8 bytes for n={self.n}")

    def header_bytes(self) -> bytes:
        return _HEADER.pack(MAGIC, VERSION, self.n, self.seed, self.params_digest)

    def write(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.header_bytes())
            fh.write(self.payload.tobytes())

    @classmethod
    def read(cls, path) -> "RoundLog":
        with RoundLogReader(path) as reader:
            payload = reader.read_payload()
            return cls(n=reader.n, seed=reader.seed,
                       params_digest=reader.params_digest, payload=payload)

    def bits(self) -> tuple[np.ndarray, np.ndarray]:
        """Unpack the full log into (x, b) bit arrays."""
        return unpack_rounds(self.payload, self.n)

    def records(self) -> Iterator[RoundRecord]:
        x, b = self.bits()
        for xi, bi in zip(x, b):
            yield RoundRecord(int(xi), int(bi))

    def counts(self) -> CorrelationCounts:
        mat = get_backend().count_packed(self.payload, self.n)
        return CorrelationCounts.from_matrix(mat)

    def content_digest(self) -> str:
        """Hex digest over header and payload; stable across identical runs."""
        h = hashlib.sha256()
        h.update(self.header_bytes())
        h.update(self.payload.tobytes())
        return h.hexdigest()


class RoundLogReader:
    """Streaming reader validating the header up front.

    Payload is consumed in order via iter_chunks; truncation is reported
    with the index of the first missing round.
    """

    def __init__(self, path):
        self._fh = open(path, "rb")
        try:
            head = self._fh.read(HEADER_SIZE)
            if len(head) < HEADER_SIZE:
                raise RoundLogError("truncated at round 0: incomplete header")
            magic, version, n, seed, digest = _HEADER.unpack(head)
            if magic != MAGIC:
                raise RoundLogError(f"bad magic {magic!r}, expected {MAGIC!r}")
            if version != VERSION:
                raise RoundLogError(
                    f"unsupported version {version}, expected {VERSION}")
            if n == 0:
                raise RoundLogError("no data: log declares zero rounds")
            self.n = n
            self.seed = seed
            self.params_digest = digest
            self._consumed = 0
        except Exception:
            self._fh.close()
            raise

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        self._fh.close()

    def _read_rounds(self, m: int) -> np.ndarray:
        want = _payload_bytes(m)
        raw = self._fh.read(want)
        if len(raw) < want:
            have_rounds = self._consumed + (len(raw) * 8) // 2
            raise RoundLogError(f"truncated at round {min(have_rounds, self.n)}")
        self._consumed += m
        return np.frombuffer(raw, dtype=np.uint8)

    def read_payload(self) -> np.ndarray:
        if self._consumed:
            raise RoundLogError("reader already consumed")
        payload = self._read_rounds(self.n)
        extra = self._fh.read(1)
        if extra:
            raise RoundLogError("trailing bytes after declared payload")
        return payload

    def iter_chunks(self, rounds_per_chunk: int = 1 << 20
                    ) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        """Yield (x, b) bit arrays in round order.

        rounds_per_chunk must be a multiple of 4 so chunks stay byte aligned.
        """
        if rounds_per_chunk < 4 or rounds_per_chunk % 4:
            raise ValueError("rounds_per_chunk must be a positive multiple of 4")
        while self._consumed < self.n:
            m = min(rounds_per_chunk, self.n - self._consumed)
            packed = self._read_rounds(m)
            yield unpack_rounds(packed, m)


def scan_counts(path) -> tuple[CorrelationCounts, int, bytes]:
    """Full streaming pass over a log file.

    Returns the joint counts, the stored seed, and the stored parameter
    digest. Equivalent to counting every record in order.
    """
    kernel = get_backend()
    total = np.zeros((2, 2), dtype=np.int64)
    with RoundLogReader(path) as reader:
        seed, digest, n = reader.seed, reader.params_digest, reader.n
        chunk = 1 << 20
        while reader._consumed < n:
            m = min(chunk, n - reader._consumed)
            packed = reader._read_rounds(m)
            total += kernel.count_packed(packed, m)
    return CorrelationCounts.from_matrix(total), seed, digest
