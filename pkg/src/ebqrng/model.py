"""Shared domain types for the energy-bounded self-testing QRNG pipeline.

Holds the physical configuration of the simulated optical setup, per-block
event counts, assumed energy bounds, and the linear witness certificate that
turns observed statistics into a certified entropy claim. All types are
immutable after construction and safe to share across workers.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DeviceParams",
    "CorrelationCounts",
    "EnergyBounds",
    "WitnessCertificate",
    "RoundRecord",
    "CertifiedBlock",
    "FrequencyTable",
    "counts_to_frequencies",
    "validate_certificate",
    "CertificateError",
    "load_device_params",
    "load_energy_bounds",
    "load_witness_certificate",
]

PROB_SUM_TOL = 1e-9


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(msg)


@dataclass(frozen=True)
class DeviceParams:
    """Physical configuration of the prepare-and-measure optical setup.

    Amplitudes are in sqrt(photons); the signal amplitude applies to input
    x=1, while x=0 is the blocked path (suppressed by ``extinction_db``,
    fully blocked when infinite). ``eta`` is the combined transmission and
    detection efficiency, ``t2`` the beam-splitter transmittance for the
    signal arm (reflectance is derived, never stored), ``p1`` the bias of
    the binary input, ``dark_prob`` the per-round dark-click probability.
    ``rep_rate_hz`` is metadata used only for nominal-rate reporting.
    """

    alpha_mag: float
    beta_mag: float
    rel_phase: float = 0.0
    eta: float = 1.0
    t2: float = 0.99
    p1: float = 0.25
    dark_prob: float = 0.0
    extinction_db: float = math.inf
    rep_rate_hz: float = 12.5e6

    def __post_init__(self):
        _require(self.alpha_mag >= 0, "alpha_mag must be >= 0")
        _require(self.beta_mag >= 0, "beta_mag must be >= 0")
        _require(math.isfinite(self.rel_phase), "rel_phase must be finite")
        _require(0.0 <= self.eta <= 1.0, "eta must be in [0, 1]")
        _require(0.0 < self.t2 < 1.0, "t2 must be in (0, 1)")
        _require(0.0 < self.p1 < 1.0, "p1 must be in (0, 1)")
        _require(0.0 <= self.dark_prob < 1.0, "dark_prob must be in [0, 1)")
        _require(self.extinction_db >= 0, "extinction_db must be >= 0 (or infinite)")
        _require(self.rep_rate_hz > 0, "rep_rate_hz must be > 0")

    @property
    def r2(self) -> float:
        """Beam-splitter reflectance, always recomputed from t2."""
        return 1.0 - self.t2

    def signal_amplitude(self, x: int) -> float:
        """Effective signal amplitude for input x (field suppression on x=0)."""
        if x not in (0, 1):
            raise ValueError(f"input must be a bit, got {x!r}")
        if x == 1:
            return self.alpha_mag
        if math.isinf(self.extinction_db):
            return 0.0
        return self.alpha_mag * 10.0 ** (-self.extinction_db / 20.0)

    def to_json_dict(self) -> dict:
        d = {
            "alpha_mag": self.alpha_mag,
            "beta_mag": self.beta_mag,
            "rel_phase": self.rel_phase,
            "eta": self.eta,
            "t2": self.t2,
            "p1": self.p1,
            "dark_prob": self.dark_prob,
            # JSON has no literal for infinity; null means "fully blocked"
            "extinction_db": None if math.isinf(self.extinction_db) else self.extinction_db,
            "rep_rate_hz": self.rep_rate_hz,
        }
        return d

    def digest(self) -> bytes:
        """SHA-256 of the canonical JSON form, used to tag round logs."""
        blob = json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("ascii")).digest()


def _reject_unknown(d: dict, allowed: Iterable[str], what: str) -> None:
    unknown = set(d) - set(allowed)
    if unknown:
        raise ValueError(f"unknown {what} field(s): {sorted(unknown)}")


def load_device_params(d: dict) -> DeviceParams:
    """Parse a DeviceParams JSON dict; unknown fields are rejected."""
    allowed = (
        "alpha_mag", "beta_mag", "rel_phase", "eta", "t2", "p1",
        "dark_prob", "extinction_db", "rep_rate_hz",
    )
    _reject_unknown(d, allowed, "device")
    kw = dict(d)
    if kw.get("extinction_db", math.inf) is None:
        kw["extinction_db"] = math.inf
    return DeviceParams(**kw)


@dataclass(frozen=True)
class CorrelationCounts:
    """Event counts n[b][x] for one block; the source of all frequencies."""

    n: tuple[tuple[int, int], tuple[int, int]]
    n_total: int

    def __post_init__(self):
        flat = [self.n[b][x] for b in (0, 1) for x in (0, 1)]
        _require(all(isinstance(v, (int, np.integer)) and v >= 0 for v in flat),
                 "counts must be nonnegative integers")
        _require(sum(flat) == self.n_total,
                 f"counts sum {sum(flat)} != n_total {self.n_total}")

    @classmethod
    def from_matrix(cls, n) -> "CorrelationCounts":
        arr = np.asarray(n)
        mat = ((int(arr[0][0]), int(arr[0][1])), (int(arr[1][0]), int(arr[1][1])))
        return cls(n=mat, n_total=int(arr.sum()))

    @property
    def n_x(self) -> tuple[int, int]:
        """Per-input totals (n_0, n_1)."""
        return (self.n[0][0] + self.n[1][0], self.n[0][1] + self.n[1][1])

    def merge(self, other: "CorrelationCounts") -> "CorrelationCounts":
        """Associative merge of partial counts from concurrent workers."""
        mat = tuple(
            tuple(self.n[b][x] + other.n[b][x] for x in (0, 1)) for b in (0, 1)
        )
        return CorrelationCounts(n=mat, n_total=self.n_total + other.n_total)


@dataclass(frozen=True)
class FrequencyTable:
    """Joint and conditional frequencies derived from one block of counts.

    ``joint[b][x]`` estimates p(x, b); ``cond[b][x]`` estimates p(b|x) and is
    NaN for an unused input (its ``cond_defined`` flag is False). ``p_x``
    carries the configured input distribution for downstream conversions.
    """

    joint: np.ndarray
    cond: np.ndarray
    cond_defined: tuple[bool, bool]
    p_x: tuple[float, float]
    n_x: tuple[int, int]
    n_total: int


def counts_to_frequencies(counts: CorrelationCounts, p1: float) -> FrequencyTable:
    """Frequency tables f(x,b) = n[b][x]/n_total and f(b|x) = n[b][x]/n_x."""
    if counts.n_total == 0:
        raise ValueError("no data")
    _require(0.0 < p1 < 1.0, "p1 must be in (0, 1)")
    n = np.array(counts.n, dtype=np.float64)
    joint = n / counts.n_total
    n_x = counts.n_x
    cond = np.full((2, 2), np.nan)
    defined = [False, False]
    for x in (0, 1):
        if n_x[x] > 0:
            cond[:, x] = n[:, x] / n_x[x]
            defined[x] = True
    return FrequencyTable(
        joint=joint,
        cond=cond,
        cond_defined=(defined[0], defined[1]),
        p_x=(1.0 - p1, p1),
        n_x=n_x,
        n_total=counts.n_total,
    )


@dataclass(frozen=True)
class EnergyBounds:
    """Assumed per-input mean photon bounds and their input-weighted average."""

    omega0: float
    omega1: float
    p1: float
    omega_bar: float = None  # type: ignore[assignment]

    def __post_init__(self):
        _require(self.omega0 >= 0, "omega0 must be >= 0")
        _require(self.omega1 >= 0, "omega1 must be >= 0")
        _require(0.0 < self.p1 < 1.0, "p1 must be in (0, 1)")
        derived = (1.0 - self.p1) * self.omega0 + self.p1 * self.omega1
        if self.omega_bar is None:
            object.__setattr__(self, "omega_bar", derived)
        else:
            _require(
                math.isclose(self.omega_bar, derived, rel_tol=1e-9, abs_tol=1e-15),
                f"omega_bar {self.omega_bar} inconsistent with per-input bounds "
                f"(expected {derived})",
            )

    @classmethod
    def from_device(cls, params: DeviceParams, margin: float = 1.0) -> "EnergyBounds":
        """Bounds set to the device's per-input mean photon numbers.

        ``margin`` > 1 adds operator headroom on top of the honest values.
        """
        _require(margin >= 1.0, "margin must be >= 1")
        return cls(
            omega0=margin * params.signal_amplitude(0) ** 2,
            omega1=margin * params.signal_amplitude(1) ** 2,
            p1=params.p1,
        )

    def to_json_dict(self) -> dict:
        return {
            "omega0": self.omega0,
            "omega1": self.omega1,
            "omega_bar": self.omega_bar,
            "p1": self.p1,
        }


def load_energy_bounds(d: dict) -> EnergyBounds:
    allowed = ("omega0", "omega1", "omega_bar", "p1")
    _reject_unknown(d, allowed, "energy")
    return EnergyBounds(**d)


@dataclass(frozen=True)
class WitnessCertificate:
    """Linear witness plus finite-size constants and the pass threshold.

    ``gamma[b][x]`` are the four coefficients applied to joint frequencies
    f(x,b); ``zeta[x]`` the two coefficients applied to the assumed energy
    bounds. The finite-size constants ``c`` and ``d`` shape the block
    min-entropy correction, ``h`` is the pass threshold in bits/round and
    ``epsilon`` the target soundness error. Coefficients are treated as
    validated inputs from witness optimisation; only well-formedness is
    checked here.
    """

    gamma: tuple[tuple[float, float], tuple[float, float]]
    zeta: tuple[float, float]
    c: float
    d: float
    h: float
    epsilon: float

    def __post_init__(self):
        g = self.gamma
        _require(len(g) == 2 and all(len(row) == 2 for row in g),
                 "gamma must be a 2x2 coefficient table")
        object.__setattr__(
            self, "gamma", tuple(tuple(float(v) for v in row) for row in g)
        )
        _require(len(self.zeta) == 2, "zeta must have two coefficients")
        object.__setattr__(self, "zeta", tuple(float(v) for v in self.zeta))

    def gamma_array(self) -> np.ndarray:
        return np.array(self.gamma, dtype=np.float64)

    def to_json_dict(self) -> dict:
        return {
            "gamma": [list(row) for row in self.gamma],
            "zeta": list(self.zeta),
            "c": self.c,
            "d": self.d,
            "h": self.h,
            "epsilon": self.epsilon,
        }

    @classmethod
    def from_conditional(
        cls,
        gamma_cond,
        p_x: tuple[float, float],
        zeta,
        c: float,
        d: float,
        h: float,
        epsilon: float,
    ) -> "WitnessCertificate":
        """Convert a witness stated on conditional p(b|x) to joint form.

        A coefficient g acting on p(b|x) acts as g / p(x) on f(x,b).
        """
        gc = np.asarray(gamma_cond, dtype=np.float64)
        gj = gc / np.asarray(p_x)[None, :]
        return cls(gamma=tuple(map(tuple, gj)), zeta=tuple(zeta),
                   c=c, d=d, h=h, epsilon=epsilon)

    @classmethod
    def with_omega_bar_coefficient(
        cls, gamma, zbar: float, p1: float, c: float, d: float,
        h: float, epsilon: float,
    ) -> "WitnessCertificate":
        """Witness with a single coefficient on the averaged energy bound.

        zbar * omega_bar decomposes as zbar*(1-p1) on omega0 plus zbar*p1
        on omega1.
        """
        return cls(gamma=tuple(map(tuple, gamma)),
                   zeta=(zbar * (1.0 - p1), zbar * p1),
                   c=c, d=d, h=h, epsilon=epsilon)


class CertificateError(ValueError):
    """Raised when a witness certificate fails validation."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def validate_certificate(cert: WitnessCertificate) -> list[str]:
    """Check certificate invariants; returns the list of named violations."""
    violations = []
    if not (cert.c > 0):
        violations.append("c must be positive")
    if not (cert.d > 0):
        violations.append("d must be positive")
    if not (0.0 < cert.epsilon < 1.0):
        violations.append("epsilon out of range")
    if not math.isfinite(cert.h):
        violations.append("h must be finite")
    if not all(math.isfinite(v) for row in cert.gamma for v in row):
        violations.append("gamma coefficients must be finite")
    if not all(math.isfinite(v) for v in cert.zeta):
        violations.append("zeta coefficients must be finite")
    return violations


def load_witness_certificate(d: dict) -> WitnessCertificate:
    """Parse and validate a WitnessCertificate JSON dict; raises on violations."""
    allowed = ("gamma", "zeta", "c", "d", "h", "epsilon")
    _reject_unknown(d, allowed, "certificate")
    cert = WitnessCertificate(
        gamma=tuple(tuple(row) for row in d["gamma"]),
        zeta=tuple(d["zeta"]),
        c=d["c"], d=d["d"], h=d["h"], epsilon=d["epsilon"],
    )
    violations = validate_certificate(cert)
    if violations:
        raise CertificateError(violations)
    return cert


@dataclass(frozen=True)
class RoundRecord:
    """One protocol round: input bit x, outcome bit b (1 = click)."""

    x: int
    b: int

    def __post_init__(self):
        _require(self.x in (0, 1) and self.b in (0, 1), "x and b must be bits")


@dataclass(frozen=True)
class CertifiedBlock:
    """Per-block verdict of the self-test plus the certified output budget."""

    counts: CorrelationCounts
    witness_value: float
    passed: bool
    epsilon: float
    min_entropy_bits: float
    extract_len: int
    epsilon_prime: float | None = None

    def __post_init__(self):
        _require(self.min_entropy_bits >= 0, "min_entropy_bits must be >= 0")
        _require(self.extract_len >= 0, "extract_len must be >= 0")
        if not self.passed:
            _require(self.min_entropy_bits == 0,
                     "a failed block certifies no entropy")
            _require(self.extract_len == 0,
                     "a failed block contributes no output")
