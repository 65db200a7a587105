"""Closed-form and Monte Carlo model of the interferometric setup.

A coherent signal (amplitude set by the input bit, suppressed or blocked for
x=0) interferes with a local oscillator on an asymmetric beam splitter and is
threshold-detected in one output port. The no-click probability for input x
at relative phase phi is

    p(0|x) = (1 - dark_prob) * exp(-eta * |t*a_x + r*beta*e^(i*phi)|^2)

with a_x the effective signal amplitude, t/r the splitter amplitudes and eta
the combined transmission and detection efficiency. Dark counts enter as an
independent per-round click, multiplicative on the optical no-click term.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .backend import get_backend
from .model import CorrelationCounts, DeviceParams
from .roundlog import RoundLog

__all__ = [
    "DriftModel",
    "no_click_probability",
    "conditional_probabilities",
    "mean_photon_number",
    "correlation_function",
    "correlation_sigma",
    "sample_block",
    "scan_correlation_vs_phase",
    "SIM_CHUNK_ROUNDS",
]

# Rounds drawn per RNG call in sample_block. Part of the reproducibility
# contract: changing it changes the random stream alignment. Multiple of 4
# so per-chunk packed rounds stay byte-aligned.
SIM_CHUNK_ROUNDS = 1 << 20


@dataclass(frozen=True)
class DriftModel:
    """Relative-phase instability between signal and local oscillator.

    kind 'none' holds the phase fixed; 'linear' advances it by `rate`
    radians per round; 'random-walk' adds a zero-mean Gaussian step with
    standard deviation `rate` per round.
    """

    kind: str = "none"
    rate: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "linear", "random-walk"):
            raise ValueError(f"unknown drift kind {self.kind!r}")
        if not self.rate >= 0:
            raise ValueError("drift rate must be >= 0")
        if self.kind == "none":
            object.__setattr__(self, "rate", 0.0)


def _no_click(a, params: DeviceParams, phase):
    t = math.sqrt(params.t2)
    rb = math.sqrt(params.r2) * params.beta_mag
    re = t * a + rb * np.cos(phase)
    im = rb * np.sin(phase)
    mu = re * re + im * im
    return (1.0 - params.dark_prob) * np.exp(-params.eta * mu)


def no_click_probability(x: int, params: DeviceParams, phase: float) -> float:
    """Probability that the detector does not click for input x."""
    return float(_no_click(params.signal_amplitude(x), params, phase))


def conditional_probabilities(params: DeviceParams, phase: float) -> np.ndarray:
    """Closed-form p(b|x) table, indexed [b][x]."""
    p0 = no_click_probability(0, params, phase)
    p1 = no_click_probability(1, params, phase)
    return np.array([[p0, p1], [1.0 - p0, 1.0 - p1]])


def mean_photon_number(x: int, params: DeviceParams) -> float:
    """Mean photon number of the state prepared for input x."""
    return params.signal_amplitude(x) ** 2


def correlation_function(params: DeviceParams, phase: float) -> float:
    """E = p(b = x) - p(b != x) under the configured input bias."""
    pnc0 = no_click_probability(0, params, phase)
    pnc1 = no_click_probability(1, params, phase)
    p1 = params.p1
    return (1.0 - p1) * (2.0 * pnc0 - 1.0) + p1 * (1.0 - 2.0 * pnc1)


def correlation_sigma(params: DeviceParams, phase: float, n: int) -> float:
    """Binomial standard deviation of the empirical E over n rounds."""
    p_match = (1.0 + correlation_function(params, phase)) / 2.0
    return 2.0 * math.sqrt(max(p_match * (1.0 - p_match), 0.0) / n)


def scan_correlation_vs_phase(params: DeviceParams, phases) -> np.ndarray:
    """Rows of (phase_rad, E) over a phase grid."""
    phases = np.atleast_1d(np.asarray(phases, dtype=np.float64))
    if phases.size == 0:
        raise ValueError("phase grid must be non-empty")
    e = np.array([correlation_function(params, p) for p in phases])
    return np.column_stack([phases, e])


def sample_block(
    params: DeviceParams,
    n: int,
    seed: int,
    drift: DriftModel = DriftModel(),
) -> tuple[RoundLog, CorrelationCounts]:
    """Run n simulated rounds and return the packed log plus counts.

    Deterministic: identical (params, n, seed, drift) reproduce identical
    output bit for bit, on either kernel backend. Per chunk the generator
    is consumed in a fixed order: input deviates, walk steps (random-walk
    only), then outcome deviates.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    kernel = get_backend()
    rng = np.random.Generator(np.random.PCG64(seed))
    a0 = params.signal_amplitude(0)
    a1 = params.signal_amplitude(1)

    if drift.kind == "none":
        pc0 = 1.0 - float(_no_click(a0, params, params.rel_phase))
        pc1 = 1.0 - float(_no_click(a1, params, params.rel_phase))

    pieces = []
    counts = np.zeros((2, 2), dtype=np.int64)
    walk_state = params.rel_phase
    for start in range(0, n, SIM_CHUNK_ROUNDS):
        m = min(SIM_CHUNK_ROUNDS, n - start)
        u_x = rng.random(m)
        if drift.kind == "random-walk":
            steps = rng.standard_normal(m)
        u_b = rng.random(m)

        if drift.kind == "none":
            packed, c = kernel.sim_rounds_const(u_x, u_b, params.p1, pc0, pc1)
        else:
            if drift.kind == "linear":
                phases = params.rel_phase + drift.rate * np.arange(
                    start, start + m, dtype=np.float64)
            else:
                # round i sees the phase before its own step
                cs = np.cumsum(steps)
                phases = walk_state + drift.rate * (cs - steps)
                walk_state = walk_state + drift.rate * cs[-1]
            pc0_arr = 1.0 - _no_click(a0, params, phases)
            pc1_arr = 1.0 - _no_click(a1, params, phases)
            packed, c = kernel.sim_rounds_var(u_x, u_b, params.p1,
                                              pc0_arr, pc1_arr)
        pieces.append(packed)
        counts += c

    log = RoundLog(
        n=n,
        seed=seed & 0xFFFFFFFFFFFFFFFF,
        params_digest=params.digest(),
        payload=np.concatenate(pieces),
    )
    return log, CorrelationCounts.from_matrix(counts)
