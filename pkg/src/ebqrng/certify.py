"""Entropy certification from observed correlations and energy bounds.

A linear witness with coefficients gamma[b][x] on the joint distribution and
zeta[x] on the energy bounds lower-bounds the conditional entropy of the
outcome given the input and any classical side information. A certificate
fixes the coefficients together with a threshold h and finite-size constants
(c, d): a block of n rounds whose empirical witness reaches h certifies

    n * (h - c*sqrt(L/n) - d*L/n),   L = log2(2/epsilon)

extractable bits at smoothing error epsilon, clamped at zero.
"""
from __future__ import annotations

import math

import numpy as np

from .model import (DeviceParams, EnergyBounds, FrequencyTable,
                    WitnessCertificate)
from .optics import no_click_probability

__all__ = [
    "witness_value",
    "witness_sigma",
    "pass_test",
    "finite_size_rate",
    "certified_min_entropy",
    "soundness_accounting",
    "binary_entropy",
    "honest_shannon_entropy",
    "device_shannon_entropy",
    "honest_entropy_heatmap",
    "correlator_certificate",
]


def _checked_joint(freq: FrequencyTable) -> np.ndarray:
    if freq.n_total < 1:
        raise ValueError("no data: empty frequency table")
    joint = np.asarray(freq.joint, dtype=np.float64)
    if abs(joint.sum() - 1.0) > 1e-9:
        raise ValueError("joint table must sum to 1")
    return joint


def witness_value(freq: FrequencyTable, bounds: EnergyBounds,
                  cert: WitnessCertificate) -> float:
    """gamma[p] - zeta[omega] for the observed joint frequencies."""
    joint = _checked_joint(freq)
    gamma = np.asarray(cert.gamma, dtype=np.float64)
    zeta = cert.zeta
    return float((gamma * joint).sum()
                 - zeta[0] * bounds.omega0 - zeta[1] * bounds.omega1)


def witness_sigma(freq: FrequencyTable, cert: WitnessCertificate) -> float:
    """Standard error of the empirical witness over freq.n_total rounds."""
    joint = _checked_joint(freq)
    gamma = np.asarray(cert.gamma, dtype=np.float64)
    mean = float((gamma * joint).sum())
    second = float((gamma * gamma * joint).sum())
    var = max(second - mean * mean, 0.0)
    return math.sqrt(var / freq.n_total)


def pass_test(value: float, cert: WitnessCertificate) -> bool:
    """Threshold test; equality passes."""
    return value >= cert.h


def finite_size_rate(n: int, cert: WitnessCertificate) -> float:
    """Certified min-entropy per round for a block of n rounds."""
    if n < 1:
        raise ValueError("n must be >= 1")
    big_l = math.log2(2.0 / cert.epsilon)
    rate = cert.h - cert.c * math.sqrt(big_l / n) - cert.d * big_l / n
    return max(rate, 0.0)


def certified_min_entropy(n: int, cert: WitnessCertificate) -> float:
    """Total certified min-entropy in bits for a passing block."""
    return n * finite_size_rate(n, cert)


def soundness_accounting(epsilon: float, pass_probability: float) -> float:
    """Soundness error conditioned on passing: epsilon / Pr(pass)."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon out of range")
    if not 0 < pass_probability <= 1:
        raise ValueError("pass probability must be in (0, 1]")
    return epsilon / pass_probability


def binary_entropy(p: float) -> float:
    if not 0 <= p <= 1:
        raise ValueError("probability out of range")
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def honest_shannon_entropy(cond, p1: float) -> float:
    """H(B|X) of an honest i.i.d. device from its p(b|x) table.

    cond is indexed [b][x]; this is the asymptotic rate a trusted device
    with these statistics would deliver, the ceiling for any certificate.
    """
    if not 0 < p1 < 1:
        raise ValueError("p1 must be in (0, 1)")
    if isinstance(cond, FrequencyTable):
        if not all(cond.cond_defined):
            raise ValueError("no data: both inputs must occur")
        cond = cond.cond
    cond = np.asarray(cond, dtype=np.float64)
    if cond.shape != (2, 2):
        raise ValueError("conditional table must be 2x2")
    col_sums = cond.sum(axis=0)
    if not np.allclose(col_sums, 1.0, atol=1e-9):
        raise ValueError("conditional table columns must sum to 1")
    return ((1.0 - p1) * binary_entropy(float(cond[0, 0]))
            + p1 * binary_entropy(float(cond[0, 1])))


def device_shannon_entropy(params: DeviceParams,
                           phase: float | None = None) -> float:
    """honest_shannon_entropy evaluated on the closed-form device model."""
    if phase is None:
        phase = params.rel_phase
    cond = [[no_click_probability(x, params, phase) for x in (0, 1)]]
    cond.append([1.0 - cond[0][0], 1.0 - cond[0][1]])
    return honest_shannon_entropy(cond, params.p1)


def honest_entropy_heatmap(eta: float, t2: float, p1: float,
                           alpha_values, beta_values) -> np.ndarray:
    """H(B|X) over an (alpha, beta) grid for the ideal device.

    No dark counts, fully blocked x=0 path, zero relative phase. Rows are
    (alpha, beta, entropy_bits) with alpha the outer loop.
    """
    if not 0 < eta <= 1:
        raise ValueError("eta must be in (0, 1]")
    if not 0 < t2 < 1:
        raise ValueError("t2 must be in (0, 1)")
    if not 0 < p1 < 1:
        raise ValueError("p1 must be in (0, 1)")
    alphas = np.asarray(alpha_values, dtype=np.float64)
    betas = np.asarray(beta_values, dtype=np.float64)
    if alphas.size == 0 or betas.size == 0:
        raise ValueError("heatmap grids must be non-empty")
    t = math.sqrt(t2)
    r = math.sqrt(1.0 - t2)
    a, b = np.meshgrid(alphas, betas, indexing="ij")
    pnc0 = np.exp(-eta * (r * b) ** 2)
    pnc1 = np.exp(-eta * (t * a + r * b) ** 2)

    def h2(p):
        q = np.clip(p, 1e-300, 1.0)
        qc = np.clip(1.0 - p, 1e-300, 1.0)
        return np.where((p <= 0) | (p >= 1), 0.0,
                        -p * np.log2(q) - (1.0 - p) * np.log2(qc))

    ent = (1.0 - p1) * h2(pnc0) + p1 * h2(pnc1)
    return np.column_stack([a.ravel(), b.ravel(), ent.ravel()])


def correlator_certificate(p1: float, scale: float, h: float, c: float,
                           d: float, epsilon: float) -> WitnessCertificate:
    """Certificate whose witness is scale * (signed correlator - energy bound).

    gamma[b][x] = scale * s_b * s_x / p(x) with s_0 = +1, s_1 = -1, and
    zeta = (2*scale, 2*scale), so gamma[p] - zeta[omega] equals
    scale * (p(0|0) - p(1|0) - p(0|1) + p(1|1) - 2*(omega0 + omega1)).
    """
    if not 0 < p1 < 1:
        raise ValueError("p1 must be in (0, 1)")
    if scale <= 0:
        raise ValueError("scale must be positive")
    sign = (1.0, -1.0)
    px = (1.0 - p1, p1)
    gamma = tuple(
        tuple(scale * sign[b] * sign[x] / px[x] for x in (0, 1))
        for b in (0, 1)
    )
    return WitnessCertificate(gamma=gamma, zeta=(2.0 * scale, 2.0 * scale),
                              c=c, d=d, h=h, epsilon=epsilon)
