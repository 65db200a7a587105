"""Classical (energy-constrained) limits on the click correlations.

Any classical strategy whose preparations for inputs x=0,1 carry mean photon
numbers at most omega0, omega1 satisfies

    |p(0|0) - p(1|0) - p(0|1) + p(1|1)| <= 2*(omega0 + omega1)

so exceeding the right-hand side certifies non-classical statistics under
the energy assumption alone. The two-preparation form of the same bound,
|p(0|1) - p(0|0)| <= omega0 + omega1, is checked directly against the
interferometer model by setup_inequality; the coherent-state strategy
violates it for every eta > 0 at alpha = eta*t/2, beta = 1/r.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np
from scipy.optimize import linprog

from .model import DeviceParams, EnergyBounds, FrequencyTable

__all__ = [
    "classical_bound",
    "classical_lhs",
    "classical_max_lhs",
    "setup_inequality",
    "is_violation",
    "scan_violation_region",
    "TIE_EPS",
]

# Margins within this of zero count as non-violating.
TIE_EPS = 1e-12


def classical_bound(bounds: EnergyBounds) -> float:
    """Largest correlator magnitude reachable classically under the bounds."""
    return 2.0 * (bounds.omega0 + bounds.omega1)


def classical_lhs(cond) -> float:
    """|p(0|0) - p(1|0) - p(0|1) + p(1|1)| from a p(b|x) table indexed [b][x]."""
    if isinstance(cond, FrequencyTable):
        if not all(cond.cond_defined):
            raise ValueError("no data: both inputs must occur to form the correlator")
        cond = cond.cond
    cond = np.asarray(cond, dtype=np.float64)
    if cond.shape != (2, 2):
        raise ValueError("conditional table must be 2x2")
    if not np.all(np.isfinite(cond)):
        raise ValueError("conditional table has undefined entries")
    return abs(cond[0, 0] - cond[1, 0] - cond[0, 1] + cond[1, 1])


@lru_cache(maxsize=None)
def _best_response(coeffs: tuple, omega: float) -> float:
    """max sum(c_m q_m) over distributions q with sum(m q_m) <= omega."""
    m = len(coeffs)
    a_ub = [list(range(m))]
    res = linprog(
        c=[-c for c in coeffs],
        A_ub=a_ub, b_ub=[omega],
        A_eq=[[1.0] * m], b_eq=[1.0],
        bounds=[(0.0, 1.0)] * m,
        method="highs",
    )
    if not res.success:
        raise RuntimeError(f"energy-constrained LP failed: {res.message}")
    return -res.fun


def classical_max_lhs(bounds: EnergyBounds, m_max: int = 8) -> float:
    """Exact classical optimum of the correlator under the energy bounds.

    Hidden states are photon numbers 0..m_max; the detector response is a
    deterministic 0/1 function of the state (extreme points of the response
    polytope). For each response pattern the two preparations decouple into
    simplex LPs with a single mean-photon constraint.
    """
    if m_max < 2:
        raise ValueError("m_max must be >= 2")
    best = 0.0
    for sigma in itertools.product((0.0, 1.0), repeat=m_max + 1):
        neg = tuple(-s for s in sigma)
        val = 2.0 * (_best_response(sigma, bounds.omega0)
                     + _best_response(neg, bounds.omega1))
        if val > best:
            best = val
    return best


def _ideal_lhs_rhs(eta, t2, alpha, beta):
    t = math.sqrt(t2)
    r = math.sqrt(1.0 - t2)
    pnc1 = np.exp(-eta * (t * alpha + r * beta) ** 2)
    pnc0 = np.exp(-eta * (r * beta) ** 2)
    return np.abs(pnc1 - pnc0), np.square(alpha)


def setup_inequality(params: DeviceParams) -> tuple[float, float, bool]:
    """(lhs, rhs, violated) of the ideal-scheme two-preparation bound.

    Evaluated at zero relative phase with the x=0 path fully blocked and no
    dark counts: lhs = |exp(-eta*(t*alpha + r*beta)^2) - exp(-eta*(r*beta)^2)|
    against rhs = alpha^2. Violation is impossible classically, so a
    positive margin certifies the setup.
    """
    lhs, rhs = _ideal_lhs_rhs(params.eta, params.t2,
                              params.alpha_mag, params.beta_mag)
    return float(lhs), float(rhs), is_violation(float(lhs), float(rhs))


def is_violation(lhs: float, rhs: float) -> bool:
    return lhs - rhs > TIE_EPS


def scan_violation_region(eta: float, t2: float, p1: float,
                          alpha_values, beta_values) -> np.ndarray:
    """Setup-inequality margin over an (alpha, beta) grid of the ideal device.

    Rows are (alpha, beta, lhs, rhs, margin) with alpha the outer loop;
    margin = lhs - rhs, positive means violation. p1 is accepted for
    interface symmetry with the other scans; the margin does not depend
    on the input bias.
    """
    if not 0 < p1 < 1:
        raise ValueError("p1 must be in (0, 1)")
    if not 0 < eta <= 1:
        raise ValueError("eta must be in (0, 1]")
    if not 0 < t2 < 1:
        raise ValueError("t2 must be in (0, 1)")
    alphas = np.asarray(alpha_values, dtype=np.float64)
    betas = np.asarray(beta_values, dtype=np.float64)
    if alphas.size == 0 or betas.size == 0:
        raise ValueError("scan grids must be non-empty")
    a, b = np.meshgrid(alphas, betas, indexing="ij")
    lhs, rhs = _ideal_lhs_rhs(eta, t2, a, b)
    return np.column_stack([a.ravel(), b.ravel(), lhs.ravel(), rhs.ravel(),
                            (lhs - rhs).ravel()])
