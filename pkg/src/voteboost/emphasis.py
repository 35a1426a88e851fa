"""Vote tallies, Laplace correction, beta density/CDF, emphasis weights, and
the ensemble cost functional.

All density work happens in log space through a standalone Lanczos log-gamma
so that strong shapes (a=b=40 touches Gamma(80)) neither overflow nor lose
the normalization. The CDF uses the standard continued-fraction evaluation of
the regularized incomplete beta with the symmetry reduction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import WeightVector
from .errors import ConvergenceError, DomainError, InternalError

# Lanczos coefficients, g=7, n=9
_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_TWO_PI = 0.9189385332046727417803297364056
_CF_MAX_ITER = 300
_CF_EPS = 3e-16
_CF_FPMIN = 1e-300


def log_gamma(z: float) -> float:
    """ln Gamma(z) for z > 0; relative accuracy well under 1e-12 on (0, 100]."""
    if not (z > 0.0) or not math.isfinite(z):
        raise DomainError("log_gamma requires z > 0")
    if z < 0.5:
        # reflection: Gamma(z) Gamma(1-z) = pi / sin(pi z)
        return math.log(math.pi / math.sin(math.pi * z)) - log_gamma(1.0 - z)
    z -= 1.0
    x = _LANCZOS[0]
    for i in range(1, 9):
        x += _LANCZOS[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _HALF_LOG_TWO_PI + (z + 0.5) * math.log(t) - t + math.log(x)


@dataclass(frozen=True)
class BetaParams:
    """Shape parameters of the emphasis density; both strictly positive."""

    a: float
    b: float

    def __post_init__(self):
        ok = (
            isinstance(self.a, (int, float))
            and isinstance(self.b, (int, float))
            and math.isfinite(self.a)
            and math.isfinite(self.b)
            and self.a > 0
            and self.b > 0
        )
        if not ok:
            raise DomainError("shape parameters must be finite and > 0")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))


@dataclass(frozen=True)
class VoteTally:
    """Positive-vote counts after t rounds: 0 <= t_plus[i] <= t."""

    t: int
    t_plus: np.ndarray

    def __post_init__(self):
        if self.t < 0:
            raise DomainError("t must be >= 0")
        tp = np.ascontiguousarray(self.t_plus, dtype=np.int64)
        if tp.ndim != 1 or tp.shape[0] < 1:
            raise DomainError("t_plus must be a non-empty 1-D vector")
        if (tp < 0).any() or (tp > self.t).any():
            raise DomainError("t_plus entries must lie in [0, t]")
        object.__setattr__(self, "t_plus", tp)


def laplace_fraction(t_plus: int, t: int) -> float:
    """Corrected positive-vote fraction (t_plus + 1)/(t + 2), strictly in (0,1)."""
    if t < 0 or t_plus < 0 or t_plus > t:
        raise DomainError("need 0 <= t_plus <= t")
    return (t_plus + 1) / (t + 2)


def _log_beta_const(params: BetaParams) -> float:
    return log_gamma(params.a + params.b) - log_gamma(params.a) - log_gamma(params.b)


def beta_pdf(p: float, params: BetaParams) -> float:
    """Density of Beta(a,b) at p, 0 < p < 1 strictly."""
    if not (0.0 < p < 1.0):
        raise DomainError("beta_pdf requires 0 < p < 1; Laplace-correct first")
    ld = (
        _log_beta_const(params)
        + (params.a - 1.0) * math.log(p)
        + (params.b - 1.0) * math.log1p(-p)
    )
    return math.exp(ld)


def _betacf(a: float, b: float, x: float) -> float:
    # Lentz's continued fraction for the incomplete beta (NR 6.4 form)
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_FPMIN:
        d = _CF_FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_FPMIN:
            d = _CF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _CF_FPMIN:
            c = _CF_FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_FPMIN:
            d = _CF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _CF_FPMIN:
            c = _CF_FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ConvergenceError("incomplete beta continued fraction did not converge")


def beta_cdf(p: float, params: BetaParams) -> float:
    """Regularized incomplete beta I_p(a,b); absolute accuracy <= 1e-10."""
    if not (0.0 <= p <= 1.0):
        raise DomainError("beta_cdf requires p in [0,1]")
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    a, b = params.a, params.b
    front = math.exp(
        _log_beta_const(params) + a * math.log(p) + b * math.log1p(-p)
    )
    if p < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, p) / a
    return 1.0 - front * _betacf(b, a, 1.0 - p) / b


def compute_weights(tally: VoteTally, params: BetaParams) -> WeightVector:
    """Emphasis weights: w_i proportional to the density at the corrected
    vote fraction of instance i, normalized to sum 1.

    Normalization subtracts the max log-density before exponentiating, so
    a=b=1 yields exactly uniform weights and extreme shapes cannot underflow
    every entry at once.
    """
    frac = (tally.t_plus + 1) / (tally.t + 2)
    ld = (
        _log_beta_const(params)
        + (params.a - 1.0) * np.log(frac)
        + (params.b - 1.0) * np.log1p(-frac)
    )
    e = np.exp(ld - ld.max())
    s = float(e.sum())
    if not math.isfinite(s) or s <= 0.0:
        raise InternalError("emphasis weights underflowed to zero everywhere")
    return WeightVector(e / s)


def snapshot_rows(tally: VoteTally, params: BetaParams):
    """(instance_index, corrected_fraction, weight) triples for CSV export."""
    w = compute_weights(tally, params).values
    frac = (tally.t_plus + 1) / (tally.t + 2)
    return [(int(i), float(frac[i]), float(w[i])) for i in range(len(w))]


def cost_functional(F_values, labels, params: BetaParams) -> float:
    """Mean of y_i * 2[G(1/2) - G((1+F_i)/2)]; diagnostic margin-cost value."""
    F = np.ascontiguousarray(F_values, dtype=np.float64)
    y = np.ascontiguousarray(labels, dtype=np.float64)
    if F.ndim != 1 or F.shape != y.shape:
        raise DomainError("F_values and labels must be equal-length vectors")
    if (np.abs(F) > 1.0).any():
        raise DomainError("F values must lie in [-1, 1]")
    if not np.isin(y, (-1.0, 1.0)).all():
        raise DomainError("labels must be -1 or +1")
    g_half = beta_cdf(0.5, params)
    c = np.array([2.0 * (g_half - beta_cdf((1.0 + f) / 2.0, params)) for f in F])
    return float(np.mean(y * c))
