"""Plug-in variance estimates, confidence intervals, and the divergence.

The asymptotic variance of the empirical transport cost is the variance of
the empirical potential under the sampled measure, so the interval half-width
is ``z * sqrt(var/n)`` (one sample) or ``z * sqrt(var * (n+m)/(n*m))`` (two
samples). The normal quantile is computed by bisection on a series/continued
fraction evaluation of the normal CDF rather than a closed-form
approximation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import DimensionMismatch, OutOfRange
from .measures import DiscreteMeasure
from .sinkhorn import PotentialPair, SolverConfig, cost, solve

_SQRT_PI = math.sqrt(math.pi)
_SQRT_2 = math.sqrt(2.0)
# Series/continued-fraction split point for erf, in erf's own argument.
_ERF_SPLIT = 2.0


class VarianceKind(enum.Enum):
    ONE_SAMPLE = "one_sample"
    TWO_SAMPLE = "two_sample"


@dataclass(frozen=True)
class VarianceEstimate:
    value: float
    kind: VarianceKind
    n: int
    m: int = 0


@dataclass(frozen=True)
class ConfidenceInterval:
    center: float
    half_width: float
    level: float
    variance: VarianceEstimate

    @property
    def low(self) -> float:
        return self.center - self.half_width

    @property
    def high(self) -> float:
        return self.center + self.half_width

    def contains(self, x: float) -> bool:
        return self.low <= x <= self.high


@dataclass(frozen=True)
class DivergenceValue:
    """Debiased cost: cross term minus half the two self terms."""

    value: float
    eps: float
    parts: tuple[float, float, float]  # (S_PQ, S_PP, S_QQ)


def _weighted_variance(values, weights) -> float:
    mean = float(values @ weights)
    centered = values - mean
    return max(0.0, float((centered * centered) @ weights))


def variance_one_sample(P_n: DiscreteMeasure, pair: PotentialPair) -> VarianceEstimate:
    """Variance of the f potential under the first (sampled) measure."""
    if pair.f.shape[0] != P_n.n:
        raise DimensionMismatch(
            f"f has {pair.f.shape[0]} entries but the measure has {P_n.n} atoms"
        )
    return VarianceEstimate(
        value=_weighted_variance(pair.f, P_n.weights),
        kind=VarianceKind.ONE_SAMPLE,
        n=P_n.n,
    )


def variance_two_sample(P_n: DiscreteMeasure, Q_m: DiscreteMeasure,
                        pair: PotentialPair) -> VarianceEstimate:
    """Convex combination m/(n+m) * Var(f) + n/(n+m) * Var(g)."""
    if pair.f.shape[0] != P_n.n or pair.g.shape[0] != Q_m.n:
        raise DimensionMismatch(
            f"pair sized ({pair.f.shape[0]}, {pair.g.shape[0]}) does not match "
            f"samples sized ({P_n.n}, {Q_m.n})"
        )
    n, m = P_n.n, Q_m.n
    var_f = _weighted_variance(pair.f, P_n.weights)
    var_g = _weighted_variance(pair.g, Q_m.weights)
    value = (m / (n + m)) * var_f + (n / (n + m)) * var_g
    return VarianceEstimate(value=value, kind=VarianceKind.TWO_SAMPLE, n=n, m=m)


def _erf_series(x: float) -> float:
    # Maclaurin series; used for |x| <= _ERF_SPLIT where it loses < 1e-14.
    term = x
    total = x
    n = 0
    while abs(term) > 1e-20 * max(1.0, abs(total)):
        term *= -x * x * (2 * n + 1) / ((n + 1) * (2 * n + 3))
        total += term
        n += 1
        if n > 200:  # pragma: no cover
            break
    return 2.0 / _SQRT_PI * total


def _erfc_cf(x: float, depth: int = 300) -> float:
    # Laplace continued fraction for the complementary function, x > 0.
    t = 0.0
    for k in range(depth, 0, -1):
        t = (k / 2.0) / (x + t)
    return math.exp(-x * x) / _SQRT_PI / (x + t)


def normal_cdf(x: float) -> float:
    """Standard normal CDF accurate to ~1e-15 over the float range."""
    z = x / _SQRT_2
    if z < -_ERF_SPLIT:
        return 0.5 * _erfc_cf(-z)
    if z > _ERF_SPLIT:
        return 1.0 - 0.5 * _erfc_cf(z)
    return 0.5 * (1.0 + _erf_series(z))


def normal_quantile(beta: float) -> float:
    """beta quantile of the standard normal, by bisection to 1e-12 width."""
    if not 0.0 < beta < 1.0:
        raise OutOfRange(f"beta must lie strictly in (0, 1), got {beta!r}")
    lo, hi = -1.0, 1.0
    while normal_cdf(lo) > beta:
        lo *= 2.0
    while normal_cdf(hi) < beta:
        hi *= 2.0
    for _ in range(200):
        if hi - lo <= 1e-12:
            break
        mid = 0.5 * (lo + hi)
        if normal_cdf(mid) < beta:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def one_sample_half_width(variance_value: float, n: int, z: float) -> float:
    return z * math.sqrt(variance_value / n)


def two_sample_half_width(variance_value: float, n: int, m: int, z: float) -> float:
    return z * math.sqrt(variance_value * (n + m) / (n * m))


def ci_one_sample(P_n: DiscreteMeasure, Q: DiscreteMeasure, cfg: SolverConfig,
                  alpha: float) -> ConfidenceInterval:
    """Interval for the population cost from one empirical measure."""
    if not 0.0 < alpha < 1.0:
        raise OutOfRange(f"alpha must lie strictly in (0, 1), got {alpha!r}")
    pair, _ = solve(P_n, Q, cfg)
    center = cost(P_n, Q, pair, tol=cfg.tol)
    var = variance_one_sample(P_n, pair)
    z = normal_quantile(1.0 - alpha / 2.0)
    return ConfidenceInterval(
        center=center,
        half_width=one_sample_half_width(var.value, var.n, z),
        level=1.0 - alpha,
        variance=var,
    )


def ci_two_sample(P_n: DiscreteMeasure, Q_m: DiscreteMeasure, cfg: SolverConfig,
                  alpha: float) -> ConfidenceInterval:
    """Interval for the population cost from two empirical measures."""
    if not 0.0 < alpha < 1.0:
        raise OutOfRange(f"alpha must lie strictly in (0, 1), got {alpha!r}")
    pair, _ = solve(P_n, Q_m, cfg)
    center = cost(P_n, Q_m, pair, tol=cfg.tol)
    var = variance_two_sample(P_n, Q_m, pair)
    z = normal_quantile(1.0 - alpha / 2.0)
    return ConfidenceInterval(
        center=center,
        half_width=two_sample_half_width(var.value, var.n, var.m, z),
        level=1.0 - alpha,
        variance=var,
    )


def sinkhorn_divergence(P: DiscreteMeasure, Q: DiscreteMeasure,
                        cfg: SolverConfig) -> DivergenceValue:
    """Three solves at one configuration, assembled into the divergence."""
    pair_pq, _ = solve(P, Q, cfg)
    s_pq = cost(P, Q, pair_pq, tol=cfg.tol)
    pair_pp, _ = solve(P, P, cfg)
    s_pp = cost(P, P, pair_pp, tol=cfg.tol)
    pair_qq, _ = solve(Q, Q, cfg)
    s_qq = cost(Q, Q, pair_qq, tol=cfg.tol)
    return DivergenceValue(
        value=s_pq - 0.5 * (s_pp + s_qq),
        eps=cfg.eps,
        parts=(s_pq, s_pp, s_qq),
    )
