"""First-appearance order statistics of egocentric communities.

If each new alter comes from a community chosen uniformly at random, the
step m at which a given community first shows up is geometric with success
probability 1/c.  These helpers build the pooled distribution of m for egos
with c communities and fit its exponential decay scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .graph import EgoNetwork, PseudoTimeError
from .metrics import BinnedCurve

__all__ = [
    "ExponentialFit",
    "FirstAppearanceSample",
    "NoFitError",
    "first_appearance_orders",
    "fit_exponential_scale",
    "geometric_pcm",
    "geometric_scale",
    "pcm_distribution",
]


class NoFitError(ValueError):
    """The distribution does not support an exponential fit."""


@dataclass(frozen=True)
class FirstAppearanceSample:
    ego: int
    m: np.ndarray

    @property
    def c(self) -> int:
        return len(self.m)


@dataclass(frozen=True)
class ExponentialFit:
    m0: float
    m_max: int
    r2: float
    n_bins: int
    slope: float
    intercept: float


def first_appearance_orders(net: EgoNetwork, asg) -> FirstAppearanceSample:
    """Appearance rank of the earliest member of each community."""
    if net.pseudo_time:
        raise PseudoTimeError("first-appearance orders need true timestamps")
    if len(asg.labels) != net.degree:
        raise ValueError("assignment does not match the ego network")
    c = asg.n_communities
    m = np.full(c, np.iinfo(np.int64).max, dtype=np.int64)
    np.minimum.at(m, asg.labels, net.appearance_order())
    return FirstAppearanceSample(net.ego, np.sort(m))


def pcm_distribution(samples: Iterable[FirstAppearanceSample], c: int | None = None) -> BinnedCurve:
    """Normalized histogram of pooled first-appearance orders.

    ``mean`` holds P(m), ``count`` the raw counts and ``stderr`` the binomial
    standard error of each probability.
    """
    pooled = []
    for smp in samples:
        if c is not None and smp.c != c:
            raise ValueError(f"sample of ego {smp.ego} has c={smp.c}, expected {c}")
        pooled.append(np.asarray(smp.m, dtype=np.int64))
    if not pooled:
        z = np.zeros(0)
        return BinnedCurve(np.zeros(0, dtype=np.int64), z, np.zeros(0, dtype=np.int64), z)
    m = np.concatenate(pooled)
    bins, counts = np.unique(m, return_counts=True)
    total = counts.sum()
    p = counts / total
    return BinnedCurve(bins, p, counts, np.sqrt(p * (1 - p) / total))


def geometric_pcm(c: int, m):
    """P_c(m) = (1 - 1/c)**(m - 1) / c under uniform community choice."""
    if c < 1:
        raise ValueError("c must be >= 1")
    m_arr = np.asarray(m)
    if np.any(m_arr < 1):
        raise ValueError("m must be >= 1")
    out = (1.0 - 1.0 / c) ** (m_arr - 1) / c
    return float(out) if np.ndim(out) == 0 else out


def geometric_scale(c: int) -> float:
    """Exact decay scale -1/ln(1 - 1/c) of the geometric law (inf for c = 1)."""
    if c < 1:
        raise ValueError("c must be >= 1")
    if c == 1:
        return math.inf
    return -1.0 / math.log1p(-1.0 / c)


def fit_exponential_scale(dist: BinnedCurve, m_max: int = 25) -> ExponentialFit:
    """Least-squares line through ``(m, ln P(m))`` for positive bins m <= m_max.

    The scale is ``m0 = -1/slope``.  Raises :class:`NoFitError` with fewer
    than three usable bins or a non-decaying slope.
    """
    m = np.asarray(dist.bins, dtype=float)
    p = np.asarray(dist.mean, dtype=float)
    use = (m <= m_max) & (p > 0)
    n = int(use.sum())
    if n < 3:
        raise NoFitError(f"only {n} positive bins with m <= {m_max}")
    x, y = m[use], np.log(p[use])
    slope, intercept = np.polyfit(x, y, 1)
    if slope >= 0:
        raise NoFitError(f"non-negative slope {slope:.4g}: no exponential decay")
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return ExponentialFit(-1.0 / slope, m_max, r2, n, float(slope), float(intercept))
