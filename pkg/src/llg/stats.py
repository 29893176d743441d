"""Small statistics helpers: estimates with errors, empirical CDFs, KS distances."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    n: int

    def within(self, target: float, k: float = 3.0, slack: float = 0.0) -> bool:
        return abs(self.value - target) <= k * self.stderr + slack

    def __iter__(self):
        yield self.value
        yield self.stderr


def binomial_estimate(hits, n: int) -> Estimate:
    n = int(n)
    if n <= 0:
        raise ValueError("need at least one sample")
    p = float(hits) / n
    return Estimate(p, float(np.sqrt(max(p * (1 - p), 0.0) / n)), n)


def mean_estimate(x) -> Estimate:
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        raise ValueError("need at least two samples")
    return Estimate(float(x.mean()), float(x.std(ddof=1) / np.sqrt(len(x))), len(x))


def weighted_fraction(indicator, weights) -> Estimate:
    """Self-normalized importance-sampling estimate of P(indicator)."""
    ind = np.asarray(indicator, dtype=float)
    w = np.asarray(weights, dtype=float)
    W = w.sum()
    if W <= 0:
        raise ValueError("weights must have positive total")
    p = float((w * ind).sum() / W)
    se = float(np.sqrt(np.sum((w * (ind - p)) ** 2)) / W)
    return Estimate(p, se, len(ind))


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    samples: np.ndarray

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, dtype=float).ravel())
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def n(self) -> int:
        return len(self.samples)

    def cdf(self, x) -> np.ndarray:
        """P(X <= x), right-continuous."""
        return np.searchsorted(self.samples, np.asarray(x, dtype=float), side="right") / self.n

    def survival(self, x) -> np.ndarray:
        """P(X >= x)."""
        return 1.0 - np.searchsorted(self.samples, np.asarray(x, dtype=float), side="left") / self.n

    def stderr(self, x) -> np.ndarray:
        p = self.cdf(x)
        return np.sqrt(p * (1 - p) / self.n)

    def ks(self, other: "EmpiricalDistribution") -> float:
        return float(stats.ks_2samp(self.samples, other.samples).statistic)


def sup_distance(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))
