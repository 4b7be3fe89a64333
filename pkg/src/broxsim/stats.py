"""Empirical-distribution machinery for the acceptance experiments.

Kolmogorov-Smirnov p-values use the asymptotic Kolmogorov distribution
(documented as bounds; every consumer here has n >= 300).
"""

from __future__ import annotations

import dataclasses
import json
import math

import numpy as np

__all__ = [
    "SampleSet",
    "KsResult",
    "ecdf",
    "ks_two_sample",
    "ks_one_sample",
    "bootstrap_mean_ci",
    "trend_check",
    "kolmogorov_sf",
]


@dataclasses.dataclass(frozen=True)
class SampleSet:
    """Sorted sample values with their generation provenance."""

    values: np.ndarray
    meta: dict = dataclasses.field(default_factory=dict)

    @classmethod
    def from_values(cls, values, meta=None):
        arr = np.sort(np.asarray(values, dtype=float))
        arr.flags.writeable = False
        return cls(arr, dict(meta or {}))

    def __len__(self):
        return len(self.values)

    def to_csv(self, path, name="value"):
        with open(path, "w") as fh:
            fh.write("# " + json.dumps(self.meta) + "\n")
            fh.write(name + "\n")
            for v in self.values:
                fh.write(f"{float(v)!r}\n")


@dataclasses.dataclass(frozen=True)
class KsResult:
    statistic: float
    n: int
    m: int
    p_value_bound: float

    def to_json(self, test, verdict=None):
        rec = {"test": test, "D": self.statistic, "n": self.n, "m": self.m,
               "p_bound": self.p_value_bound}
        if verdict is not None:
            rec["verdict"] = verdict
        return json.dumps(rec)


def _values(sample):
    vals = sample.values if isinstance(sample, SampleSet) else np.sort(np.asarray(sample, dtype=float))
    if len(vals) == 0:
        raise ValueError("empty sample")
    return vals


def ecdf(sample, x):
    """Right-continuous empirical CDF: fraction of values <= x."""
    vals = _values(sample)
    return np.searchsorted(vals, x, side="right") / len(vals)


def kolmogorov_sf(lam):
    """Survival function of the asymptotic Kolmogorov distribution."""
    if lam <= 0:
        return 1.0
    total = 0.0
    for k in range(1, 101):
        term = math.exp(-2.0 * k * k * lam * lam)
        total += (term if k % 2 else -term)
        if term < 1e-16:
            break
    return min(1.0, max(0.0, 2.0 * total))


def ks_two_sample(a, b):
    """Two-sample KS statistic over the pooled points, asymptotic p bound."""
    va, vb = _values(a), _values(b)
    n, m = len(va), len(vb)
    pooled = np.concatenate([va, vb])
    fa = np.searchsorted(va, pooled, side="right") / n
    fb = np.searchsorted(vb, pooled, side="right") / m
    d = float(np.max(np.abs(fa - fb)))
    n_eff = n * m / (n + m)
    return KsResult(d, n, m, kolmogorov_sf(math.sqrt(n_eff) * d))


def ks_one_sample(a, cdf):
    """One-sample KS test of a sample against a monotone reference CDF."""
    va = _values(a)
    n = len(va)
    f = np.asarray([cdf(x) for x in va], dtype=float)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - f)
    d_minus = np.max(f - (i - 1) / n)
    d = float(max(d_plus, d_minus))
    return KsResult(d, n, 0, kolmogorov_sf(math.sqrt(n) * d))


def bootstrap_mean_ci(sample, level, resamples, rng):
    """Percentile bootstrap interval for the mean."""
    vals = _values(sample)
    n = len(vals)
    if n < 10:
        raise ValueError("sample too small for a bootstrap interval")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    idx = rng.integers(0, n, size=(resamples, n))
    means = np.sort(vals[idx].mean(axis=1))
    lo = means[int((1.0 - level) / 2.0 * resamples)]
    hi = means[min(resamples - 1, int((1.0 + level) / 2.0 * resamples))]
    return float(lo), float(hi)


def trend_check(values_by_alpha, slack=1.1, threshold=None, direction="decreasing"):
    """Finite monotonicity check for an asymptotic-convergence claim.

    decreasing: each value may exceed the previous by at most the slack
    factor and the last value must fall below the threshold.  increasing
    mirrors this (values may drop by at most the slack factor; the last
    value must reach the threshold).
    """
    pts = sorted(values_by_alpha)
    if len(pts) < 3:
        raise ValueError("need at least 3 (alpha, value) points")
    alphas = [a for a, _ in pts]
    if any(a2 <= a1 for a1, a2 in zip(alphas, alphas[1:])):
        raise ValueError("alphas must be strictly increasing")
    vals = [v for _, v in pts]
    if direction == "decreasing":
        monotone = all(v2 <= slack * v1 for v1, v2 in zip(vals, vals[1:]))
        final_ok = threshold is None or vals[-1] < threshold
    elif direction == "increasing":
        monotone = all(v2 >= v1 / slack for v1, v2 in zip(vals, vals[1:]))
        final_ok = threshold is None or vals[-1] >= threshold
    else:
        raise ValueError("direction must be 'decreasing' or 'increasing'")
    return bool(monotone and final_ok)
