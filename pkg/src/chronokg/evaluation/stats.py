"""Resampling and paired-test statistics used by the evaluation harness."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy import stats as _stats

from chronokg.errors import DomainError


def bootstrap_ci(
    outcomes: Sequence[float],
    resamples: int = 10_000,
    seed: int = 42,
    level: float = 0.95,
) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean of ``outcomes``.

    All resample indices are drawn in one ``(resamples, n)`` call from
    ``numpy.random.default_rng(seed)``, so the interval is a pure function of
    the inputs.
    """
    values = np.asarray(outcomes, dtype=float)
    if values.size == 0:
        raise DomainError("bootstrap_ci needs at least one outcome")
    if not 0 < level < 1:
        raise DomainError("level must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, values.size, size=(resamples, values.size))
    means = values[idx].mean(axis=1)
    alpha = (1 - level) / 2
    lo, hi = np.percentile(means, [100 * alpha, 100 * (1 - alpha)])
    return float(lo), float(hi)


def _binom_cdf(k: int, n: int) -> float:
    return sum(math.comb(n, i) for i in range(k + 1)) / 2**n


def mcnemar_exact(a: Sequence[bool] | int, b: Sequence[bool] | int) -> float:
    """Two-sided exact McNemar p-value.

    Accepts either two equal-length paired correctness vectors or the two
    discordant counts directly.
    """
    if isinstance(a, (int, np.integer)) and isinstance(b, (int, np.integer)):
        n01, n10 = int(a), int(b)
        if n01 < 0 or n10 < 0:
            raise DomainError("discordant counts must be non-negative")
    else:
        if len(a) != len(b):  # type: ignore[arg-type]
            raise DomainError("paired vectors must have equal length")
        n01 = sum(1 for x, y in zip(a, b) if bool(x) and not bool(y))  # type: ignore[arg-type]
        n10 = sum(1 for x, y in zip(a, b) if not bool(x) and bool(y))  # type: ignore[arg-type]
    n = n01 + n10
    if n == 0:
        return 1.0
    k = n01
    pmf = math.comb(n, k) / 2**n
    cdf = _binom_cdf(k, n)
    return min(1.0, 2 * min(cdf, 1 - cdf + pmf))


def paired_t_statistic(a: Sequence[float], b: Sequence[float]) -> tuple[float, int]:
    """Paired t statistic and degrees of freedom; ``inf``/``nan`` for zero variance."""
    x, y = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if x.shape != y.shape:
        raise DomainError("paired vectors must have equal length")
    if x.size < 2:
        raise DomainError("paired t-test needs n >= 2")
    d = x - y
    sd = float(np.std(d, ddof=1))
    mean = float(d.mean())
    if sd == 0.0:
        return (math.copysign(math.inf, mean) if mean else math.nan), d.size - 1
    return mean / (sd / math.sqrt(d.size)), d.size - 1


def paired_t(a: Sequence[float], b: Sequence[float]) -> float:
    """Two-sided p-value of the paired t-test with ``n - 1`` degrees of freedom."""
    t, df = paired_t_statistic(a, b)
    if math.isnan(t):
        return 1.0
    if math.isinf(t):
        return 0.0
    return float(2 * _stats.t.sf(abs(t), df))
