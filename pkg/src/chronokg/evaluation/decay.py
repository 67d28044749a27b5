"""Age of the supporting evidence behind validated triples."""

from __future__ import annotations

import statistics
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterable

from chronokg.model import TemporalTriple


@dataclass(frozen=True)
class EvidenceAgeStats:
    n_triples: int
    n_dated: int
    coverage: float
    median_year: float | None = None
    frac_recent: float | None = None
    frac_old: float | None = None
    histogram: dict[int, int] = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return self.n_dated == 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_triples": self.n_triples,
            "n_dated": self.n_dated,
            "coverage": self.coverage,
            "median_year": self.median_year,
            "frac_recent": self.frac_recent,
            "frac_old": self.frac_old,
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
        }


def evidence_age_stats(
    triples: Iterable[TemporalTriple],
    reference_year: int,
    recent_years: int = 5,
    old_years: int = 20,
) -> EvidenceAgeStats:
    """Median publication year and recency fractions over year-bearing triples.

    "Recent" means at most ``recent_years`` old; "old" means strictly more
    than ``old_years``.
    """
    rows = list(triples)
    years = [t.evidence.publication_year for t in rows if t.evidence.publication_year is not None]
    n = len(rows)
    if not years:
        return EvidenceAgeStats(n, 0, 0.0)
    ages = [reference_year - y for y in years]
    return EvidenceAgeStats(
        n_triples=n,
        n_dated=len(years),
        coverage=len(years) / n,
        median_year=float(statistics.median(years)),
        frac_recent=sum(a <= recent_years for a in ages) / len(ages),
        frac_old=sum(a > old_years for a in ages) / len(ages),
        histogram=dict(sorted(Counter(int(y) for y in years).items())),
    )
