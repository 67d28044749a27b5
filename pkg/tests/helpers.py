"""Record builders and independent oracles shared by the test modules."""

from __future__ import annotations

import math
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate

from chronokg.extraction import RawTriple
from chronokg.model import EvidenceBlock, TemporalContext, TemporalTriple, edge_hash

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"
CONFIG = FIXTURES / "config.yaml"
FIXTURE_DISEASES = ("MONDO:0010679", "MONDO:0010311", "MONDO:0012850")


def raw(subject: str, obj: str, model: str, *, relation: str = "disease_phenotype_positive",
        pmid: str = "100", confidence: str = "high", onset: tuple[float, float] | None = None,
        stage: str | None = None, evidence: str = "quoted text") -> RawTriple:
    tc = None
    if onset is not None or stage is not None:
        tc = TemporalContext(onset_age_min=onset[0] if onset else None, onset_age_max=onset[1] if onset else None,
                             progression_stage=stage)
    return RawTriple(subject, "disease", relation, obj, "phenotype", confidence, evidence, tc, None, model, pmid)


def triple(disease: str, phenotype: str, onset: tuple[float, float] | None, *, pmid: str = "PMID:1",
           disease_id: str | None = None, stage: str | None = None, milestone: str | None = None,
           relation: str = "disease_phenotype_positive", evidence: str = "onset is reported in childhood",
           credibility: float = 0.5, year: int | None = 2020, target_type: str = "phenotype") -> TemporalTriple:
    did = disease_id or "D:" + disease.lower().replace(" ", "_")
    tc = TemporalContext(onset_age_min=onset[0] if onset else None, onset_age_max=onset[1] if onset else None,
                         progression_stage=stage, milestone=milestone)
    ev = EvidenceBlock(tier=2, source_ids=(pmid,), evidence_text=evidence, study_type="review",
                       credibility_score=credibility, consensus_confidence=1.0, extraction_models=("m1",),
                       publication_year=year)
    tid = "P:" + phenotype.lower().replace(" ", "_")
    return TemporalTriple(
        edge_id=edge_hash(did, relation, tid, pmid + str(onset)), source_id=did, source_type="disease",
        source_name=disease, relation=relation, target_id=tid, target_type=target_type, target_name=phenotype,
        temporal=tc, evidence=ev, extraction_date="2026-01-01", disease_profile_id=did,
    )


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def oracle_indel(a: str, b: str) -> int:
    """Edit distance with insertions and deletions only (substitution costs 2)."""
    m, n = len(a), len(b)
    d = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m + 1):
        d[i][0] = i
    for j in range(n + 1):
        d[0][j] = j
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            sub = 0 if a[i - 1] == b[j - 1] else 2
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + sub)
    return d[m][n]


def oracle_ratio(a: str, b: str) -> int:
    total = len(a) + len(b)
    if total == 0:
        return 100
    return math.floor(100 * (total - oracle_indel(a, b)) / total + 0.5)


def oracle_components(n: int, edges: Iterable[tuple[int, int]]) -> list[set[int]]:
    """Connected components by depth-first search over an adjacency list."""
    adj: dict[int, set[int]] = {i: set() for i in range(n)}
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
    seen: set[int] = set()
    comps = []
    for start in range(n):
        if start in seen:
            continue
        stack, comp = [start], set()
        while stack:
            v = stack.pop()
            if v in comp:
                continue
            comp.add(v)
            stack.extend(adj[v] - comp)
        seen |= comp
        comps.append(comp)
    return comps


def oracle_bootstrap(values: Sequence[float], resamples: int, seed: int, level: float) -> tuple[float, float]:
    """Percentile bootstrap written out with an explicit loop and manual interpolation."""
    rng = np.random.default_rng(seed)
    x = list(map(float, values))
    idx = rng.integers(0, len(x), size=(resamples, len(x)))
    means = sorted(sum(x[k] for k in row) / len(x) for row in idx.tolist())

    def pct(q: float) -> float:
        pos = (len(means) - 1) * q
        lo = int(math.floor(pos))
        hi = min(lo + 1, len(means) - 1)
        return means[lo] + (means[hi] - means[lo]) * (pos - lo)

    alpha = (1 - level) / 2
    return pct(alpha), pct(1 - alpha)


def oracle_t_two_sided(t: float, df: int) -> float:
    """Two-sided tail probability by integrating the Student-t density."""
    c = math.gamma((df + 1) / 2) / (math.sqrt(df * math.pi) * math.gamma(df / 2))

    def pdf(x: float) -> float:
        return c * (1 + x * x / df) ** (-(df + 1) / 2)

    tail, _ = integrate.quad(pdf, abs(t), math.inf, epsabs=1e-13, epsrel=1e-12)
    return 2 * tail
