"""Disease trajectory features and seeded K-means archetype clustering."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from sklearn.metrics import silhouette_score

from chronokg.errors import DomainError
from chronokg.store import TemporalKG, aggregate_onset

logger = logging.getLogger(__name__)

FEATURE_NAMES = ("median_onset", "onset_spread", "stage_count", "milestone_density", "fraction_with_onset")


def disease_features(kg: TemporalKG) -> tuple[list[str], np.ndarray]:
    """One row per disease with at least one phenotype triple."""
    ids, rows = [], []
    for did in kg.disease_ids:
        triples = kg.phenotype_triples(did)
        if not triples:
            continue
        agg = aggregate_onset(triples)
        n = len(triples)
        with_onset = sum(1 for t in triples if t.temporal.has_onset)
        if agg.empty:
            median, spread = 0.0, 0.0
        else:
            lo, hi = agg.median_range  # type: ignore[misc]
            median = (lo + hi) / 2
            plo, phi = agg.pooled_range  # type: ignore[misc]
            spread = phi - plo
        stages = {t.temporal.progression_stage for t in triples if t.temporal.progression_stage}
        milestones = sum(1 for t in triples if t.temporal.milestone)
        ids.append(did)
        rows.append([median, spread, float(len(stages)), milestones / n, with_onset / n])
    return ids, np.asarray(rows, dtype=float).reshape(len(rows), len(FEATURE_NAMES))


def standardize(x: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    return (x - mean) / np.where(std == 0, 1.0, std)


def farthest_point_init(x: np.ndarray, k: int, seed: int) -> np.ndarray:
    """First centre drawn by seed, then repeatedly the point farthest from all chosen centres."""
    rng = np.random.default_rng(seed)
    idx = [int(rng.integers(len(x)))]
    d = np.linalg.norm(x - x[idx[0]], axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(d))  # argmax breaks ties on the lowest index
        idx.append(nxt)
        d = np.minimum(d, np.linalg.norm(x - x[nxt], axis=1))
    return x[idx].copy()


def kmeans(x: np.ndarray, k: int, seed: int = 42, max_iter: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd iterations from farthest-point seeds; empty clusters keep their centre."""
    if not 1 <= k <= len(x):
        raise DomainError(f"k={k} invalid for {len(x)} points")
    centers = farthest_point_init(x, k, seed)
    labels = np.full(len(x), -1)
    for _ in range(max_iter):
        dist = np.linalg.norm(x[:, None, :] - centers[None, :, :], axis=2)
        new = np.argmin(dist, axis=1)
        if np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            members = x[labels == j]
            if len(members):
                centers[j] = members.mean(axis=0)
    return labels, centers


@dataclass
class ClusterResult:
    k_range: list[int]
    silhouettes: dict[int, float | None]
    chosen_k: int | None
    assignments: list[int] = field(default_factory=list)
    centroids: list[list[float]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def degenerate(self) -> bool:
        return self.chosen_k is None

    def to_dict(self) -> dict[str, Any]:
        d = self.__dict__.copy()
        d["silhouettes"] = {str(k): v for k, v in self.silhouettes.items()}
        d["degenerate"] = self.degenerate
        return d


def cluster_trajectories(features: np.ndarray, k_range: Sequence[int] = range(4, 9), seed: int = 42,
                         max_iter: int = 100) -> ClusterResult:
    """Standardise, run K-means for each k, and keep the k with the best mean silhouette."""
    x = standardize(np.asarray(features, dtype=float))
    n = len(x)
    ks = list(k_range)
    warnings = []
    usable = [k for k in ks if 2 <= k <= n - 1]
    if usable != ks:
        msg = f"k range {ks} restricted to {usable} for n={n}"
        logger.warning(msg)
        warnings.append(msg)
    sil: dict[int, float | None] = {}
    fits: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for k in usable:
        labels, centers = kmeans(x, k, seed, max_iter)
        fits[k] = (labels, centers)
        if len(set(labels.tolist())) < 2:
            sil[k] = None
        else:
            sil[k] = float(silhouette_score(x, labels, metric="euclidean"))
    scored = [(s, k) for k, s in sil.items() if s is not None]
    if not scored:
        return ClusterResult(ks, sil, None, warnings=warnings + ["silhouette undefined: degenerate input"])
    best_k = max(scored, key=lambda sk: (sk[0], -sk[1]))[1]
    labels, centers = fits[best_k]
    return ClusterResult(ks, sil, best_k, labels.tolist(), centers.tolist(), warnings)
