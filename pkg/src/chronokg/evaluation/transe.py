"""TransE link prediction and the temporal-relation ablation.

Training is plain numpy: margin ranking loss with one corrupted triple per
positive, hand-written gradients, Adam, and unit-norm entity rows after
every step.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Iterable, NamedTuple, Sequence

import numpy as np

from chronokg.errors import DomainError
from chronokg.evaluation.stats import paired_t, paired_t_statistic
from chronokg.model import DEFAULT_BIN_TABLE, OnsetBinTable, collapse_bin, range_to_fine_bin

logger = logging.getLogger(__name__)

BIN_MODES = ("fine8", "coarse5", "none")
METRICS = ("mrr", "hits@1", "hits@3", "hits@10")


class LPTriple(NamedTuple):
    head: str
    relation: str
    tail: str
    onset: tuple[float, float] | None = None


Triple = tuple[str, str, str]


def augment_temporal(triples: Iterable[LPTriple], bin_mode: str = "fine8",
                     table: OnsetBinTable = DEFAULT_BIN_TABLE) -> list[Triple]:
    """Suffix each relation with its onset bin; triples without onset keep the plain relation."""
    if bin_mode not in BIN_MODES:
        raise DomainError(f"bin_mode must be one of {BIN_MODES}")
    out = []
    for t in triples:
        rel = t.relation
        if bin_mode != "none" and t.onset is not None:
            b = range_to_fine_bin(t.onset[0], t.onset[1], table)
            if bin_mode == "coarse5":
                b = collapse_bin(b, table)
            rel = f"{rel}_onset_{b}"
        out.append((t.head, rel, t.tail))
    return out


@dataclass(frozen=True)
class TransEParams:
    dim: int = 100
    margin: float = 1.0
    epochs: int = 100
    batch_size: int = 1024
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class TransEModel:
    entities: dict[str, int]
    relations: dict[str, int]
    entity_emb: np.ndarray
    relation_emb: np.ndarray
    params: TransEParams
    loss_history: list[float] = field(default_factory=list)

    def distances_tail(self, h: int, r: int) -> np.ndarray:
        return np.linalg.norm(self.entity_emb[h] + self.relation_emb[r] - self.entity_emb, axis=1)

    def distances_head(self, r: int, t: int) -> np.ndarray:
        return np.linalg.norm(self.entity_emb + self.relation_emb[r] - self.entity_emb[t], axis=1)


def _vocab(items: Iterable[str]) -> dict[str, int]:
    return {name: i for i, name in enumerate(sorted(set(items)))}


def _unit_rows(m: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    return m / np.where(norms == 0, 1.0, norms)


def train_transe(
    triples: Sequence[Triple],
    params: TransEParams = TransEParams(),
    seed: int = 42,
    entities: Iterable[str] | None = None,
    relations: Iterable[str] | None = None,
) -> TransEModel:
    """Fit TransE on ``triples``; extra vocabulary may be supplied so that
    held-out entities get (untrained) embeddings."""
    if not triples:
        raise DomainError("train_transe needs at least one triple")
    ent = _vocab([x for h, _, t in triples for x in (h, t)] + list(entities or []))
    rel = _vocab([r for _, r, _ in triples] + list(relations or []))
    if len(ent) < 2:
        raise DomainError("need at least two entities")
    rng = np.random.default_rng(seed)
    bound = 6.0 / math.sqrt(params.dim)
    E = _unit_rows(rng.uniform(-bound, bound, size=(len(ent), params.dim)))
    R = _unit_rows(rng.uniform(-bound, bound, size=(len(rel), params.dim)))
    model = TransEModel(ent, rel, E, R, params)

    data = np.array([(ent[h], rel[r], ent[t]) for h, r, t in triples], dtype=np.int64)
    n, n_ent = len(data), len(ent)
    mE, vE = np.zeros_like(E), np.zeros_like(E)
    mR, vR = np.zeros_like(R), np.zeros_like(R)
    step = 0
    for _ in range(params.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, params.batch_size):
            batch = data[order[start : start + params.batch_size]]
            b = len(batch)
            h, r, t = batch[:, 0], batch[:, 1], batch[:, 2]
            corrupt_head = rng.random(b) < 0.5
            rand_ent = rng.integers(0, n_ent, size=b)
            h_neg = np.where(corrupt_head, rand_ent, h)
            t_neg = np.where(corrupt_head, t, rand_ent)

            d_pos = E[h] + R[r] - E[t]
            d_neg = E[h_neg] + R[r] - E[t_neg]
            n_pos = np.linalg.norm(d_pos, axis=1)
            n_neg = np.linalg.norm(d_neg, axis=1)
            losses = np.maximum(0.0, params.margin + n_pos - n_neg)
            epoch_loss += float(losses.sum())
            active = losses > 0
            u_pos = d_pos / np.maximum(n_pos, 1e-12)[:, None] * active[:, None] / b
            u_neg = d_neg / np.maximum(n_neg, 1e-12)[:, None] * active[:, None] / b

            gE = np.zeros_like(E)
            gR = np.zeros_like(R)
            np.add.at(gE, h, u_pos)
            np.add.at(gE, t, -u_pos)
            np.add.at(gE, h_neg, -u_neg)
            np.add.at(gE, t_neg, u_neg)
            np.add.at(gR, r, u_pos - u_neg)

            step += 1
            c1 = 1 - params.beta1**step
            c2 = 1 - params.beta2**step
            for P, G, M, V in ((E, gE, mE, vE), (R, gR, mR, vR)):
                M *= params.beta1
                M += (1 - params.beta1) * G
                V *= params.beta2
                V += (1 - params.beta2) * G * G
                P -= params.lr * (M / c1) / (np.sqrt(V / c2) + params.eps)
            E[:] = _unit_rows(E)
        model.loss_history.append(epoch_loss / n)
    return model


def _rank(dist: np.ndarray, true_idx: int, exclude: np.ndarray | None) -> float:
    """Rank of ``true_idx`` by ascending distance; ties share the mean rank."""
    target = dist[true_idx]
    mask = np.ones(len(dist), dtype=bool)
    if exclude is not None and len(exclude):
        mask[exclude] = False
    mask[true_idx] = False
    others = dist[mask]
    less = int(np.sum(others < target))
    equal = int(np.sum(others == target))
    return less + 1 + equal / 2.0


def evaluate_ranking(
    model: TransEModel,
    test_triples: Sequence[Triple],
    all_triples: Iterable[Triple] = (),
    mode: str = "filtered",
) -> dict[str, float]:
    """MRR and Hits@{1,3,10} over head and tail prediction, averaged."""
    if mode not in ("raw", "filtered"):
        raise DomainError("mode must be 'raw' or 'filtered'")
    ent, rel = model.entities, model.relations
    tails: dict[tuple[int, int], set[int]] = {}
    heads: dict[tuple[int, int], set[int]] = {}
    if mode == "filtered":
        for h, r, t in all_triples:
            if h in ent and t in ent and r in rel:
                tails.setdefault((ent[h], rel[r]), set()).add(ent[t])
                heads.setdefault((rel[r], ent[t]), set()).add(ent[h])
    ranks: list[float] = []
    for h_name, r_name, t_name in test_triples:
        h, r, t = ent[h_name], rel[r_name], ent[t_name]
        ex_t = np.fromiter(tails.get((h, r), set()) - {t}, dtype=np.int64)
        ex_h = np.fromiter(heads.get((r, t), set()) - {h}, dtype=np.int64)
        ranks.append(_rank(model.distances_tail(h, r), t, ex_t))
        ranks.append(_rank(model.distances_head(r, t), h, ex_h))
    if not ranks:
        return {m: 0.0 for m in METRICS}
    arr = np.asarray(ranks)
    return {
        "mrr": float(np.mean(1.0 / arr)),
        "hits@1": float(np.mean(arr <= 1)),
        "hits@3": float(np.mean(arr <= 3)),
        "hits@10": float(np.mean(arr <= 10)),
    }


def split_indices(n: int, seed: int, fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
                  ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(round(fractions[0] * n))
    n_valid = int(round(fractions[1] * n))
    return order[:n_train], order[n_train : n_train + n_valid], order[n_train + n_valid :]


@dataclass
class AblationReport:
    seeds: list[int]
    per_seed: dict[str, dict[str, list[dict[str, float]]]]
    summary: dict[str, dict[str, dict[str, dict[str, float]]]]
    gain: dict[str, float]
    t_stat: dict[str, float]
    p_value: dict[str, float]
    runtime_s: list[float]

    def to_dict(self) -> dict[str, Any]:
        return self.__dict__.copy()

    def csv_rows(self) -> list[list[Any]]:
        rows: list[list[Any]] = [["condition", "mode", "metric", "mean", "std"]]
        for cond, modes in self.summary.items():
            for mode, metrics in modes.items():
                for metric, stat in metrics.items():
                    rows.append([cond, mode, metric, f"{stat['mean']:.6f}", f"{stat['std']:.6f}"])
        return rows


def ablation_run(
    struct_triples: Sequence[Triple],
    temporal_triples: Sequence[Triple],
    seeds: Sequence[int] = (42, 7, 123),
    split: tuple[float, float, float] = (0.8, 0.1, 0.1),
    params: TransEParams = TransEParams(),
) -> AblationReport:
    """Structural vs temporal-relation TransE over several seeds.

    The two inputs must be index-aligned (``temporal_triples[i]`` is the
    augmented form of ``struct_triples[i]``) so that both conditions share
    the same split per seed.
    """
    if not struct_triples or not temporal_triples:
        raise DomainError("both triple sets must be nonempty")
    if len(struct_triples) != len(temporal_triples):
        raise DomainError("struct and temporal triples must be index-aligned")
    conditions = {"struct": list(struct_triples), "temporal": list(temporal_triples)}
    per_seed: dict[str, dict[str, list[dict[str, float]]]] = {
        c: {"raw": [], "filtered": []} for c in conditions
    }
    runtimes: list[float] = []
    for seed in seeds:
        train_idx, _valid_idx, test_idx = split_indices(len(struct_triples), seed, split)
        for cond, data in conditions.items():
            t0 = time.perf_counter()
            train = [data[i] for i in train_idx]
            test = [data[i] for i in test_idx]
            model = train_transe(
                train, params, seed,
                entities=[x for h, _, t in data for x in (h, t)],
                relations=[r for _, r, _ in data],
            )
            runtimes.append(time.perf_counter() - t0)
            for mode in ("raw", "filtered"):
                per_seed[cond][mode].append(evaluate_ranking(model, test, data, mode))
    summary: dict[str, dict[str, dict[str, dict[str, float]]]] = {}
    for cond, modes in per_seed.items():
        summary[cond] = {}
        for mode, runs in modes.items():
            summary[cond][mode] = {
                m: {"mean": float(np.mean([r[m] for r in runs])),
                    "std": float(np.std([r[m] for r in runs], ddof=1)) if len(runs) > 1 else 0.0}
                for m in METRICS
            }
    gain, t_stat, p_value = {}, {}, {}
    for mode in ("raw", "filtered"):
        s = [r["mrr"] for r in per_seed["struct"][mode]]
        t = [r["mrr"] for r in per_seed["temporal"][mode]]
        base = float(np.mean(s))
        gain[mode] = (float(np.mean(t)) - base) / base if base else 0.0
        if len(seeds) >= 2:
            t_stat[mode] = paired_t_statistic(t, s)[0]
            p_value[mode] = paired_t(t, s)
    return AblationReport(list(seeds), per_seed, summary, gain, t_stat, p_value, runtimes)
