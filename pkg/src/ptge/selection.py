"""Turning a score table into the K-shot annotation set.

The default strategy treats the challenge scores as a distribution, takes
the top slice (default fraction 0.0455, the one-sided area past 2 sigma of
a normal) as a candidate pool, and draws K pairs uniformly from that pool.
Drawing randomly inside the top range rather than taking the K highest
scores outright keeps single noisy high scorers from dominating the picks.
Two ablation strategies (uniform over everything, uniform over the easiest
quarter) and plain top-K are included for comparison runs.

Ordering contract used everywhere: descending score, ties broken by
pair_id ascending.  Pools are built per category; an unlabeled corpus can
be categorized first with :func:`kmeans_categorize`.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ptge import PtgeError
from ptge.embeddings import EmbeddingTable
from ptge.kernels import assign_to_centroids
from ptge.rng import PinnedRNG, derive_key
from ptge.scoring import CandidatePair, ScoredPair, ScoreTable

STRATEGIES = ("top_range_random", "random", "easy_bottom", "top_k")

HISTOGRAM_BINS = 50
SUMMARY_QUANTILES = (0.25, 0.5, 0.75, 0.9545)


class SelectionError(PtgeError):
    """Invalid selection config or unsatisfiable request."""


# ---------------------------------------------------------------------------
# Distribution summary
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DistributionSummary:
    count: int
    mean: float
    std: float  # sample, n-1
    min: float
    max: float
    skewness: float  # adjusted Fisher-Pearson; 0 by convention when std == 0
    histogram_edges: tuple[float, ...]
    histogram_counts: tuple[int, ...]
    quantiles: dict[float, float]

    def to_json(self) -> dict:
        return {
            "count": self.count,
            "mean": self.mean,
            "std": self.std,
            "min": self.min,
            "max": self.max,
            "skewness": self.skewness,
            "histogram": {
                "edges": list(self.histogram_edges),
                "counts": list(self.histogram_counts),
            },
            "quantiles": {str(q): v for q, v in self.quantiles.items()},
        }


def summarize(table_or_values) -> DistributionSummary:
    """Exact sample statistics of a score table (or plain values)."""
    if isinstance(table_or_values, ScoreTable):
        values = np.array([e.score for e in table_or_values.entries], dtype=np.float64)
    else:
        values = np.asarray(table_or_values, dtype=np.float64)
    n = values.size
    if n < 2:
        raise SelectionError(f"need at least 2 scores to summarize, got {n}")
    mean = float(values.mean())
    std = float(values.std(ddof=1))
    lo = float(values.min())
    hi = float(values.max())
    if std == 0.0:
        skew = 0.0
    else:
        centered = values - mean
        m2 = float((centered**2).mean())
        m3 = float((centered**3).mean())
        g1 = m3 / m2**1.5
        skew = g1 * math.sqrt(n * (n - 1)) / (n - 2)
    if lo == hi:
        edges: tuple[float, ...] = (lo, hi)
        counts: tuple[int, ...] = (n,)
    else:
        hist, bin_edges = np.histogram(values, bins=HISTOGRAM_BINS, range=(lo, hi))
        edges = tuple(float(e) for e in bin_edges)
        counts = tuple(int(c) for c in hist)
    quantiles = {
        q: float(np.quantile(values, q, method="linear")) for q in SUMMARY_QUANTILES
    }
    return DistributionSummary(
        count=n, mean=mean, std=std, min=lo, max=hi, skewness=skew,
        histogram_edges=edges, histogram_counts=counts, quantiles=quantiles,
    )


# ---------------------------------------------------------------------------
# Pools and sampling
# ---------------------------------------------------------------------------

def _rank_desc(entries: list[ScoredPair]) -> list[ScoredPair]:
    """Full ordering: score descending, pair_id ascending on ties."""
    return sorted(entries, key=lambda e: (-e.score, e.pair.pair_id))


def _rank_asc(entries: list[ScoredPair]) -> list[ScoredPair]:
    return sorted(entries, key=lambda e: (e.score, e.pair.pair_id))


def _grouped(table: ScoreTable, per_category: bool) -> dict[str, list[ScoredPair]]:
    if len(table) == 0:
        raise SelectionError("score table is empty")
    if per_category:
        return table.by_category()
    return {"all": list(table.entries)}


def build_pool(
    table: ScoreTable, pool_fraction: float, per_category: bool = True
) -> dict[str, list[str]]:
    """Top-range candidate pool per category.

    For a category of N pairs the pool is the ceil(pool_fraction * N)
    highest-score pairs under the documented tie-break, so it is never
    empty.
    """
    if not 0.0 < pool_fraction < 1.0:
        raise SelectionError(f"pool_fraction must be in (0, 1), got {pool_fraction}")
    pools: dict[str, list[str]] = {}
    for label, entries in _grouped(table, per_category).items():
        size = math.ceil(pool_fraction * len(entries))
        pools[label] = [e.pair.pair_id for e in _rank_desc(entries)[:size]]
    return pools


@dataclass(frozen=True)
class SelectionConfig:
    strategy: str = "top_range_random"
    pool_fraction: float = 0.0455
    easy_fraction: float = 0.25
    shots_per_category: int = 16
    seed: int = 0
    per_category: bool = True

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise SelectionError(
                f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}"
            )
        if not 0.0 < self.pool_fraction < 1.0:
            raise SelectionError(f"pool_fraction must be in (0, 1), got {self.pool_fraction}")
        if not 0.0 < self.easy_fraction < 1.0:
            raise SelectionError(f"easy_fraction must be in (0, 1), got {self.easy_fraction}")
        if self.shots_per_category < 1:
            raise SelectionError(f"shots_per_category must be >= 1, got {self.shots_per_category}")

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy,
            "pool_fraction": self.pool_fraction,
            "easy_fraction": self.easy_fraction,
            "shots_per_category": self.shots_per_category,
            "seed": self.seed,
            "per_category": self.per_category,
        }

    @classmethod
    def from_json(cls, data: dict) -> "SelectionConfig":
        return cls(**data)


@dataclass(frozen=True)
class CategorySelection:
    pool: tuple[str, ...]
    chosen: tuple[str, ...]


@dataclass(frozen=True)
class PairDetail:
    ref_image_id: str
    target_image_id: str
    score: float
    category: str


@dataclass(frozen=True)
class SelectionRound:
    round_id: str
    config: SelectionConfig
    per_category: dict[str, CategorySelection]
    pair_details: dict[str, PairDetail]  # for every chosen pair
    warnings: tuple[str, ...] = ()
    created_at: str = ""
    status: str = "selected"  # selected | annotating | exported

    @property
    def chosen_ids(self) -> list[str]:
        ids: list[str] = []
        for label in sorted(self.per_category):
            ids.extend(self.per_category[label].chosen)
        return ids

    def to_json(self) -> dict:
        return {
            "round_id": self.round_id,
            "config": self.config.to_json(),
            "categories": {
                label: {"pool": list(sel.pool), "chosen": list(sel.chosen)}
                for label, sel in sorted(self.per_category.items())
            },
            "pairs": {
                pid: {
                    "ref": d.ref_image_id,
                    "tgt": d.target_image_id,
                    "score": d.score,
                    "category": d.category,
                }
                for pid, d in sorted(self.pair_details.items())
            },
            "warnings": list(self.warnings),
            "created_at": self.created_at,
            "status": self.status,
        }

    @classmethod
    def from_json(cls, data: dict) -> "SelectionRound":
        return cls(
            round_id=data["round_id"],
            config=SelectionConfig.from_json(data["config"]),
            per_category={
                label: CategorySelection(tuple(v["pool"]), tuple(v["chosen"]))
                for label, v in data["categories"].items()
            },
            pair_details={
                pid: PairDetail(v["ref"], v["tgt"], v["score"], v["category"])
                for pid, v in data.get("pairs", {}).items()
            },
            warnings=tuple(data.get("warnings", ())),
            created_at=data.get("created_at", ""),
            status=data.get("status", "selected"),
        )


def _round_id(table: ScoreTable, config: SelectionConfig) -> str:
    h = hashlib.sha256()
    h.update(json.dumps(config.to_json(), sort_keys=True).encode())
    for entry in table.entries:
        h.update(entry.pair.pair_id.encode())
        h.update(np.float64(entry.score).tobytes())
    return "r" + h.hexdigest()[:12]


def select(table: ScoreTable, config: SelectionConfig) -> SelectionRound:
    """Draw the K-shot annotation set per category.

    top_range_random samples K uniformly without replacement from the
    top-range pool; when a pool is smaller than K it is extended with the
    next-ranked pairs (warning recorded) so small categories still yield K
    shots.  easy_bottom mirrors this over the lowest-score quarter; random
    draws from the whole category; top_k takes the K highest outright.
    """
    groups = _grouped(table, config.per_category)
    k = config.shots_per_category
    per_category: dict[str, CategorySelection] = {}
    details: dict[str, PairDetail] = {}
    warnings: list[str] = []
    for label in sorted(groups):
        entries = groups[label]
        if k > len(entries):
            raise SelectionError(
                f"category {label!r}: requested {k} shots from {len(entries)} pairs"
            )
        rng = PinnedRNG(derive_key("select", config.seed, config.strategy, label))
        if config.strategy == "top_range_random":
            ranked = _rank_desc(entries)
            pool = ranked[: math.ceil(config.pool_fraction * len(entries))]
            chosen = _draw_from_pool(pool, ranked, k, rng, label, warnings)
        elif config.strategy == "easy_bottom":
            ranked = _rank_asc(entries)
            pool = ranked[: math.ceil(config.easy_fraction * len(entries))]
            chosen = _draw_from_pool(pool, ranked, k, rng, label, warnings)
        elif config.strategy == "random":
            pool = sorted(entries, key=lambda e: e.pair.pair_id)
            chosen = rng.sample(pool, k)
        else:  # top_k
            pool = _rank_desc(entries)[:k]
            chosen = list(pool)
        per_category[label] = CategorySelection(
            pool=tuple(e.pair.pair_id for e in pool),
            chosen=tuple(sorted(e.pair.pair_id for e in chosen)),
        )
        for e in chosen:
            details[e.pair.pair_id] = PairDetail(
                ref_image_id=e.pair.ref_image_id,
                target_image_id=e.pair.target_image_id,
                score=e.score,
                category=label,
            )
    return SelectionRound(
        round_id=_round_id(table, config),
        config=config,
        per_category=per_category,
        pair_details=details,
        warnings=tuple(warnings),
        created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        status="selected",
    )


def _draw_from_pool(pool, ranked, k, rng, label, warnings) -> list[ScoredPair]:
    if len(pool) >= k:
        return rng.sample(list(pool), k)
    extension = ranked[len(pool) : len(pool) + (k - len(pool))]
    warnings.append(
        f"category {label!r}: pool of {len(pool)} smaller than K={k}; "
        f"extended with the next {len(extension)} ranked pair(s)"
    )
    return list(pool) + extension


def save_round(round_: SelectionRound, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(round_.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_round(path: str | Path) -> SelectionRound:
    with open(path, "r", encoding="utf-8") as fh:
        return SelectionRound.from_json(json.load(fh))


# ---------------------------------------------------------------------------
# k-means categorization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CategoryAssignment:
    assignments: dict[str, str]
    method: str  # "explicit" | "kmeans"
    k: int = 0
    centroids: np.ndarray | None = None
    iterations_run: int = 0
    inertia: float = 0.0
    inertia_history: tuple[float, ...] = ()

    def label_of(self, item_id: str) -> str:
        try:
            return self.assignments[item_id]
        except KeyError:
            raise SelectionError(f"no category assigned to item {item_id!r}") from None


def kmeans_categorize(
    items: EmbeddingTable,
    k: int,
    seed: int,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> CategoryAssignment:
    """Group items into k categories with Lloyd's algorithm.

    k-means++ initialization on the pinned stream; assignment ties go to
    the lowest centroid index; empty clusters seize the point currently
    farthest from its centroid (from a cluster that can spare one);
    converged when the largest centroid displacement drops below tol.
    Labels are "c0".."c{k-1}".
    """
    if k < 1:
        raise SelectionError(f"k must be >= 1, got {k}")
    ids = items.ids()
    if len(ids) < k:
        raise SelectionError(f"need at least k={k} items, got {len(ids)}")
    x = np.stack([items.raw(i) for i in ids]).astype(np.float64)
    rng = PinnedRNG(derive_key("kmeans", seed, k))
    centroids = _kmeans_pp_init(x, k, rng)

    history: list[float] = []
    iterations = 0
    labels = np.zeros(len(ids), dtype=np.int64)
    for iterations in range(1, max_iter + 1):
        labels, min_sq = assign_to_centroids(x, centroids)
        labels, min_sq = _repair_empty_clusters(x, centroids, labels, min_sq, k)
        # fixed-order summation keeps the reduction deterministic
        inertia = 0.0
        for d in min_sq.tolist():
            inertia += d
        history.append(inertia)
        new_centroids = np.empty_like(centroids)
        for j in range(k):
            members = np.nonzero(labels == j)[0]
            acc = np.zeros(x.shape[1], dtype=np.float64)
            for m in members.tolist():
                acc += x[m]
            new_centroids[j] = acc / len(members)
        displacement = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if displacement < tol:
            break

    assignments = {item_id: f"c{int(label)}" for item_id, label in zip(ids, labels)}
    return CategoryAssignment(
        assignments=assignments,
        method="kmeans",
        k=k,
        centroids=centroids,
        iterations_run=iterations,
        inertia=history[-1],
        inertia_history=tuple(history),
    )


def _kmeans_pp_init(x: np.ndarray, k: int, rng: PinnedRNG) -> np.ndarray:
    n = x.shape[0]
    chosen = [rng.randbelow(n)]
    for _ in range(1, k):
        _, min_sq = assign_to_centroids(x, x[chosen])
        weights = min_sq.tolist()
        total = 0.0
        for w in weights:
            total += w
        if total == 0.0:
            # all points coincide with a centroid; take the first unchosen
            taken = set(chosen)
            chosen.append(next(i for i in range(n) if i not in taken))
            continue
        r = rng.uniform() * total
        acc = 0.0
        pick = n - 1
        for i, w in enumerate(weights):
            acc += w
            if r < acc:
                pick = i
                break
        chosen.append(pick)
    return x[chosen].copy()


def _repair_empty_clusters(x, centroids, labels, min_sq, k):
    """Give each empty cluster the point farthest from its centroid.

    Donor points only come from clusters with at least two members; ties on
    distance go to the lowest point index.
    """
    for j in range(k):
        if np.any(labels == j):
            continue
        counts = np.bincount(labels, minlength=k)
        candidates = [i for i in range(len(labels)) if counts[labels[i]] >= 2]
        if not candidates:
            raise SelectionError("cannot repair empty cluster: no donor points")
        far = max(candidates, key=lambda i: (min_sq[i], -i))
        labels[far] = j
        centroids[j] = x[far]
        min_sq[far] = 0.0
    return labels, min_sq


def explicit_assignment(assignments: dict[str, str]) -> CategoryAssignment:
    return CategoryAssignment(assignments=dict(assignments), method="explicit")


def assign_pair_categories(
    pairs: list[CandidatePair],
    assignment: CategoryAssignment,
    basis: str = "reference_image",
) -> list[CandidatePair]:
    """Label each pair with its basis image's category."""
    if basis not in ("reference_image", "target_image"):
        raise SelectionError(f"basis must be reference_image or target_image, got {basis!r}")
    labeled = []
    for pair in pairs:
        image_id = pair.ref_image_id if basis == "reference_image" else pair.target_image_id
        labeled.append(replace(pair, category=assignment.label_of(image_id)))
    return labeled
