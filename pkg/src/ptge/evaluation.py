"""Recall@k retrieval evaluation and repeated-trial aggregation.

Ranking is exact: the gallery (minus excluded items, the reference image
first among them) is ordered by descending cosine to the composed query,
ties broken by item id ascending.  A query counts as a hit at k when its
ground-truth target ranks in the top k.  Galleries here are desk-scale, so
no approximate indexing.

Datasets with multiple subsets report the unweighted mean of subset
recalls; repeated trials aggregate to mean and standard error
(sample std / sqrt(n)).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ptge import PtgeError
from ptge.embeddings import EmbeddingTable, ZeroNormError, as_vector
from ptge.kernels import cosine_against_matrix


class EvaluationError(PtgeError):
    """Invalid query or report shape."""


@dataclass(frozen=True)
class RetrievalQuery:
    query_id: str
    composed: np.ndarray  # f_c at inference time
    target_id: str
    gallery: EmbeddingTable
    exclude_ids: frozenset[str] = frozenset()
    subset: str = "all"

    def __post_init__(self):
        object.__setattr__(self, "composed", as_vector(self.composed, what="composed"))
        if self.target_id not in self.gallery:
            raise EvaluationError(
                f"query {self.query_id!r}: ground truth {self.target_id!r} not in gallery"
            )
        if self.target_id in self.exclude_ids:
            raise EvaluationError(
                f"query {self.query_id!r}: ground truth {self.target_id!r} is excluded"
            )


@dataclass(frozen=True)
class RecallReport:
    per_k: dict[int, float]  # unweighted mean over subsets
    per_subset: dict[str, dict[int, float]]
    query_count: int
    subset_counts: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "per_k": {str(k): v for k, v in sorted(self.per_k.items())},
            "per_subset": {
                s: {str(k): v for k, v in sorted(ks.items())}
                for s, ks in sorted(self.per_subset.items())
            },
            "query_count": self.query_count,
            "subset_counts": dict(sorted(self.subset_counts.items())),
        }


def target_rank(query: RetrievalQuery) -> int:
    """1-based rank of the ground-truth target in the exact ordering."""
    gallery_ids = [i for i in query.gallery.ids() if i not in query.exclude_ids]
    if not gallery_ids:
        raise EvaluationError(f"query {query.query_id!r}: gallery empty after exclusions")
    matrix = np.stack([query.gallery.raw(i) for i in gallery_ids])
    dots, row_sq, q_sq = cosine_against_matrix(query.composed, matrix)
    if q_sq == 0.0:
        raise ZeroNormError(f"query {query.query_id!r}: composed vector is zero")
    zero_rows = [gallery_ids[i] for i in np.nonzero(row_sq == 0.0)[0]]
    if zero_rows:
        raise ZeroNormError(
            f"query {query.query_id!r}: zero-norm gallery vector(s) {zero_rows[:3]}"
        )
    cos = dots / (np.sqrt(row_sq) * math.sqrt(q_sq))
    target_pos = gallery_ids.index(query.target_id)
    target_cos = cos[target_pos]
    # rank = 1 + number of items strictly ahead under (cos desc, id asc)
    rank = 1
    for pos, item_id in enumerate(gallery_ids):
        if pos == target_pos:
            continue
        if cos[pos] > target_cos or (cos[pos] == target_cos and item_id < query.target_id):
            rank += 1
    return rank


def recall_at_k(queries: list[RetrievalQuery], ks: list[int]) -> RecallReport:
    """Fraction of queries whose target lands in the top k, per subset."""
    if not queries:
        raise EvaluationError("no queries")
    if not ks or any(k < 1 for k in ks):
        raise EvaluationError(f"ks must be positive, got {ks}")
    effective = min(len(q.gallery) - len(q.exclude_ids & set(q.gallery.ids())) for q in queries)
    if max(ks) > effective:
        raise EvaluationError(
            f"k={max(ks)} exceeds effective gallery size {effective}"
        )
    hits_by_subset: dict[str, dict[int, int]] = {}
    counts: dict[str, int] = {}
    for query in queries:
        rank = target_rank(query)
        counts[query.subset] = counts.get(query.subset, 0) + 1
        bucket = hits_by_subset.setdefault(query.subset, {k: 0 for k in ks})
        for k in ks:
            if rank <= k:
                bucket[k] += 1
    per_subset = {
        subset: {k: hits[k] / counts[subset] for k in ks}
        for subset, hits in hits_by_subset.items()
    }
    n_subsets = len(per_subset)
    per_k = {
        k: sum(per_subset[s][k] for s in per_subset) / n_subsets for k in ks
    }
    return RecallReport(
        per_k=per_k,
        per_subset=per_subset,
        query_count=len(queries),
        subset_counts=counts,
    )


@dataclass(frozen=True)
class TrialStat:
    values: tuple[float, ...]
    mean: float
    stderr: float


@dataclass(frozen=True)
class TrialAggregate:
    n_trials: int
    overall: dict[int, TrialStat]
    per_subset: dict[str, dict[int, TrialStat]]

    def to_json(self) -> dict:
        def stat(s: TrialStat) -> dict:
            return {"mean": s.mean, "stderr": s.stderr, "values": list(s.values)}

        return {
            "n_trials": self.n_trials,
            "overall": {str(k): stat(s) for k, s in sorted(self.overall.items())},
            "per_subset": {
                subset: {str(k): stat(s) for k, s in sorted(ks.items())}
                for subset, ks in sorted(self.per_subset.items())
            },
        }


def _trial_stat(values: list[float]) -> TrialStat:
    arr = np.asarray(values, dtype=np.float64)
    n = arr.size
    return TrialStat(
        values=tuple(float(v) for v in arr),
        mean=float(arr.mean()),
        stderr=float(arr.std(ddof=1) / math.sqrt(n)),
    )


def aggregate_trials(reports: list[RecallReport]) -> TrialAggregate:
    """Mean and standard error across repeated trials of one experiment."""
    if len(reports) < 2:
        raise EvaluationError(f"need at least 2 trials, got {len(reports)}")
    ks = sorted(reports[0].per_k)
    subsets = sorted(reports[0].per_subset)
    for i, report in enumerate(reports[1:], start=2):
        if sorted(report.per_k) != ks or sorted(report.per_subset) != subsets:
            raise EvaluationError(
                f"trial {i} has mismatched shape: ks {sorted(report.per_k)} vs {ks}, "
                f"subsets {sorted(report.per_subset)} vs {subsets}"
            )
    overall = {k: _trial_stat([r.per_k[k] for r in reports]) for k in ks}
    per_subset = {
        subset: {k: _trial_stat([r.per_subset[subset][k] for r in reports]) for k in ks}
        for subset in subsets
    }
    return TrialAggregate(n_trials=len(reports), overall=overall, per_subset=per_subset)


def save_report(report: RecallReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report(path: str | Path) -> RecallReport:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return RecallReport(
        per_k={int(k): v for k, v in data["per_k"].items()},
        per_subset={
            s: {int(k): v for k, v in ks.items()} for s, ks in data["per_subset"].items()
        },
        query_count=data["query_count"],
        subset_counts=data.get("subset_counts", {}),
    )


def load_queries(path: str | Path, gallery: EmbeddingTable) -> list[RetrievalQuery]:
    """Read queries from JSONL rows
    {"query_id", "vec", "target", "exclude"?, "subset"?}."""
    queries = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                queries.append(
                    RetrievalQuery(
                        query_id=row["query_id"],
                        composed=row["vec"],
                        target_id=row["target"],
                        gallery=gallery,
                        exclude_ids=frozenset(row.get("exclude", ())),
                        subset=row.get("subset", "all"),
                    )
                )
            except (json.JSONDecodeError, KeyError) as exc:
                raise EvaluationError(f"{path}: line {lineno}: {exc}") from None
    return queries
