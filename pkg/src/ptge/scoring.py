"""Challenge scoring of unlabeled (reference, target) pairs.

Each candidate pair is scored as ``1 - cosine(f_c, f_t)`` where f_c is the
composed query of the reference image with the TARGET image's caption as
pseudo modification text, and f_t is the target image feature.  Higher
scores mean the composed query sits further from its target, i.e. the pair
is harder.

Scores land in [0, 2] always, in [0, 1] when every embedding is
componentwise non-negative.  Scoring is embarrassingly parallel across
pairs; per-pair accumulation order is fixed, so parallel and sequential
runs produce identical tables.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping

from ptge import PtgeError
from ptge.captioning import Caption
from ptge.composer import ComposerBackend, compose, text_key
from ptge.embeddings import EmbeddingTable, cosine_similarity

logger = logging.getLogger(__name__)


class ScoringError(PtgeError):
    """Scoring precondition or aggregate failure."""


@dataclass(frozen=True)
class CandidatePair:
    pair_id: str
    ref_image_id: str
    target_image_id: str
    category: str | None = None

    def __post_init__(self):
        if not self.pair_id:
            raise ScoringError("pair_id must be nonempty")
        if self.ref_image_id == self.target_image_id:
            raise ScoringError(
                f"pair {self.pair_id!r}: reference and target are the same image"
            )


@dataclass(frozen=True)
class ChallengeScore:
    pair_id: str
    score: float


@dataclass(frozen=True)
class ScoredPair:
    pair: CandidatePair
    score: float


class ScoreTable:
    """Challenge scores for a candidate set, ordered by pair_id ascending."""

    def __init__(self, entries: list[ScoredPair], provenance: dict | None = None):
        seen = set()
        for entry in entries:
            if entry.pair.pair_id in seen:
                raise ScoringError(f"duplicate pair_id {entry.pair.pair_id!r}")
            seen.add(entry.pair.pair_id)
        self.entries = sorted(entries, key=lambda e: e.pair.pair_id)
        self.provenance = provenance or {}

    @property
    def scores(self) -> list[ChallengeScore]:
        return [ChallengeScore(e.pair.pair_id, e.score) for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def by_category(self) -> dict[str, list[ScoredPair]]:
        """Entries grouped by category (uncategorized pairs under 'default')."""
        groups: dict[str, list[ScoredPair]] = {}
        for entry in self.entries:
            groups.setdefault(entry.pair.category or "default", []).append(entry)
        return groups


def _resolve_caption(captions, target_id: str) -> str:
    if callable(captions):
        got = captions(target_id)
    else:
        try:
            got = captions[target_id]
        except KeyError:
            raise ScoringError(f"no caption for target image {target_id!r}") from None
    if isinstance(got, Caption):
        return got.text
    if not isinstance(got, str) or not got.strip():
        raise ScoringError(f"empty caption for target image {target_id!r}")
    return got


def score_pair(
    pair: CandidatePair,
    target_caption: Caption | str,
    backend: ComposerBackend,
    images: EmbeddingTable,
) -> ChallengeScore:
    """Distance between the composed query and the target image feature."""
    text = target_caption.text if isinstance(target_caption, Caption) else target_caption
    f_c = compose(pair.pair_id, pair.ref_image_id, text_key(text), backend)
    f_t = images.get(pair.target_image_id)
    return ChallengeScore(pair.pair_id, 1.0 - cosine_similarity(f_c, f_t))


def score_all(
    pairs: list[CandidatePair],
    captions: Mapping[str, str] | Mapping[str, Caption] | Callable[[str], str],
    backend: ComposerBackend,
    images: EmbeddingTable,
    strict: bool = True,
    workers: int = 1,
) -> ScoreTable:
    """Score every candidate pair; target-image captions act as the texts.

    In strict mode any per-pair failure aborts with an aggregate error; in
    lenient mode failures are logged, skipped, and listed in the table's
    provenance under "failures".
    """
    seen = set()
    for pair in pairs:
        if pair.pair_id in seen:
            raise ScoringError(f"duplicate pair_id {pair.pair_id!r}")
        seen.add(pair.pair_id)

    def one(pair: CandidatePair):
        text = _resolve_caption(captions, pair.target_image_id)
        return ScoredPair(pair, score_pair(pair, text, backend, images).score)

    results: list[ScoredPair] = []
    failures: list[tuple[str, str]] = []
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(one, pair): pair for pair in pairs}
            for future, pair in futures.items():
                try:
                    results.append(future.result())
                except PtgeError as exc:
                    failures.append((pair.pair_id, str(exc)))
    else:
        for pair in pairs:
            try:
                results.append(one(pair))
            except PtgeError as exc:
                failures.append((pair.pair_id, str(exc)))

    if failures and strict:
        listing = "; ".join(f"{pid}: {msg}" for pid, msg in sorted(failures))
        raise ScoringError(f"{len(failures)} pair(s) failed to score: {listing}")
    for pid, msg in failures:
        logger.warning("skipped pair %s: %s", pid, msg)

    provenance = {
        "backend": backend.mode,
        "images_digest": images.digest(),
    }
    if backend.mode == "toy":
        provenance["alpha"] = backend.alpha
        provenance["texts_digest"] = backend.texts.digest()
    else:
        provenance["composites_digest"] = backend.composites.digest()
    if failures:
        provenance["failures"] = sorted(failures)
    return ScoreTable(results, provenance)


def save_score_table(table: ScoreTable, path: str | Path) -> None:
    """Write JSONL rows {"pair_id", "ref", "tgt", "category", "score"}."""
    with open(path, "w", encoding="utf-8") as fh:
        for entry in table.entries:
            row = {
                "pair_id": entry.pair.pair_id,
                "ref": entry.pair.ref_image_id,
                "tgt": entry.pair.target_image_id,
                "category": entry.pair.category,
                "score": entry.score,
            }
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def load_score_table(path: str | Path) -> ScoreTable:
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                pair = CandidatePair(
                    pair_id=row["pair_id"],
                    ref_image_id=row["ref"],
                    target_image_id=row["tgt"],
                    category=row.get("category"),
                )
                score = float(row["score"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ScoringError(f"{path}: line {lineno}: {exc}") from None
            if not 0.0 <= score <= 2.0:
                raise ScoringError(
                    f"{path}: line {lineno}: score {score} outside [0, 2]"
                )
            entries.append(ScoredPair(pair, score))
    return ScoreTable(entries)


def load_pairs(path: str | Path) -> list[CandidatePair]:
    """Read candidate pairs from JSONL rows {"pair_id", "ref", "tgt", "category"?}."""
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                pairs.append(
                    CandidatePair(
                        pair_id=row["pair_id"],
                        ref_image_id=row["ref"],
                        target_image_id=row["tgt"],
                        category=row.get("category"),
                    )
                )
            except (json.JSONDecodeError, KeyError) as exc:
                raise ScoringError(f"{path}: line {lineno}: {exc}") from None
    return pairs
