"""Event-sourced persistence for annotation rounds.

All state lives in a single append-only JSONL event log; the in-memory
snapshot is rebuilt by replaying the log at startup.  Mutations validate
against the current snapshot, append exactly one event, then apply it via
the same function replay uses, so live state and replayed state cannot
diverge.  At few-shot scale (tens of records per round) this needs no
database.

Event types: round_created, annotation_submitted, annotation_revised,
round_exported.  Sequence numbers are strictly increasing.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from ptge import PtgeError
from ptge.selection import SelectionRound

EVENT_TYPES = (
    "round_created",
    "annotation_submitted",
    "annotation_revised",
    "round_exported",
)


class AnnotationError(PtgeError):
    """Invalid mutation against the annotation store."""


class UnknownRound(AnnotationError):
    pass


class DuplicateRound(AnnotationError):
    pass


class UnknownPair(AnnotationError):
    pass


class RoundReadOnly(AnnotationError):
    pass


class IncompleteRound(AnnotationError):
    pass


@dataclass(frozen=True)
class AnnotationRecord:
    round_id: str
    pair_id: str
    modification_text: str
    annotator_id: str
    submitted_at: str
    seq: int

    def to_json(self) -> dict:
        return {
            "round_id": self.round_id,
            "pair_id": self.pair_id,
            "text": self.modification_text,
            "annotator": self.annotator_id,
            "submitted_at": self.submitted_at,
            "seq": self.seq,
        }


class _RoundState:
    def __init__(self, round_json: dict):
        self.round_json = round_json
        self.status = round_json.get("status", "annotating")
        self.annotations: dict[str, AnnotationRecord] = {}
        self.nonces: dict[tuple[str, str], int] = {}

    @property
    def chosen_ids(self) -> list[str]:
        ids = []
        for label in sorted(self.round_json["categories"]):
            ids.extend(self.round_json["categories"][label]["chosen"])
        return ids

    def snapshot(self) -> dict:
        return {
            "round": self.round_json,
            "status": self.status,
            "annotations": {
                pid: rec.to_json() for pid, rec in sorted(self.annotations.items())
            },
            "nonces": {f"{p}\x00{n}": s for (p, n), s in sorted(self.nonces.items())},
        }


class AnnotationStore:
    """Append-only event log plus the state snapshot rebuilt from it."""

    def __init__(self, log_path: str | Path):
        self.log_path = Path(log_path)
        self._lock = threading.RLock()
        self._rounds: dict[str, _RoundState] = {}
        self._last_seq = 0
        if self.log_path.exists():
            self._replay()

    # -- log machinery ------------------------------------------------------

    def _replay(self) -> None:
        with open(self.log_path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    event = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise AnnotationError(
                        f"{self.log_path}: line {lineno}: corrupt event: {exc}"
                    ) from None
                if event["seq"] <= self._last_seq:
                    raise AnnotationError(
                        f"{self.log_path}: line {lineno}: sequence number "
                        f"{event['seq']} not increasing"
                    )
                self._apply(event)
                self._last_seq = event["seq"]

    def _append(self, event_type: str, data: dict) -> dict:
        event = {
            "seq": self._last_seq + 1,
            "ts": datetime.now(timezone.utc).isoformat(timespec="microseconds"),
            "type": event_type,
            "data": data,
        }
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, ensure_ascii=False) + "\n")
            fh.flush()
        self._apply(event)
        self._last_seq = event["seq"]
        return event

    def _apply(self, event: dict) -> None:
        """State transition shared by live mutations and replay."""
        etype = event["type"]
        data = event["data"]
        if etype == "round_created":
            state = _RoundState(data["round"])
            state.status = "annotating"
            self._rounds[data["round"]["round_id"]] = state
        elif etype in ("annotation_submitted", "annotation_revised"):
            state = self._rounds[data["round_id"]]
            record = AnnotationRecord(
                round_id=data["round_id"],
                pair_id=data["pair_id"],
                modification_text=data["text"],
                annotator_id=data["annotator"],
                submitted_at=data["submitted_at"],
                seq=event["seq"],
            )
            state.annotations[data["pair_id"]] = record
            nonce = data.get("nonce")
            if nonce:
                state.nonces[(data["pair_id"], nonce)] = event["seq"]
        elif etype == "round_exported":
            self._rounds[data["round_id"]].status = "exported"
        else:
            raise AnnotationError(f"unknown event type {etype!r}")

    def snapshot(self) -> dict:
        """Canonical view of the whole store; replay must reproduce this."""
        with self._lock:
            return {
                "last_seq": self._last_seq,
                "rounds": {
                    rid: state.snapshot() for rid, state in sorted(self._rounds.items())
                },
            }

    # -- queries ------------------------------------------------------------

    def _require_round(self, round_id: str) -> _RoundState:
        try:
            return self._rounds[round_id]
        except KeyError:
            raise UnknownRound(f"unknown round {round_id!r}") from None

    def round_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._rounds)

    def round_view(self, round_id: str) -> dict:
        """Round JSON plus live progress."""
        with self._lock:
            state = self._require_round(round_id)
            chosen = state.chosen_ids
            return {
                **state.round_json,
                "status": state.status,
                "progress": {
                    "annotated": sum(1 for pid in chosen if pid in state.annotations),
                    "total": len(chosen),
                },
            }

    def pair_states(self, round_id: str, status: str = "all") -> list[dict]:
        """Chosen pairs with their annotation state, pending first."""
        if status not in ("all", "pending", "annotated"):
            raise AnnotationError(f"unknown pair status filter {status!r}")
        with self._lock:
            state = self._require_round(round_id)
            details = state.round_json.get("pairs", {})
            rows = []
            for pid in state.chosen_ids:
                record = state.annotations.get(pid)
                row = {
                    "pair_id": pid,
                    "ref": details.get(pid, {}).get("ref"),
                    "tgt": details.get(pid, {}).get("tgt"),
                    "score": details.get(pid, {}).get("score"),
                    "category": details.get(pid, {}).get("category"),
                    "status": "annotated" if record else "pending",
                    "annotation": record.to_json() if record else None,
                }
                rows.append(row)
            rows.sort(key=lambda r: (r["status"] != "pending", r["pair_id"]))
            if status == "all":
                return rows
            return [r for r in rows if r["status"] == status]

    def annotations(self, round_id: str) -> dict[str, AnnotationRecord]:
        with self._lock:
            return dict(self._require_round(round_id).annotations)

    # -- mutations ----------------------------------------------------------

    def create_round(self, round_: SelectionRound | dict) -> str:
        round_json = round_.to_json() if isinstance(round_, SelectionRound) else round_
        round_id = round_json.get("round_id")
        if not round_id:
            raise AnnotationError("round is missing round_id")
        if not round_json.get("categories"):
            raise AnnotationError("round has no categories")
        with self._lock:
            if round_id in self._rounds:
                raise DuplicateRound(f"round {round_id!r} already exists")
            stored = dict(round_json)
            stored["status"] = "annotating"
            self._append("round_created", {"round": stored})
        return round_id

    def submit_annotation(
        self,
        round_id: str,
        pair_id: str,
        text: str,
        annotator_id: str,
        nonce: str | None = None,
    ) -> AnnotationRecord:
        """Record a modification text for a chosen pair.

        A repeated (pair, nonce) submission returns the original record
        without appending (client retries stay exactly-once); a fresh
        submission for an already-annotated pair appends a revision.
        """
        trimmed = (text or "").strip()
        if not trimmed:
            raise AnnotationError(f"empty annotation text for pair {pair_id!r}")
        if not annotator_id or not annotator_id.strip():
            raise AnnotationError("annotator id must be nonempty")
        with self._lock:
            state = self._require_round(round_id)
            if state.status == "exported":
                raise RoundReadOnly(f"round {round_id!r} is exported and read-only")
            if pair_id not in state.chosen_ids:
                raise UnknownPair(f"pair {pair_id!r} is not part of round {round_id!r}")
            if nonce and (pair_id, nonce) in state.nonces:
                return state.annotations[pair_id]
            etype = "annotation_revised" if pair_id in state.annotations else "annotation_submitted"
            data = {
                "round_id": round_id,
                "pair_id": pair_id,
                "text": trimmed,
                "annotator": annotator_id.strip(),
                "submitted_at": datetime.now(timezone.utc).isoformat(timespec="microseconds"),
            }
            if nonce:
                data["nonce"] = nonce
            self._append(etype, data)
            return state.annotations[pair_id]

    def export_round(self, round_id: str) -> list[dict]:
        """Completed triplets of a fully annotated round, as manifest rows.

        Rows follow the pseudo-triplet manifest schema with the human text:
        {"ref", "text", "tgt"}, ordered by (category, pair_id).  Exporting
        twice returns identical rows; the first call flips the round to
        read-only.
        """
        with self._lock:
            state = self._require_round(round_id)
            chosen = state.chosen_ids
            missing = sorted(pid for pid in chosen if pid not in state.annotations)
            if missing:
                raise IncompleteRound(
                    f"round {round_id!r} has {len(missing)} unannotated pair(s): "
                    + ", ".join(missing)
                )
            if state.status != "exported":
                self._append("round_exported", {"round_id": round_id})
            details = state.round_json.get("pairs", {})
            rows = []
            for pid in chosen:
                detail = details.get(pid, {})
                rows.append(
                    {
                        "pair_id": pid,
                        "category": detail.get("category"),
                        "ref": detail.get("ref"),
                        "text": state.annotations[pid].modification_text,
                        "tgt": detail.get("tgt"),
                    }
                )
            rows.sort(key=lambda r: (r["category"] or "", r["pair_id"]))
            return rows


def manifest_bytes(rows: list[dict]) -> bytes:
    """Canonical JSONL encoding of exported triplet rows."""
    out = []
    for row in rows:
        out.append(
            json.dumps(
                {"ref": row["ref"], "text": row["text"], "tgt": row["tgt"]},
                ensure_ascii=False,
                sort_keys=True,
            )
        )
    return ("\n".join(out) + "\n").encode("utf-8")
