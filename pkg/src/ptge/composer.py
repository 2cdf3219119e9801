"""Composed-query embeddings: precomputed tables from a real model, or a toy
linear composer for tests and demos.

Real deployments export composite vectors offline from whatever retrieval
backbone they pretrained and feed them in as a table keyed by
``"<ref_id>|<text_hash>"`` (see :func:`composite_key`).  The toy backend
exists so the whole downstream pipeline can run end to end without any
neural model; its blend-then-normalize form is a stand-in, not a model.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from ptge import PtgeError
from ptge.embeddings import EmbeddingTable, EmbeddingVector
from ptge.rng import PinnedRNG, derive_key


class ComposerError(PtgeError):
    """Invalid backend configuration or missing composition input."""


def text_key(text: str) -> str:
    """16-hex-char key for a modification text (sha-256 prefix)."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def composite_key(ref_image_id: str, text_id: str) -> str:
    """Table key under which a precomputed composite vector is stored."""
    return f"{ref_image_id}|{text_id}"


@dataclass
class ComposerBackend:
    mode: str  # "precomputed" | "toy"
    composites: EmbeddingTable | None = None
    images: EmbeddingTable | None = None
    texts: EmbeddingTable | None = None
    alpha: float = 0.5

    def __post_init__(self):
        if self.mode == "precomputed":
            if self.composites is None:
                raise ComposerError("precomputed backend requires a composite table")
        elif self.mode == "toy":
            if self.images is None or self.texts is None:
                raise ComposerError("toy backend requires image and text tables")
            if self.images.dim != self.texts.dim:
                raise ComposerError(
                    f"toy tables disagree on dim: images {self.images.dim}, "
                    f"texts {self.texts.dim}"
                )
            if not 0.0 < self.alpha < 1.0:
                raise ComposerError(f"alpha must be in (0, 1), got {self.alpha}")
        else:
            raise ComposerError(f"unknown composer mode {self.mode!r}")


def compose(
    pair_id: str, ref_image_id: str, text_id: str, backend: ComposerBackend
) -> EmbeddingVector:
    """Composed query vector f_c for a (reference image, text) pair.

    Precomputed mode returns the stored vector verbatim; toy mode returns
    normalize(alpha * f_ref + (1 - alpha) * f_text) with float64 blending.
    """
    if backend.mode == "precomputed":
        key = composite_key(ref_image_id, text_id)
        if key not in backend.composites:
            raise ComposerError(
                f"pair {pair_id!r}: no composite for key {key!r}"
            )
        return backend.composites.get(key)
    f_ref = backend.images.raw(ref_image_id).astype(np.float64)
    f_text = backend.texts.raw(text_id).astype(np.float64)
    blend = backend.alpha * f_ref + (1.0 - backend.alpha) * f_text
    norm_sq = 0.0
    for v in blend.tolist():
        norm_sq += v * v
    if norm_sq == 0.0:
        raise ComposerError(f"pair {pair_id!r}: toy composite is the zero vector")
    return EmbeddingVector((blend / math.sqrt(norm_sq)).astype(np.float32))


def synthesize_text_table(texts: list[str], dim: int, seed: int = 0) -> EmbeddingTable:
    """Deterministic pseudo-embeddings for caption texts, keyed by text_key.

    Demo plumbing for toy-backend runs when no real text encoder output is
    at hand: each text gets a unit vector drawn from the pinned stream keyed
    by its hash.
    """
    entries = []
    seen = set()
    for text in texts:
        tid = text_key(text)
        if tid in seen:
            continue
        seen.add(tid)
        rng = PinnedRNG(derive_key("synth-text", seed, tid))
        vec = np.array([rng.uniform() * 2.0 - 1.0 for _ in range(dim)])
        norm = float(np.sqrt((vec * vec).sum()))
        if norm == 0.0:  # astronomically unlikely; draw again deterministically
            vec[0] = 1.0
            norm = 1.0
        entries.append((tid, (vec / norm).astype(np.float32)))
    return EmbeddingTable.from_entries(entries)
