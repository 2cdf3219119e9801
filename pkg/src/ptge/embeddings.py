"""Embedding vectors, tables, and their two on-disk formats.

Vectors are stored as float32; all similarity math accumulates in float64
(stable cosine near +-1).  Tables are immutable after load and safe for
concurrent reads.

Formats:

- JSONL (canonical interchange): one ``{"id": "...", "vec": [...]}`` object
  per line, UTF-8, LF line endings.
- Binary (large galleries): little-endian, magic ``PTGE``, u32 version=1,
  u32 dim, u64 count, then per record u32 id byte length, id bytes,
  dim float32 values.  Unknown magic or version is rejected.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from ptge import PtgeError
from ptge.kernels import dot_norms

MAGIC = b"PTGE"
BINARY_VERSION = 1


class EmbeddingError(PtgeError):
    """Invalid vector data or table file."""


class DimensionMismatch(EmbeddingError):
    """Vector dimensions disagree."""


class ZeroNormError(EmbeddingError):
    """A zero vector reached a cosine computation."""


def as_vector(values, *, what: str = "vector") -> np.ndarray:
    """Coerce to a validated C-contiguous float32 1-D array."""
    arr = np.ascontiguousarray(values, dtype=np.float32)
    if arr.ndim != 1 or arr.size == 0:
        raise EmbeddingError(f"{what} must be a nonempty 1-D sequence")
    if not np.all(np.isfinite(arr)):
        raise EmbeddingError(f"{what} contains a non-finite value")
    return arr


class EmbeddingVector:
    """Fixed-dimension float32 vector (one item's feature)."""

    __slots__ = ("values",)

    def __init__(self, values):
        self.values = as_vector(values)
        self.values.flags.writeable = False

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def __eq__(self, other) -> bool:
        return isinstance(other, EmbeddingVector) and np.array_equal(
            self.values, other.values
        )

    def __repr__(self) -> str:
        return f"EmbeddingVector(dim={self.dim})"


class EmbeddingTable:
    """Immutable map from item id to an EmbeddingVector, all one dimension."""

    def __init__(self, dim: int):
        if dim <= 0:
            raise EmbeddingError(f"table dim must be positive, got {dim}")
        self.dim = dim
        self._entries: dict[str, np.ndarray] = {}

    @classmethod
    def from_entries(cls, entries: Iterable[tuple[str, object]]) -> "EmbeddingTable":
        """Build a table, inferring dim from the first entry."""
        table = None
        for item_id, values in entries:
            if table is None:
                first = as_vector(values, what=f"vector for id {item_id!r}")
                table = cls(first.shape[0])
                table._add(item_id, first)
            else:
                table._add(item_id, values)
        if table is None:
            raise EmbeddingError("cannot build a table from zero entries")
        return table

    def _add(self, item_id: str, values) -> None:
        if not item_id:
            raise EmbeddingError("item id must be a nonempty string")
        if item_id in self._entries:
            raise EmbeddingError(f"duplicate id {item_id!r}")
        arr = as_vector(values, what=f"vector for id {item_id!r}")
        if arr.shape[0] != self.dim:
            raise DimensionMismatch(
                f"id {item_id!r} has dim {arr.shape[0]}, table dim is {self.dim}"
            )
        arr.flags.writeable = False
        self._entries[item_id] = arr

    def get(self, item_id: str) -> EmbeddingVector:
        try:
            raw = self._entries[item_id]
        except KeyError:
            raise EmbeddingError(f"unknown id {item_id!r}") from None
        vec = EmbeddingVector.__new__(EmbeddingVector)
        vec.values = raw
        return vec

    def raw(self, item_id: str) -> np.ndarray:
        """The stored float32 array (read-only view), without wrapper cost."""
        try:
            return self._entries[item_id]
        except KeyError:
            raise EmbeddingError(f"unknown id {item_id!r}") from None

    def ids(self) -> list[str]:
        return sorted(self._entries)

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        for item_id in sorted(self._entries):
            yield item_id, self._entries[item_id]

    def __contains__(self, item_id: str) -> bool:
        return item_id in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def digest(self) -> str:
        """SHA-256 over sorted (id, vector bytes); provenance fingerprint."""
        h = hashlib.sha256()
        for item_id, arr in self.items():
            h.update(item_id.encode("utf-8"))
            h.update(b"\x00")
            h.update(arr.tobytes())
        return h.hexdigest()


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two nonzero vectors, in [-1, 1].

    Accumulates in float64; the result is clamped so rounding can never push
    it outside the declared range.
    """
    av = a.values if isinstance(a, EmbeddingVector) else as_vector(a, what="a")
    bv = b.values if isinstance(b, EmbeddingVector) else as_vector(b, what="b")
    if av.shape[0] != bv.shape[0]:
        raise DimensionMismatch(
            f"dim mismatch: {av.shape[0]} vs {bv.shape[0]}"
        )
    dot, sq_a, sq_b = dot_norms(av, bv)
    if sq_a == 0.0 or sq_b == 0.0:
        raise ZeroNormError("cosine is undefined for a zero vector")
    cos = dot / (np.sqrt(sq_a) * np.sqrt(sq_b))
    return float(min(1.0, max(-1.0, cos)))


def _infer_format(path: Path) -> str:
    return "binary" if path.suffix == ".ptge" else "jsonl"


def load_table(path: str | Path, format: str | None = None) -> EmbeddingTable:
    """Load and validate a table; format inferred from the extension if omitted.

    Errors name the offending id (dim mismatch, duplicates, non-finite
    values) or the line/offset of a malformed record.
    """
    path = Path(path)
    fmt = format or _infer_format(path)
    if fmt == "jsonl":
        return _load_jsonl(path)
    if fmt == "binary":
        return _load_binary(path)
    raise EmbeddingError(f"unknown table format {fmt!r}")


def save_table(table: EmbeddingTable, path: str | Path, format: str | None = None) -> None:
    path = Path(path)
    fmt = format or _infer_format(path)
    if fmt == "jsonl":
        _save_jsonl(table, path)
    elif fmt == "binary":
        _save_binary(table, path)
    else:
        raise EmbeddingError(f"unknown table format {fmt!r}")


def _load_jsonl(path: Path) -> EmbeddingTable:
    table: EmbeddingTable | None = None
    with open(path, "rb") as fh:
        for lineno, raw_line in enumerate(fh, start=1):
            line = raw_line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise EmbeddingError(f"{path}: line {lineno}: malformed JSON: {exc}") from None
            if not isinstance(record, dict) or "id" not in record or "vec" not in record:
                raise EmbeddingError(f"{path}: line {lineno}: record needs 'id' and 'vec'")
            item_id = record["id"]
            if not isinstance(item_id, str) or not item_id:
                raise EmbeddingError(f"{path}: line {lineno}: id must be a nonempty string")
            try:
                if table is None:
                    first = as_vector(record["vec"], what=f"vector for id {item_id!r}")
                    table = EmbeddingTable(first.shape[0])
                    table._add(item_id, first)
                else:
                    table._add(item_id, record["vec"])
            except EmbeddingError as exc:
                raise type(exc)(f"{path}: line {lineno}: {exc}") from None
    if table is None:
        raise EmbeddingError(f"{path}: no records")
    return table


def _save_jsonl(table: EmbeddingTable, path: Path) -> None:
    with open(path, "wb") as fh:
        for item_id, arr in table.items():
            row = {"id": item_id, "vec": [float(v) for v in arr]}
            fh.write(json.dumps(row, ensure_ascii=False).encode("utf-8"))
            fh.write(b"\n")


def _load_binary(path: Path) -> EmbeddingTable:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise EmbeddingError(f"{path}: bad magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < 20:
        raise EmbeddingError(f"{path}: truncated header")
    version, dim = struct.unpack_from("<II", data, 4)
    if version != BINARY_VERSION:
        raise EmbeddingError(f"{path}: unsupported version {version}")
    (count,) = struct.unpack_from("<Q", data, 12)
    table = EmbeddingTable(dim)
    offset = 20
    vec_bytes = dim * 4
    for i in range(count):
        if offset + 4 > len(data):
            raise EmbeddingError(f"{path}: truncated at record {i} (offset {offset})")
        (id_len,) = struct.unpack_from("<I", data, offset)
        offset += 4
        if offset + id_len + vec_bytes > len(data):
            raise EmbeddingError(f"{path}: truncated at record {i} (offset {offset})")
        item_id = data[offset : offset + id_len].decode("utf-8")
        offset += id_len
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).copy()
        offset += vec_bytes
        table._add(item_id, vec)
    if offset != len(data):
        raise EmbeddingError(f"{path}: {len(data) - offset} trailing bytes")
    return table


def _save_binary(table: EmbeddingTable, path: Path) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIQ", BINARY_VERSION, table.dim, len(table)))
        for item_id, arr in table.items():
            encoded = item_id.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(arr.astype("<f4", copy=False).tobytes())
