"""Reproducible random draws for mask plans and sampling.

Every randomized decision in the pipeline (which patches to mask, which
pairs to draw from a pool, k-means initialization) goes through
:class:`PinnedRNG`, which is pinned to a single fixed algorithm so that the
same inputs produce the same outputs on any machine:

- bit source: Philox4x64-10 counter-based generator, consumed through its
  raw 64-bit output stream (numpy guarantees bit-generator streams never
  change for a given key);
- keys: derived with SHA-256 from string/integer parts, see
  :func:`derive_key`;
- integers in a range: unbiased rejection sampling on the raw stream;
- sampling without replacement: partial Fisher-Yates driven by the above.

Higher-level numpy ``Generator`` methods are deliberately not used, since
their streams may change between numpy releases.
"""

from __future__ import annotations

import hashlib

import numpy as np

_U64 = 1 << 64
# Second Philox key word; arbitrary fixed constant so single-u64 keys
# occupy a distinct keyspace.
_KEY_PAD = 0x9E3779B97F4A7C15


def stable_hash64(text: str) -> int:
    """First 8 bytes of SHA-256(text), little-endian, as an unsigned 64-bit int."""
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_key(*parts: str | int) -> int:
    """Derive a 64-bit stream key from a sequence of labels and integers.

    Parts are length-prefixed before hashing so that ("ab", "c") and
    ("a", "bc") yield different keys.
    """
    h = hashlib.sha256()
    for part in parts:
        data = str(part).encode("utf-8")
        h.update(len(data).to_bytes(4, "little"))
        h.update(data)
    return int.from_bytes(h.digest()[:8], "little")


class PinnedRNG:
    """Deterministic RNG over the raw Philox4x64-10 stream for a 64-bit key."""

    def __init__(self, key: int):
        if not 0 <= key < _U64:
            raise ValueError(f"key must be an unsigned 64-bit integer, got {key}")
        self.key = key
        self._bits = np.random.Philox(key=[key, _KEY_PAD])
        self._buf: list[int] = []

    def u64(self) -> int:
        """Next raw 64-bit word."""
        if not self._buf:
            self._buf = [int(w) for w in self._bits.random_raw(64)]
            self._buf.reverse()
        return self._buf.pop()

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) without modulo bias."""
        if n <= 0:
            raise ValueError(f"n must be positive, got {n}")
        limit = (_U64 // n) * n
        while True:
            u = self.u64()
            if u < limit:
                return u % n

    def uniform(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.u64() >> 11) * (1.0 / (1 << 53))

    def sample_indices(self, n: int, k: int) -> list[int]:
        """Draw k distinct indices from range(n), partial Fisher-Yates order."""
        if k < 0 or k > n:
            raise ValueError(f"cannot sample {k} from {n}")
        idx = list(range(n))
        for i in range(k):
            j = i + self.randbelow(n - i)
            idx[i], idx[j] = idx[j], idx[i]
        return idx[:k]

    def sample(self, items: list, k: int) -> list:
        """Draw k distinct items without replacement."""
        return [items[i] for i in self.sample_indices(len(items), k)]
