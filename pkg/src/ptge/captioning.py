"""Caption acquisition: remote caption service, caption file, or local stub.

The rest of the pipeline never cares where a caption came from.  Captions
are keyed by image content hash (files get renamed; bytes do not), and
remote results are cached to a JSONL file so re-runs are free and
deterministic.

Remote wire protocol: ``POST {endpoint}/caption`` with ``{"image_b64":
"<base64 PNG>"}``; the only accepted reply is HTTP 200 with ``{"caption":
"<string>"}``.  Cache rows are ``{"hash": "<hex sha-256>", "caption":
"<string>"}``.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import requests
from PIL import Image

from ptge import PtgeError

_STUB_SUBJECTS = (
    "bird", "dress", "lamp", "bicycle", "teapot", "jacket", "boat", "chair",
    "flower", "clock", "guitar", "kettle", "mirror", "carpet", "helmet", "vase",
)
_STUB_TRAITS = (
    "striped", "weathered", "glossy", "pale", "angular", "ornate", "faded",
    "compact", "curved", "patterned", "matte", "speckled", "slender", "bold",
    "woven", "tinted",
)
_STUB_SETTINGS = (
    "on a wooden table", "against a plain wall", "in soft light", "outdoors",
    "on a shelf", "near a window", "on grass", "in a studio",
)


class CaptionError(PtgeError):
    """Caption could not be obtained."""


@dataclass(frozen=True)
class Caption:
    image_id: str
    text: str
    source: str  # "remote" | "stub" | "file"

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise CaptionError(f"empty caption for image {self.image_id!r}")
        object.__setattr__(self, "text", self.text.strip())


@dataclass(frozen=True)
class CaptionerConfig:
    endpoint: str = "stub"  # "stub", an http(s) URL, or a caption-file path
    timeout: float = 30.0
    retries: int = 2
    cache_path: str | Path | None = None
    max_in_flight: int = 4

    def __post_init__(self):
        if self.retries < 0:
            raise CaptionError("retries must be >= 0")
        if self.max_in_flight < 1:
            raise CaptionError("max_in_flight must be >= 1")

    @property
    def mode(self) -> str:
        if self.endpoint == "stub":
            return "stub"
        if self.endpoint.startswith(("http://", "https://")):
            return "remote"
        return "file"


def _image_bytes(image) -> bytes:
    """PNG-encoded bytes for hashing and transport."""
    if isinstance(image, (str, Path)):
        return Path(image).read_bytes()
    if isinstance(image, Image.Image):
        buf = io.BytesIO()
        image.save(buf, format="PNG")
        return buf.getvalue()
    if isinstance(image, bytes):
        return image
    raise CaptionError(f"unsupported image input {type(image).__name__}")


def _default_id(image) -> str:
    if isinstance(image, (str, Path)):
        return Path(image).stem
    return "<in-memory>"


def stub_caption_text(content_hash: str) -> str:
    """Deterministic pseudo-caption; encodes the content hash so tests can
    tell captions of different images apart."""
    h = bytes.fromhex(content_hash[:8])
    trait = _STUB_TRAITS[h[0] % len(_STUB_TRAITS)]
    subject = _STUB_SUBJECTS[h[1] % len(_STUB_SUBJECTS)]
    setting = _STUB_SETTINGS[h[2] % len(_STUB_SETTINGS)]
    return f"a {trait} {subject} {setting} [{content_hash[:12]}]"


class Captioner:
    """Caption client with content-hash caching and bounded concurrency."""

    def __init__(self, config: CaptionerConfig):
        self.config = config
        self._cache: dict[str, str] = {}
        self._cache_lock = threading.Lock()
        self._file_captions: dict[str, str] | None = None
        if config.cache_path is not None:
            self._load_cache(Path(config.cache_path))
        if config.mode == "file":
            self._file_captions = self._load_caption_file(Path(config.endpoint))

    def _load_cache(self, path: Path) -> None:
        if not path.exists():
            return
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                self._cache[row["hash"]] = row["caption"]

    @staticmethod
    def _load_caption_file(path: Path) -> dict[str, str]:
        if not path.exists():
            raise CaptionError(f"caption file {path} does not exist")
        captions: dict[str, str] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    row = json.loads(line)
                    captions[row["id"]] = row["caption"]
                except (json.JSONDecodeError, KeyError) as exc:
                    raise CaptionError(f"{path}: line {lineno}: {exc}") from None
        return captions

    def _cache_put(self, content_hash: str, text: str) -> None:
        with self._cache_lock:
            if content_hash in self._cache:
                return
            self._cache[content_hash] = text
            if self.config.cache_path is not None:
                with open(self.config.cache_path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps({"hash": content_hash, "caption": text}) + "\n")

    def _fetch_remote(self, png_bytes: bytes, image_id: str) -> str:
        body = {"image_b64": base64.b64encode(png_bytes).decode("ascii")}
        url = self.config.endpoint.rstrip("/") + "/caption"
        last_error = None
        for attempt in range(self.config.retries + 1):
            if attempt:
                time.sleep(min(0.1 * 2 ** (attempt - 1), 2.0))
            try:
                resp = requests.post(url, json=body, timeout=self.config.timeout)
            except requests.RequestException as exc:
                last_error = f"request failed: {exc}"
                continue
            if resp.status_code != 200:
                last_error = f"HTTP {resp.status_code}"
                continue
            try:
                text = resp.json().get("caption", "")
            except ValueError:
                last_error = "non-JSON response"
                continue
            if not isinstance(text, str) or not text.strip():
                last_error = "empty caption in response"
                continue
            return text.strip()
        raise CaptionError(
            f"captioning {image_id!r} failed after {self.config.retries + 1} "
            f"attempts: {last_error}"
        )

    def caption(self, image, image_id: str | None = None) -> Caption:
        """Caption one image (path, PIL image, or raw bytes)."""
        image_id = image_id or _default_id(image)
        mode = self.config.mode
        if mode == "file":
            assert self._file_captions is not None
            try:
                return Caption(image_id=image_id, text=self._file_captions[image_id], source="file")
            except KeyError:
                raise CaptionError(f"no caption for id {image_id!r} in {self.config.endpoint}") from None
        content = _image_bytes(image)
        content_hash = hashlib.sha256(content).hexdigest()
        if mode == "stub":
            return Caption(image_id=image_id, text=stub_caption_text(content_hash), source="stub")
        cached = self._cache.get(content_hash)
        if cached is not None:
            return Caption(image_id=image_id, text=cached, source="remote")
        text = self._fetch_remote(content, image_id)
        self._cache_put(content_hash, text)
        return Caption(image_id=image_id, text=text, source="remote")

    def caption_many(self, items: list) -> list[Caption]:
        """Caption (image, image_id) pairs with bounded in-flight requests.

        Results come back in input order; the first failure is raised.
        """
        with ThreadPoolExecutor(max_workers=self.config.max_in_flight) as pool:
            futures = [pool.submit(self.caption, image, image_id) for image, image_id in items]
            return [f.result() for f in futures]


def caption(image, config: CaptionerConfig, image_id: str | None = None) -> Caption:
    """One-shot convenience wrapper around :class:`Captioner`."""
    return Captioner(config).caption(image, image_id)
