"""Assembly of pseudo training triplets from a pure image corpus.

For every image: plan a patch mask, write the masked copy, caption the
ORIGINAL image (the caption has to describe what the mask hid, so it acts
as the modification text that "restores" the obscured content), and emit
one (masked reference, caption, original target) triplet.  The manifest is
deterministic given (corpus, seed, config) and is the contract consumed by
external backbone training scripts.

Manifest rows: ``{"ref": "<masked img path>", "text": "<caption>", "tgt":
"<original img path>", "plan": {...}}`` with paths relative to the manifest
file, one row per triplet, ordered by source image id.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from ptge import PtgeError
from ptge.captioning import Captioner, CaptionerConfig
from ptge.masking import MaskConfig, MaskPlan, apply_mask, plan_mask
from ptge.rng import derive_key

logger = logging.getLogger(__name__)

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp"}


class CorpusError(PtgeError):
    """Empty corpus or too many per-image failures."""


@dataclass(frozen=True)
class ItemRef:
    id: str
    kind: str  # "image" | "masked_image" | "text"
    path: str = ""

    def __post_init__(self):
        if not self.id:
            raise CorpusError("item id must be nonempty")


@dataclass(frozen=True)
class PseudoTriplet:
    reference: ItemRef  # masked image
    modification_text: str
    target: ItemRef  # original image
    plan: MaskPlan

    def __post_init__(self):
        if not self.modification_text.strip():
            raise CorpusError(f"triplet for {self.target.id!r} has empty text")


@dataclass(frozen=True)
class TripletManifest:
    triplets: tuple[PseudoTriplet, ...]
    corpus_id: str
    seed: int
    mask_config: MaskConfig


def _corpus_images(image_dir: Path) -> list[Path]:
    if not image_dir.is_dir():
        raise CorpusError(f"image directory {image_dir} does not exist")
    return sorted(
        p for p in image_dir.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
    )


def build_pseudo_triplets(
    image_dir: str | Path,
    out_dir: str | Path,
    mask_config: MaskConfig | None = None,
    captioner_config: CaptionerConfig | None = None,
    seed: int = 0,
    variants: int = 1,
    failure_threshold: float = 0.1,
    workers: int = 4,
) -> TripletManifest:
    """Build one triplet per source image (or `variants` differently-seeded
    maskings per image) and write masked PNGs plus plan sidecars to out_dir.

    Per-image failures are logged and skipped; if more than
    failure_threshold of the corpus fails, the whole build errors out.
    """
    image_dir = Path(image_dir)
    out_dir = Path(out_dir)
    mask_config = mask_config or MaskConfig()
    captioner = Captioner(captioner_config or CaptionerConfig())
    if variants < 1:
        raise CorpusError(f"variants must be >= 1, got {variants}")

    images = _corpus_images(image_dir)
    if not images:
        raise CorpusError(f"empty corpus: no images in {image_dir}")
    masked_dir = out_dir / "masked"
    masked_dir.mkdir(parents=True, exist_ok=True)

    def build_one(path: Path) -> list[PseudoTriplet]:
        image_id = path.stem
        caption = captioner.caption(path, image_id)
        out: list[PseudoTriplet] = []
        for variant in range(variants):
            if variant == 0:
                variant_seed = seed
                ref_id = f"{image_id}#masked"
            else:
                variant_seed = derive_key("variant", seed, variant)
                ref_id = f"{image_id}#masked{variant}"
            plan = plan_mask(image_id, mask_config, variant_seed)
            masked = apply_mask(path, plan, mask_config)
            masked_path = masked_dir / f"{ref_id.replace('#', '_')}.png"
            masked.save(masked_path, format="PNG")
            sidecar = {"id": image_id, "seed": variant_seed, "masked_indices": list(plan.masked_indices)}
            with open(masked_path.with_suffix(".plan.json"), "w", encoding="utf-8") as fh:
                json.dump(sidecar, fh, sort_keys=True)
                fh.write("\n")
            out.append(
                PseudoTriplet(
                    reference=ItemRef(ref_id, "masked_image", str(masked_path)),
                    modification_text=caption.text,
                    target=ItemRef(image_id, "image", str(path)),
                    plan=plan,
                )
            )
        return out

    triplets: list[PseudoTriplet] = []
    failures: list[tuple[str, str]] = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [(path, pool.submit(build_one, path)) for path in images]
        for path, future in futures:
            try:
                triplets.extend(future.result())
            except PtgeError as exc:
                failures.append((path.stem, str(exc)))
                logger.warning("skipped image %s: %s", path, exc)

    if len(failures) > failure_threshold * len(images):
        listing = "; ".join(f"{iid}: {msg}" for iid, msg in failures[:5])
        raise CorpusError(
            f"{len(failures)}/{len(images)} images failed "
            f"(threshold {failure_threshold:.0%}): {listing}"
        )
    triplets.sort(key=lambda t: (t.target.id, t.reference.id))
    return TripletManifest(
        triplets=tuple(triplets),
        corpus_id=image_dir.name,
        seed=seed,
        mask_config=mask_config,
    )


def save_manifest(manifest: TripletManifest, path: str | Path) -> None:
    """Write manifest JSONL; image paths are stored relative to the file."""
    path = Path(path)
    base = path.parent.resolve()
    with open(path, "w", encoding="utf-8") as fh:
        for triplet in manifest.triplets:
            row = {
                "ref": os.path.relpath(Path(triplet.reference.path).resolve(), base),
                "text": triplet.modification_text,
                "tgt": os.path.relpath(Path(triplet.target.path).resolve(), base),
                "plan": triplet.plan.to_json(),
            }
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


def load_manifest_rows(path: str | Path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}: line {lineno}: {exc}") from None
    return rows
