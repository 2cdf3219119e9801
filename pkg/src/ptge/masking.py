"""Patch-mask planning and application.

An image is resized, divided into a grid of patches, and a fixed fraction of
patches is blanked out; the masked copy serves as the reference image of a
pseudo triplet while the original is the target.  Plans are a pure function
of (image id, seed, config): the patch draw runs on the pinned Philox stream
keyed by ``sha256_64(image_id) XOR seed``, so plans reproduce across
machines and runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ptge import PtgeError
from ptge.rng import PinnedRNG, stable_hash64

FILL_MODES = ("black", "mean_color")


class MaskingError(PtgeError):
    """Invalid mask configuration, plan, or image."""


@dataclass(frozen=True)
class MaskConfig:
    grid_rows: int = 8
    grid_cols: int = 8
    mask_ratio: float = 0.75
    fill: str = "black"
    resize_to: tuple[int, int] = (256, 256)

    def __post_init__(self):
        if self.grid_rows <= 0 or self.grid_cols <= 0:
            raise MaskingError("grid dimensions must be positive")
        if not 0.0 < self.mask_ratio < 1.0:
            raise MaskingError(f"mask_ratio must be in (0, 1), got {self.mask_ratio}")
        if self.fill not in FILL_MODES:
            raise MaskingError(f"fill must be one of {FILL_MODES}, got {self.fill!r}")
        width, height = self.resize_to
        if width <= 0 or height <= 0:
            raise MaskingError("resize_to dimensions must be positive")
        if width % self.grid_cols or height % self.grid_rows:
            raise MaskingError(
                f"resize_to {self.resize_to} not divisible by grid "
                f"{self.grid_rows}x{self.grid_cols}"
            )

    @property
    def n_patches(self) -> int:
        return self.grid_rows * self.grid_cols

    @property
    def n_masked(self) -> int:
        return round(self.mask_ratio * self.n_patches)


@dataclass(frozen=True)
class MaskPlan:
    grid_rows: int
    grid_cols: int
    masked_indices: tuple[int, ...]
    seed: int = 0

    def __post_init__(self):
        n = self.grid_rows * self.grid_cols
        if len(set(self.masked_indices)) != len(self.masked_indices):
            raise MaskingError("masked_indices contains duplicates")
        if any(i < 0 or i >= n for i in self.masked_indices):
            raise MaskingError(f"masked index out of range [0, {n})")
        if tuple(sorted(self.masked_indices)) != tuple(self.masked_indices):
            raise MaskingError("masked_indices must be sorted")

    def to_json(self) -> dict:
        return {
            "grid_rows": self.grid_rows,
            "grid_cols": self.grid_cols,
            "masked_indices": list(self.masked_indices),
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, data: dict) -> "MaskPlan":
        return cls(
            grid_rows=data["grid_rows"],
            grid_cols=data["grid_cols"],
            masked_indices=tuple(data["masked_indices"]),
            seed=data.get("seed", 0),
        )


def plan_mask(image_id: str, config: MaskConfig, seed: int) -> MaskPlan:
    """Choose which patches to mask for one image, deterministically."""
    key = stable_hash64(image_id) ^ (seed & 0xFFFFFFFFFFFFFFFF)
    rng = PinnedRNG(key)
    indices = rng.sample_indices(config.n_patches, config.n_masked)
    return MaskPlan(
        grid_rows=config.grid_rows,
        grid_cols=config.grid_cols,
        masked_indices=tuple(sorted(indices)),
        seed=seed,
    )


def _load_rgb(image) -> Image.Image:
    if isinstance(image, (str, Path)):
        try:
            img = Image.open(image)
            img.load()
        except Exception as exc:
            raise MaskingError(f"cannot decode image {image}: {exc}") from None
    elif isinstance(image, Image.Image):
        img = image
    else:
        raise MaskingError(f"unsupported image input {type(image).__name__}")
    if img.width == 0 or img.height == 0:
        raise MaskingError("zero-area image")
    return img.convert("RGB")


def apply_mask(image, plan: MaskPlan, config: MaskConfig) -> Image.Image:
    """Resize, then blank every patch in the plan with the configured fill.

    Pixels outside masked patches are exactly the resized original, so
    reapplying the same plan is a no-op.
    """
    if (plan.grid_rows, plan.grid_cols) != (config.grid_rows, config.grid_cols):
        raise MaskingError(
            f"plan grid {plan.grid_rows}x{plan.grid_cols} does not match "
            f"config grid {config.grid_rows}x{config.grid_cols}"
        )
    img = _load_rgb(image).resize(config.resize_to, Image.BILINEAR)
    arr = np.asarray(img).copy()
    patch_h = config.resize_to[1] // config.grid_rows
    patch_w = config.resize_to[0] // config.grid_cols
    if config.fill == "black":
        fill = np.zeros(3, dtype=np.uint8)
    else:
        fill = arr.reshape(-1, 3).mean(axis=0).round().astype(np.uint8)
    for idx in plan.masked_indices:
        row, col = divmod(idx, config.grid_cols)
        arr[row * patch_h : (row + 1) * patch_h, col * patch_w : (col + 1) * patch_w] = fill
    return Image.fromarray(arr)
