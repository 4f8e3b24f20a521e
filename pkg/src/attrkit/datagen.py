"""Synthetic desk-scale datasets: greyscale images with a class-dependent
intensity pattern planted inside a random rectangular or elliptical region,
paired with the exact binary mask of that region.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensors import BinaryMask, ImageTensor

BACKGROUND_NOISE_STD = 0.15
SIGNAL_STRENGTH = 0.7


@dataclass(frozen=True)
class GeneratedSample:
    image_id: str
    image: ImageTensor
    mask: BinaryMask
    label: int
    split: str


def _rect_mask(rng, height, width, area):
    aspect = rng.uniform(0.6, 1.6)
    rect_w = int(np.clip(round(np.sqrt(area * aspect)), 1, width))
    rect_h = int(np.clip(round(area / rect_w), 1, height))
    top = int(rng.integers(0, height - rect_h + 1))
    left = int(rng.integers(0, width - rect_w + 1))
    mask = np.zeros((height, width))
    mask[top:top + rect_h, left:left + rect_w] = 1.0
    return mask


def _ellipse_mask(rng, height, width, area):
    aspect = rng.uniform(0.6, 1.6)
    semi_x = np.sqrt(area * aspect / np.pi)
    semi_y = area / (np.pi * semi_x)
    semi_x = float(np.clip(semi_x, 1.0, width / 2))
    semi_y = float(np.clip(semi_y, 1.0, height / 2))
    cx = float(rng.uniform(semi_x, width - semi_x))
    cy = float(rng.uniform(semi_y, height - semi_y))
    ys = np.arange(height)[:, None] + 0.5
    xs = np.arange(width)[None, :] + 0.5
    inside = ((xs - cx) / semi_x) ** 2 + ((ys - cy) / semi_y) ** 2 <= 1.0
    return inside.astype(np.float64)


def generate_sample(
    seed: int,
    index: int,
    height: int,
    width: int,
    signal_area_fraction: float,
) -> GeneratedSample:
    """Deterministically build sample ``index`` of the dataset for ``seed``."""
    rng = np.random.default_rng([seed, index])
    label = index % 2
    area = signal_area_fraction * height * width
    if rng.integers(2) == 0:
        mask = _rect_mask(rng, height, width, area)
    else:
        mask = _ellipse_mask(rng, height, width, area)
    background = rng.normal(0.0, BACKGROUND_NOISE_STD, size=(height, width))
    # Class 0 brightens its region, class 1 darkens it; texture inside keeps
    # the two polarities from being trivially symmetric.
    texture = 0.2 * rng.random((height, width))
    sign = 1.0 if label == 0 else -1.0
    values = background + mask * sign * (SIGNAL_STRENGTH + texture)
    values = np.clip(values, -1.0, 1.0)[None, :, :]
    return GeneratedSample(
        image_id=f"img_{index:05d}",
        image=ImageTensor(values),
        mask=BinaryMask(mask),
        label=label,
        split="test",
    )


def generate_dataset(
    seed: int,
    n_images: int,
    height: int,
    width: int,
    signal_area_fraction: float,
) -> list[GeneratedSample]:
    if not 0.0 < signal_area_fraction < 1.0:
        raise ValueError("signal_area_fraction must lie strictly between 0 and 1")
    if n_images < 1 or height < 2 or width < 2:
        raise ValueError("need n_images >= 1 and at least 2x2 images")
    return [
        generate_sample(seed, i, height, width, signal_area_fraction)
        for i in range(n_images)
    ]
