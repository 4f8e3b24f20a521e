"""File interchange: NPY v1.0 arrays, 8-bit PNG masks, JSON dataset manifests.

Arrays travel as NPY version (1, 0) files with "<f8" or "<f4" payloads;
32-bit files are widened to 64-bit on load. Masks may also arrive as 8-bit
single-channel PNGs, where any nonzero pixel is treated as inside the region.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from numpy.lib import format as npy_format
from PIL import Image, UnidentifiedImageError

from .errors import LoadError
from .tensors import BinaryMask, Heatmap, ImageTensor

Array = Union[Heatmap, BinaryMask, ImageTensor]

_KIND_RANK = {"heatmap": 2, "mask": 2, "image": 3}


def write_array(path, array: Array) -> None:
    """Write a toolkit array as an NPY v1.0 file."""
    values = np.ascontiguousarray(array.values, dtype=np.float64)
    with open(path, "wb") as fh:
        npy_format.write_array(fh, values, version=(1, 0), allow_pickle=False)


def read_array(path, kind: str) -> Array:
    """Load an array file as one of the toolkit types.

    Parameters
    ----------
    path : file path, ``.npy`` for any kind, additionally ``.png`` for masks.
    kind : one of ``"heatmap"``, ``"mask"``, ``"image"``.
    """
    if kind not in _KIND_RANK:
        raise ValueError(f"unknown array kind {kind!r}")
    path = Path(path)
    if path.suffix.lower() == ".png":
        if kind != "mask":
            raise LoadError(f"{path}: PNG input is only supported for masks")
        return _read_png_mask(path)
    values = _read_npy(path)
    if values.ndim != _KIND_RANK[kind]:
        raise LoadError(
            f"{path}: rank mismatch, {kind} requires {_KIND_RANK[kind]} dims, file has {values.ndim}"
        )
    if not np.isfinite(values).all():
        raise LoadError(f"{path}: array contains non-finite values")
    if kind == "heatmap":
        return Heatmap(values)
    if kind == "mask":
        return BinaryMask.from_threshold(values)
    return ImageTensor(values)


def _read_npy(path: Path) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            values = np.load(fh, allow_pickle=False)
    except FileNotFoundError:
        raise LoadError(f"{path}: file not found") from None
    except (ValueError, OSError, EOFError) as exc:
        raise LoadError(f"{path}: malformed array file ({exc})") from exc
    if values.dtype == np.float32:
        values = values.astype(np.float64)
    elif values.dtype != np.float64:
        raise LoadError(f"{path}: unsupported dtype {values.dtype}, expected <f8 or <f4")
    return np.ascontiguousarray(values)


def _read_png_mask(path: Path) -> BinaryMask:
    try:
        with Image.open(path) as img:
            if img.mode == "1":
                img = img.convert("L")
            if img.mode != "L":
                raise LoadError(f"{path}: mask PNG must be 8-bit single-channel, got mode {img.mode}")
            values = np.asarray(img, dtype=np.float64)
    except FileNotFoundError:
        raise LoadError(f"{path}: file not found") from None
    except UnidentifiedImageError as exc:
        raise LoadError(f"{path}: not a decodable PNG") from exc
    return BinaryMask.from_threshold(values)


@dataclass(frozen=True)
class DatasetRecord:
    """One manifest row; paths are resolved relative to the manifest file."""

    image_id: str
    image_path: Path
    mask_path: Path | None
    label: int
    split: str


def load_dataset_manifest(path) -> list[DatasetRecord]:
    """Read a dataset manifest: a JSON list of {image_path, mask_path, label, split}."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except FileNotFoundError:
        raise LoadError(f"{path}: manifest not found") from None
    except json.JSONDecodeError as exc:
        raise LoadError(f"{path}: manifest is not valid JSON ({exc})") from exc
    rows = payload.get("records") if isinstance(payload, dict) else payload
    if not isinstance(rows, list):
        raise LoadError(f"{path}: manifest must contain a list of records")
    base = path.parent
    records = []
    for i, row in enumerate(rows):
        try:
            image_path = base / row["image_path"]
            mask_path = base / row["mask_path"] if row.get("mask_path") else None
            label = int(row["label"])
            split = str(row["split"])
        except (KeyError, TypeError, ValueError) as exc:
            raise LoadError(f"{path}: record {i} is malformed ({exc})") from exc
        image_id = str(row.get("image_id") or Path(row["image_path"]).stem)
        records.append(DatasetRecord(image_id, image_path, mask_path, label, split))
    return records


def save_dataset_manifest(path, records: list[dict], extra: dict | None = None) -> None:
    """Write a dataset manifest; ``records`` hold manifest-relative paths."""
    payload = dict(extra or {})
    payload["records"] = records
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
