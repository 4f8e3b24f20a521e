"""Dense array types and the small numeric kernels every other module uses.

All values are 64-bit floats internally; constructors copy their input and
freeze it, so instances are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NumericError, ShapeError


@dataclass(frozen=True, eq=False)
class Heatmap:
    """Signed per-pixel attribution map.

    values : 2-D float array, one signed attribution score per pixel.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise ShapeError(f"heatmap must be a non-empty 2-D array, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise NumericError("heatmap contains non-finite values")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Ground-truth region as a strict {0, 1} pixel grid."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise ShapeError(f"mask must be a non-empty 2-D array, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise NumericError("mask contains non-finite values")
        if not np.isin(arr, (0.0, 1.0)).all():
            raise NumericError("mask values must be exactly 0 or 1")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_threshold(cls, values) -> "BinaryMask":
        """Build a mask from arbitrary finite values; any nonzero becomes 1."""
        arr = np.asarray(values, dtype=np.float64)
        if not np.isfinite(arr).all():
            raise NumericError("mask source contains non-finite values")
        return cls((arr != 0.0).astype(np.float64))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def area(self) -> int:
        """Number of pixels inside the region."""
        return int(self.values.sum())

    def complement(self) -> "BinaryMask":
        return BinaryMask(1.0 - self.values)


@dataclass(frozen=True, eq=False)
class ImageTensor:
    """Channels-first image, shape (channels, height, width)."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[0] < 1 or arr.shape[1] < 1 or arr.shape[2] < 1:
            raise ShapeError(f"image must be a 3-D (channels, h, w) array, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise NumericError("image contains non-finite values")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape


def _require_same_shape(a, b, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


class CorrelationResult(NamedTuple):
    value: float
    degenerate: bool


def pearson_correlation(a: Heatmap, b: Heatmap) -> CorrelationResult:
    """Sample Pearson r over the flattened maps.

    If either input has zero variance the correlation is undefined; the result
    is then 0 with ``degenerate`` set, which callers interpret per their own
    conventions.
    """
    _require_same_shape(a, b, "pearson_correlation")
    if a.values.size < 2:
        raise ShapeError("pearson_correlation needs at least 2 pixels")
    x = a.values.ravel()
    y = b.values.ravel()
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(np.sqrt((xc * xc).sum()))
    sy = float(np.sqrt((yc * yc).sum()))
    if sx == 0.0 or sy == 0.0:
        return CorrelationResult(0.0, True)
    r = float((xc * yc).sum() / (sx * sy))
    return CorrelationResult(min(1.0, max(-1.0, r)), False)


def l2_distance(a: Heatmap, b: Heatmap, normalized: bool = True) -> float:
    """Euclidean distance between two maps.

    With ``normalized`` each map is min-max scaled to [0, 1] first and the
    norm is divided by sqrt(h*w), giving a per-pixel RMS difference that is
    comparable across resolutions and attribution scales.
    """
    _require_same_shape(a, b, "l2_distance")
    if normalized:
        va = minmax_normalize(a).heatmap.values
        vb = minmax_normalize(b).heatmap.values
        return float(np.linalg.norm(va - vb) / np.sqrt(a.values.size))
    return float(np.linalg.norm(a.values - b.values))


class NormalizeResult(NamedTuple):
    heatmap: Heatmap
    degenerate: bool


def minmax_normalize(a: Heatmap) -> NormalizeResult:
    """Affinely rescale to [0, 1]; a constant map becomes all zeros (flagged)."""
    lo = float(a.values.min())
    hi = float(a.values.max())
    if hi == lo:
        return NormalizeResult(Heatmap(np.zeros_like(a.values)), True)
    return NormalizeResult(Heatmap((a.values - lo) / (hi - lo)), False)


def _sample_positions(n_out: int, n_in: int) -> np.ndarray:
    # Half-pixel-center convention: output sample i sits at (i + 0.5) * scale - 0.5
    # in source coordinates, clamped to the valid range.
    scale = n_in / n_out
    pos = (np.arange(n_out, dtype=np.float64) + 0.5) * scale - 0.5
    return np.clip(pos, 0.0, n_in - 1.0)


def bilinear_upsample(a: Heatmap, out_h: int, out_w: int) -> Heatmap:
    """Bilinearly resample ``a`` up to (out_h, out_w)."""
    if out_h <= 0 or out_w <= 0:
        raise ShapeError("bilinear_upsample: target size must be positive")
    h, w = a.shape
    if out_h < h or out_w < w:
        raise ShapeError(f"bilinear_upsample: target {(out_h, out_w)} smaller than source {(h, w)}")
    rows = _sample_positions(out_h, h)
    cols = _sample_positions(out_w, w)
    r0 = np.floor(rows).astype(np.intp)
    c0 = np.floor(cols).astype(np.intp)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = (rows - r0)[:, None]
    fc = (cols - c0)[None, :]
    v = a.values
    top = v[r0][:, c0] * (1.0 - fc) + v[r0][:, c1] * fc
    bot = v[r1][:, c0] * (1.0 - fc) + v[r1][:, c1] * fc
    return Heatmap(top * (1.0 - fr) + bot * fr)
