"""Localization metrics for attribution maps against ground-truth masks.

Two scores are computed per (heatmap, mask) pair:

* rank accuracy — the fraction of the top-K attribution pixels (K = mask
  area) that land inside the region; rank-based, so it only sees ordering.
* dual-polarity precision — a mass-based score pairing the precision of
  positive attribution inside the region with the precision of negative
  attribution outside it. 0.5 is the expected value for random signed maps
  and the ceiling for maps with no negative mass.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import LoadError, NumericError, ShapeError
from .tensors import BinaryMask, Heatmap

DEFAULT_EPSILON = 1e-12

METRIC_FIELDS = ("rra", "p_pos", "p_neg", "dpp")

SCORE_CSV_HEADER = ("image_id", "model_id", "method_id", "seed", "rra", "p_pos", "p_neg", "dpp")


@dataclass(frozen=True)
class DppBreakdown:
    """The four attribution masses and the precisions derived from them."""

    tpa: float
    fpa: float
    tna: float
    fna: float
    p_pos: float
    p_neg: float
    dpp: float
    epsilon: float

    def __post_init__(self):
        masses = (self.tpa, self.fpa, self.tna, self.fna)
        if any(m < 0 for m in masses):
            raise NumericError("attribution masses must be non-negative")
        if self.dpp != (self.p_pos + self.p_neg) / 2.0:
            raise NumericError("dpp must equal the mean of p_pos and p_neg")


@dataclass(frozen=True)
class MaskStats:
    area: int
    ratio: float


@dataclass(frozen=True)
class ScoreRecord:
    """One (image, model, method, seed) evaluation row."""

    image_id: str
    model_id: str
    method_id: str
    seed: int
    rra: float
    dpp: DppBreakdown

    def __post_init__(self):
        for name in ("image_id", "model_id", "method_id"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")
        if not (math.isfinite(self.rra) and math.isfinite(self.dpp.dpp)):
            raise NumericError("scores must be finite")

    def metric(self, name: str) -> float:
        if name == "rra":
            return self.rra
        if name in ("p_pos", "p_neg", "dpp"):
            return getattr(self.dpp, name)
        raise KeyError(name)


def _check_pair(heatmap: Heatmap, mask: BinaryMask, op: str) -> None:
    if heatmap.shape != mask.shape:
        raise ShapeError(f"{op}: heatmap shape {heatmap.shape} != mask shape {mask.shape}")


def rra(heatmap: Heatmap, mask: BinaryMask) -> float:
    """Fraction of the K highest-attribution pixels inside the mask, K = mask area.

    Ties are broken by ascending row-major pixel index so the selection is
    deterministic regardless of value duplication.
    """
    _check_pair(heatmap, mask, "rra")
    k = mask.area
    if k == 0:
        raise NumericError("undefined RRA: mask is empty")
    flat = heatmap.values.ravel()
    # Stable argsort on negated values = descending by value, ascending by index on ties.
    top_k = np.argsort(-flat, kind="stable")[:k]
    inside = mask.values.ravel()[top_k]
    return float(inside.sum() / k)


def dpp(heatmap: Heatmap, mask: BinaryMask, epsilon: float = DEFAULT_EPSILON) -> DppBreakdown:
    """Dual-polarity precision with its full mass breakdown.

    The epsilon keeps both precisions defined when a polarity carries no
    mass at all (an all-zero map scores 0, not NaN).
    """
    _check_pair(heatmap, mask, "dpp")
    if epsilon <= 0:
        raise NumericError("epsilon must be positive")
    values = heatmap.values
    inside = mask.values == 1.0
    pos = np.maximum(values, 0.0)
    neg = np.maximum(-values, 0.0)
    tpa = float(pos[inside].sum())
    fpa = float(pos[~inside].sum())
    tna = float(neg[~inside].sum())
    fna = float(neg[inside].sum())
    p_pos = tpa / (tpa + fpa + epsilon)
    p_neg = tna / (tna + fna + epsilon)
    return DppBreakdown(
        tpa=tpa,
        fpa=fpa,
        tna=tna,
        fna=fna,
        p_pos=p_pos,
        p_neg=p_neg,
        dpp=(p_pos + p_neg) / 2.0,
        epsilon=epsilon,
    )


def mask_stats(mask: BinaryMask) -> MaskStats:
    """Region area in pixels and as a percentage of the image."""
    area = mask.area
    return MaskStats(area=area, ratio=100.0 * area / mask.values.size)


@dataclass(frozen=True)
class GroupSummary:
    key: tuple[str, ...]
    count: int
    means: dict[str, float]
    stds: dict[str, float]


def aggregate(
    records: list[ScoreRecord],
    group_by: tuple[str, ...] = ("model_id", "method_id"),
) -> list[GroupSummary]:
    """Per-group mean and sample (n-1) standard deviation of every metric.

    Groups come back in lexicographic key order; singleton groups report a
    standard deviation of 0.
    """
    if not records:
        raise ValueError("aggregate: no records")
    groups: dict[tuple[str, ...], list[ScoreRecord]] = {}
    for rec in records:
        key = tuple(str(getattr(rec, field)) for field in group_by)
        groups.setdefault(key, []).append(rec)
    summaries = []
    for key in sorted(groups):
        rows = groups[key]
        means = {}
        stds = {}
        for metric in METRIC_FIELDS:
            vals = np.array([r.metric(metric) for r in rows])
            means[metric] = float(vals.mean())
            stds[metric] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        summaries.append(GroupSummary(key=key, count=len(rows), means=means, stds=stds))
    return summaries


def _record_row(rec: ScoreRecord) -> list:
    return [
        rec.image_id,
        rec.model_id,
        rec.method_id,
        rec.seed,
        repr(rec.rra),
        repr(rec.dpp.p_pos),
        repr(rec.dpp.p_neg),
        repr(rec.dpp.dpp),
    ]


def write_records_csv(path, records: list[ScoreRecord], provenance: str | None = None) -> None:
    buf = io.StringIO()
    if provenance:
        buf.write(f"# {provenance}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SCORE_CSV_HEADER)
    for rec in records:
        writer.writerow(_record_row(rec))
    Path(path).write_text(buf.getvalue())


def read_records_csv(path) -> list[ScoreRecord]:
    path = Path(path)
    try:
        lines = [ln for ln in path.read_text().splitlines() if ln and not ln.startswith("#")]
    except FileNotFoundError:
        raise LoadError(f"{path}: score file not found") from None
    reader = csv.reader(lines)
    try:
        header = tuple(next(reader))
    except StopIteration:
        raise LoadError(f"{path}: empty score file") from None
    if header != SCORE_CSV_HEADER:
        raise LoadError(f"{path}: unexpected score header {header}")
    records = []
    for row in reader:
        image_id, model_id, method_id, seed, rra_v, p_pos, p_neg, dpp_v = row
        p_pos_f, p_neg_f = float(p_pos), float(p_neg)
        breakdown = DppBreakdown(
            tpa=0.0, fpa=0.0, tna=0.0, fna=0.0,
            p_pos=p_pos_f, p_neg=p_neg_f, dpp=(p_pos_f + p_neg_f) / 2.0,
            epsilon=DEFAULT_EPSILON,
        )
        records.append(ScoreRecord(image_id, model_id, method_id, int(seed), float(rra_v), breakdown))
    return records


def write_records_jsonl(path, records: list[ScoreRecord], provenance: dict | None = None) -> None:
    with open(path, "w") as fh:
        if provenance:
            fh.write(json.dumps({"provenance": provenance}, sort_keys=True) + "\n")
        for rec in records:
            row = {
                "image_id": rec.image_id,
                "model_id": rec.model_id,
                "method_id": rec.method_id,
                "seed": rec.seed,
                "rra": rec.rra,
                "p_pos": rec.dpp.p_pos,
                "p_neg": rec.dpp.p_neg,
                "dpp": rec.dpp.dpp,
            }
            fh.write(json.dumps(row, sort_keys=True) + "\n")
