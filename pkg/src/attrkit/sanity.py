"""Fidelity checks: layer-randomization degradation and input-randomization
sensitivity, with Cliff's delta over the distance distributions.

Explainers are batch-level callables ``fn(model, images, targets) ->
[Heatmap]`` (see attribution.batch_explainer), so the permutation-based
method participates with its batch semantics intact.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .errors import NumericError
from .stats import cliffs_delta
from .tensors import Heatmap, ImageTensor, l2_distance, pearson_correlation

DELTA_GROUPS_NOTE = (
    "cliffs_delta compares pairwise distances among original-input explanations "
    "(group A) against per-image original-vs-shuffled distances (group B)"
)


@dataclass(frozen=True)
class SanityReport:
    """Per-method summary of both checks, plus the per-image raw values."""

    method_id: str
    degradation_mean: float
    degradation_std: float
    sensitivity_mean: float
    sensitivity_std: float
    cliffs_delta: float
    interpretation: str
    degradation_values: tuple[float, ...]
    sensitivity_values: tuple[float, ...]
    metadata: dict


def pixel_shuffle(image: ImageTensor, seed: int) -> ImageTensor:
    """One uniform permutation of the (h, w) positions, shared by all channels."""
    c, h, w = image.shape
    perm = np.random.default_rng(seed).permutation(h * w)
    flat = image.values.reshape(c, h * w)
    return ImageTensor(flat[:, perm].reshape(c, h, w))


def _degradation(original: Heatmap, perturbed: Heatmap) -> float:
    if np.array_equal(original.values, perturbed.values):
        # Identical maps (e.g. nothing was randomized) degrade by exactly 0;
        # going through the correlation would leave rounding residue.
        return 0.0
    corr = pearson_correlation(original, perturbed)
    if corr.degenerate:
        # A map that collapsed to a constant lost all spatial structure, so
        # degradation saturates.
        return 1.0
    return 1.0 - abs(corr.value)


def layer_randomization_check(
    model,
    explain_fn,
    images: list[ImageTensor],
    targets: list[int],
    n_layers: int,
    seed: int,
) -> list[float]:
    """Per-image degradation (1 - |corr|) after reinitializing ``n_layers``
    uniformly chosen layers. ``n_layers`` beyond the model's layer count
    randomizes every layer."""
    if not images:
        raise ValueError("layer_randomization_check needs at least one image")
    if n_layers < 0:
        raise ValueError("n_layers must be >= 0")
    layer_names = list(model.layer_names)
    count = min(n_layers, len(layer_names))
    if count == 0:
        perturbed_model = model
    else:
        rng = np.random.default_rng(seed)
        chosen = [layer_names[i] for i in rng.choice(len(layer_names), size=count, replace=False)]
        perturbed_model = model.randomize_layers(chosen, seed)
    originals = explain_fn(model, images, targets)
    perturbed = explain_fn(perturbed_model, images, targets)
    return [_degradation(o, p) for o, p in zip(originals, perturbed)]


@dataclass(frozen=True)
class InputRandomizationResult:
    distances: tuple[float, ...]
    sensitivity_mean: float
    sensitivity_std: float
    cliffs_delta: float
    interpretation: str


def input_randomization_check(
    model,
    explain_fn,
    images: list[ImageTensor],
    targets: list[int],
    seed: int,
    normalized: bool = True,
) -> InputRandomizationResult:
    """Distance between each image's explanation and its pixel-shuffled
    counterpart, plus Cliff's delta against the baseline distance spread.

    Needs >= 2 images: the baseline group is built from pairwise distances
    among the original-input explanations.
    """
    if len(images) < 2:
        raise NumericError("input_randomization_check: cliffs_delta undefined for a single image")
    shuffled = [pixel_shuffle(img, seed ^ i) for i, img in enumerate(images)]
    originals = explain_fn(model, images, targets)
    randomized = explain_fn(model, shuffled, targets)
    distances = [
        l2_distance(o, r, normalized=normalized) for o, r in zip(originals, randomized)
    ]
    baseline = [
        l2_distance(originals[i], originals[j], normalized=normalized)
        for i in range(len(originals))
        for j in range(i + 1, len(originals))
    ]
    effect = cliffs_delta(baseline, distances)
    arr = np.array(distances)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return InputRandomizationResult(
        distances=tuple(distances),
        sensitivity_mean=float(arr.mean()),
        sensitivity_std=std,
        cliffs_delta=effect.value,
        interpretation=effect.interpretation,
    )


def run_sanity_checks(
    model,
    method_id: str,
    explain_fn,
    images: list[ImageTensor],
    targets: list[int],
    n_layers: int,
    seed: int,
    normalized: bool = True,
) -> SanityReport:
    degradations = layer_randomization_check(model, explain_fn, images, targets, n_layers, seed)
    randomization = input_randomization_check(model, explain_fn, images, targets, seed, normalized)
    deg = np.array(degradations)
    deg_std = float(deg.std(ddof=1)) if deg.size > 1 else 0.0
    return SanityReport(
        method_id=method_id,
        degradation_mean=float(deg.mean()),
        degradation_std=deg_std,
        sensitivity_mean=randomization.sensitivity_mean,
        sensitivity_std=randomization.sensitivity_std,
        cliffs_delta=randomization.cliffs_delta,
        interpretation=randomization.interpretation,
        degradation_values=tuple(degradations),
        sensitivity_values=randomization.distances,
        metadata={
            "n_layers": n_layers,
            "seed": seed,
            "normalized_distances": normalized,
            "delta_groups": DELTA_GROUPS_NOTE,
        },
    )


SANITY_CSV_HEADER = (
    "method_id",
    "degradation_mean",
    "degradation_std",
    "sensitivity_mean",
    "sensitivity_std",
    "cliffs_delta",
    "interpretation",
)


def write_sanity_csv(path, reports: list[SanityReport], provenance: str | None = None) -> None:
    buf = io.StringIO()
    if provenance:
        buf.write(f"# {provenance}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SANITY_CSV_HEADER)
    for rep in reports:
        writer.writerow([
            rep.method_id,
            repr(rep.degradation_mean),
            repr(rep.degradation_std),
            repr(rep.sensitivity_mean),
            repr(rep.sensitivity_std),
            repr(rep.cliffs_delta),
            rep.interpretation,
        ])
    Path(path).write_text(buf.getvalue())


def write_sanity_json(path, reports: list[SanityReport], provenance: dict | None = None) -> None:
    payload = {
        "provenance": provenance or {},
        "reports": [asdict(rep) for rep in reports],
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
