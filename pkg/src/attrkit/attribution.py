"""Five attribution methods over an abstract differentiable-model surface.

A model here is any object offering ``forward(image) -> trace`` (trace has
``.logits`` and, for grad_cam, ``.conv_features``) and
``backward(trace, target) -> (input_grad, feature_grad)``. Gradient-based
methods return signed maps except saliency, which reports magnitudes;
feature_permutation is black-box and only calls forward.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ShapeError
from .tensors import Heatmap, ImageTensor, bilinear_upsample

METHOD_IDS = ("saliency", "integrated_gradients", "gradient_shap", "grad_cam", "feature_permutation")


@dataclass(frozen=True)
class AttributionConfig:
    """Knobs for the stochastic/discretized methods, all seeds explicit."""

    ig_steps: int = 50
    gs_samples: int = 50
    gs_noise_std: float = 0.1
    fp_patch: int = 16
    fp_repeats: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.ig_steps < 1 or self.gs_samples < 1 or self.fp_repeats < 1 or self.fp_patch < 1:
            raise ValueError("ig_steps, gs_samples, fp_repeats and fp_patch must be >= 1")
        if self.gs_noise_std < 0:
            raise ValueError("gs_noise_std must be >= 0")


@dataclass(frozen=True, eq=False)
class PatchGroupMask:
    """Integer group index per pixel; groups are contiguous 0..n_groups-1."""

    indices: np.ndarray
    n_groups: int

    def pixels_of(self, group: int) -> np.ndarray:
        return self.indices == group


def make_patch_groups(height: int, width: int, patch: int) -> PatchGroupMask:
    """Row-major grid of ``patch`` x ``patch`` groups; border leftovers form
    their own smaller groups."""
    if patch < 1:
        raise ValueError("patch must be >= 1")
    row_block = np.arange(height) // patch
    col_block = np.arange(width) // patch
    n_cols = int(col_block[-1]) + 1
    indices = row_block[:, None] * n_cols + col_block[None, :]
    return PatchGroupMask(indices=indices.astype(np.intp), n_groups=int(indices.max()) + 1)


def _reduce_abs_max(grad: np.ndarray) -> np.ndarray:
    return np.abs(grad).max(axis=0)


def saliency(model, image: ImageTensor, target: int) -> Heatmap:
    """Gradient magnitude of the target logit w.r.t. each pixel.

    Multi-channel inputs reduce by the maximum magnitude over channels.
    """
    trace = model.forward(image)
    grad, _ = model.backward(trace, target)
    return Heatmap(_reduce_abs_max(grad))


def integrated_gradients(
    model,
    image: ImageTensor,
    target: int,
    baseline: ImageTensor | None = None,
    steps: int = 50,
) -> Heatmap:
    """Path-integrated gradients from ``baseline`` (default: all-zero image).

    The integral is a Riemann sum over ``steps`` equal subintervals with
    midpoint tags, whose error falls off quadratically in ``steps`` so the
    completeness identity (total attribution = logit difference) holds
    tightly at moderate step counts. Channel attributions are summed so the
    identity survives the reduction.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if baseline is None:
        baseline = ImageTensor(np.zeros(image.shape))
    if baseline.shape != image.shape:
        raise ShapeError(f"baseline shape {baseline.shape} != image shape {image.shape}")
    diff = image.values - baseline.values
    total = np.zeros(image.shape)
    for k in range(1, steps + 1):
        point = ImageTensor(baseline.values + ((k - 0.5) / steps) * diff)
        grad, _ = model.backward(model.forward(point), target)
        total += grad
    attribution = diff * (total / steps)
    return Heatmap(attribution.sum(axis=0))


def gradient_shap(
    model,
    image: ImageTensor,
    target: int,
    baselines: Sequence[ImageTensor],
    samples: int = 50,
    noise_std: float = 0.1,
    seed: int = 0,
) -> Heatmap:
    """Expected-gradients estimate over noisy interpolations.

    Each sample draws a baseline, an interpolation coefficient and (when
    ``noise_std`` > 0) pixel noise, evaluates the gradient at the interpolated
    point and scales it by the image-baseline difference.
    """
    if not baselines:
        raise ValueError("gradient_shap needs at least one baseline")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    for b in baselines:
        if b.shape != image.shape:
            raise ShapeError(f"baseline shape {b.shape} != image shape {image.shape}")
    rng = np.random.default_rng(seed)
    total = np.zeros(image.shape)
    for _ in range(samples):
        base = baselines[int(rng.integers(len(baselines)))]
        alpha = float(rng.uniform())
        if noise_std > 0:
            noisy = image.values + rng.normal(0.0, noise_std, size=image.shape)
        else:
            noisy = image.values
        point = ImageTensor(base.values + alpha * (noisy - base.values))
        grad, _ = model.backward(model.forward(point), target)
        total += grad * (image.values - base.values)
    return Heatmap((total / samples).sum(axis=0))


def grad_cam(model, image: ImageTensor, target: int) -> Heatmap:
    """Relu-clamped, gradient-weighted combination of the last conv feature
    maps, bilinearly upsampled to the input resolution."""
    trace = model.forward(image)
    features = getattr(trace, "conv_features", None)
    if features is None:
        raise ValueError("grad_cam requires a model exposing conv feature maps")
    _, feature_grad = model.backward(trace, target)
    channel_weights = feature_grad.mean(axis=(1, 2))
    cam = np.maximum(np.einsum("k,khw->hw", channel_weights, features), 0.0)
    coarse = Heatmap(cam)
    if coarse.shape == (image.height, image.width):
        return coarse
    return bilinear_upsample(coarse, image.height, image.width)


def feature_permutation(
    model,
    batch: Sequence[ImageTensor],
    targets: Sequence[int],
    patch: int = 16,
    repeats: int = 5,
    seed: int = 0,
) -> list[Heatmap]:
    """Patch-shuffling importance across a batch.

    For each patch group, the pixel block is permuted across batch members
    (the same permutation for every pixel in the group); a sample's
    importance for the group is the drop of its target logit relative to the
    unperturbed baseline, averaged over ``repeats`` independently drawn
    permutations. Each group runs on its own (seed xor group) stream so
    results do not depend on evaluation order.
    """
    if len(batch) < 2:
        raise ValueError("feature_permutation needs a batch of >= 2 images")
    if len(targets) != len(batch):
        raise ValueError("targets must match the batch length")
    shape = batch[0].shape
    for img in batch:
        if img.shape != shape:
            raise ShapeError("feature_permutation: all batch images must share one shape")
    _, height, width = shape
    if patch > height or patch > width:
        raise ValueError(f"patch {patch} larger than image {height}x{width}")
    groups = make_patch_groups(height, width, patch)
    n = len(batch)
    stacked = np.stack([img.values for img in batch])
    baseline = np.array(
        [float(model.forward(img).logits[t]) for img, t in zip(batch, targets)]
    )
    importance = np.zeros((n, groups.n_groups))
    for j in range(groups.n_groups):
        rng = np.random.default_rng(seed ^ j)
        pixels = groups.pixels_of(j)
        for _ in range(repeats):
            perm = rng.permutation(n)
            shuffled = stacked.copy()
            shuffled[:, :, pixels] = stacked[perm][:, :, pixels]
            for i in range(n):
                logit = float(model.forward(ImageTensor(shuffled[i])).logits[targets[i]])
                importance[i, j] += (baseline[i] - logit) / repeats
    heatmaps = []
    for i in range(n):
        heatmaps.append(Heatmap(importance[i][groups.indices]))
    return heatmaps


def batch_explainer(method_id: str, config: AttributionConfig):
    """Uniform batch-level callable ``fn(model, images, targets, indices=None)``.

    ``indices`` are the images' positions in the full batch; stochastic
    per-image methods derive their seeds from them, so splitting a batch
    across workers reproduces the sequential output byte for byte.
    """
    if method_id == "feature_permutation":
        def run_fp(model, images, targets, indices=None):
            return feature_permutation(
                model, images, targets,
                patch=config.fp_patch, repeats=config.fp_repeats, seed=config.seed,
            )
        return run_fp

    def per_image(model, image, target, index):
        if method_id == "saliency":
            return saliency(model, image, target)
        if method_id == "integrated_gradients":
            return integrated_gradients(model, image, target, steps=config.ig_steps)
        if method_id == "gradient_shap":
            zero = ImageTensor(np.zeros(image.shape))
            sample_seed = int(np.random.default_rng([config.seed, index]).integers(2**31))
            return gradient_shap(
                model, image, target, baselines=[zero],
                samples=config.gs_samples, noise_std=config.gs_noise_std, seed=sample_seed,
            )
        if method_id == "grad_cam":
            return grad_cam(model, image, target)
        raise ValueError(f"unknown method id {method_id!r}")

    def run(model, images, targets, indices=None):
        if indices is None:
            indices = range(len(images))
        return [
            per_image(model, img, t, i)
            for img, t, i in zip(images, targets, indices)
        ]

    return run
