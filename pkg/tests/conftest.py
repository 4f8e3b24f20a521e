"""Shared stub models implementing the differentiable-model surface."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pytest

from attrkit import ImageTensor


@dataclass(frozen=True, eq=False)
class StubTrace:
    logits: np.ndarray
    image: ImageTensor
    conv_features: np.ndarray | None = None


class LinearModel:
    """logits[c] = <w[c], x> + b[c]; gradients are the weights themselves."""

    def __init__(self, w, b=None):
        self.w = np.asarray(w, dtype=np.float64)  # (classes, channels, h, w)
        self.b = np.zeros(self.w.shape[0]) if b is None else np.asarray(b, dtype=np.float64)

    def forward(self, image: ImageTensor) -> StubTrace:
        logits = np.tensordot(self.w, image.values, axes=3) + self.b
        return StubTrace(logits=logits, image=image)

    def backward(self, trace: StubTrace, target: int):
        return self.w[target].copy(), None


class SquareModel:
    """Single logit f(x) = sum(x_i^2); gradient 2x."""

    def forward(self, image: ImageTensor) -> StubTrace:
        return StubTrace(logits=np.array([float((image.values ** 2).sum())]), image=image)

    def backward(self, trace: StubTrace, target: int):
        return 2.0 * trace.image.values, None


class ConstantModel:
    """Output independent of the input; all gradients vanish."""

    def __init__(self, value: float = 1.5, classes: int = 2):
        self.value = value
        self.classes = classes

    def forward(self, image: ImageTensor) -> StubTrace:
        return StubTrace(logits=np.full(self.classes, self.value), image=image)

    def backward(self, trace: StubTrace, target: int):
        return np.zeros(trace.image.shape), None


class FixedCamModel:
    """Exposes fixed conv features and fixed feature gradients for grad_cam."""

    def __init__(self, features, feature_grad):
        self.features = np.asarray(features, dtype=np.float64)
        self.feature_grad = np.asarray(feature_grad, dtype=np.float64)

    def forward(self, image: ImageTensor) -> StubTrace:
        return StubTrace(logits=np.zeros(2), image=image, conv_features=self.features)

    def backward(self, trace: StubTrace, target: int):
        return np.zeros(trace.image.shape), self.feature_grad.copy()


class PatchMeanModel:
    """Single logit equal to the mean intensity over one pixel region."""

    def __init__(self, region):
        self.region = np.asarray(region, dtype=bool)

    def forward(self, image: ImageTensor) -> StubTrace:
        mean = float(image.values[:, self.region].mean())
        return StubTrace(logits=np.array([mean, -mean]), image=image)

    def backward(self, trace: StubTrace, target: int):
        grad = np.zeros(trace.image.shape)
        sign = 1.0 if target == 0 else -1.0
        grad[:, self.region] = sign / self.region.sum() / trace.image.channels
        return grad, None


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
