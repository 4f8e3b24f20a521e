"""A small fixed convolutional classifier with exact reverse-mode gradients.

Architecture: conv3x3 -> relu -> conv3x3 -> relu -> global-average-pool ->
linear. Everything is plain float64 numpy, deterministic under the seed, and
immutable after construction; attribution and fidelity-check code depends
only on the {forward, backward, randomize_layers, layer_names} surface, so
any object with the same surface can stand in for this class.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import LoadError, ShapeError
from .tensors import ImageTensor

HIDDEN_CHANNELS = 8

# Layers carrying weights, in forward order. The full pipeline interleaves
# relu after each conv and ends with global-average-pool before the head.
PARAM_LAYERS = ("conv1", "conv2", "fc")

PIPELINE = ("conv1", "relu1", "conv2", "relu2", "gap", "fc")


def _layer_rng(seed: int, layer_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, layer_index])


def _conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray | None) -> np.ndarray:
    # x: (c_in, h, w), w: (c_out, c_in, 3, 3); stride 1, zero padding 1.
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    windows = sliding_window_view(xp, (3, 3), axis=(1, 2))
    out = np.einsum("oikl,ihwkl->ohw", w, windows, optimize=True)
    if b is not None:
        out += b[:, None, None]
    return out


def _conv2d_input_grad(dz: np.ndarray, w: np.ndarray) -> np.ndarray:
    # Gradient of a same-padded 3x3 conv w.r.t. its input: correlate the
    # upstream gradient with the spatially flipped, channel-swapped kernel.
    wt = np.flip(w, axis=(2, 3)).transpose(1, 0, 2, 3)
    return _conv2d(dz, np.ascontiguousarray(wt), None)


@dataclass(frozen=True, eq=False)
class ForwardTrace:
    """Cached activations from one forward pass."""

    logits: np.ndarray
    activations: dict[str, np.ndarray]
    image: ImageTensor

    @property
    def conv_features(self) -> np.ndarray:
        """Feature maps of the last convolutional stage (post-relu)."""
        return self.activations["relu2"]


class BackwardResult(NamedTuple):
    input_grad: np.ndarray  # (channels, h, w)
    feature_grad: np.ndarray  # (HIDDEN_CHANNELS, h, w), w.r.t. conv_features


@dataclass(frozen=True, eq=False)
class RefNet:
    weights: dict[str, np.ndarray]
    input_shape: tuple[int, int, int]
    classes: int
    seed: int

    @classmethod
    def init(cls, seed: int, input_shape: tuple[int, int, int] = (1, 32, 32), classes: int = 2) -> "RefNet":
        """Deterministically initialize; the same seed yields identical weights."""
        if classes < 2:
            raise ValueError("classes must be >= 2")
        if len(input_shape) != 3 or min(input_shape) < 1:
            raise ShapeError(f"input_shape must be (channels, h, w) with positive dims, got {input_shape}")
        channels = input_shape[0]
        weights = {}
        for idx, name in enumerate(PARAM_LAYERS):
            weights.update(cls._draw_layer(name, idx, seed, channels, classes))
        return cls(weights=_freeze(weights), input_shape=tuple(input_shape), classes=classes, seed=seed)

    @staticmethod
    def _draw_layer(name: str, idx: int, seed: int, channels: int, classes: int) -> dict[str, np.ndarray]:
        # Uniform(-a, a) with a = sqrt(1 / fan_in), weights drawn before bias.
        rng = _layer_rng(seed, idx)
        if name == "conv1":
            fan_in = channels * 9
            shape = (HIDDEN_CHANNELS, channels, 3, 3)
        elif name == "conv2":
            fan_in = HIDDEN_CHANNELS * 9
            shape = (HIDDEN_CHANNELS, HIDDEN_CHANNELS, 3, 3)
        else:
            fan_in = HIDDEN_CHANNELS
            shape = (classes, HIDDEN_CHANNELS)
        a = np.sqrt(1.0 / fan_in)
        return {
            f"{name}_w": rng.uniform(-a, a, size=shape),
            f"{name}_b": rng.uniform(-a, a, size=shape[0]),
        }

    @property
    def layer_names(self) -> tuple[str, ...]:
        """Layers whose weights can be reinitialized."""
        return PARAM_LAYERS

    def forward(self, image: ImageTensor) -> ForwardTrace:
        if image.shape != self.input_shape:
            raise ShapeError(f"forward: image shape {image.shape} != model input {self.input_shape}")
        x = image.values
        z1 = _conv2d(x, self.weights["conv1_w"], self.weights["conv1_b"])
        h1 = np.maximum(z1, 0.0)
        z2 = _conv2d(h1, self.weights["conv2_w"], self.weights["conv2_b"])
        h2 = np.maximum(z2, 0.0)
        pooled = h2.mean(axis=(1, 2))
        logits = self.weights["fc_w"] @ pooled + self.weights["fc_b"]
        activations = {"conv1": z1, "relu1": h1, "conv2": z2, "relu2": h2, "gap": pooled}
        return ForwardTrace(logits=logits, activations=activations, image=image)

    def backward(self, trace: ForwardTrace, target: int) -> BackwardResult:
        """Exact gradients of logits[target] w.r.t. the input and the conv features."""
        if not 0 <= target < self.classes:
            raise ValueError(f"target {target} out of range for {self.classes} classes")
        h, w = self.input_shape[1], self.input_shape[2]
        d_pooled = self.weights["fc_w"][target]
        d_h2 = np.broadcast_to(d_pooled[:, None, None] / (h * w), (HIDDEN_CHANNELS, h, w)).copy()
        d_z2 = d_h2 * (trace.activations["conv2"] > 0.0)
        d_h1 = _conv2d_input_grad(d_z2, self.weights["conv2_w"])
        d_z1 = d_h1 * (trace.activations["conv1"] > 0.0)
        d_x = _conv2d_input_grad(d_z1, self.weights["conv1_w"])
        return BackwardResult(input_grad=d_x, feature_grad=d_h2)

    def randomize_layers(self, layer_ids, seed: int) -> "RefNet":
        """Copy of the net with the chosen layers freshly drawn from ``seed``.

        Reinitializing every layer with seed s reproduces ``init(s, ...)``
        exactly, because each layer draws from its own (seed, index) stream.
        """
        chosen = set(layer_ids)
        unknown = chosen - set(PARAM_LAYERS)
        if unknown:
            raise ValueError(f"unknown layer ids: {sorted(unknown)}")
        weights = dict(self.weights)
        for idx, name in enumerate(PARAM_LAYERS):
            if name in chosen:
                weights.update(self._draw_layer(name, idx, seed, self.input_shape[0], self.classes))
        return RefNet(weights=_freeze(weights), input_shape=self.input_shape, classes=self.classes, seed=self.seed)

    def save(self, directory) -> Path:
        """Write weights as NPY files plus a JSON topology sidecar; returns the sidecar path."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        files = {}
        for key, arr in sorted(self.weights.items()):
            fname = f"{key}.npy"
            with open(directory / fname, "wb") as fh:
                np.lib.format.write_array(fh, np.ascontiguousarray(arr), version=(1, 0), allow_pickle=False)
            files[key] = fname
        topology = {
            "pipeline": list(PIPELINE),
            "param_layers": list(PARAM_LAYERS),
            "hidden_channels": HIDDEN_CHANNELS,
            "input_shape": list(self.input_shape),
            "classes": self.classes,
            "seed": self.seed,
            "weight_files": files,
        }
        sidecar = directory / "topology.json"
        sidecar.write_text(json.dumps(topology, indent=2, sort_keys=True) + "\n")
        return sidecar

    @classmethod
    def load(cls, sidecar_path) -> "RefNet":
        sidecar_path = Path(sidecar_path)
        if sidecar_path.is_dir():
            sidecar_path = sidecar_path / "topology.json"
        try:
            topo = json.loads(sidecar_path.read_text())
        except FileNotFoundError:
            raise LoadError(f"{sidecar_path}: topology sidecar not found") from None
        except json.JSONDecodeError as exc:
            raise LoadError(f"{sidecar_path}: topology is not valid JSON ({exc})") from exc
        try:
            files = topo["weight_files"]
            input_shape = tuple(topo["input_shape"])
            classes = int(topo["classes"])
            seed = int(topo["seed"])
        except (KeyError, TypeError, ValueError) as exc:
            raise LoadError(f"{sidecar_path}: malformed topology ({exc})") from exc
        weights = {}
        for key, fname in files.items():
            path = sidecar_path.parent / fname
            try:
                with open(path, "rb") as fh:
                    weights[key] = np.load(fh, allow_pickle=False).astype(np.float64)
            except (FileNotFoundError, ValueError) as exc:
                raise LoadError(f"{path}: cannot load weight array ({exc})") from exc
        return cls(weights=_freeze(weights), input_shape=input_shape, classes=classes, seed=seed)


def _freeze(weights: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    for arr in weights.values():
        arr.flags.writeable = False
    return weights
