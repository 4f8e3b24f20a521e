import numpy as np
import pytest

from attrkit import ImageTensor, RefNet
from attrkit.refnet import PARAM_LAYERS


def finite_difference_grad(net, image_values, target, pixels, h=1e-5):
    grads = {}
    for (c, i, j) in pixels:
        up = image_values.copy()
        up[c, i, j] += h
        down = image_values.copy()
        down[c, i, j] -= h
        f_up = net.forward(ImageTensor(up)).logits[target]
        f_down = net.forward(ImageTensor(down)).logits[target]
        grads[(c, i, j)] = (f_up - f_down) / (2 * h)
    return grads


class TestInit:
    def test_same_seed_same_weights(self):
        a = RefNet.init(7, (1, 8, 8), 2)
        b = RefNet.init(7, (1, 8, 8), 2)
        for key in a.weights:
            np.testing.assert_array_equal(a.weights[key], b.weights[key])

    def test_different_seed_different_weights(self):
        a = RefNet.init(7, (1, 8, 8), 2)
        b = RefNet.init(8, (1, 8, 8), 2)
        assert any(not np.array_equal(a.weights[k], b.weights[k]) for k in a.weights)

    def test_zero_image_gives_finite_logits(self):
        net = RefNet.init(7, (1, 8, 8), 3)
        logits = net.forward(ImageTensor(np.zeros((1, 8, 8)))).logits
        assert np.isfinite(logits).all() and logits.shape == (3,)

    def test_rejects_single_class(self):
        with pytest.raises(ValueError):
            RefNet.init(0, (1, 8, 8), 1)


class TestForward:
    def test_zero_head_gives_zero_logits(self):
        net = RefNet.init(1, (1, 6, 6), 2)
        weights = dict(net.weights)
        weights["fc_w"] = np.zeros_like(weights["fc_w"])
        weights["fc_b"] = np.zeros_like(weights["fc_b"])
        zeroed = RefNet(weights=weights, input_shape=net.input_shape, classes=2, seed=1)
        logits = zeroed.forward(ImageTensor(np.ones((1, 6, 6)))).logits
        np.testing.assert_array_equal(logits, np.zeros(2))

    def test_head_is_homogeneous(self, rng):
        net = RefNet.init(1, (1, 6, 6), 2)
        img = ImageTensor(rng.normal(size=(1, 6, 6)))
        base = net.forward(img).logits
        weights = dict(net.weights)
        weights["fc_w"] = 2.0 * np.array(weights["fc_w"])
        weights["fc_b"] = 2.0 * np.array(weights["fc_b"])
        doubled = RefNet(weights=weights, input_shape=net.input_shape, classes=2, seed=1)
        np.testing.assert_allclose(doubled.forward(img).logits, 2.0 * base, rtol=1e-14)

    def test_forward_is_bitwise_stable(self, rng):
        net = RefNet.init(5, (1, 8, 8), 2)
        img = ImageTensor(rng.normal(size=(1, 8, 8)))
        np.testing.assert_array_equal(net.forward(img).logits, net.forward(img).logits)

    def test_relu_activations_nonnegative(self, rng):
        net = RefNet.init(5, (2, 8, 8), 2)
        trace = net.forward(ImageTensor(rng.normal(size=(2, 8, 8))))
        assert (trace.activations["relu1"] >= 0).all()
        assert (trace.activations["relu2"] >= 0).all()
        assert (trace.conv_features >= 0).all()

    def test_shape_mismatch(self, rng):
        net = RefNet.init(5, (1, 8, 8), 2)
        with pytest.raises(Exception):
            net.forward(ImageTensor(rng.normal(size=(1, 9, 9))))


class TestBackward:
    def test_matches_finite_differences(self, rng):
        worst = 0.0
        for trial in range(20):
            net = RefNet.init(trial, (1, 10, 10), 3)
            values = rng.normal(0, 0.5, (1, 10, 10))
            target = int(rng.integers(3))
            grad = net.backward(net.forward(ImageTensor(values)), target).input_grad
            pixels = [(0, int(rng.integers(10)), int(rng.integers(10))) for _ in range(6)]
            fd = finite_difference_grad(net, values, target, pixels)
            for pix, fd_val in fd.items():
                rel = abs(grad[pix] - fd_val) / max(abs(fd_val), abs(grad[pix]), 1e-8)
                worst = max(worst, rel)
        assert worst <= 1e-4

    def test_feature_grad_matches_head_weights(self, rng):
        # d logit_t / d relu2 = fc_w[t] / (h*w), constant over space.
        net = RefNet.init(2, (1, 6, 6), 2)
        trace = net.forward(ImageTensor(rng.normal(size=(1, 6, 6))))
        result = net.backward(trace, 1)
        expected = net.weights["fc_w"][1][:, None, None] / 36.0
        np.testing.assert_allclose(result.feature_grad, np.broadcast_to(expected, (8, 6, 6)), rtol=1e-14)

    def test_invalid_target(self, rng):
        net = RefNet.init(2, (1, 6, 6), 2)
        trace = net.forward(ImageTensor(rng.normal(size=(1, 6, 6))))
        with pytest.raises(ValueError):
            net.backward(trace, 5)


class TestRandomizeLayers:
    def test_empty_set_is_identity(self):
        net = RefNet.init(3, (1, 8, 8), 2)
        same = net.randomize_layers([], seed=99)
        for key in net.weights:
            np.testing.assert_array_equal(same.weights[key], net.weights[key])

    def test_all_layers_equals_fresh_init(self):
        net = RefNet.init(3, (1, 8, 8), 2)
        randomized = net.randomize_layers(PARAM_LAYERS, seed=11)
        fresh = RefNet.init(11, (1, 8, 8), 2)
        for key in net.weights:
            np.testing.assert_array_equal(randomized.weights[key], fresh.weights[key])

    def test_untouched_layers_are_bitwise_equal(self):
        net = RefNet.init(3, (1, 8, 8), 2)
        randomized = net.randomize_layers(["conv2"], seed=11)
        for key in ("conv1_w", "conv1_b", "fc_w", "fc_b"):
            np.testing.assert_array_equal(randomized.weights[key], net.weights[key])
        assert not np.array_equal(randomized.weights["conv2_w"], net.weights["conv2_w"])

    def test_head_randomization_changes_logits(self, rng):
        net = RefNet.init(3, (1, 8, 8), 2)
        img = ImageTensor(rng.normal(size=(1, 8, 8)))
        perturbed = net.randomize_layers(["fc"], seed=51)
        assert not np.array_equal(net.forward(img).logits, perturbed.forward(img).logits)

    def test_unknown_layer_rejected(self):
        net = RefNet.init(3, (1, 8, 8), 2)
        with pytest.raises(ValueError, match="unknown layer"):
            net.randomize_layers(["conv9"], seed=0)


class TestSaveLoad:
    def test_round_trip_is_bitwise(self, tmp_path, rng):
        net = RefNet.init(13, (1, 8, 8), 4)
        sidecar = net.save(tmp_path / "model")
        loaded = RefNet.load(sidecar)
        assert loaded.input_shape == net.input_shape
        assert loaded.classes == net.classes
        assert loaded.seed == net.seed
        for key in net.weights:
            np.testing.assert_array_equal(loaded.weights[key], net.weights[key])
        img = ImageTensor(rng.normal(size=(1, 8, 8)))
        np.testing.assert_array_equal(loaded.forward(img).logits, net.forward(img).logits)

    def test_load_from_directory(self, tmp_path):
        net = RefNet.init(13, (1, 8, 8), 2)
        net.save(tmp_path / "model")
        loaded = RefNet.load(tmp_path / "model")
        np.testing.assert_array_equal(loaded.weights["fc_w"], net.weights["fc_w"])
