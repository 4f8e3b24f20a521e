import numpy as np
import pytest
from PIL import Image

from attrkit import BinaryMask, Heatmap, ImageTensor, LoadError, read_array, write_array
from attrkit.arrayio import load_dataset_manifest, save_dataset_manifest


class TestNpyRoundTrip:
    def test_heatmap_round_trip_is_bitwise(self, tmp_path, rng):
        original = Heatmap(rng.normal(size=(5, 7)))
        path = tmp_path / "h.npy"
        write_array(path, original)
        loaded = read_array(path, "heatmap")
        np.testing.assert_array_equal(loaded.values, original.values)
        assert loaded.values.dtype == np.float64

    def test_image_round_trip(self, tmp_path, rng):
        original = ImageTensor(rng.normal(size=(2, 4, 4)))
        path = tmp_path / "img.npy"
        write_array(path, original)
        loaded = read_array(path, "image")
        np.testing.assert_array_equal(loaded.values, original.values)

    def test_float32_widens_on_load(self, tmp_path):
        path = tmp_path / "f32.npy"
        np.save(path, np.array([[1.5, 2.5]], dtype=np.float32))
        loaded = read_array(path, "heatmap")
        assert loaded.values.dtype == np.float64
        np.testing.assert_array_equal(loaded.values, [[1.5, 2.5]])

    def test_written_file_is_npy_v1(self, tmp_path, rng):
        path = tmp_path / "h.npy"
        write_array(path, Heatmap(rng.normal(size=(3, 3))))
        header = path.read_bytes()[:8]
        assert header[:6] == b"\x93NUMPY"
        assert header[6:8] == bytes([1, 0])

    def test_mask_npy_thresholds_nonzero(self, tmp_path):
        path = tmp_path / "m.npy"
        np.save(path, np.array([[0.0, 2.0], [-1.0, 0.0]]))
        mask = read_array(path, "mask")
        assert mask.values.tolist() == [[0.0, 1.0], [1.0, 0.0]]


class TestLoadErrors:
    def test_rank_mismatch_for_mask(self, tmp_path):
        path = tmp_path / "bad.npy"
        np.save(path, np.zeros((2, 2, 2)))
        with pytest.raises(LoadError, match="rank mismatch"):
            read_array(path, "mask")

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "junk.npy"
        path.write_bytes(b"\x93NUMPY\x01\x00garbage-header")
        with pytest.raises(LoadError):
            read_array(path, "heatmap")

    def test_non_finite_values_rejected(self, tmp_path):
        path = tmp_path / "nan.npy"
        np.save(path, np.array([[1.0, np.nan]]))
        with pytest.raises(LoadError, match="non-finite"):
            read_array(path, "heatmap")

    def test_unsupported_dtype(self, tmp_path):
        path = tmp_path / "ints.npy"
        np.save(path, np.array([[1, 2]], dtype=np.int32))
        with pytest.raises(LoadError, match="dtype"):
            read_array(path, "heatmap")

    def test_missing_file(self, tmp_path):
        with pytest.raises(LoadError, match="not found"):
            read_array(tmp_path / "nope.npy", "heatmap")


class TestPngMask:
    def test_binary_png_loads_as_mask(self, tmp_path):
        arr = np.array([[0, 255], [255, 0]], dtype=np.uint8)
        path = tmp_path / "m.png"
        Image.fromarray(arr, mode="L").save(path)
        mask = read_array(path, "mask")
        assert isinstance(mask, BinaryMask)
        assert mask.values.tolist() == [[0.0, 1.0], [1.0, 0.0]]

    def test_png_only_for_masks(self, tmp_path):
        path = tmp_path / "m.png"
        Image.fromarray(np.zeros((2, 2), dtype=np.uint8), mode="L").save(path)
        with pytest.raises(LoadError):
            read_array(path, "heatmap")

    def test_rgb_png_rejected(self, tmp_path):
        path = tmp_path / "rgb.png"
        Image.fromarray(np.zeros((2, 2, 3), dtype=np.uint8), mode="RGB").save(path)
        with pytest.raises(LoadError, match="single-channel"):
            read_array(path, "mask")


class TestDatasetManifest:
    def test_round_trip_and_relative_paths(self, tmp_path):
        rows = [
            {"image_id": "a", "image_path": "images/a.npy", "mask_path": "masks/a.npy",
             "label": 1, "split": "test"},
            {"image_id": "b", "image_path": "images/b.npy", "mask_path": None,
             "label": 0, "split": "train"},
        ]
        path = tmp_path / "manifest.json"
        save_dataset_manifest(path, rows)
        records = load_dataset_manifest(path)
        assert [r.image_id for r in records] == ["a", "b"]
        assert records[0].image_path == tmp_path / "images/a.npy"
        assert records[1].mask_path is None
        assert records[0].label == 1 and records[0].split == "test"

    def test_malformed_record_raises(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text('{"records": [{"image_path": "x.npy"}]}')
        with pytest.raises(LoadError, match="malformed"):
            load_dataset_manifest(path)
