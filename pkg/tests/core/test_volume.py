"""Tests for binary images, voxel volumes and their file formats."""

from __future__ import annotations

import numpy as np
import pytest

from poreforge.core.volume import (
    Image2D,
    Volume3D,
    VolumeFormatError,
    VolumeMode,
    complement,
    load_image,
    load_volume,
    porosity,
    save_image,
    save_volume,
)


class TestImage2D:
    def test_rejects_non_binary(self):
        with pytest.raises(VolumeFormatError):
            Image2D(np.array([[0, 2], [1, 0]]))

    def test_rejects_wrong_rank(self):
        with pytest.raises(VolumeFormatError):
            Image2D(np.zeros((2, 2, 2), dtype=np.uint8))

    def test_data_is_read_only(self):
        img = Image2D(np.eye(3, dtype=np.uint8))
        with pytest.raises(ValueError):
            img.data[0, 0] = 0

    def test_porosity_and_complement(self):
        img = Image2D(np.array([[1, 0, 0, 0]], dtype=np.uint8))
        assert porosity(img) == 0.25
        assert porosity(complement(img)) == 0.75


class TestVolume3D:
    def test_binary_gets_one_channel(self):
        v = Volume3D.from_labels(np.ones((2, 3, 4), dtype=np.uint8))
        assert v.dims == (2, 3, 4)
        assert v.channels == 1
        assert porosity(v) == 1.0

    def test_continuous_rejects_nan(self):
        data = np.zeros((2, 2, 2, 3))
        data[0, 0, 0, 0] = np.nan
        with pytest.raises(VolumeFormatError):
            Volume3D(data, VolumeMode.continuous)

    def test_porosity_of_continuous_is_undefined(self):
        v = Volume3D(np.zeros((2, 2, 2, 3)), VolumeMode.continuous)
        with pytest.raises(VolumeFormatError):
            porosity(v)

    def test_matching_dtype_is_not_copied(self, rng):
        data = rng.normal(size=(3, 3, 3, 3))
        v = Volume3D(data, VolumeMode.continuous)
        assert np.shares_memory(v.data, data)
        assert data.flags.writeable
        with pytest.raises(ValueError):
            v.data[0, 0, 0, 0] = 1.0

    def test_labels_only_for_binary(self):
        v = Volume3D(np.zeros((2, 2, 2, 3)), VolumeMode.continuous)
        with pytest.raises(VolumeFormatError):
            _ = v.labels


class TestPGM:
    def test_save_and_load_keeps_pixels_and_size(self, tmp_path):
        img = Image2D(np.array([[1, 0, 1], [0, 0, 1]], dtype=np.uint8), pixel_size=3.5)
        path = tmp_path / "img.pgm"
        save_image(img, path)
        raw = path.read_bytes()
        assert raw.startswith(b"P5\n# pixel_size=3.5\n3 2\n255\n")
        back = load_image(path)
        assert np.array_equal(back.data, img.data)
        assert back.pixel_size == 3.5

    def test_gray_levels_threshold_at_128(self, tmp_path):
        path = tmp_path / "gray.pgm"
        path.write_bytes(b"P5\n4 1\n255\n" + bytes([0, 127, 128, 255]))
        assert load_image(path).data.tolist() == [[0, 0, 1, 1]]

    def test_comments_between_tokens(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P5\n# made by hand\n2 # width then height\n1\n255\n" + bytes([255, 0]))
        img = load_image(path)
        assert img.width == 2 and img.height == 1
        assert img.pixel_size is None

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "t.pgm"
        path.write_bytes(b"P5\n4 4\n255\n" + bytes(3))
        with pytest.raises(VolumeFormatError, match="truncated"):
            load_image(path)

    def test_maxval_other_than_255_rejected(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n2 2\n1\n" + bytes([0, 1, 1, 0]))
        with pytest.raises(VolumeFormatError, match="maxval"):
            load_image(path)

    def test_not_a_pgm(self, tmp_path):
        path = tmp_path / "x.pgm"
        path.write_bytes(b"P2\n1 1\n255\n0\n")
        with pytest.raises(VolumeFormatError):
            load_image(path)


class TestMV01:
    def test_binary_file_layout(self, tmp_path):
        v = Volume3D.from_labels(np.arange(8).reshape(2, 2, 2) % 2)
        path = tmp_path / "v.mv01"
        save_volume(v, path)
        raw = path.read_bytes()
        assert raw[:4] == b"MV01"
        assert len(raw) == 24 + 8
        assert np.array_equal(load_volume(path).labels, v.labels)

    def test_continuous_values_are_exact(self, tmp_path, rng):
        v = Volume3D(rng.normal(size=(3, 2, 4, 3)), VolumeMode.continuous)
        path = tmp_path / "c.mv01"
        save_volume(v, path)
        back = load_volume(path)
        assert back.mode is VolumeMode.continuous
        assert np.array_equal(back.data, v.data)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "b.mv01"
        path.write_bytes(b"XXXX" + bytes(40))
        with pytest.raises(VolumeFormatError, match="magic"):
            load_volume(path)

    def test_payload_size_mismatch(self, tmp_path):
        v = Volume3D.from_labels(np.zeros((2, 2, 2), dtype=np.uint8))
        path = tmp_path / "s.mv01"
        save_volume(v, path)
        path.write_bytes(path.read_bytes()[:-1])
        with pytest.raises(VolumeFormatError, match="payload"):
            load_volume(path)
