import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from swdstyle.errors import DimensionError, FormatError
from swdstyle.tensors import (
    FeatureMap,
    ImageBuffer,
    RegionMask,
    downsample_mask,
    features_to_image,
    image_to_features,
    load_image,
    load_mask,
    read_fmap,
    save_image,
    write_fmap,
)

from .oracles import nearest_downsample_reference


class TestFmapFormat:
    def test_smallest_well_formed_file_is_32_bytes(self, tmp_path):
        fm = FeatureMap(layer_id=1, spatial=(1, 1), data=np.array([[0.5]]))
        path = tmp_path / "one.fmap"
        write_fmap(fm, path)
        assert path.stat().st_size == 32

    def test_rewrite_is_byte_identical(self, tmp_path, rng):
        data = rng.standard_normal((16, 8)).astype(np.float32).astype(np.float64)
        fm = FeatureMap(layer_id=2, spatial=(4, 4), data=data)
        p1 = tmp_path / "a.fmap"
        p2 = tmp_path / "b.fmap"
        write_fmap(fm, p1)
        write_fmap(read_fmap(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_float32_values_round_trip_exactly(self, tmp_path, rng):
        data = rng.standard_normal((16, 8)).astype(np.float32).astype(np.float64)
        fm = FeatureMap(layer_id=5, spatial=(4, 4), data=data)
        path = tmp_path / "x.fmap"
        write_fmap(fm, path)
        back = read_fmap(path)
        assert back.layer_id == 5
        assert back.spatial == (4, 4)
        assert np.array_equal(back.data, fm.data)

    def test_older_version_magic_rejected(self, tmp_path):
        path = tmp_path / "old.fmap"
        path.write_bytes(b"FMAPv000" + b"\x00" * 24)
        with pytest.raises(FormatError, match="version"):
            read_fmap(path)

    def test_garbage_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.fmap"
        path.write_bytes(b"NOTAFMAP" + b"\x00" * 24)
        with pytest.raises(FormatError, match="magic"):
            read_fmap(path)

    def test_truncated_payload_rejected(self, tmp_path):
        fm = FeatureMap(layer_id=1, spatial=(2, 2), data=np.ones((4, 3)))
        path = tmp_path / "t.fmap"
        write_fmap(fm, path)
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(FormatError, match="payload"):
            read_fmap(path)

    def test_dims_inconsistent_with_payload_rejected(self, tmp_path):
        fm = FeatureMap(layer_id=1, spatial=(2, 2), data=np.ones((4, 3)))
        path = tmp_path / "t.fmap"
        write_fmap(fm, path)
        path.write_bytes(path.read_bytes() + b"\x00\x00\x00\x00")
        with pytest.raises(FormatError, match="payload"):
            read_fmap(path)

    def test_non_finite_data_rejected_on_write(self, tmp_path):
        fm = FeatureMap(layer_id=1, spatial=(1, 1), data=np.array([[1.0]]))
        object.__setattr__(fm, "data", np.array([[np.inf]]))
        with pytest.raises(ValueError):
            write_fmap(fm, tmp_path / "bad.fmap")

    @given(
        h=st.integers(1, 5),
        w=st.integers(1, 5),
        n=st.integers(1, 6),
        seed=st.integers(0, 2**32 - 1),
    )
    @settings(max_examples=30)
    def test_round_trip_property(self, h, w, n, seed, tmp_path_factory):
        tmp = tmp_path_factory.mktemp("fmap")
        gen = np.random.default_rng(seed)
        data = gen.standard_normal((h * w, n)).astype(np.float32).astype(np.float64)
        fm = FeatureMap(layer_id=seed % 100, spatial=(h, w), data=data)
        path = tmp / "roundtrip.fmap"
        write_fmap(fm, path)
        back = read_fmap(path)
        assert np.array_equal(back.data, fm.data)
        assert (back.layer_id, back.spatial) == (fm.layer_id, fm.spatial)


class TestMasks:
    def _write_mask(self, path, arr):
        Image.fromarray(arr.astype(np.uint8), mode="L").save(path)

    def test_all_zero_mask_single_region(self, tmp_path):
        path = tmp_path / "zero.png"
        self._write_mask(path, np.zeros((4, 4)))
        mask = load_mask(path)
        assert mask.num_labels == 0

    def test_binary_mask(self, tmp_path):
        path = tmp_path / "bin.png"
        arr = np.zeros((4, 4))
        arr[:, 2:] = 1
        self._write_mask(path, arr)
        mask = load_mask(path)
        assert mask.num_labels == 1
        assert set(np.unique(mask.labels)) == {0, 1}

    def test_three_label_mask(self, tmp_path):
        path = tmp_path / "tri.png"
        arr = np.zeros((3, 3))
        arr[1] = 1
        arr[2] = 2
        self._write_mask(path, arr)
        assert load_mask(path).num_labels == 2

    def test_multichannel_mask_rejected(self, tmp_path):
        path = tmp_path / "rgb.png"
        Image.fromarray(np.zeros((4, 4, 3), dtype=np.uint8), mode="RGB").save(path)
        with pytest.raises(FormatError):
            load_mask(path)

    def test_16bit_mask_rejected(self, tmp_path):
        path = tmp_path / "deep.png"
        Image.fromarray(np.zeros((4, 4), dtype=np.uint16)).save(path)
        with pytest.raises(FormatError):
            load_mask(path)

    def test_pgm_masks_load(self, tmp_path):
        path = tmp_path / "m.pgm"
        self._write_mask(path, np.full((4, 4), 2))
        assert load_mask(path).num_labels == 2


class TestDownsample:
    def test_identity_target(self):
        mask = RegionMask(labels=np.arange(12).reshape(3, 4) % 3)
        out = downsample_mask(mask, (3, 4))
        assert np.array_equal(out.labels, mask.labels)

    def test_checker_labels_subset(self):
        checker = (np.indices((4, 4)).sum(axis=0) % 2).astype(np.int64)
        out = downsample_mask(RegionMask(labels=checker), (2, 2))
        assert set(np.unique(out.labels)) <= {0, 1}

    def test_non_integer_ratio_matches_reference(self, rng):
        labels = rng.integers(0, 3, size=(5, 5))
        mask = RegionMask(labels=labels)
        out = downsample_mask(mask, (2, 2))
        expected = nearest_downsample_reference(labels, 2, 2)
        assert np.array_equal(out.labels, expected)

    @given(
        h=st.integers(1, 9),
        w=st.integers(1, 9),
        th=st.integers(1, 9),
        tw=st.integers(1, 9),
        seed=st.integers(0, 999),
    )
    @settings(max_examples=60)
    def test_reference_agreement_and_label_subset(self, h, w, th, tw, seed):
        if th > h or tw > w:
            return
        labels = np.random.default_rng(seed).integers(0, 5, size=(h, w))
        mask = RegionMask(labels=labels)
        out = downsample_mask(mask, (th, tw))
        assert np.array_equal(out.labels, nearest_downsample_reference(labels, th, tw))
        assert set(np.unique(out.labels)) <= set(np.unique(labels))

    def test_zero_target_rejected(self):
        mask = RegionMask(labels=np.zeros((4, 4), dtype=np.int64))
        with pytest.raises(DimensionError):
            downsample_mask(mask, (0, 2))


class TestImages:
    def test_layer0_conversion_exact(self, rng):
        img = ImageBuffer(rng.random((6, 5, 3)))
        fm = image_to_features(img)
        assert fm.layer_id == 0
        assert fm.spatial == (6, 5)
        back = features_to_image(fm)
        assert np.array_equal(back.data, img.data)

    def test_png_round_trip(self, tmp_path, rng):
        img = ImageBuffer(np.round(rng.random((8, 8, 3)) * 255) / 255.0)
        path = tmp_path / "img.png"
        save_image(img, path)
        back = load_image(path)
        assert np.allclose(back.data, img.data, atol=1e-12)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            ImageBuffer(np.full((4, 4, 3), 1.5))

    def test_bad_channel_count_rejected(self):
        with pytest.raises(DimensionError):
            ImageBuffer(np.zeros((4, 4, 2)))
