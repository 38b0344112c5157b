import numpy as np
import pytest

from sparsedepth.embedding import (
    EmbedWeights,
    concat_weights,
    embed,
    load_weights,
    random_weights,
    resize_bilinear,
    resize_nearest,
    save_weights,
)
from sparsedepth.errors import InvalidInputError
from sparsedepth.geometry import TransformConfig
from sparsedepth.sparse import SparseDepthChannel, SparseMeasurement, SparseMeasurementSet, rasterize_channel
from sparsedepth.embedding import assemble_input


class TestConcatWeights:
    def test_zero_init_scale(self):
        rng = np.random.default_rng(0)
        w3 = random_weights(32, 3, 14, rng)
        w4 = concat_weights(w3, init_scale=0.0, rng=np.random.default_rng(1))
        assert np.all(w4.kernel[:, 3] == 0.0)
        assert np.array_equal(w4.kernel[:, :3], w3.kernel)
        assert np.array_equal(w4.bias, w3.bias)

    def test_shape_384(self):
        rng = np.random.default_rng(2)
        w3 = random_weights(384, 3, 14, rng)
        w4 = concat_weights(w3, init_scale=0.02, rng=rng)
        assert w3.kernel.shape == (384, 3, 14, 14)
        assert w4.kernel.shape == (384, 4, 14, 14)

    def test_reproducible_fourth_channel(self):
        rng = np.random.default_rng(3)
        w3 = random_weights(16, 3, 14, rng)
        a = concat_weights(w3, 0.02, np.random.default_rng(7)).kernel[:, 3]
        b = concat_weights(w3, 0.02, np.random.default_rng(7)).kernel[:, 3]
        assert np.array_equal(a, b)

    def test_rejects_four_channel_input(self):
        rng = np.random.default_rng(4)
        w4 = random_weights(8, 4, 7, rng)
        with pytest.raises(InvalidInputError):
            concat_weights(w4, 0.02, rng)


class TestEmbed:
    def test_zero_image_gives_bias(self):
        rng = np.random.default_rng(0)
        w = random_weights(12, 3, 7, rng)
        grid = embed(np.zeros((3, 21, 28)), w)
        assert grid.grid == (4, 3)
        assert grid.tokens.shape == (12, 12)
        np.testing.assert_array_equal(grid.tokens, np.tile(w.bias.astype(np.float64), (12, 1)))

    def test_zero_fourth_channel_equivalence_bitwise(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            w3 = random_weights(32, 3, 14, rng)
            w4 = concat_weights(w3, init_scale=0.02, rng=rng)
            image3 = rng.uniform(0, 1, (3, 28, 42))
            image4 = np.concatenate([image3, np.zeros((1, 28, 42))], axis=0)
            t3 = embed(image3, w3).tokens
            t4 = embed(image4, w4).tokens
            assert np.array_equal(t3, t4)

    def test_ones_kernel_sums_image(self):
        # kernel of ones, bias zero: every token entry is the patch sum
        patch = 14
        w = EmbedWeights(np.ones((5, 3, patch, patch), np.float32), np.zeros(5, np.float32))
        rng = np.random.default_rng(2)
        image = rng.uniform(0, 1, (3, patch, patch))
        tokens = embed(image, w).tokens
        expected = image.sum()  # single patch covering the whole image
        np.testing.assert_allclose(tokens, expected, rtol=1e-12)

    def test_linearity(self):
        rng = np.random.default_rng(3)
        w = random_weights(16, 3, 7, rng)
        w = EmbedWeights(w.kernel, np.zeros(16, np.float32))  # bias breaks additivity
        x = rng.uniform(0, 1, (3, 14, 21))
        y = rng.uniform(0, 1, (3, 14, 21))
        a, b = 1.7, -0.4
        lhs = embed(a * x + b * y, w).tokens
        rhs = a * embed(x, w).tokens + b * embed(y, w).tokens
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)

    def test_patch_swap_swaps_tokens(self):
        rng = np.random.default_rng(4)
        w = random_weights(8, 3, 7, rng)
        image = rng.uniform(0, 1, (3, 14, 14))  # 2x2 patch grid
        swapped = image.copy()
        swapped[:, :7, :7], swapped[:, 7:, 7:] = (
            image[:, 7:, 7:].copy(),
            image[:, :7, :7].copy(),
        )
        base = embed(image, w).tokens
        out = embed(swapped, w).tokens
        np.testing.assert_array_equal(out[0], base[3])
        np.testing.assert_array_equal(out[3], base[0])
        np.testing.assert_array_equal(out[1], base[1])
        np.testing.assert_array_equal(out[2], base[2])

    def test_rejects_bad_shapes(self):
        rng = np.random.default_rng(5)
        w = random_weights(8, 3, 7, rng)
        with pytest.raises(InvalidInputError):
            embed(np.zeros((4, 14, 14)), w)
        with pytest.raises(InvalidInputError):
            embed(np.zeros((3, 15, 14)), w)


class TestAssembleInput:
    def _channel(self, transform_cfg, measurements=()):
        ms = SparseMeasurementSet(tuple(measurements))
        return rasterize_channel(ms, 28, 14, 14, 900.0, transform_cfg)

    def test_empty_channel_zero_plane(self, transform_cfg):
        rgb = np.random.default_rng(0).uniform(0, 1, (3, 14, 28))
        stacked = assemble_input(rgb, self._channel(transform_cfg))
        assert stacked.shape == (4, 14, 28)
        assert not np.any(stacked[3])
        np.testing.assert_allclose(stacked[:3], rgb, rtol=1e-6)

    def test_grayscale_replicated(self, transform_cfg):
        gray = np.random.default_rng(1).uniform(0, 1, (14, 28))
        stacked = assemble_input(gray, self._channel(transform_cfg))
        np.testing.assert_array_equal(stacked[0], stacked[1])
        np.testing.assert_array_equal(stacked[1], stacked[2])

    def test_single_measurement_single_block(self, transform_cfg):
        channel = self._channel(transform_cfg, [SparseMeasurement(16, 2, 4.0)])
        rgb = np.zeros((3, 14, 28))
        stacked = assemble_input(rgb, channel)
        nonzero_cols = np.nonzero(stacked[3].any(axis=0))[0]
        assert nonzero_cols.min() == 14 and nonzero_cols.max() == 27

    def test_shape_mismatch_rejected(self, transform_cfg):
        with pytest.raises(InvalidInputError):
            assemble_input(np.zeros((3, 28, 28)), self._channel(transform_cfg))


class TestWeightsIO:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        w = random_weights(24, 4, 14, rng)
        path = tmp_path / "weights.bin"
        save_weights(path, w)
        back = load_weights(path)
        assert np.array_equal(back.kernel, w.kernel)
        assert np.array_equal(back.bias, w.bias)
        assert (tmp_path / "weights.bin.json").is_file()

    def test_size_mismatch_rejected(self, tmp_path):
        rng = np.random.default_rng(1)
        w = random_weights(8, 3, 7, rng)
        path = tmp_path / "weights.bin"
        save_weights(path, w)
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(InvalidInputError):
            load_weights(path)


class TestResize:
    def test_bilinear_identity(self):
        rng = np.random.default_rng(0)
        img = rng.random((12, 17))
        np.testing.assert_allclose(resize_bilinear(img, 12, 17), img, atol=1e-12)

    def test_bilinear_constant_preserved(self):
        img = np.full((10, 10), 3.25)
        np.testing.assert_allclose(resize_bilinear(img, 7, 9), 3.25, atol=1e-12)

    def test_nearest_preserves_values(self):
        rng = np.random.default_rng(1)
        img = rng.uniform(1, 5, (480, 640)).astype(np.float32)
        img[rng.random(img.shape) < 0.5] = 0.0
        out = resize_nearest(img, 476, 630)
        assert set(np.unique(out)).issubset(set(np.unique(img)))
