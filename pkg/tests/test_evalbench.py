import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsedepth.errors import FitError, InvalidInputError
from sparsedepth.evalbench import (
    DOMAIN_INVERSE,
    DOMAIN_METRIC,
    dataset_eval,
    frame_metrics,
    lift_prediction,
    ls_affine_fit,
    rank_aggregate,
)
from sparsedepth.geometry import DepthMap
from sparsedepth.sparse import SparseMeasurement, SparseMeasurementSet

from _tables import BENCHMARK_COLUMNS, BENCHMARK_ROWS, EXPECTED_AVG_RANKS


def _dm(values) -> DepthMap:
    return DepthMap(np.asarray(values, dtype=np.float32))


class TestFrameMetrics:
    def test_perfect_prediction(self):
        gt = _dm([[1.0, 2.0], [3.0, 0.0]])
        out = frame_metrics(gt, gt)
        assert out.mae == 0.0 and out.rmse == 0.0
        assert out.n_gt == 3

    def test_constant_offset(self):
        gt = _dm(np.full((5, 5), 4.0))
        pred = _dm(np.full((5, 5), 5.0))
        out = frame_metrics(pred, gt)
        assert out.mae == pytest.approx(1.0)
        assert out.rmse == pytest.approx(1.0)

    def test_hand_computed_two_pixel_case(self):
        # errors {+1, -3}: mae = 2, rmse = sqrt(5)
        gt = _dm([[2.0, 5.0]])
        pred = _dm([[3.0, 2.0]])
        out = frame_metrics(pred, gt)
        assert out.mae == pytest.approx(2.0)
        assert out.rmse == pytest.approx(np.sqrt(5.0))

    def test_only_joint_valid_pixels_count(self):
        gt = _dm([[1.0, 0.0, 2.0]])
        pred = _dm([[1.5, 9.0, 0.0]])
        out = frame_metrics(pred, gt)
        assert out.n_gt == 1
        assert out.mae == pytest.approx(0.5)

    def test_no_overlap_errors(self):
        gt = _dm([[1.0, 0.0]])
        pred = _dm([[0.0, 1.0]])
        with pytest.raises(InvalidInputError):
            frame_metrics(pred, gt)

    def test_mae_le_rmse_property(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            gt = _dm(rng.uniform(0.1, 20, (8, 8)))
            pred = _dm(rng.uniform(0.1, 20, (8, 8)))
            out = frame_metrics(pred, gt)
            assert out.mae <= out.rmse + 1e-12


class TestLsAffineFit:
    def _measurements(self, pixels, depths):
        return SparseMeasurementSet(
            tuple(SparseMeasurement(u, v, d) for (u, v), d in zip(pixels, depths))
        )

    def test_exact_affine_recovery_metric(self):
        rng = np.random.default_rng(1)
        pred = rng.uniform(1.0, 5.0, (10, 10))
        pixels = [(1, 1), (3, 2), (7, 7), (9, 0), (4, 8)]
        depths = [2.0 * pred[v, u] + 3.0 for u, v in pixels]
        fit = ls_affine_fit(pred, self._measurements(pixels, depths), DOMAIN_METRIC)
        assert fit.scale == pytest.approx(2.0, abs=1e-9)
        assert fit.shift == pytest.approx(3.0, abs=1e-9)
        assert fit.residual < 1e-9

    def test_identity_fit(self):
        rng = np.random.default_rng(2)
        pred = rng.uniform(1.0, 5.0, (6, 6))
        pixels = [(0, 0), (2, 3), (5, 5)]
        depths = [float(pred[v, u]) for u, v in pixels]
        fit = ls_affine_fit(pred, self._measurements(pixels, depths), DOMAIN_METRIC)
        assert fit.scale == pytest.approx(1.0, abs=1e-12)
        assert fit.shift == pytest.approx(0.0, abs=1e-12)

    def test_single_measurement_is_fit_error(self):
        pred = np.ones((4, 4)) * 2.0
        with pytest.raises(FitError):
            ls_affine_fit(pred, self._measurements([(0, 0)], [2.0]), DOMAIN_METRIC)

    def test_degenerate_equal_predictions(self):
        pred = np.full((4, 4), 3.0)
        ms = self._measurements([(0, 0), (1, 1), (2, 2)], [1.0, 2.0, 3.0])
        with pytest.raises(FitError):
            ls_affine_fit(pred, ms, DOMAIN_METRIC)

    def test_point_counts_2_to_10(self):
        rng = np.random.default_rng(3)
        for n in range(2, 11):
            pred = rng.uniform(0.5, 4.0, (12, 12))
            pixels = [(int(u), int(v)) for u, v in rng.integers(0, 12, (3 * n, 2))]
            pixels = list(dict.fromkeys(pixels))[:n]  # distinct pixels
            a_true, b_true = 1.7, -0.2
            depths = [a_true * pred[v, u] + b_true for u, v in pixels]
            fit = ls_affine_fit(pred, self._measurements(pixels, depths), DOMAIN_METRIC)
            assert fit.scale == pytest.approx(a_true, abs=1e-9)
            assert fit.shift == pytest.approx(b_true, abs=1e-9)

    def test_inverse_domain_recovery_and_lift(self):
        # corrupt a depth map by an affine map in inverse space, then recover
        rng = np.random.default_rng(4)
        gt = rng.uniform(2.0, 30.0, (16, 16))
        a_true, b_true = 0.8, 0.01
        pred = 1.0 / (a_true / gt + b_true)  # depth-like corrupted raster
        pixels = [(2, 2), (9, 4), (14, 13), (1, 11)]
        ms = self._measurements(pixels, [float(gt[v, u]) for u, v in pixels])
        fit = ls_affine_fit(pred, ms, DOMAIN_INVERSE)
        lifted = lift_prediction(pred, fit)
        np.testing.assert_allclose(lifted.values, gt, rtol=1e-6)

    def test_metric_lift_applies_scale_shift(self):
        pred = np.array([[1.0, 2.0], [3.0, 4.0]])
        fit_ms = self._measurements([(0, 0), (1, 0), (0, 1)], [3.0, 5.0, 7.0])
        fit = ls_affine_fit(pred, fit_ms, DOMAIN_METRIC)
        lifted = lift_prediction(pred, fit)
        np.testing.assert_allclose(lifted.values, 2.0 * pred + 1.0, rtol=1e-6)

    def test_residual_zero_iff_exactly_affine(self):
        rng = np.random.default_rng(5)
        pred = rng.uniform(1.0, 5.0, (8, 8))
        pixels = [(0, 0), (3, 3), (7, 2), (5, 6)]
        exact = [2.0 * pred[v, u] - 1.0 for u, v in pixels]
        fit = ls_affine_fit(pred, self._measurements(pixels, exact), DOMAIN_METRIC)
        assert fit.residual <= 1e-9
        noisy = [d + 0.5 * (i % 2) for i, d in enumerate(exact)]
        fit_noisy = ls_affine_fit(pred, self._measurements(pixels, noisy), DOMAIN_METRIC)
        assert fit_noisy.residual > 1e-3


class TestRankAggregate:
    def test_reproduces_published_average_ranks(self):
        methods = [name for name, _ in BENCHMARK_ROWS]
        values = np.array([row for _, row in BENCHMARK_ROWS])
        table = rank_aggregate(values, methods, BENCHMARK_COLUMNS)
        for name, avg in zip(table.methods, table.avg_rank):
            assert round(avg, 2) == EXPECTED_AVG_RANKS[name]
        # sorted worst-first, best last; the printed order is preserved
        assert list(table.methods) == methods
        assert table.methods[-1] == "Ours"
        assert table.avg_rank[-1] == pytest.approx(1.20)

    def test_single_method(self):
        table = rank_aggregate(np.array([[1.0, 2.0, 3.0]]))
        assert table.avg_rank[0] == 1.0

    def test_identical_rows_tie_at_one_point_five(self):
        table = rank_aggregate(np.array([[1.0, 2.0], [1.0, 2.0]]))
        np.testing.assert_array_equal(table.avg_rank, [1.5, 1.5])

    def test_rejects_nan(self):
        with pytest.raises(InvalidInputError):
            rank_aggregate(np.array([[1.0, np.nan]]))

    def test_higher_is_better_flag(self):
        table = rank_aggregate(np.array([[1.0], [2.0]]), lower_is_better=False)
        assert table.methods == ("method_0", "method_1")  # method_1 ranks best, last
        assert table.avg_rank[-1] == 1.0

    def test_avg_rank_mean_is_invariant(self):
        rng = np.random.default_rng(0)
        values = rng.random((7, 5))
        table = rank_aggregate(values)
        assert table.avg_rank.mean() == pytest.approx((7 + 1) / 2)

    @settings(max_examples=40)
    @given(seed=st.integers(min_value=0, max_value=10_000))
    def test_invariant_under_monotone_column_transforms(self, seed):
        rng = np.random.default_rng(seed)
        values = rng.random((6, 4))
        base = rank_aggregate(values)
        transformed = np.column_stack(
            [np.exp(values[:, 0]), 2 * values[:, 1] + 1, values[:, 2] ** 3, np.sqrt(values[:, 3])]
        )
        out = rank_aggregate(transformed)
        np.testing.assert_array_equal(out.ranks, base.ranks)
        assert out.methods == base.methods


class TestDatasetEval:
    def test_mean_of_frame_maes(self):
        gt = _dm(np.full((4, 4), 4.0))
        frames = [
            (_dm(np.full((4, 4), 5.0)), gt),  # mae 1
            (_dm(np.full((4, 4), 7.0)), gt),  # mae 3
        ]
        summary = dataset_eval(frames)
        assert summary.mae_mean == pytest.approx(2.0)

    def test_identical_lists_zero(self):
        rng = np.random.default_rng(0)
        frames = [(lambda d: (d, d))(_dm(rng.uniform(1, 5, (6, 6)))) for _ in range(3)]
        summary = dataset_eval(frames)
        assert summary.mae_mean == 0.0 and summary.rmse_mean == 0.0

    def test_permutation_invariant(self):
        rng = np.random.default_rng(1)
        frames = [
            (_dm(rng.uniform(1, 5, (5, 5))), _dm(rng.uniform(1, 5, (5, 5))))
            for _ in range(6)
        ]
        a = dataset_eval(frames)
        b = dataset_eval(frames[::-1])
        assert a.mae_mean == pytest.approx(b.mae_mean)
        assert a.rmse_mean == pytest.approx(b.rmse_mean)

    def test_frame_errors_carry_index(self):
        good = _dm(np.full((3, 3), 2.0))
        bad_pred = _dm(np.zeros((3, 3)))
        with pytest.raises(InvalidInputError, match="frame 1"):
            dataset_eval([(good, good), (bad_pred, good)])

    def test_empty_errors(self):
        with pytest.raises(InvalidInputError):
            dataset_eval([])
