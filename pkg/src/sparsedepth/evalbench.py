"""Evaluation bench: per-frame MAE/RMSE, the least-squares affine lift, and
average-rank aggregation across datasets.

Metrics are computed in meters over pixels valid in both prediction and
ground truth; dataset summaries average per-frame metrics unweighted (each
frame counts once regardless of how many ground-truth pixels it has).

The affine lift fits ``a * p + b ~ t`` between prediction samples and sparse
measurements. In the default ``inverse`` domain both sides are inverted
before fitting, matching the convention that affine-invariant monocular
predictions are affine in disparity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FitError, InvalidInputError
from .geometry import DepthMap
from .sparse import SparseMeasurementSet

DOMAIN_METRIC = "metric"
DOMAIN_INVERSE = "inverse"


@dataclass(frozen=True)
class FrameEval:
    """Per-frame metrics in meters over the joint validity mask."""

    mae: float
    rmse: float
    n_gt: int


@dataclass(frozen=True)
class AffineFit:
    """Scale/shift of a least-squares fit plus its RMS residual (fit domain)."""

    scale: float
    shift: float
    residual: float
    domain: str


@dataclass(frozen=True)
class DatasetSummary:
    mae_mean: float
    rmse_mean: float
    frames: tuple[FrameEval, ...]


@dataclass(frozen=True)
class RankTable:
    """Methods ranked per column, sorted so the best average rank comes last."""

    methods: tuple[str, ...]
    columns: tuple[str, ...]
    values: np.ndarray
    ranks: np.ndarray
    avg_rank: np.ndarray


def frame_metrics(pred: DepthMap, gt: DepthMap) -> FrameEval:
    """MAE and RMSE over pixels valid in both maps."""
    if pred.values.shape != gt.values.shape:
        raise InvalidInputError("prediction and ground truth shapes differ")
    both = pred.validity & gt.validity
    n = int(np.count_nonzero(both))
    if n == 0:
        raise InvalidInputError("prediction and ground truth share no valid pixels")
    diff = pred.values[both].astype(np.float64) - gt.values[both].astype(np.float64)
    mae = float(np.mean(np.abs(diff)))
    rmse = float(np.sqrt(np.mean(diff * diff)))
    return FrameEval(mae=mae, rmse=rmse, n_gt=n)


def _fit_samples(
    affine_pred: np.ndarray, measurements: SparseMeasurementSet, domain: str
) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(affine_pred, dtype=np.float64)
    xs, ys = [], []
    for m in measurements:
        if m.v >= pred.shape[0] or m.u >= pred.shape[1]:
            raise InvalidInputError(f"measurement ({m.u}, {m.v}) outside prediction raster")
        p = pred[m.v, m.u]
        if not np.isfinite(p):
            continue
        if domain == DOMAIN_INVERSE:
            if p <= 0:
                continue
            xs.append(1.0 / p)
            ys.append(1.0 / m.depth)
        else:
            xs.append(p)
            ys.append(m.depth)
    return np.array(xs), np.array(ys)


def ls_affine_fit(
    affine_pred: np.ndarray,
    measurements: SparseMeasurementSet,
    domain: str = DOMAIN_INVERSE,
) -> AffineFit:
    """Closed-form least squares of a * p + b against the measurements.

    Raises FitError with fewer than 2 usable samples or when all prediction
    samples are equal (scale is then unobservable).
    """
    if domain not in (DOMAIN_METRIC, DOMAIN_INVERSE):
        raise InvalidInputError(f"unknown fit domain {domain!r}")
    x, y = _fit_samples(affine_pred, measurements, domain)
    if x.size < 2:
        raise FitError(f"affine fit needs >= 2 usable measurements, got {x.size}")
    x_mean = x.mean()
    y_mean = y.mean()
    sxx = float(((x - x_mean) ** 2).sum())
    if sxx == 0.0:
        raise FitError("affine fit is degenerate: all prediction samples are equal")
    sxy = float(((x - x_mean) * (y - y_mean)).sum())
    a = sxy / sxx
    b = float(y_mean - a * x_mean)
    residual = float(np.sqrt(np.mean((a * x + b - y) ** 2)))
    return AffineFit(scale=a, shift=b, residual=residual, domain=domain)


def lift_prediction(affine_pred: np.ndarray, fit: AffineFit) -> DepthMap:
    """Apply a fit to the full raster, yielding a metric depth map.

    Pixels that are non-finite, unusable in the fit domain, or lift to a
    non-positive depth come out invalid.
    """
    pred = np.asarray(affine_pred, dtype=np.float64)
    usable = np.isfinite(pred)
    if fit.domain == DOMAIN_INVERSE:
        usable &= pred > 0
        lifted = np.zeros_like(pred)
        inv = fit.scale / np.where(usable, pred, 1.0) + fit.shift
        good = usable & (inv > 0)
        lifted[good] = 1.0 / inv[good]
    else:
        lifted = np.where(usable, fit.scale * pred + fit.shift, 0.0)
        lifted[lifted < 0] = 0.0
    return DepthMap(np.where(np.isfinite(lifted), lifted, 0.0).astype(np.float32))


def dataset_eval(frames: list[tuple[DepthMap, DepthMap]]) -> DatasetSummary:
    """Unweighted mean of per-frame metrics over (pred, gt) pairs."""
    if not frames:
        raise InvalidInputError("dataset_eval needs at least one frame")
    records = []
    for index, (pred, gt) in enumerate(frames):
        try:
            records.append(frame_metrics(pred, gt))
        except InvalidInputError as exc:
            raise InvalidInputError(f"frame {index}: {exc}") from exc
    return DatasetSummary(
        mae_mean=float(np.mean([r.mae for r in records])),
        rmse_mean=float(np.mean([r.rmse for r in records])),
        frames=tuple(records),
    )


def _average_ranks(column: np.ndarray) -> np.ndarray:
    """Rank 1 = smallest; exact ties share the average of their positions."""
    n = column.size
    order = np.argsort(column, kind="stable")
    ranks = np.empty(n, dtype=np.float64)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and column[order[j + 1]] == column[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * ((i + 1) + (j + 1))
        i = j + 1
    return ranks


def rank_aggregate(
    values: np.ndarray,
    methods: list[str] | None = None,
    columns: list[str] | None = None,
    lower_is_better: bool = True,
) -> RankTable:
    """Average the per-column ranks of a methods x metrics matrix.

    The output is sorted by average rank descending, so the best method is
    the last row; sorting is stable for tied averages.
    """
    mat = np.asarray(values, dtype=np.float64)
    if mat.ndim != 2 or mat.size == 0:
        raise InvalidInputError("values must be a non-empty 2-D matrix")
    if np.any(~np.isfinite(mat)):
        raise InvalidInputError("rank aggregation requires a fully populated matrix")
    n, m = mat.shape
    if methods is None:
        methods = [f"method_{i}" for i in range(n)]
    if columns is None:
        columns = [f"col_{j}" for j in range(m)]
    if len(methods) != n or len(columns) != m:
        raise InvalidInputError("label lengths must match the matrix")
    signed = mat if lower_is_better else -mat
    ranks = np.column_stack([_average_ranks(signed[:, j]) for j in range(m)])
    avg = ranks.mean(axis=1)
    order = np.argsort(-avg, kind="stable")
    return RankTable(
        methods=tuple(methods[i] for i in order),
        columns=tuple(columns),
        values=mat[order],
        ranks=ranks[order],
        avg_rank=avg[order],
    )
