"""Depth training losses with analytic gradients.

Both losses operate on positive rasters with a validity mask and are
domain-agnostic: callers pass rasters already transformed into whatever
prediction space they train in (typically normalized inverse canonical
depth).

Scale-invariant log loss, with r_i = log(pred_i) - log(gt_i) over the N
valid pixels::

    value = (1/N) sum r_i^2 - (lambda_si / N^2) (sum r_i)^2
    d(value)/d(pred_i) = (2/N) (r_i - lambda_si * mean(r)) / pred_i

Gradient-matching loss: the residual R = pred - gt is pooled over
``grad_scales`` resolution levels (level 0 is full resolution; each level
halves via 2x2 averaging of valid pixels) and the absolute forward
differences of every level are summed, normalized by the full-resolution N.
Difference terms with an invalid operand are skipped; a 2x2 block with no
valid pixel is invalid at the coarser level. The gradient is accumulated
analytically back through the differencing and pooling chain.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidInputError
from .geometry import TransformConfig

_REL_FLOOR = 1e-12


@dataclass(frozen=True)
class LossConfig:
    lambda_si: float = 0.5
    lambda_grad: float = 0.5
    grad_scales: int = 4

    def __post_init__(self):
        if not (0 <= self.lambda_si <= 1):
            raise InvalidInputError("lambda_si must be in [0, 1]")
        if self.lambda_grad < 0:
            raise InvalidInputError("lambda_grad must be >= 0")
        if self.grad_scales < 1:
            raise InvalidInputError("grad_scales must be >= 1")


@dataclass(frozen=True)
class LossReport:
    """Loss value with d(value)/d(pred); gradient is 0 at masked pixels."""

    value: float
    gradient: np.ndarray
    n_valid: int


def range_mask(gt: np.ndarray, cfg: TransformConfig) -> np.ndarray:
    """Validity of metric ground truth within the supported [d_min, d_max]."""
    g = np.asarray(gt, dtype=np.float64)
    return (g >= cfg.d_min) & (g <= cfg.d_max)


def _check_inputs(pred, gt, mask) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    m = np.asarray(mask, dtype=bool)
    if p.shape != g.shape or p.shape != m.shape:
        raise InvalidInputError("pred, gt, and mask must share one shape")
    if not np.any(m):
        raise InvalidInputError("mask selects no pixels")
    if np.any(p[m] <= 0) or np.any(g[m] <= 0):
        raise InvalidInputError("pred and gt must be positive at valid pixels")
    if not (np.all(np.isfinite(p[m])) and np.all(np.isfinite(g[m]))):
        raise InvalidInputError("pred and gt must be finite at valid pixels")
    return p, g, m


def si_loss(pred, gt, mask, lambda_si: float = 0.5) -> LossReport:
    """Scale-invariant log loss (see module docstring for the formula)."""
    p, g, m = _check_inputs(pred, gt, mask)
    r = np.log(p[m]) - np.log(g[m])
    n = r.size
    r_mean = r.sum() / n
    value = float((r * r).sum() / n - lambda_si * r_mean * r_mean)
    grad = np.zeros_like(p)
    grad[m] = (2.0 / n) * (r - lambda_si * r_mean) / p[m]
    return LossReport(value=value, gradient=grad, n_valid=n)


def _pool_half(r: np.ndarray, valid: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """2x2 average over valid pixels; returns (pooled, pooled_valid, counts).

    Odd trailing rows/columns form partial blocks rather than being dropped.
    """
    h, w = r.shape
    h2, w2 = (h + 1) // 2, (w + 1) // 2
    rp = np.zeros((h2 * 2, w2 * 2))
    vp = np.zeros((h2 * 2, w2 * 2), dtype=bool)
    rp[:h, :w] = np.where(valid, r, 0.0)
    vp[:h, :w] = valid
    sums = rp.reshape(h2, 2, w2, 2).sum(axis=(1, 3))
    counts = vp.reshape(h2, 2, w2, 2).sum(axis=(1, 3))
    pooled_valid = counts > 0
    pooled = np.where(pooled_valid, sums / np.maximum(counts, 1), 0.0)
    return pooled, pooled_valid, counts


def _unpool_gradient(coarse_grad: np.ndarray, counts: np.ndarray, fine_valid: np.ndarray) -> np.ndarray:
    """Distribute a coarse-level gradient evenly over each block's valid pixels."""
    per_pixel = np.where(counts > 0, coarse_grad / np.maximum(counts, 1), 0.0)
    h, w = fine_valid.shape
    spread = per_pixel.repeat(2, axis=0).repeat(2, axis=1)[:h, :w]
    return np.where(fine_valid, spread, 0.0)


def _tv_term(r: np.ndarray, valid: np.ndarray) -> tuple[float, np.ndarray]:
    """Sum of absolute forward differences over valid pairs, and its gradient
    with respect to r at this level."""
    dx = r[:, 1:] - r[:, :-1]
    vx = valid[:, 1:] & valid[:, :-1]
    dy = r[1:, :] - r[:-1, :]
    vy = valid[1:, :] & valid[:-1, :]
    term = float(np.abs(dx[vx]).sum() + np.abs(dy[vy]).sum())
    grad = np.zeros_like(r)
    sx = np.where(vx, np.sign(dx), 0.0)
    grad[:, 1:] += sx
    grad[:, :-1] -= sx
    sy = np.where(vy, np.sign(dy), 0.0)
    grad[1:, :] += sy
    grad[:-1, :] -= sy
    return term, grad


def grad_matching_loss(pred, gt, mask, grad_scales: int = 4) -> LossReport:
    """Multi-scale gradient-matching loss on the residual pred - gt."""
    if grad_scales < 1:
        raise InvalidInputError("grad_scales must be >= 1")
    p, g, m = _check_inputs(pred, gt, mask)
    n = int(np.count_nonzero(m))
    residuals = [np.where(m, p - g, 0.0)]
    valids = [m]
    counts: list[np.ndarray] = []
    for _ in range(grad_scales - 1):
        pooled, pooled_valid, cnt = _pool_half(residuals[-1], valids[-1])
        residuals.append(pooled)
        valids.append(pooled_valid)
        counts.append(cnt)
    total = 0.0
    carry: np.ndarray | None = None
    for level in range(grad_scales - 1, -1, -1):
        term, level_grad = _tv_term(residuals[level], valids[level])
        total += term
        if carry is not None:
            level_grad = level_grad + _unpool_gradient(carry, counts[level], valids[level])
        carry = level_grad
    assert carry is not None
    grad = np.where(m, carry / n, 0.0)
    return LossReport(value=total / n, gradient=grad, n_valid=n)


def total_loss(pred, gt, mask, cfg: LossConfig) -> LossReport:
    """si_loss + lambda_grad * grad_matching_loss."""
    si = si_loss(pred, gt, mask, cfg.lambda_si)
    gm = grad_matching_loss(pred, gt, mask, cfg.grad_scales)
    return LossReport(
        value=si.value + cfg.lambda_grad * gm.value,
        gradient=si.gradient + cfg.lambda_grad * gm.gradient,
        n_valid=si.n_valid,
    )


LossOp = Callable[[np.ndarray, np.ndarray, np.ndarray, LossConfig], LossReport]


def finite_diff_check(
    loss_op: LossOp,
    pred,
    gt,
    mask,
    cfg: LossConfig,
    epsilon: float = 1e-5,
) -> float:
    """Max relative error between the analytic gradient and central finite
    differences over every valid pixel.

    Relative error uses max(|analytic|, |numeric|, 1e-12) as denominator.
    """
    if epsilon <= 0:
        raise InvalidInputError("epsilon must be positive")
    p = np.asarray(pred, dtype=np.float64).copy()
    g = np.asarray(gt, dtype=np.float64)
    m = np.asarray(mask, dtype=bool)
    analytic = loss_op(p, g, m, cfg).gradient
    worst = 0.0
    rows, cols = np.nonzero(m)
    for row, col in zip(rows, cols):
        saved = p[row, col]
        p[row, col] = saved + epsilon
        up = loss_op(p, g, m, cfg).value
        p[row, col] = saved - epsilon
        down = loss_op(p, g, m, cfg).value
        p[row, col] = saved
        numeric = (up - down) / (2.0 * epsilon)
        a = analytic[row, col]
        err = abs(a - numeric) / max(abs(a), abs(numeric), _REL_FLOOR)
        worst = max(worst, err)
    return worst
