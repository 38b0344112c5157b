"""Training-time sparse depth measurement simulation.

Pipeline: detect corners on the grayscale image, sample a handful of them at
valid ground-truth pixels, optionally corrupt their depths with
multiplicative noise, and rasterize the survivors into a patch-filled
normalized inverse canonical depth channel (the model's 4th input channel).

Noise defaults (p_noise, n_low, n_high) are working placeholders exposed in
SamplerConfig, not calibrated values.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidInputError
from .geometry import ClampStats, DepthMap, TransformConfig, encode_sparse_value

SOURCE_TAGS = ("simulated", "radar", "landmark", "file")


@dataclass(frozen=True)
class SparseMeasurement:
    """One pixel-anchored metric depth sample."""

    u: int
    v: int
    depth: float
    source: str = "simulated"

    def __post_init__(self):
        if self.u < 0 or self.v < 0:
            raise InvalidInputError("pixel coordinates must be non-negative")
        if not (self.depth > 0 and np.isfinite(self.depth)):
            raise InvalidInputError("measurement depth must be positive and finite")
        if self.source not in SOURCE_TAGS:
            raise InvalidInputError(f"unknown source tag {self.source!r}")


@dataclass(frozen=True)
class SparseMeasurementSet:
    """Immutable collection of measurements, iteration order preserved."""

    measurements: tuple[SparseMeasurement, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "measurements", tuple(self.measurements))

    def __len__(self) -> int:
        return len(self.measurements)

    def __iter__(self):
        return iter(self.measurements)

    def __getitem__(self, i: int) -> SparseMeasurement:
        return self.measurements[i]


@dataclass(frozen=True)
class SamplerConfig:
    """Corner detection, subsampling, and noise parameters."""

    n_min: int = 1
    n_max: int = 10
    p_noise: float = 0.5
    n_low: float = 0.9
    n_high: float = 1.1
    corner_quality: float = 0.01
    corner_min_dist: float = 10.0
    corner_max_candidates: int = 200
    seed: int = 0

    def __post_init__(self):
        if not (1 <= self.n_min <= self.n_max):
            raise InvalidInputError("require 1 <= n_min <= n_max")
        if not (0 <= self.p_noise <= 1):
            raise InvalidInputError("p_noise must be in [0, 1]")
        if not (0 < self.n_low <= self.n_high):
            raise InvalidInputError("require 0 < n_low <= n_high")
        if self.corner_quality <= 0 or self.corner_min_dist < 0:
            raise InvalidInputError("bad corner detector parameters")
        if self.corner_max_candidates < 1:
            raise InvalidInputError("corner_max_candidates must be >= 1")


@dataclass(frozen=True)
class SparseDepthChannel:
    """Patch-constant raster of encoded depths; 0 where no measurement."""

    values: np.ndarray
    patch_size: int

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float32)
        if v.ndim != 2:
            raise InvalidInputError("channel raster must be 2-D")
        if v.shape[0] % self.patch_size or v.shape[1] % self.patch_size:
            raise InvalidInputError("raster dimensions must be multiples of patch_size")
        object.__setattr__(self, "values", v)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def _min_eigenvalue_map(gray: np.ndarray) -> np.ndarray:
    """Smaller structure-tensor eigenvalue per pixel (Sobel gradients,
    3x3 summation window). Pixels without full window support score 0."""
    img = np.asarray(gray, dtype=np.float64)
    h, w = img.shape
    scores = np.zeros((h, w))
    if h < 5 or w < 5:
        return scores
    # Sobel responses on the interior (valid 3x3 neighborhood)
    gx = (
        img[:-2, 2:] + 2.0 * img[1:-1, 2:] + img[2:, 2:]
        - img[:-2, :-2] - 2.0 * img[1:-1, :-2] - img[2:, :-2]
    )
    gy = (
        img[2:, :-2] + 2.0 * img[2:, 1:-1] + img[2:, 2:]
        - img[:-2, :-2] - 2.0 * img[:-2, 1:-1] - img[:-2, 2:]
    )
    ixx = gx * gx
    ixy = gx * gy
    iyy = gy * gy

    def window_sum(a: np.ndarray) -> np.ndarray:
        return (
            a[:-2, :-2] + a[:-2, 1:-1] + a[:-2, 2:]
            + a[1:-1, :-2] + a[1:-1, 1:-1] + a[1:-1, 2:]
            + a[2:, :-2] + a[2:, 1:-1] + a[2:, 2:]
        )

    sxx = window_sum(ixx)
    sxy = window_sum(ixy)
    syy = window_sum(iyy)
    disc = np.sqrt((sxx - syy) ** 2 + 4.0 * sxy**2)
    min_eig = 0.5 * ((sxx + syy) - disc)
    scores[2:-2, 2:-2] = min_eig
    return scores


def detect_corners(gray: np.ndarray, cfg: SamplerConfig) -> list[tuple[int, int, float]]:
    """Shi-Tomasi style corners as (u, v, score), strongest first.

    Keeps pixels scoring at least corner_quality times the maximum, applies
    greedy non-max suppression at corner_min_dist (euclidean), and returns at
    most corner_max_candidates. Ordering is deterministic: score descending,
    row-major on ties.
    """
    img = np.asarray(gray, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise InvalidInputError("image must be a non-empty 2-D array")
    scores = _min_eigenvalue_map(img)
    max_score = scores.max()
    if max_score <= 0:
        return []
    rows, cols = np.nonzero(scores >= cfg.corner_quality * max_score)
    vals = scores[rows, cols]
    order = np.lexsort((cols, rows, -vals))
    rows, cols, vals = rows[order], cols[order], vals[order]
    kept_u: list[int] = []
    kept_v: list[int] = []
    kept_s: list[float] = []
    min_dist_sq = cfg.corner_min_dist**2
    for r, c, s in zip(rows, cols, vals):
        if kept_u:
            du = np.array(kept_u) - c
            dv = np.array(kept_v) - r
            if np.min(du * du + dv * dv) < min_dist_sq:
                continue
        kept_u.append(int(c))
        kept_v.append(int(r))
        kept_s.append(float(s))
        if len(kept_u) >= cfg.corner_max_candidates:
            break
    return list(zip(kept_u, kept_v, kept_s))


def sample_measurements(
    corners: list[tuple[int, int, float]],
    depth_gt: DepthMap,
    cfg: SamplerConfig,
    rng: np.random.Generator,
) -> SparseMeasurementSet:
    """Draw n ~ uniform[n_min, n_max] corners (without replacement) that land
    on valid ground-truth pixels and read their depths."""
    if not corners:
        return SparseMeasurementSet()
    n = int(rng.integers(cfg.n_min, cfg.n_max + 1))
    eligible = [(u, v) for u, v, _ in corners if depth_gt.values[v, u] > 0]
    if not eligible:
        return SparseMeasurementSet()
    k = min(n, len(eligible))
    chosen = rng.choice(len(eligible), size=k, replace=False)
    out = []
    for i in chosen:
        u, v = eligible[int(i)]
        out.append(SparseMeasurement(u, v, float(depth_gt.values[v, u]), "simulated"))
    return SparseMeasurementSet(tuple(out))


def apply_noise(
    measurements: SparseMeasurementSet, cfg: SamplerConfig, rng: np.random.Generator
) -> SparseMeasurementSet:
    """With probability p_noise per measurement, scale its depth by a factor
    drawn uniform[n_low, n_high]. Source tags are preserved."""
    out = []
    for m in measurements:
        if rng.random() < cfg.p_noise:
            factor = rng.uniform(cfg.n_low, cfg.n_high)
            out.append(replace(m, depth=m.depth * factor))
        else:
            out.append(m)
    return SparseMeasurementSet(tuple(out))


def rasterize_channel(
    measurements: SparseMeasurementSet,
    width: int,
    height: int,
    patch_size: int,
    f: float,
    cfg: TransformConfig,
    stats: ClampStats | None = None,
) -> SparseDepthChannel:
    """Fill each measurement's patch with its encoded depth.

    When two measurements land in one patch the smaller metric depth wins
    (nearest-obstacle semantics). Untouched pixels stay 0.
    """
    if width % patch_size or height % patch_size:
        raise InvalidInputError(
            f"raster {width}x{height} not divisible by patch size {patch_size}"
        )
    nearest: dict[tuple[int, int], float] = {}
    for m in measurements:
        if m.u >= width or m.v >= height:
            raise InvalidInputError(f"measurement ({m.u}, {m.v}) outside {width}x{height}")
        patch = (m.u // patch_size, m.v // patch_size)
        if patch not in nearest or m.depth < nearest[patch]:
            nearest[patch] = m.depth
    values = np.zeros((height, width), dtype=np.float32)
    for (pu, pv), depth in nearest.items():
        encoded = encode_sparse_value(depth, f, cfg, stats)
        values[
            pv * patch_size : (pv + 1) * patch_size,
            pu * patch_size : (pu + 1) * patch_size,
        ] = encoded
    return SparseDepthChannel(values, patch_size)
