"""4-channel patch embedding with pretrained-weight concatenation.

The embedding is a non-overlapping stride-P convolution: each P x P patch of
a C-channel image maps to one token, ``bias + sum(kernel * patch)``. Tokens
accumulate channel by channel in channel order, so adding an all-zero extra
channel leaves every token bit-identical - the property that lets a
3-channel pretrained kernel extend to 4 channels without disturbing its
output at initialization.

Weights serialize as a flat little-endian float32 file (kernel then bias)
with a JSON sidecar carrying the shapes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .sparse import SparseDepthChannel


@dataclass(frozen=True)
class EmbedWeights:
    """Patch-embedding convolution weights, kernel [E, C, P, P], bias [E]."""

    kernel: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        k = np.ascontiguousarray(self.kernel, dtype=np.float32)
        b = np.ascontiguousarray(self.bias, dtype=np.float32)
        if k.ndim != 4 or k.shape[2] != k.shape[3]:
            raise InvalidInputError("kernel must be [embed_dim, channels, patch, patch]")
        if k.shape[1] not in (3, 4):
            raise InvalidInputError("in_channels must be 3 or 4")
        if k.shape[2] < 1:
            raise InvalidInputError("patch size must be >= 1")
        if b.shape != (k.shape[0],):
            raise InvalidInputError("bias length must equal embed_dim")
        if not (np.all(np.isfinite(k)) and np.all(np.isfinite(b))):
            raise InvalidInputError("weights must be finite")
        object.__setattr__(self, "kernel", k)
        object.__setattr__(self, "bias", b)

    @property
    def embed_dim(self) -> int:
        return self.kernel.shape[0]

    @property
    def in_channels(self) -> int:
        return self.kernel.shape[1]

    @property
    def patch(self) -> int:
        return self.kernel.shape[2]


@dataclass(frozen=True)
class TokenGrid:
    """Embedding tokens [n_patches, embed_dim]; grid = (cols, rows)."""

    tokens: np.ndarray
    grid: tuple[int, int]


def random_weights(
    embed_dim: int, in_channels: int, patch: int, rng: np.random.Generator, scale: float = 0.02
) -> EmbedWeights:
    """Gaussian-initialized weights, handy for tests and the CLI checks."""
    kernel = rng.normal(0.0, 1.0, (embed_dim, in_channels, patch, patch)) * scale
    bias = rng.normal(0.0, 1.0, embed_dim) * scale
    return EmbedWeights(kernel.astype(np.float32), bias.astype(np.float32))


def concat_weights(
    w3: EmbedWeights, init_scale: float, rng: np.random.Generator
) -> EmbedWeights:
    """Extend 3-channel weights with a Gaussian(0, init_scale^2) 4th channel.

    Channels 0-2 and the bias are carried over bitwise.
    """
    if w3.in_channels != 3:
        raise InvalidInputError("concat_weights expects 3-channel weights")
    extra = rng.normal(0.0, 1.0, (w3.embed_dim, 1, w3.patch, w3.patch)) * init_scale
    kernel = np.concatenate([w3.kernel, extra.astype(np.float32)], axis=1)
    return EmbedWeights(kernel, w3.bias.copy())


def embed(image: np.ndarray, w: EmbedWeights) -> TokenGrid:
    """Tokenize a [C, H, W] image with non-overlapping stride-P patches.

    Tokens are accumulated in float64, one channel at a time.
    """
    img = np.ascontiguousarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[0] != w.in_channels:
        raise InvalidInputError(
            f"image must be [{w.in_channels}, H, W], got {img.shape}"
        )
    _, h, width = img.shape
    p = w.patch
    if h % p or width % p:
        raise InvalidInputError(f"image {width}x{h} not divisible by patch {p}")
    rows, cols = h // p, width // p
    n = rows * cols
    tokens = np.repeat(w.bias.astype(np.float64)[np.newaxis, :], n, axis=0)
    flat_kernel = w.kernel.astype(np.float64).reshape(w.embed_dim, w.in_channels, p * p)
    for c in range(w.in_channels):
        patches = (
            img[c]
            .reshape(rows, p, cols, p)
            .transpose(0, 2, 1, 3)
            .reshape(n, p * p)
        )
        tokens += patches @ np.ascontiguousarray(flat_kernel[:, c, :]).T
    return TokenGrid(tokens=tokens, grid=(cols, rows))


def assemble_input(rgb: np.ndarray, channel: SparseDepthChannel) -> np.ndarray:
    """Stack an RGB (or grayscale, replicated) image with the sparse depth
    channel into the [4, H, W] network input."""
    img = np.asarray(rgb, dtype=np.float32)
    if img.ndim == 2:
        img = img[np.newaxis]
    if img.ndim != 3 or img.shape[0] not in (1, 3):
        raise InvalidInputError("rgb must be [3, H, W], [1, H, W], or [H, W]")
    if img.shape[0] == 1:
        img = np.repeat(img, 3, axis=0)
    if img.shape[1:] != channel.values.shape:
        raise InvalidInputError(
            f"image {img.shape[1:]} and channel {channel.values.shape} sizes differ"
        )
    return np.concatenate([img, channel.values[np.newaxis]], axis=0)


def save_weights(path, w: EmbedWeights) -> None:
    """Write kernel then bias as little-endian float32 plus a JSON sidecar."""
    path = Path(path)
    flat = np.concatenate([w.kernel.ravel(), w.bias.ravel()]).astype("<f4")
    path.write_bytes(flat.tobytes())
    sidecar = {
        "kernel_shape": list(w.kernel.shape),
        "bias_shape": list(w.bias.shape),
        "dtype": "float32-le",
    }
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(sidecar, indent=2) + "\n"
    )


def load_weights(path) -> EmbedWeights:
    path = Path(path)
    sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    kernel_shape = tuple(sidecar["kernel_shape"])
    bias_shape = tuple(sidecar["bias_shape"])
    flat = np.frombuffer(path.read_bytes(), dtype="<f4")
    n_kernel = int(np.prod(kernel_shape))
    if flat.size != n_kernel + int(np.prod(bias_shape)):
        raise InvalidInputError(f"{path}: size does not match sidecar shapes")
    return EmbedWeights(
        flat[:n_kernel].reshape(kernel_shape).copy(),
        flat[n_kernel:].reshape(bias_shape).copy(),
    )


def resize_bilinear(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Plain bilinear resampling (align-corners=False convention)."""
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    if out_h < 1 or out_w < 1:
        raise InvalidInputError("output size must be positive")
    ys = np.clip((np.arange(out_h) + 0.5) * h / out_h - 0.5, 0, h - 1)
    xs = np.clip((np.arange(out_w) + 0.5) * w / out_w - 0.5, 0, w - 1)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    top = img[np.ix_(y0, x0)] * (1 - wx) + img[np.ix_(y0, x1)] * wx
    bottom = img[np.ix_(y1, x0)] * (1 - wx) + img[np.ix_(y1, x1)] * wx
    return top * (1 - wy) + bottom * wy


def resize_nearest(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbor resampling; keeps depth validity semantics intact."""
    img = np.asarray(image)
    h, w = img.shape
    ys = np.minimum(((np.arange(out_h) + 0.5) * h / out_h).astype(np.intp), h - 1)
    xs = np.minimum(((np.arange(out_w) + 0.5) * w / out_w).astype(np.intp), w - 1)
    return img[np.ix_(ys, xs)]
