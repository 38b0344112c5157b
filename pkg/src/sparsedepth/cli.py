"""Command-line surface.

Subcommands: gen-data, sample-sparse, encode, eval, rank, losscheck,
embed-check. Every command taking --seed is bit-reproducible; diagnostics go
to stderr, machine-readable output to files or stdout. Exit code 0 means no
error (losscheck and embed-check additionally exit 1 when their check
fails).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import embedding, evalbench, fileio, losses, sparse
from .config import RunConfig, load_run_config
from .errors import ConfigError, FitError, InvalidInputError, MeshParseError
from .geometry import (
    WORLD_FROM_CAM,
    CameraIntrinsics,
    ClampStats,
    DepthMap,
    Pose,
    decode_sparse_value,
    encode_sparse_value,
)
from .render import timed_generate
from .seeding import TAG_EMBED, TAG_LOSSCHECK, TAG_NOISE, derive_rng

_FD_THRESHOLD = 1e-4


def _default_camera() -> tuple[CameraIntrinsics, Pose]:
    intr = CameraIntrinsics(fx=900.0, fy=900.0, cx=320.0, cy=240.0, width=640, height=480)
    return intr, Pose(np.eye(3), np.zeros(3), WORLD_FROM_CAM)


def _load_camera(path: str | None) -> tuple[CameraIntrinsics, Pose]:
    if path is None:
        return _default_camera()
    return fileio.load_camera_json(path)


def _config(args) -> RunConfig:
    return load_run_config(getattr(args, "config", None), getattr(args, "seed", None))


def cmd_gen_data(args) -> int:
    cfg = _config(args)
    mesh = args.mesh or cfg.paths.get("mesh")
    out = args.out or cfg.paths.get("out")
    if mesh is None or out is None:
        raise ConfigError("gen-data needs --mesh and --out (flags or config paths)")
    if not Path(mesh).is_file():
        raise InvalidInputError(f"mesh file not found: {mesh}")
    pose_cfg = cfg.pose_sampler
    if args.frames is not None:
        from dataclasses import replace

        pose_cfg = replace(pose_cfg, n_frames=args.frames)
    intr, _ = _load_camera(args.camera)
    manifest, elapsed = timed_generate(mesh, pose_cfg, intr, out, threads=args.threads)
    print(f"rendered {pose_cfg.n_frames} frames in {elapsed:.2f} s", file=sys.stderr)
    print(manifest)
    return 0


def cmd_sample_sparse(args) -> int:
    cfg = _config(args)
    intr, _ = _load_camera(args.camera)
    image = fileio.read_pgm(args.image).astype(np.float64) / 255.0
    depth = fileio.read_depth_map(args.depth)
    if image.shape != depth.values.shape:
        raise InvalidInputError("image and depth raster sizes differ")
    patch = args.patch
    h, w = image.shape
    if h % patch or w % patch:
        new_h, new_w = (h // patch) * patch, (w // patch) * patch
        if new_h == 0 or new_w == 0:
            raise InvalidInputError(f"image {w}x{h} smaller than one {patch}px patch")
        print(
            f"resizing {w}x{h} -> {new_w}x{new_h} to fit {patch}px patches",
            file=sys.stderr,
        )
        image = embedding.resize_bilinear(image, new_h, new_w)
        depth = DepthMap(embedding.resize_nearest(depth.values, new_h, new_w))

    sampler = cfg.sparse_sampler
    corners = sparse.detect_corners(image, sampler)
    rng = derive_rng(sampler.seed, 0)
    measurements = sparse.sample_measurements(corners, depth, sampler, rng)
    noise_rng = derive_rng(sampler.seed, TAG_NOISE)
    measurements = sparse.apply_noise(measurements, sampler, noise_rng)
    if len(measurements) == 0:
        print("warning: no corners with valid depth; outputs are empty", file=sys.stderr)
    fileio.write_measurements_csv(args.out_csv, measurements)
    stats = ClampStats()
    channel = sparse.rasterize_channel(
        measurements,
        image.shape[1],
        image.shape[0],
        patch,
        intr.mean_focal,
        cfg.transform,
        stats,
    )
    fileio.write_pfm(args.out_channel, channel.values)
    print(
        f"{len(measurements)} measurements, {stats.n_clamped} clamped encodes",
        file=sys.stderr,
    )
    return 0


def cmd_encode(args) -> int:
    cfg = _config(args)
    intr, _ = _load_camera(args.camera)
    values = fileio.read_pfm(args.depth)
    valid = values > 0
    out = np.zeros_like(values)
    stats = ClampStats()
    if args.decode:
        out[valid] = decode_sparse_value(
            values[valid].astype(np.float64), intr.mean_focal, cfg.transform
        )
    else:
        out[valid] = encode_sparse_value(
            values[valid].astype(np.float64), intr.mean_focal, cfg.transform, stats
        )
        print(f"{stats.n_clamped}/{stats.n_total} values clamped", file=sys.stderr)
    fileio.write_pfm(args.out, out)
    return 0


def cmd_eval(args) -> int:
    pred_dir = Path(args.pred_dir)
    gt_dir = Path(args.gt_dir)
    names = sorted(p.name for p in gt_dir.glob("*.pfm"))
    if not names:
        raise InvalidInputError(f"no .pfm files in {gt_dir}")
    frames = []
    for name in names:
        pred_path = pred_dir / name
        if not pred_path.is_file():
            raise InvalidInputError(f"missing prediction {pred_path}")
        frames.append((fileio.read_depth_map(pred_path), fileio.read_depth_map(gt_dir / name)))
    summary = evalbench.dataset_eval(frames)
    report = {
        "dataset": args.dataset,
        "n_frames": len(frames),
        "mae_mean": summary.mae_mean,
        "rmse_mean": summary.rmse_mean,
        "frames": [
            {"index": i, "mae": r.mae, "rmse": r.rmse, "n_gt": r.n_gt}
            for i, r in enumerate(summary.frames)
        ],
    }
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_rank(args) -> int:
    with open(args.values, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise InvalidInputError(f"{args.values}: expected header method,<col>,...")
        columns = [h.strip() for h in header[1:]]
        methods = []
        rows = []
        for row in reader:
            if not row:
                continue
            methods.append(row[0])
            rows.append([float(tok) for tok in row[1:]])
    table = evalbench.rank_aggregate(np.array(rows), methods, columns)
    out_path = Path(args.out) if args.out else None
    lines = [",".join(["method", *table.columns, "avg_rank"])]
    for i, name in enumerate(table.methods):
        cells = [name] + [f"{v:.3f}" for v in table.values[i]] + [f"{table.avg_rank[i]:.2f}"]
        lines.append(",".join(cells))
    text = "\n".join(lines) + "\n"
    if out_path:
        out_path.write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_losscheck(args) -> int:
    cfg = _config(args)
    rng = derive_rng(cfg.seed, TAG_LOSSCHECK, args.size)
    ops = {
        "si": lambda p, g, m, c: losses.si_loss(p, g, m, c.lambda_si),
        "grad": lambda p, g, m, c: losses.grad_matching_loss(p, g, m, c.grad_scales),
        "total": losses.total_loss,
    }
    worst = 0.0
    for _ in range(args.instances):
        h = int(rng.integers(4, args.size + 1))
        w = int(rng.integers(4, args.size + 1))
        pred = rng.uniform(0.5, 2.0, (h, w))
        gt = rng.uniform(0.5, 2.0, (h, w))
        mask = rng.random((h, w)) > 0.3
        if not mask.any():
            mask[h // 2, w // 2] = True
        for op in ops.values():
            worst = max(worst, losses.finite_diff_check(op, pred, gt, mask, cfg.loss))
    print(f"max relative gradient error: {worst:.3e}", file=sys.stderr)
    print(f"{worst:.6e}")
    return 0 if worst < _FD_THRESHOLD else 1


def cmd_embed_check(args) -> int:
    cfg = _config(args)
    rng = derive_rng(cfg.seed, TAG_EMBED)
    worst = 0.0
    exact = True
    for embed_dim in (32, 384):
        for _ in range(args.draws):
            w3 = embedding.random_weights(embed_dim, 3, 14, rng)
            w4 = embedding.concat_weights(w3, init_scale=0.02, rng=rng)
            image3 = rng.uniform(0.0, 1.0, (3, 42, 56))
            image4 = np.concatenate([image3, np.zeros((1, 42, 56))], axis=0)
            t3 = embedding.embed(image3, w3).tokens
            t4 = embedding.embed(image4, w4).tokens
            if not np.array_equal(t3, t4):
                exact = False
                worst = max(worst, float(np.max(np.abs(t3 - t4))))
    print("bitwise" if exact else f"max abs diff {worst:.3e}", file=sys.stderr)
    print("ok" if exact else "mismatch")
    return 0 if exact else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsedepth",
        description="Sparse depth completion tooling: synthetic data, losses, evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True, config=True):
        if config:
            p.add_argument("--config", help="run config JSON")
        if seed:
            p.add_argument("--seed", type=int, help="master seed (overrides config)")

    p = sub.add_parser("gen-data", help="render a synthetic depth dataset from a mesh")
    common(p)
    p.add_argument("--mesh", help="OBJ mesh path")
    p.add_argument("--out", help="output directory")
    p.add_argument("--frames", type=int, help="override the configured frame count")
    p.add_argument("--camera", help="camera JSON (default: 640x480, f=900)")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("sample-sparse", help="simulate sparse measurements for one frame")
    common(p)
    p.add_argument("--image", required=True, help="grayscale PGM image")
    p.add_argument("--depth", required=True, help="ground-truth depth PFM")
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-channel", required=True, help="output channel PFM")
    p.add_argument("--camera", help="camera JSON for the focal length")
    p.add_argument("--patch", type=int, default=14)
    p.set_defaults(func=cmd_sample_sparse)

    p = sub.add_parser("encode", help="encode (or decode) a depth PFM elementwise")
    common(p, seed=False)
    p.add_argument("--depth", required=True, help="input PFM")
    p.add_argument("--out", required=True, help="output PFM")
    p.add_argument("--camera", help="camera JSON for the focal length")
    p.add_argument("--decode", action="store_true", help="invert the transform")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("eval", help="per-frame MAE/RMSE of matching PFM directories")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--out", help="report JSON path (default: stdout)")
    p.add_argument("--dataset", default="dataset")
    p.add_argument("--threads", type=int, default=1, help="accepted for symmetry; evaluation is sequential")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rank", help="average-rank aggregation of a metrics CSV")
    p.add_argument("--values", required=True, help="CSV: method,<col>,... rows of metrics")
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("losscheck", help="finite-difference check of the loss gradients")
    common(p)
    p.add_argument("--size", type=int, default=16, help="max raster side length")
    p.add_argument("--instances", type=int, default=5)
    p.set_defaults(func=cmd_losscheck)

    p = sub.add_parser("embed-check", help="verify the zero-4th-channel embedding identity")
    common(p)
    p.add_argument("--draws", type=int, default=5, help="random draws per embed dim")
    p.set_defaults(func=cmd_embed_check)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidInputError, MeshParseError, ConfigError, FitError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
