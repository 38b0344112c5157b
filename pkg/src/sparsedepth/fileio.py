"""File formats: PFM depth rasters, PGM images, camera/pose JSON, and CSVs.

Depth rasters use the grayscale PFM variant: header ``Pf\\n<w> <h>\\n-1.0\\n``
followed by little-endian float32 rows, bottom row first. Invalid pixels are
stored as 0.0, so maps round-trip bit-exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .geometry import CameraIntrinsics, DepthMap, PointCloud, Pose
from .sparse import SparseMeasurement, SparseMeasurementSet


def write_pfm(path, values: np.ndarray) -> None:
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim != 2:
        raise InvalidInputError("PFM raster must be 2-D")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(arr[::-1].astype("<f4").tobytes())


def read_pfm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    try:
        first = data.index(b"\n")
        second = data.index(b"\n", first + 1)
        third = data.index(b"\n", second + 1)
    except ValueError as exc:
        raise InvalidInputError(f"{path}: truncated PFM header") from exc
    magic = data[:first].strip()
    if magic != b"Pf":
        raise InvalidInputError(f"{path}: not a grayscale PFM (magic {magic!r})")
    try:
        w, h = (int(tok) for tok in data[first + 1 : second].split())
        scale = float(data[second + 1 : third])
    except ValueError as exc:
        raise InvalidInputError(f"{path}: malformed PFM header") from exc
    dtype = "<f4" if scale < 0 else ">f4"
    if len(data) - (third + 1) < w * h * 4:
        raise InvalidInputError(f"{path}: PFM payload shorter than {w}x{h}")
    pixels = np.frombuffer(data, dtype=dtype, count=w * h, offset=third + 1)
    return np.ascontiguousarray(pixels.reshape(h, w)[::-1]).astype(np.float32)


def write_depth_map(path, depth: DepthMap) -> None:
    write_pfm(path, depth.values)


def read_depth_map(path) -> DepthMap:
    return DepthMap(read_pfm(path))


def write_pgm(path, image: np.ndarray) -> None:
    img = np.asarray(image)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise InvalidInputError("PGM image must be 2-D uint8")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise InvalidInputError(f"{path}: not a binary PGM")
    # header: magic, width, height, maxval tokens separated by whitespace
    tokens: list[bytes] = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise InvalidInputError(f"{path}: malformed PGM header") from exc
    if maxval > 255:
        raise InvalidInputError(f"{path}: only 8-bit PGM supported")
    img = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos)
    if img.size != w * h:
        raise InvalidInputError(f"{path}: PGM payload shorter than {w}x{h}")
    return img.reshape(h, w).copy()


def save_camera_json(path, intr: CameraIntrinsics, pose: Pose) -> None:
    doc = {
        "fx": intr.fx,
        "fy": intr.fy,
        "cx": intr.cx,
        "cy": intr.cy,
        "width": intr.width,
        "height": intr.height,
        "rotation": [float(x) for x in pose.rotation.ravel()],
        "translation": [float(x) for x in pose.translation],
        "frame_tag": pose.frame_tag,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_camera_json(path) -> tuple[CameraIntrinsics, Pose]:
    doc = json.loads(Path(path).read_text())
    intr = CameraIntrinsics(
        fx=float(doc["fx"]),
        fy=float(doc["fy"]),
        cx=float(doc["cx"]),
        cy=float(doc["cy"]),
        width=int(doc["width"]),
        height=int(doc["height"]),
    )
    pose = Pose(
        rotation=np.array(doc["rotation"], dtype=np.float64).reshape(3, 3),
        translation=np.array(doc["translation"], dtype=np.float64),
        frame_tag=str(doc["frame_tag"]),
    )
    return intr, pose


def save_pose_json(path, pose: Pose) -> None:
    doc = {
        "rotation": [float(x) for x in pose.rotation.ravel()],
        "translation": [float(x) for x in pose.translation],
        "frame_tag": pose.frame_tag,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_pose_json(path) -> Pose:
    doc = json.loads(Path(path).read_text())
    return Pose(
        rotation=np.array(doc["rotation"], dtype=np.float64).reshape(3, 3),
        translation=np.array(doc["translation"], dtype=np.float64),
        frame_tag=str(doc["frame_tag"]),
    )


def write_point_cloud_csv(path, cloud: PointCloud) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "z"])
        for x, y, z in cloud.points:
            writer.writerow([repr(float(x)), repr(float(y)), repr(float(z))])


def read_point_cloud_csv(path) -> PointCloud:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["x", "y", "z"]:
            raise InvalidInputError(f"{path}: expected header x,y,z")
        points = [[float(tok) for tok in row] for row in reader if row]
    return PointCloud(np.array(points, dtype=np.float64).reshape(-1, 3))


def write_measurements_csv(path, measurements: SparseMeasurementSet) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["u", "v", "depth_m", "source"])
        for m in measurements:
            writer.writerow([m.u, m.v, repr(float(m.depth)), m.source])


def read_measurements_csv(path) -> SparseMeasurementSet:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["u", "v", "depth_m", "source"]:
            raise InvalidInputError(f"{path}: expected header u,v,depth_m,source")
        out = [
            SparseMeasurement(int(row[0]), int(row[1]), float(row[2]), row[3])
            for row in reader
            if row
        ]
    return SparseMeasurementSet(tuple(out))
