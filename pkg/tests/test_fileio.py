import numpy as np
import pytest

from sparsedepth.errors import InvalidInputError
from sparsedepth.fileio import (
    load_camera_json,
    load_pose_json,
    read_depth_map,
    read_measurements_csv,
    read_pfm,
    read_pgm,
    read_point_cloud_csv,
    save_camera_json,
    save_pose_json,
    write_measurements_csv,
    write_pfm,
    write_pgm,
    write_point_cloud_csv,
)
from sparsedepth.geometry import WORLD_FROM_CAM, CameraIntrinsics, DepthMap, PointCloud, Pose
from sparsedepth.sparse import SparseMeasurement, SparseMeasurementSet


def test_pfm_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(1)
    values = rng.uniform(0, 50, (17, 23)).astype(np.float32)
    values[rng.random(values.shape) < 0.2] = 0.0
    path = tmp_path / "depth.pfm"
    write_pfm(path, values)
    back = read_pfm(path)
    assert back.dtype == np.float32
    assert np.array_equal(back, values)


def test_pfm_header_format(tmp_path):
    path = tmp_path / "d.pfm"
    write_pfm(path, np.zeros((2, 3), dtype=np.float32))
    raw = path.read_bytes()
    assert raw.startswith(b"Pf\n3 2\n-1.0\n")
    assert len(raw) == len(b"Pf\n3 2\n-1.0\n") + 2 * 3 * 4


def test_pfm_bottom_row_first(tmp_path):
    values = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
    path = tmp_path / "d.pfm"
    write_pfm(path, values)
    raw = path.read_bytes()
    payload = np.frombuffer(raw, dtype="<f4", offset=len(b"Pf\n2 2\n-1.0\n"))
    # bottom raster row (3, 4) is stored first
    assert payload.tolist() == [3.0, 4.0, 1.0, 2.0]


def test_pfm_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.pfm"
    path.write_bytes(b"PF\n1 1\n-1.0\n" + b"\x00" * 12)
    with pytest.raises(InvalidInputError):
        read_pfm(path)


def test_pfm_rejects_short_payload(tmp_path):
    path = tmp_path / "short.pfm"
    path.write_bytes(b"Pf\n4 4\n-1.0\n" + b"\x00" * 8)
    with pytest.raises(InvalidInputError):
        read_pfm(path)


def test_depth_map_file_round_trip(tmp_path):
    dm = DepthMap(np.array([[0.0, 1.5], [2.5, 0.0]], dtype=np.float32))
    path = tmp_path / "d.pfm"
    write_pfm(path, dm.values)
    back = read_depth_map(path)
    assert np.array_equal(back.values, dm.values)


def test_pgm_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    img = rng.integers(0, 256, (11, 13), dtype=np.uint8)
    path = tmp_path / "img.pgm"
    write_pgm(path, img)
    assert np.array_equal(read_pgm(path), img)


def test_camera_json_round_trip(tmp_path):
    intr = CameraIntrinsics(fx=900.0, fy=910.0, cx=320.5, cy=240.5, width=640, height=480)
    angle = 0.7
    c, s = np.cos(angle), np.sin(angle)
    pose = Pose(np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]]), np.array([1, 2, 3.5]), WORLD_FROM_CAM)
    path = tmp_path / "cam.json"
    save_camera_json(path, intr, pose)
    intr2, pose2 = load_camera_json(path)
    assert intr2 == intr
    assert np.array_equal(pose2.rotation, pose.rotation)
    assert np.array_equal(pose2.translation, pose.translation)
    assert pose2.frame_tag == WORLD_FROM_CAM


def test_pose_json_round_trip(tmp_path):
    pose = Pose(np.eye(3), np.array([0.25, -1.0, 9.0]), WORLD_FROM_CAM)
    path = tmp_path / "pose.json"
    save_pose_json(path, pose)
    back = load_pose_json(path)
    assert np.array_equal(back.rotation, pose.rotation)
    assert np.array_equal(back.translation, pose.translation)


def test_point_cloud_csv_round_trip(tmp_path):
    cloud = PointCloud(np.array([[0.125, -3.5, 2.0], [1e-8, 7.25, -0.5]]))
    path = tmp_path / "cloud.csv"
    write_point_cloud_csv(path, cloud)
    assert path.read_text().splitlines()[0] == "x,y,z"
    back = read_point_cloud_csv(path)
    assert np.array_equal(back.points, cloud.points)


def test_measurements_csv_round_trip(tmp_path):
    ms = SparseMeasurementSet(
        (
            SparseMeasurement(5, 9, 12.5, "simulated"),
            SparseMeasurement(100, 3, 0.75, "radar"),
        )
    )
    path = tmp_path / "m.csv"
    write_measurements_csv(path, ms)
    assert path.read_text().splitlines()[0] == "u,v,depth_m,source"
    back = read_measurements_csv(path)
    assert back.measurements == ms.measurements


def test_measurements_csv_rejects_wrong_header(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("a,b,c\n")
    with pytest.raises(InvalidInputError):
        read_measurements_csv(path)
