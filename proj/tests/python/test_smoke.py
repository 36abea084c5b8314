import json
import math
from pathlib import Path

import numpy as np
import pytest

import adisep

DATA = Path(__file__).resolve().parents[1] / "data"


def random_depth(rng, h, w, max_depth=100.0, valid=0.8):
    d = rng.uniform(1e-3, max_depth, size=(h, w))
    d[rng.random((h, w)) > valid] = 0.0
    return d


def test_uniform_bounds():
    assert adisep.uniform_bounds(8, 80.0).tolist() == [0, 10, 20, 30, 40, 50, 60, 70, 80]


def test_separate_partitions_and_reconstructs():
    rng = np.random.default_rng(0)
    depth = random_depth(rng, 20, 30)
    bounds = [0.0, 5.0, 12.5, 40.0, 80.0]
    stack = adisep.separate(depth, bounds)
    assert stack.shape == (4, 20, 30)
    assert np.array_equal(adisep.reconstruct(stack), depth)
    assert np.array_equal((stack != 0).sum(axis=0), (depth > 0).astype(int))
    # numpy reference for interval membership, last interval open-ended
    idx = np.clip(np.searchsorted(bounds[1:-1], depth, side="right"), 0, 3)
    for i in range(4):
        assert np.array_equal(stack[i], np.where((depth > 0) & (idx == i), depth, 0.0))


def test_soft_weights_match_hard_far_from_bounds():
    depth = np.array([[3.0, 22.0, 95.0]])
    w = adisep.soft_interval_weights(depth, [0.0, 10.0, 30.0, 80.0], 1e-3)
    assert np.allclose(w[:, 0, 0], [1, 0, 0], atol=1e-9)
    assert np.allclose(w[:, 0, 1], [0, 1, 0], atol=1e-9)
    assert np.allclose(w[:, 0, 2], [0, 0, 1], atol=1e-9)


def test_uncertainty_and_fusion():
    rng = np.random.default_rng(1)
    fused = rng.normal(size=(3, 4, 5))
    u = adisep.compute_uncertainty(fused, [0.0, 0.0, 0.0], 0.0, 8, 10)
    assert u.shape == (8, 10) and np.all(u == 0.5)
    u = adisep.compute_uncertainty(fused, [2.0, -1.0, 0.5], 0.3, 8, 10)
    assert np.all((u > 0) & (u < 1))
    fi, fd, fsd, fu = (rng.normal(size=(2, 3, 3)) for _ in range(4))
    ia, il = adisep.fuse_features(fi, fd, fsd, fu)
    assert np.array_equal(ia, fi + fd)
    assert np.array_equal(il, (fd + fsd) + fu)


def test_iou():
    box = (1.0, 1.5, 20.0, 1.5, 1.6, 3.9, 0.3)
    assert adisep.iou_bev(box, box) == pytest.approx(1.0, abs=1e-9)
    assert adisep.iou_3d(box, box) == pytest.approx(1.0, abs=1e-9)
    unit = (0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0)
    turned = unit[:6] + (math.pi / 4,)
    inter = 2 * (math.sqrt(2) - 1)
    assert adisep.iou_bev(unit, turned) == pytest.approx(inter / (2 - inter), abs=1e-12)


def test_backprojection_reprojects():
    p2 = adisep.parse_calib((DATA / "calib_000000.txt").read_text())
    assert p2.shape == (3, 4)
    rng = np.random.default_rng(2)
    depth = random_depth(rng, 12, 16, valid=1.0) + 1.0
    points = adisep.backproject(depth, p2)
    assert points.shape == (12 * 16, 3)
    v, u = np.mgrid[0:12, 0:16]
    pixels = adisep.project(p2, points)
    assert np.max(np.abs(pixels - np.stack([u.ravel(), v.ravel()], axis=1))) < 1e-6


def test_depth_png_and_ply_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    depth = random_depth(rng, 9, 11, max_depth=200.0)
    path = tmp_path / "d.png"
    adisep.write_depth_png(str(path), depth)
    back = adisep.read_depth_png(str(path))
    assert np.max(np.abs(back - depth)) <= 1 / 512

    points = rng.uniform(-50, 50, size=(25, 3))
    tags = list(rng.integers(0, 8, size=25))
    read, read_tags = adisep.read_ply(adisep.write_ply(points, tags))
    assert np.array_equal(read, points.astype(np.float32).astype(np.float64))
    assert read_tags == tags


def test_label_parsing_errors():
    labels = adisep.parse_label_file("Car 0.00 0 -1.58 587.0 173.3 614.1 200.1 1.65 1.67 3.64 -0.65 1.71 46.70 -1.59\n")
    assert labels[0]["type"] == "Car" and labels[0]["score"] is None
    assert labels[0]["location"] == pytest.approx((-0.65, 1.71, 46.70))
    with pytest.raises(ValueError):
        adisep.parse_label_file("Car 0.0 0\n")


def test_evaluate_matches_frozen_fixture():
    stems = sorted(p.stem for p in (DATA / "eval" / "labels").glob("*.txt"))
    gt = [(DATA / "eval" / "labels" / f"{s}.txt").read_text() for s in stems]
    det = [(DATA / "eval" / "results" / f"{s}.txt").read_text() for s in stems]
    report = adisep.evaluate(gt, det, threads=2)
    expected = json.loads((DATA / "eval" / "expected.json").read_text())
    got = {c["name"]: c["difficulties"] for c in report["classes"]}
    for cls, levels in expected.items():
        for level, metrics in levels.items():
            for key, value in metrics.items():
                assert got[cls][level][key]["ap"] == pytest.approx(value, abs=1e-9), (cls, level, key)
