"""Smoke tests for the python surface: every exported call runs end to end."""

import json
import math

import pytest

import posekit

TINY = json.dumps(
    {
        "synth": {"count": 6, "seed": 5, "max_persons": 2},
        "model": {"score_threshold": 0.0, "topk_per_level": 3},
        "train": {"epochs": 2, "batch_size": 3},
    }
)


def square_pose(x, y, side=10.0):
    return [x, y, 2, x + side, y, 2, x, y + side, 2, x + side, y + side, 2]


def test_version_and_sigmas():
    assert posekit.__version__ == "0.1.0"
    assert len(posekit.default_sigmas(17)) == 17
    assert posekit.default_sigmas(5) == [0.079] * 5


def test_oks_identity_and_decay():
    p = square_pose(0, 0)
    assert posekit.oks(p, p) == pytest.approx(1.0, abs=1e-12)
    far = square_pose(500, 500)
    assert posekit.oks(far, p) < 1e-6


def test_greedy_nms_suppresses_duplicates():
    a = square_pose(0, 0)
    b = square_pose(0.5, 0.5)
    c = square_pose(40, 40)
    kept = posekit.greedy_nms([a, b, c], [0.9, 0.8, 0.7], kind="oks", threshold=0.3)
    assert kept == [0, 2]
    assert posekit.greedy_nms([a, b, c], [0.9, 0.8, 0.7], kind="iou", threshold=0.5) == [0, 2]
    with pytest.raises(ValueError):
        posekit.greedy_nms([a], [0.5], kind="cosine")


def test_oks_ap_on_perfect_predictions():
    gts = [[square_pose(0, 0), square_pose(30, 30)], [square_pose(5, 5)]]
    dets = [[(g, 1.0) for g in scene] for scene in gts]
    assert posekit.oks_ap(dets, gts, 0.5) == pytest.approx(1.0, abs=1e-12)


def test_synth_scenes_shape_and_content():
    scenes = posekit.synth_scenes(TINY)
    assert len(scenes) == 6
    for scene in scenes:
        assert scene["image"].shape == (5, 64, 64)
        assert 0.0 <= scene["image"].min() and scene["image"].max() <= 1.0
        assert scene["gt_poses"] and all(len(p) == 15 for p in scene["gt_poses"])
        assert scene["crowd_index"] >= 0.0


def test_train_detect_and_refinement_gain(tmp_path):
    ckpt = str(tmp_path / "toy.json")
    history = posekit.train(TINY, ckpt)
    assert len(history) == 2
    assert all(math.isfinite(row["total"]) for row in history)

    detections = posekit.detect(ckpt, TINY)
    assert len(detections) == 6
    flat = [d for scene in detections for d in scene]
    assert flat and all(len(d["keypoints"]) == 15 for d in flat)

    gain = posekit.refinement_gain(ckpt, TINY)
    assert set(gain) == {"mean_oks_coarse", "mean_oks_refined"}


def test_gradient_suite_small_run():
    report = posekit.run_gradient_suite(configs_per_op=2, tol=1e-4, seed=1)
    assert report["pass"] is True
    assert {op["op"] for op in report["ops"]} >= {"conv2d", "relu", "deformable_pose_conv"}


def test_config_canonicalization():
    canonical = posekit.parse_config(TINY)
    assert posekit.parse_config(canonical) == canonical
    assert posekit.config_hash(TINY) == posekit.config_hash(canonical)
    assert len(posekit.config_hash(TINY)) == 16
    with pytest.raises(ValueError):
        posekit.parse_config('{"bogus": 1}')
