"""Acceptance suite: one test per criterion, each printing a verdict line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as
they pass.
"""

import math
import time

import numpy as np
import pytest
from scipy.special import softmax

from mipmot.affinity import AffinityWeights, compute_affinities, softmax_ranking
from mipmot.association import AssociationProblem, brute_force_oracle, solve_mip
from mipmot.cli import labels_to_frames, results_to_frames
from mipmot.evaluation import evaluate_sequence
from mipmot.geometry import Box3D, convex_polygon_intersection_area, diou_affinity, iou_3d
from mipmot.io_formats import (
    Detection,
    read_detections,
    write_detections,
    write_kitti_tracking,
)
from mipmot.motion import KalmanConfig, kf_init, kf_predict, kf_update
from mipmot.simgen import generate, scenario_template
from mipmot.tracker import Track, Tracker, TrackerConfig, TrackStatus, run_sequence


def verdict(ok: bool, criterion: str, detail: str):
    print(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
    assert ok, f"{criterion}: {detail}"


def random_box(rng, spread) -> Box3D:
    return Box3D(
        *rng.uniform(-spread, spread, 3),
        *rng.uniform(0.5, 4.0, 3),
        rng.uniform(-math.pi, math.pi),
    )


def track_scenario(cfg, tracker_cfg):
    labels, dets = generate(cfg)
    by_frame = {}
    for det in dets:
        by_frame.setdefault(det.frame, []).append(det)
    results = run_sequence(by_frame, tracker_cfg, num_frames=cfg.num_frames)
    return evaluate_sequence(labels_to_frames(labels), results_to_frames(results))


def test_criterion_1_mip_exactness():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        m = int(rng.integers(0, 5))
        n = int(rng.integers(0, 5))
        p = AssociationProblem(
            x_cls_det=rng.uniform(0, 1, m),
            x_cls_trk=rng.uniform(0, 1, n),
            x_aff=rng.uniform(0, 2, (m, n)),
            x_se_det=rng.uniform(0, 1, m),
            x_se_trk=rng.uniform(0, 1, n),
            w_cls=100.0,
            w_aff=22.0,
            w_se=1.0,
        )
        solved = solve_mip(p)
        oracle = brute_force_oracle(p)
        worst = max(worst, abs(solved.objective - oracle.objective))
        assert solved.satisfies_constraints()
        assert oracle.satisfies_constraints()
    elapsed = time.perf_counter() - start
    verdict(
        worst <= 1e-9 and elapsed < 10.0,
        "criterion 1 (MIP exactness)",
        f"1000 instances, max objective gap {worst:.2e}, constraints hold, {elapsed:.2f}s",
    )


def _monte_carlo_iou(b1: Box3D, b2: Box3D, rng, samples=1_000_000) -> float:
    local = rng.uniform(-0.5, 0.5, size=(samples, 3)) * np.array([b1.l, b1.w, b1.h])
    c, s = math.cos(b1.a), math.sin(b1.a)
    x = c * local[:, 0] - s * local[:, 1] + b1.x
    y = s * local[:, 0] + c * local[:, 1] + b1.y
    z = local[:, 2] + b1.z
    c2, s2 = math.cos(b2.a), math.sin(b2.a)
    dx, dy = x - b2.x, y - b2.y
    u = c2 * dx + s2 * dy
    v = -s2 * dx + c2 * dy
    hit = (
        (np.abs(u) <= 0.5 * b2.l)
        & (np.abs(v) <= 0.5 * b2.w)
        & (np.abs(z - b2.z) <= 0.5 * b2.h)
    )
    inter = b1.volume * float(hit.mean())
    union = b1.volume + b2.volume - inter
    return inter / union if union > 0 else 0.0


def test_criterion_2_geometry_oracle():
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        a = random_box(rng, spread=2.0)
        b = random_box(rng, spread=2.0)
        worst = max(worst, abs(iou_3d(a, b) - _monte_carlo_iou(a, b, rng)))
    square = [(0.5, 0.5), (-0.5, 0.5), (-0.5, -0.5), (0.5, -0.5)]
    rotated = [
        (0.5 * math.sqrt(2) * math.cos(t), 0.5 * math.sqrt(2) * math.sin(t))
        for t in (math.pi / 2, math.pi, 3 * math.pi / 2, 2 * math.pi)
    ]
    area = convex_polygon_intersection_area(square, rotated)
    analytic_gap = abs(area - 2.0 * (math.sqrt(2.0) - 1.0))
    elapsed = time.perf_counter() - start
    verdict(
        worst <= 0.01 and analytic_gap <= 1e-6 and elapsed < 30.0,
        "criterion 2 (geometry oracle)",
        f"200 pairs vs 1e6-sample MC, max gap {worst:.4f}; "
        f"rotated-square gap {analytic_gap:.2e}; {elapsed:.2f}s",
    )


def test_criterion_3_affinity_bounds():
    rng = np.random.default_rng(11)
    worst_sum = 0.0
    for _ in range(500):
        m = int(rng.integers(1, 30))
        n = int(rng.integers(1, 30))
        raw = rng.normal(size=(m, n)) * rng.uniform(0.1, 20)
        P = softmax(raw, axis=0)
        Q = softmax(raw, axis=1)
        worst_sum = max(
            worst_sum,
            float(np.abs(P.sum(axis=0) - 1).max()),
            float(np.abs(Q.sum(axis=1) - 1).max()),
        )
        np.testing.assert_allclose(softmax_ranking(raw), 0.5 * (P + Q), atol=1e-12)

    diou_ok = True
    for _ in range(500):
        v = diou_affinity(random_box(rng, 12.0), random_box(rng, 12.0))
        diou_ok = diou_ok and 0.0 <= v <= 2.0

    weights = AffinityWeights()
    bound = weights.alpha + 2.0 * weights.beta
    refined_ok = True
    for _ in range(50):
        dets = [
            Detection(0, random_box(rng, 8.0), 1.0, embedding=rng.normal(size=8))
            for _ in range(int(rng.integers(1, 6)))
        ]
        cfg = KalmanConfig()
        tracks = [
            Track(
                id=i,
                state=kf_init(random_box(rng, 8.0), cfg),
                last_box=None,
                embedding=rng.normal(size=8),
                confidence=1.0,
                hits=1,
                misses=0,
                status=TrackStatus.CONFIRMED,
            )
            for i in range(int(rng.integers(1, 6)))
        ]
        out = compute_affinities(dets, tracks, weights, kalman_cfg=cfg)
        refined_ok = refined_ok and bool(
            np.all(out.refined >= 0.0) and np.all(out.refined <= bound + 1e-12)
        )
    verdict(
        worst_sum <= 1e-9 and diou_ok and refined_ok,
        "criterion 3 (affinity bounds)",
        f"500 matrices, worst softmax sum error {worst_sum:.2e}; "
        f"diou in [0,2]; refined in [0, {bound:.3f}]",
    )


def test_criterion_4_clean_scenario_perfection():
    start = time.perf_counter()
    report = track_scenario(scenario_template("clean"), TrackerConfig())
    elapsed = time.perf_counter() - start
    verdict(
        report.mota == 1.0 and report.idsw == 0 and report.frag == 0 and elapsed < 5.0,
        "criterion 4 (clean-scenario perfection)",
        f"MOTA {100 * report.mota:.2f}%, IDSW {report.idsw}, FRAG {report.frag}, "
        f"{elapsed:.2f}s",
    )


def test_criterion_5_mip_beats_hungarian():
    cfg = scenario_template("clutter", seed=1)
    lines = []
    ok = True
    for theta in (0.85, 0.90, 0.95):
        ha = track_scenario(cfg, TrackerConfig(theta_cls=theta, associator="hungarian"))
        mip = track_scenario(cfg, TrackerConfig(theta_cls=theta, associator="mip"))
        ok = ok and mip.idsw < ha.idsw and mip.mota > ha.mota
        lines.append(
            f"theta={theta:.2f} HA: idsw={ha.idsw} mota={100 * ha.mota:.1f}% | "
            f"MIP: idsw={mip.idsw} mota={100 * mip.mota:.1f}%"
        )
    verdict(ok, "criterion 5 (HA vs MIP trend)", "; ".join(lines))


def test_criterion_6_affinity_ablation():
    cfg = scenario_template("crossing")
    variants = {
        "APP": TrackerConfig(weights=AffinityWeights(alpha=1.0, beta=0.0)),
        "DIS": TrackerConfig(weights=AffinityWeights.motion_only(), use_iou=False),
        "IOU": TrackerConfig(weights=AffinityWeights.motion_only(), use_dis=False),
        "ALL": TrackerConfig(),
    }
    idsw = {name: track_scenario(cfg, tc).idsw for name, tc in variants.items()}
    singles = [idsw["APP"], idsw["DIS"], idsw["IOU"]]
    ok = idsw["APP"] > idsw["ALL"] and idsw["ALL"] <= max(singles)
    verdict(
        ok,
        "criterion 6 (affinity ablation trend)",
        f"IDSW APP={idsw['APP']} DIS={idsw['DIS']} IOU={idsw['IOU']} ALL={idsw['ALL']}",
    )


def test_criterion_7_kalman_correctness():
    cfg = KalmanConfig()

    def prediction_errors(velocity):
        velocity = np.asarray(velocity, float)
        state = kf_init(Box3D(0, 0, 0, 4, 2, 1.5, 0), cfg)
        errors = []
        for frame in range(1, 13):
            state, box = kf_predict(state, cfg)
            true_pos = velocity * frame
            errors.append(float(np.linalg.norm(box.center - true_pos)))
            state = kf_update(
                state, np.concatenate([true_pos, [4, 2, 1.5, 0]]), cfg
            )
        return errors, state

    ok = True
    details = []
    for name, v in (("1d", [0.9, 0.0, 0.0]), ("3d", [0.6, -0.8, 0.2])):
        errors, state = prediction_errors(v)
        monotone = all(e1 <= e0 + 1e-9 for e0, e1 in zip(errors[1:], errors[2:]))
        v_err = float(np.linalg.norm(state.mean[7:] - v))
        ok = ok and monotone and v_err < 1e-3
        details.append(f"{name}: monotone={monotone}, velocity error {v_err:.1e}")

    rng = np.random.default_rng(3)
    state = kf_init(Box3D(0, 0, 0, 4, 2, 1.5, 0), cfg)
    min_eig = np.inf
    for _ in range(1000):
        state, _ = kf_predict(state, cfg)
        obs = state.mean[:7] + rng.normal(scale=0.3, size=7)
        obs[3:6] = np.abs(obs[3:6])
        state = kf_update(state, obs, cfg)
        min_eig = min(min_eig, float(np.min(np.linalg.eigvalsh(state.cov))))
    ok = ok and min_eig >= -1e-9
    details.append(f"min eigenvalue over 1000 cycles {min_eig:.1e}")
    verdict(ok, "criterion 7 (Kalman correctness)", "; ".join(details))


def test_criterion_8_determinism_and_round_trips(tmp_path):
    outputs = []
    for attempt in range(2):
        cfg = scenario_template("clutter", seed=3)
        labels, dets = generate(cfg)
        det_path = tmp_path / f"run{attempt}.dets.txt"
        write_detections(dets, det_path)
        by_frame = read_detections(det_path)
        results = run_sequence(by_frame, TrackerConfig(), num_frames=cfg.num_frames)
        res_path = tmp_path / f"run{attempt}.txt"
        write_kitti_tracking(results, res_path)
        outputs.append(det_path.read_bytes() + res_path.read_bytes())
    identical = outputs[0] == outputs[1]

    rng = np.random.default_rng(23)
    round_trip_ok = True
    records = []
    for _ in range(50):
        emb = rng.normal(size=6) if rng.random() < 0.5 else None
        records.append(
            Detection(
                frame=int(rng.integers(0, 10)),
                box=random_box(rng, 50.0),
                score=float(rng.uniform(0, 1)),
                embedding=emb,
                start_prob=float(rng.uniform(0, 1)) if rng.random() < 0.5 else None,
            )
        )
    rt_path = tmp_path / "roundtrip.txt"
    write_detections(records, rt_path)
    recovered = [d for frame in read_detections(rt_path).values() for d in frame]
    by_frame_order = sorted(records, key=lambda d: d.frame)
    for a, b in zip(by_frame_order, recovered):
        round_trip_ok = round_trip_ok and np.allclose(
            a.box.to_array(), b.box.to_array(), atol=1e-6
        )
        round_trip_ok = round_trip_ok and abs(a.score - b.score) <= 1e-6
        if a.embedding is not None:
            round_trip_ok = round_trip_ok and np.allclose(
                a.embedding, b.embedding, atol=1e-6
            )
    verdict(
        identical and round_trip_ok,
        "criterion 8 (determinism and round-trips)",
        f"reruns byte-identical={identical}, io round-trip within 1e-6={round_trip_ok}",
    )


def test_criterion_9_throughput():
    rng = np.random.default_rng(5)
    tracker = Tracker(TrackerConfig())
    lanes = [(-60.0 + 6.0 * i, 0.6 + 0.02 * i) for i in range(20)]

    def frame_dets(frame):
        dets = []
        for i, (y, speed) in enumerate(lanes):
            x = -40.0 + speed * frame + 4.0 * i
            dets.append(
                Detection(
                    frame=frame,
                    box=Box3D(x, y, 0.75, 4.0, 1.8, 1.5, 0.0),
                    score=1.0,
                    embedding=rng.normal(size=32),
                )
            )
        return dets

    tracker.step(0, frame_dets(0))  # builds the 20 tracks
    times = []
    for frame in range(1, 51):
        dets = frame_dets(frame)
        start = time.perf_counter()
        tracker.step(frame, dets)
        times.append(time.perf_counter() - start)
    mean_ms = 1000.0 * float(np.mean(times))
    worst_ms = 1000.0 * float(np.max(times))
    assert len(tracker.tracks) == 20
    # target 10 ms; hard gate at twice that
    verdict(
        mean_ms < 20.0,
        "criterion 9 (throughput)",
        f"20 detections x 20 tracks: mean {mean_ms:.2f} ms/frame "
        f"(target 10 ms, gate 20 ms), worst {worst_ms:.2f} ms",
    )
    if mean_ms >= 10.0:
        print(f"note: mean {mean_ms:.2f} ms exceeds the 10 ms target but is within the 2x gate")
