from __future__ import annotations

import json

import numpy as np
import pytest

from driver_attention.errors import InputFileError, InvalidInput
from driver_attention.geometry import EgoTrajectory
from driver_attention.ledger import Ledger
from driver_attention.tracker import (
    Detection,
    GmphdParams,
    Mixture,
    default_params,
    estimates_at,
    extract_tracks,
    ospa,
    predict,
    prune_merge,
    read_detections,
    run_filter,
    scan_times,
    track_scene,
    update,
)


class KalmanCV:
    """Plain constant-velocity Kalman filter, written independently as an oracle."""

    def __init__(self, x0, P0, accel, r):
        self.x = np.array(x0, float)
        self.P = np.array(P0, float)
        self.accel, self.r = accel, r

    def predict(self, dt):
        F = np.array([[1, 0, dt, 0], [0, 1, 0, dt], [0, 0, 1, 0], [0, 0, 0, 1]], float)
        G = np.array([[dt * dt / 2, 0], [0, dt * dt / 2], [dt, 0], [0, dt]])
        self.x = F @ self.x
        self.P = F @ self.P @ F.T + self.accel ** 2 * G @ G.T

    def update(self, z):
        Hm = np.eye(2, 4)
        S = Hm @ self.P @ Hm.T + self.r ** 2 * np.eye(2)
        K = self.P @ Hm.T @ np.linalg.inv(S)
        self.x = self.x + K @ (z - Hm @ self.x)
        self.P = (np.eye(4) - K @ Hm) @ self.P


def simulate(targets, n_scans, dt=0.1, p_detect=1.0, clutter=0.0, area=(-20, 80, -50, 50),
             sigma=0.5, rng=None):
    """targets: list of (x0, y0, vx, vy). Returns scans and ground-truth positions."""
    rng = rng or np.random.default_rng(0)
    tg = np.asarray(targets, float)
    scans, truth = [], []
    for k in range(n_scans):
        pos = tg[:, :2] + tg[:, 2:] * k * dt
        z = [p + rng.normal(0, sigma, 2) for p in pos if rng.random() < p_detect]
        nc = rng.poisson(clutter) if clutter else 0
        c = np.c_[rng.uniform(area[0], area[1], nc), rng.uniform(area[2], area[3], nc)]
        scans.append((k * dt, np.asarray(z + list(c), float).reshape(-1, 2)))
        truth.append(pos)
    return scans, truth


# -- predict ----------------------------------------------------------------

def test_predict_survival_weight():
    mix = Mixture.single(1.0, [0, 0, 0, 0], np.eye(4))
    out = predict(mix, GmphdParams(p_survival=0.99), 1.0)
    assert out.w[0] == pytest.approx(0.99)


def test_predict_stationary():
    mix = Mixture.single(1.0, [0, 0, 0, 0], np.eye(4))
    out = predict(mix, GmphdParams(), 1.0)
    np.testing.assert_array_equal(out.m[0], 0.0)
    assert out.P[0, 0, 0] > 1.0 and out.P[0, 1, 1] > 1.0


def test_predict_kinematics():
    mix = Mixture.single(1.0, [0, 0, 2, 0], np.eye(4))
    out = predict(mix, GmphdParams(), 0.5)
    assert out.m[0, :2] == pytest.approx([1.0, 0.0])


def test_predict_appends_births():
    mix = Mixture.single(1.0, [0, 0, 0, 0], np.eye(4))
    out = predict(mix, GmphdParams(), 0.1, birth_measurements=[[5.0, 5.0], [9.0, 1.0]])
    assert len(out) == 3
    assert out.w[1:] == pytest.approx([0.05, 0.05])
    np.testing.assert_array_equal(out.P[1], np.diag([4.0, 4.0, 4.0, 4.0]))
    with pytest.raises(InvalidInput):
        predict(mix, GmphdParams(), 0.0)


# -- update -----------------------------------------------------------------

def test_update_missed_detection():
    mix = Mixture.single(1.0, [0, 0, 0, 0], np.eye(4))
    out = update(mix, np.zeros((0, 2)), GmphdParams(p_detect=0.9))
    assert len(out) == 1
    assert out.w[0] == pytest.approx(0.1)


def test_update_clutter_free_limit():
    P = np.diag([2.0, 2.0, 1.0, 1.0])
    mix = Mixture.single(1.0, [1.0, 2.0, 0, 0], P)
    params = GmphdParams(p_detect=1.0, clutter_density=0.0, meas_noise=1.0)
    z = np.array([[1.0, 2.0]])
    out = update(mix, z, params)
    assert out.expected_count == pytest.approx(1.0)
    post = out.take(out.w > 0.5)
    np.testing.assert_allclose(post.m[0], [1.0, 2.0, 0.0, 0.0])
    # Kalman gain 2/3 on position: an offset measurement moves the mean 2/3 of the way
    out2 = update(mix, np.array([[4.0, 2.0]]), params)
    assert out2.m[out2.w > 0.5][0, 0] == pytest.approx(1.0 + 2.0 / 3.0 * 3.0)
    assert out2.P[-1, 0, 0] == pytest.approx(2.0 / 3.0)


def test_kalman_equivalence_50_scans():
    params = GmphdParams(p_detect=1.0, clutter_density=0.0, birth_weight=0.0, p_survival=0.99)
    scans, _ = simulate([(0.0, 0.0, 5.0, 1.0)], 50, rng=np.random.default_rng(42))
    x0, P0 = [0.0, 0.0, 0.0, 0.0], np.diag([4.0, 4.0, 25.0, 25.0])
    history = run_filter(scans, params, initial=Mixture.single(1.0, x0, P0))
    kf = KalmanCV(x0, P0, params.process_noise_accel, params.meas_noise)
    prev = None
    for (t, z), res in zip(scans, history):
        if prev is not None:
            kf.predict(t - prev)
        kf.update(z[0])
        prev = t
        assert len(res.mixture) == 1
        assert np.abs(res.mixture.m[0, :2] - kf.x[:2]).max() <= 1e-9
    tracks = extract_tracks(history, params)
    assert len(tracks) == 1 and len(tracks[0].t) == 50


def test_measurement_permutation_invariance():
    rng = np.random.default_rng(9)
    mix = Mixture(np.array([0.8, 0.6]), np.array([[0, 0, 1, 0], [10, 0, 0, 1.0]]),
                  np.repeat(np.eye(4)[None], 2, axis=0))
    z = rng.normal(0, 5, (6, 2))
    params = GmphdParams()
    a = prune_merge(update(mix, z, params), params)
    b = prune_merge(update(mix, z[rng.permutation(6)], params), params)

    def canon(m):
        order = np.lexsort(m.m.T[::-1])
        return m.w[order], m.m[order], m.P[order]

    for x, y in zip(canon(a), canon(b)):
        np.testing.assert_allclose(x, y, atol=1e-12)


def test_unrepairable_scan_is_carried_forward():
    led = Ledger()
    bad = Mixture.single(1.0, [0, 0, 0, 0], -np.eye(4))
    history = run_filter([(0.0, np.array([[0.0, 0.0]]))], GmphdParams(), initial=bad,
                         ledger=led)
    assert history[0].failed
    assert "ScanFailure" in led.codes()


# -- prune / merge ----------------------------------------------------------

def test_merge_identical_components():
    P = np.diag([1.0, 2.0, 3.0, 4.0])
    mix = Mixture(np.array([0.5, 0.5]), np.array([[1, 2, 3, 4.0]] * 2), np.array([P, P]))
    out = prune_merge(mix, GmphdParams())
    assert len(out) == 1
    assert out.w[0] == pytest.approx(1.0)
    np.testing.assert_allclose(out.m[0], [1, 2, 3, 4])
    np.testing.assert_allclose(out.P[0], P)


def test_prune_tiny_component():
    mix = Mixture(np.array([1.0, 1e-8]), np.array([[0, 0, 0, 0], [50, 50, 0, 0.0]]),
                  np.repeat(np.eye(4)[None], 2, axis=0))
    out = prune_merge(mix, GmphdParams(prune_threshold=1e-5))
    assert len(out) == 1 and out.w[0] == 1.0


def test_mass_bookkeeping_random_mixture():
    rng = np.random.default_rng(1)
    n = 50
    w = 10 ** rng.uniform(-7, 0, n)
    m = np.c_[rng.uniform(0, 30, (n, 2)), rng.normal(0, 1, (n, 2))]
    A = rng.normal(0, 1, (n, 4, 4))
    P = A @ np.swapaxes(A, 1, 2) + np.eye(4)
    params = GmphdParams(prune_threshold=1e-5)
    out = prune_merge(Mixture(w, m, P), params)
    kept = w[w > params.prune_threshold].sum()
    assert out.expected_count == pytest.approx(kept, rel=1e-12)
    assert len(out) <= n and out.is_valid()


def test_component_cap_keeps_heaviest():
    n = 10
    mix = Mixture(np.linspace(0.1, 1.0, n), np.c_[100.0 * np.arange(n), np.zeros((n, 3))],
                  np.repeat(np.eye(4)[None], n, axis=0))
    out = prune_merge(mix, GmphdParams(max_components=3))
    assert sorted(out.w) == pytest.approx([0.8, 0.9, 1.0])


# -- extraction -------------------------------------------------------------

def test_single_target_single_track():
    params = GmphdParams(p_detect=1.0)
    scans, _ = simulate([(0, 0, 6, 0)], 60, rng=np.random.default_rng(3))
    tracks = extract_tracks(run_filter(scans, params), params)
    assert len(tracks) == 1
    assert tracks[0].t[0] == pytest.approx(0.1)  # the first birth needs one prior scan
    assert tracks[0].t[-1] == pytest.approx(5.9)


def test_two_parallel_targets_no_swap():
    params = GmphdParams(p_detect=0.95)
    scans, truth = simulate([(0, 0, 5, 0), (0, 20, 5, 0)], 80, p_detect=0.95,
                            rng=np.random.default_rng(4))
    tracks = extract_tracks(run_filter(scans, params), params)
    assert len(tracks) == 2
    for tr in tracks:
        ys = tr.positions[:, 1]
        assert np.ptp(ys) < 5.0  # each track stays with one target


def test_empty_history():
    assert extract_tracks([], GmphdParams()) == []


def test_expected_count_consistency():
    params = GmphdParams(p_detect=1.0, clutter_density=0.0)
    targets = [(0, 0, 5, 0), (0, 25, 4, 0), (10, -25, 0, 3)]
    scans, _ = simulate(targets, 40, rng=np.random.default_rng(5))
    history = run_filter(scans, params)
    for res in history[10:]:
        assert 2.9 <= res.mixture.expected_count <= 3.1


def test_covariances_stay_spd_under_clutter():
    params = GmphdParams(p_detect=0.9, clutter_density=5 / 10000)
    scans, _ = simulate([(0, 0, 5, 0), (0, 20, 5, 1)], 60, p_detect=0.9, clutter=5,
                        rng=np.random.default_rng(6))
    for res in run_filter(scans, params):
        assert res.mixture.is_valid()


def test_multi_target_ospa_small_monte_carlo():
    targets = [(0, 0, 5, 0), (0, 20, 4, 0.5), (0, -20, 6, -0.5)]
    area = (-20, 60, -50, 50)
    params = GmphdParams(p_detect=0.95, clutter_density=5 / (80 * 100))
    scores = []
    for seed in range(10):
        scans, truth = simulate(targets, 40, p_detect=0.95, clutter=5, area=area,
                                rng=np.random.default_rng(seed))
        tracks = extract_tracks(run_filter(scans, params), params)
        scores += [ospa(estimates_at(tracks, t), x) for (t, _), x in list(zip(scans, truth))[10:]]
    assert np.mean(scores) <= 1.0


# -- scenes -----------------------------------------------------------------

def test_classes_tracked_independently():
    dets = []
    for k in range(30):
        t = round(0.1 * k, 10)
        dets.append(Detection(t, "vehicle", 5.0 * t, 0.0))
        dets.append(Detection(t, "pedestrian", 5.0 * t, 0.3))
    out = track_scene(dets, {"vehicle": GmphdParams(p_detect=1.0),
                             "pedestrian": default_params("pedestrian", p_detect=1.0)})
    assert len(out["vehicle"]) == 1 and len(out["pedestrian"]) == 1
    assert out["pedestrian"][0].cls == "pedestrian"


def test_scan_times_fill_gaps():
    ts = scan_times([0.0, 0.1, 0.2, 0.6, 0.7])
    assert ts == pytest.approx([0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7])


def test_default_params_per_class():
    assert default_params("pedestrian").process_noise_accel == 0.5
    assert default_params("vehicle").process_noise_accel == 1.0
    with pytest.raises(InvalidInput):
        default_params("bicycle")
    with pytest.raises(InvalidInput):
        GmphdParams(p_detect=0.0)


# -- OSPA -------------------------------------------------------------------

def test_ospa_examples():
    X = np.array([[0.0, 0.0], [10.0, 0.0]])
    assert ospa(X, X) == 0.0
    assert ospa(X, np.zeros((0, 2))) == 5.0
    assert ospa(np.zeros((0, 2)), np.zeros((0, 2))) == 0.0
    assert ospa(X, X + [1.0, 0.0]) == pytest.approx(1.0)
    # one missing of two: sqrt(c^2 / 2)
    assert ospa(X[:1], X) == pytest.approx(np.sqrt(12.5))
    assert ospa(X, X[:1]) == ospa(X[:1], X)


# -- IO ---------------------------------------------------------------------

def test_read_detections(tmp_path):
    traj = EgoTrajectory([0.0, 1.0], [0.0, 10.0], [0.0, 0.0], [90.0, 90.0])
    recs = [
        {"t": 0.5, "class": "vehicle", "x": 3.0, "y": 4.0, "frame": "world", "conf": 0.9},
        {"t": 0.5, "class": "pedestrian", "x": 2.0, "y": 0.0, "frame": "ego", "conf": 0.8},
        {"t": 0.6, "class": "vehicle", "x": 1.0, "y": 1.0, "frame": "world", "conf": 0.1},
        {"t": 5.0, "class": "vehicle", "x": 1.0, "y": 1.0, "frame": "ego", "conf": 0.9},
    ]
    p = tmp_path / "det.jsonl"
    p.write_text("\n".join(json.dumps(r) for r in recs) + "\n")
    led = Ledger()
    dets = read_detections(p, traj, ledger=led)
    assert len(dets) == 2
    ped = [d for d in dets if d.cls == "pedestrian"][0]
    # ego pose (5, 0, 90 deg): 2 m ahead is +y in the world
    assert (ped.x, ped.y) == pytest.approx((5.0, 2.0))
    assert sorted(led.codes()) == ["LowConfidence", "OutsideTrajectory"]
    assert led.counts["ingest.detections"].balanced()


def test_read_detections_malformed(tmp_path):
    p = tmp_path / "det.jsonl"
    p.write_text('{"t": 0.0, "class": "vehicle", "x": 1, "y": 2}\n{"t": 1.0, "class": "tram", "x": 1, "y": 2}\n')
    with pytest.raises(InputFileError) as exc:
        read_detections(p)
    assert exc.value.line == 2
