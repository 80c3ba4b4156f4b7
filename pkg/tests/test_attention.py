from __future__ import annotations

import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from driver_attention.attention import (
    FV,
    PV,
    Annotation,
    CaseMetrics,
    CaseWindow,
    GatingConfig,
    GazeRegions,
    TrackObservation,
    Zone,
    case_metrics,
    gate,
    gate_many,
    gaze_hit,
    observe_tracks,
    read_annotations,
    read_zones,
    split_cases,
    write_annotations,
    write_zones,
)
from driver_attention.errors import EmptyCase, InputFileError, InvalidInput
from driver_attention.geometry import EgoTrajectory
from driver_attention.ledger import Ledger
from driver_attention.tracker import Track
from driver_attention.yawfilter import YawSeries


def straight_traj(t1=20.0, speed=5.0, rate=100.0):
    t = np.arange(0.0, t1 + 1e-9, 1.0 / rate)
    return EgoTrajectory(t, speed * t, np.zeros_like(t), np.zeros_like(t))


def track_at(track_id, cls, ts, xy):
    xy = np.broadcast_to(np.asarray(xy, float), (len(ts), 2))
    states = [np.r_[p, 0.0, 0.0] for p in xy]
    return Track(track_id, cls, list(map(float, ts)), states, [False] * len(ts))


# -- gate -------------------------------------------------------------------

@pytest.mark.parametrize("p, expected", [((14, 5), True), ((16, 0), False), ((2, 9), False),
                                         ((0, 0), False), ((-3, 0), False), ((15, 0), True),
                                         ((10, 10.5), False)])
def test_gate_examples(p, expected):
    assert gate(p) is expected
    assert gate_many([p[0]], [p[1]])[0] == expected


@given(st.floats(-20, 20), st.floats(-20, 20), st.floats(1, 60), st.floats(1, 20), st.floats(1, 15),
       st.floats(0.1, 1.0))
def test_gate_monotone(x, y, fov, fwd, lat, shrink):
    big = GatingConfig(fov, fwd, lat)
    for small in (GatingConfig(fov * shrink, fwd, lat), GatingConfig(fov, fwd * shrink, lat),
                  GatingConfig(fov, fwd, lat * shrink)):
        if gate((x, y), small):
            assert gate((x, y), big)


# -- gaze_hit ---------------------------------------------------------------

def test_gaze_hit_examples():
    assert gaze_hit(10, 12) == FV
    assert gaze_hit(0, 8) == PV
    assert gaze_hit(0, 20) is None
    assert gaze_hit(0, 5) == FV and gaze_hit(0, 10) == PV
    assert gaze_hit(178, -178) == FV  # across the seam


def test_gaze_regions_validation():
    with pytest.raises(InvalidInput):
        GazeRegions(fv_half=0)
    with pytest.raises(InvalidInput):
        GazeRegions(pv_weight=1.5)
    with pytest.raises(InvalidInput):
        GatingConfig(range_fwd=-1)


# -- zones and cases --------------------------------------------------------

ZONE = Zone("junction", ((20.0, -10.0), (50.0, -10.0), (50.0, 10.0), (20.0, 10.0)))


def test_single_crossing_one_case():
    cases = split_cases(straight_traj(), ZONE)
    assert len(cases) == 1
    c = cases[0]
    assert c.t0 == pytest.approx(4.01) and c.t1 == pytest.approx(9.99)


def test_short_traversal_discarded():
    small = Zone("tiny", ((20.0, -1.0), (30.0, -1.0), (30.0, 1.0), (20.0, 1.0)))
    led = Ledger()
    assert split_cases(straight_traj(), small, ledger=led) == []
    assert led.codes("cases") == ["ShortTraversal", "ZoneNeverEntered"]


def test_repeated_traversals_counted():
    # 25 excursions into the zone and back
    t = np.arange(0.0, 25 * 20.0, 0.05)
    x = 25.0 + 20.0 * np.sin(2 * np.pi * t / 20.0)  # enters the zone once per period
    traj = EgoTrajectory(t, x, np.zeros_like(t), np.zeros_like(t))
    assert len(split_cases(traj, ZONE)) == 25


def test_annotations_matched_in_order(tmp_path):
    t = np.arange(0.0, 60.0, 0.05)
    x = 25.0 + 20.0 * np.sin(2 * np.pi * t / 20.0)  # enters the zone once per period
    traj = EgoTrajectory(t, x, np.zeros_like(t), np.zeros_like(t))
    ann = [Annotation("c1", "d7", 1), Annotation("c2", "d7", 2)]
    led = Ledger()
    cases = split_cases(traj, ZONE, ann, ledger=led)
    assert [c.case_id for c in cases] == ["c1", "c2", "driver-junction-03"]
    assert "AnnotationMismatch" in led.codes()
    p = tmp_path / "ann.csv"
    write_annotations(p, ann)
    assert read_annotations(p) == ann


def test_zone_io_and_validation(tmp_path):
    p = tmp_path / "zones.json"
    write_zones(p, [ZONE])
    assert read_zones(p) == [ZONE]
    with pytest.raises(InvalidInput):
        Zone("bowtie", ((0, 0), (1, 1), (1, 0), (0, 1)))
    p.write_text('{"zones": [{"name": "x"}]}')
    with pytest.raises(InputFileError):
        read_zones(p)
    with pytest.raises(InvalidInput):
        CaseWindow("c", "d", 1, 5.0, 5.0, "z")


# -- observe_tracks ---------------------------------------------------------

def world_ahead(traj, ts, fwd, lat):
    """World positions of a point held at (fwd, lat) in the ego frame."""
    ts = np.asarray(ts)
    return np.c_[np.interp(ts, traj.t, traj.x) + fwd, np.interp(ts, traj.t, traj.y) + lat]


def test_track_straight_ahead_fv():
    traj = straight_traj()
    case = CaseWindow("c", "d", 1, 4.0, 9.0, "z")
    ts = np.round(np.arange(4.0, 9.0 + 1e-9, 0.1), 10)
    tr = track_at("vehicle-1", "vehicle", ts, world_ahead(traj, ts, 10.0, 0.0))
    yaw = YawSeries(np.round(np.arange(0, 20, 0.1), 10), np.zeros(200))
    obs = observe_tracks(yaw, [tr], traj, case)
    assert len(obs) == 1 and obs[0].region == FV
    assert obs[0].fv_dwell == pytest.approx(0.1 * len(ts))


def test_track_off_axis_never_seen():
    traj = straight_traj()
    case = CaseWindow("c", "d", 1, 4.0, 9.0, "z")
    ts = np.round(np.arange(4.0, 9.0, 0.1), 10)
    lat = 10.0 * np.tan(np.radians(30))
    tr = track_at("vehicle-1", "vehicle", ts, world_ahead(traj, ts, 10.0, lat))
    rng = np.random.default_rng(0)
    yaw = YawSeries(np.round(np.arange(0, 20, 0.1), 10), rng.uniform(-10, 10, 200))
    obs = observe_tracks(yaw, [tr], traj, case)
    assert obs[0].region is None


def test_scripted_glance_marks_only_target():
    traj = straight_traj()
    case = CaseWindow("c", "d", 1, 4.0, 9.0, "z")
    ts = np.round(np.arange(4.0, 9.0, 0.1), 10)
    lat_for = {b: 10.0 * np.tan(np.radians(b)) for b in (25.0, -30.0, 0.0)}
    tracks = [track_at(f"t{b}", "vehicle", ts, world_ahead(traj, ts, 10.0, lat)) for b, lat in lat_for.items()]
    ty = np.round(np.arange(0, 20, 0.1), 10)
    y = np.full(ty.size, 40.0)  # looking away from everything
    y[(ty >= 6.0) & (ty < 6.3)] = 25.0
    obs = {o.track_id: o.region for o in observe_tracks(YawSeries(ty, y), tracks, traj, case)}
    assert obs == {"t25.0": FV, "t-30.0": None, "t0.0": None}


def test_fv_dwell_threshold_and_pv_fallback():
    traj = straight_traj()
    case = CaseWindow("c", "d", 1, 4.0, 9.0, "z")
    ts = np.round(np.arange(4.0, 9.0, 0.1), 10)
    tr = track_at("p", "pedestrian", ts, world_ahead(traj, ts, 10.0, 0.0))
    ty = np.round(np.arange(0, 20, 0.1), 10)
    y = np.full(ty.size, 60.0)
    y[np.isclose(ty, 5.0)] = 0.0  # FV for one sample only
    y[np.isclose(ty, 5.1)] = 8.0  # then PV
    ob = observe_tracks(YawSeries(ty, y), [tr], traj, case)[0]
    assert ob.region == PV
    assert ob.fv_dwell == pytest.approx(0.1) and ob.pv_dwell == pytest.approx(0.1)


def test_open_yaw_gap_contributes_nothing():
    traj = straight_traj()
    case = CaseWindow("c", "d", 1, 4.0, 9.0, "z")
    ts = np.round(np.arange(4.0, 9.0, 0.1), 10)
    tr = track_at("v", "vehicle", ts, world_ahead(traj, ts, 10.0, 0.0))
    yaw = YawSeries([0.0, 3.0, 12.0], [0.0, 0.0, 0.0])  # 9 s hole across the case
    ob = observe_tracks(yaw, [tr], traj, case)[0]
    assert ob.region is None and ob.gated_samples == len(ts)
    assert all(np.isnan(s.yaw) for s in ob.samples)


def test_ungated_tracks_omitted():
    traj = straight_traj()
    case = CaseWindow("c", "d", 1, 4.0, 9.0, "z")
    ts = np.round(np.arange(4.0, 9.0, 0.1), 10)
    behind = track_at("b", "vehicle", ts, world_ahead(traj, ts, -5.0, 0.0))
    outside = track_at("o", "vehicle", [15.0, 15.1], [[200.0, 0.0], [200.0, 0.0]])
    yaw = YawSeries(np.round(np.arange(0, 20, 0.1), 10), np.zeros(200))
    assert observe_tracks(yaw, [behind, outside], traj, case) == []


# -- case_metrics -----------------------------------------------------------

def test_table_one_rows():
    low = CaseMetrics.from_fractions(0.0, 0.06, 0.29, 0.29)
    reg = CaseMetrics.from_fractions(0.16, 0.13, 0.60, 0.15)
    assert abs(low.s_veh - 0.03) <= 1e-12 and abs(low.s_ped - 0.435) <= 1e-12
    assert abs(reg.s_veh - 0.225) <= 1e-12 and abs(reg.s_ped - 0.675) <= 1e-12


def obs(cls, region, i=0):
    return TrackObservation(f"{cls}-{i}", cls, region, 0.0, 0.0, 5)


def test_counting_arithmetic():
    o = [obs("vehicle", FV, 0), obs("vehicle", PV, 1), obs("vehicle", None, 2), obs("vehicle", None, 3),
         obs("pedestrian", FV, 4)]
    m = case_metrics(o)
    assert (m.veh_fv, m.veh_pv, m.ped_fv) == (0.25, 0.25, 1.0)
    assert m.ped_share == pytest.approx(0.2)
    assert m.s_veh == pytest.approx(0.375)
    assert not m.veh_absent and not m.ped_absent


def test_absent_class_flagged():
    m = case_metrics([obs("vehicle", FV)])
    assert m.ped_absent and m.ped_fv == 0.0 and m.ped_share == 0.0


def test_empty_case_raises():
    with pytest.raises(EmptyCase):
        case_metrics([])


def test_fv_counts_twice_pv():
    a = CaseMetrics.from_fractions(0.5, 0.0, 0.0, 0.0)
    b = CaseMetrics.from_fractions(0.0, 0.5, 0.0, 0.0)
    assert a.s_veh == 2 * b.s_veh


def test_duplicated_samples_do_not_change_fractions():
    traj = straight_traj()
    case = CaseWindow("c", "d", 1, 4.0, 9.0, "z")
    ts = np.round(np.arange(4.0, 9.0, 0.1), 10)
    tr = track_at("v", "vehicle", ts, world_ahead(traj, ts, 10.0, 0.0))
    yaw = YawSeries(np.round(np.arange(0, 20, 0.1), 10), np.zeros(200))
    once = case_metrics(observe_tracks(yaw, [tr], traj, case))
    twice = case_metrics(observe_tracks(yaw, [tr], traj, case) * 2)
    assert once.veh_fv == twice.veh_fv and once.s_veh == twice.s_veh


def test_metrics_roundtrip_and_fraction_validation():
    m = CaseMetrics.from_fractions(0.1, 0.2, 0.3, 0.4, 3, 2)
    assert CaseMetrics.from_dict(m.to_dict()) == m
    with pytest.raises(InvalidInput):
        CaseMetrics.from_fractions(0.7, 0.7, 0.0, 0.0)


def test_table_one_runtime():
    t0 = time.perf_counter()
    CaseMetrics.from_fractions(0.16, 0.13, 0.60, 0.15)
    assert time.perf_counter() - t0 < 1e-3
