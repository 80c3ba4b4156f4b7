"""Synthetic scenario generator and ground-truth oracle.

A scenario is one driver on a rounded-rectangle circuit driven
counterclockwise; every lap crosses a T-junction zone on the bottom straight,
where a per-lap roster of vehicles and pedestrians is placed. The generator
emits the same log formats the pipeline ingests plus a ground-truth JSON.

Random streams are split by purpose from one seed, so changing e.g. the gaze
profile leaves scene, detection noise and clutter untouched.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .attention import FV, PV, Annotation, GatingConfig, GazeRegions, Zone, gate_many, gaze_hit, \
    write_annotations, write_zones
from .errors import SpecError
from .geometry import EgoTrajectory, bearings, interpolate_poses, world_to_ego_many, \
    write_trajectory_csv, wrap_angles
from .headpose import FRONTAL, CameraIntrinsics, FaceTemplate, LandmarkFrame, landmark_record, \
    rotation_from_ypr
from .tracker import Detection, detection_record

ATTENTIVE, INATTENTIVE = "attentive", "inattentive"
STREAMS = ("roster", "misses", "noise", "clutter", "gaze", "landmarks", "outliers")


# -- scenario specs ---------------------------------------------------------

@dataclass(frozen=True)
class CircuitSpec:
    length: float = 100.0
    width: float = 30.0
    radius: float = 8.0
    speed: float = 5.0
    zone_x: tuple = (24.0, 84.0)
    zone_half_width: float = 14.0

    def __post_init__(self):
        if min(self.length, self.width, self.speed) <= 0 or self.radius <= 0:
            raise SpecError("circuit dimensions and speed must be positive")
        if 2 * self.radius >= min(self.length, self.width):
            raise SpecError("corner radius too large for the circuit")
        lo, hi = self.zone_x
        if not self.radius <= lo < hi <= self.length - self.radius:
            raise SpecError("zone must lie on the bottom straight")
        if self.zone_half_width >= self.width / 2:
            raise SpecError("zone would reach the opposite side of the circuit")

    @property
    def perimeter(self) -> float:
        L, W, R = self.length, self.width, self.radius
        return 2 * (L - 2 * R) + 2 * (W - 2 * R) + 2 * math.pi * R

    def zone(self) -> Zone:
        lo, hi = self.zone_x
        h = self.zone_half_width
        return Zone("junction", ((lo, -h), (hi, -h), (hi, h), (lo, h)))


@dataclass(frozen=True)
class SensorSpec:
    ego_rate: float = 100.0
    det_rate: float = 10.0
    p_detect: float = 0.95
    clutter_rate: float = 0.2
    meas_noise: float = 0.3
    sensor_range: float = 40.0
    frame: str = "world"

    def __post_init__(self):
        if min(self.ego_rate, self.det_rate) <= 0:
            raise SpecError("rates must be positive")
        if not 0 <= self.p_detect <= 1 or self.clutter_rate < 0 or self.meas_noise < 0:
            raise SpecError("invalid sensor noise parameters")
        if self.frame not in ("world", "ego"):
            raise SpecError("frame must be 'world' or 'ego'")


@dataclass(frozen=True)
class CameraSpec:
    intrinsics: CameraIntrinsics = CameraIntrinsics(fx=1000.0, fy=1000.0, cx=640.0, cy=480.0)
    image_size: tuple = (1280, 960)
    head_position: tuple = (0.0, 0.0, 0.55)
    mount_offset: float = 8.0
    sign: int = -1
    landmark_rate: float = 10.0
    noise_px: float = 0.5
    outlier_rate: float = 0.02

    def __post_init__(self):
        if self.sign not in (1, -1) or self.landmark_rate <= 0 or self.noise_px < 0:
            raise SpecError("invalid camera spec")
        if not 0 <= self.outlier_rate < 1:
            raise SpecError("outlier_rate must be in [0, 1)")


@dataclass(frozen=True)
class Glance:
    """Scripted glance: at ``t`` hold gaze on ``target`` for ``duration`` seconds.

    ``target`` is an object id (the gaze follows its bearing) or a fixed
    vehicle-frame bearing in degrees.
    """

    t: float
    duration: float
    target: str | float


@dataclass(frozen=True)
class ScenarioSpec:
    seed: int = 0
    driver_id: str = "A"
    laps: int = 1
    scenarios: tuple = ("I",)
    gaze: tuple = (ATTENTIVE,)
    script: tuple = ()
    circuit: CircuitSpec = CircuitSpec()
    sensor: SensorSpec = SensorSpec()
    camera: CameraSpec = CameraSpec()
    glance_s: float = 0.8
    look_ahead_sigma: float = 1.5
    inattentive_sigma: float = 3.0
    roster: tuple | None = None  # explicit ObjectPath list overrides the random roster

    def __post_init__(self):
        if self.laps < 1:
            raise SpecError("need at least one lap")
        if len(self.scenarios) not in (1, self.laps) or len(self.gaze) not in (1, self.laps):
            raise SpecError("scenarios and gaze need one entry or one per lap")
        for s in self.scenarios:
            if s not in ("I", "II"):
                raise SpecError(f"unknown scenario {s!r}")
        for g in self.gaze:
            if g not in (ATTENTIVE, INATTENTIVE, "scripted"):
                raise SpecError(f"unknown gaze profile {g!r}")
        if self.glance_s < 0.4:
            raise SpecError("glances shorter than 0.4 s cannot register as observed")

    def lap_scenario(self, lap: int) -> str:
        return self.scenarios[lap if len(self.scenarios) > 1 else 0]

    def lap_gaze(self, lap: int) -> str:
        return self.gaze[lap if len(self.gaze) > 1 else 0]


# -- circuit ----------------------------------------------------------------

def circuit_pose(c: CircuitSpec, s) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pose at arc length ``s`` (m) from (R, 0) heading east, counterclockwise."""
    L, W, R = c.length, c.width, c.radius
    s = np.mod(np.asarray(s, dtype=float), c.perimeter)
    a = math.pi * R / 2
    segs = [
        ("line", (R, 0.0), 0.0, L - 2 * R),
        ("arc", (L - R, R), -90.0, a),
        ("line", (L, R), 90.0, W - 2 * R),
        ("arc", (L - R, W - R), 0.0, a),
        ("line", (L - R, W), 180.0, L - 2 * R),
        ("arc", (R, W - R), 90.0, a),
        ("line", (0.0, W - R), -90.0, W - 2 * R),
        ("arc", (R, R), 180.0, a),
    ]
    starts = np.cumsum([0.0] + [seg[3] for seg in segs[:-1]])
    idx = np.clip(np.searchsorted(starts, s, side="right") - 1, 0, len(segs) - 1)
    x = np.empty_like(s)
    y = np.empty_like(s)
    h = np.empty_like(s)
    for k, (kind, (px, py), ang, _) in enumerate(segs):
        m = idx == k
        u = s[m] - starts[k]
        if kind == "line":
            th = math.radians(ang)
            x[m] = px + u * math.cos(th)
            y[m] = py + u * math.sin(th)
            h[m] = ang
        else:
            phi = np.radians(ang) + u / R
            x[m] = px + R * np.cos(phi)
            y[m] = py + R * np.sin(phi)
            h[m] = np.degrees(phi) + 90.0
    return x, y, wrap_angles(h)


def zone_times(spec: ScenarioSpec) -> list[tuple[float, float]]:
    """Ego entry/exit times of the zone for every lap."""
    c = spec.circuit
    lo, hi = c.zone_x
    P = c.perimeter
    return [((k * P + lo - c.radius) / c.speed, (k * P + hi - c.radius) / c.speed) for k in range(spec.laps)]


def duration(spec: ScenarioSpec) -> float:
    return zone_times(spec)[-1][1] + 6.0


def gen_trajectory(spec: ScenarioSpec) -> EgoTrajectory:
    n = int(round(duration(spec) * spec.sensor.ego_rate)) + 1
    t = np.round(np.arange(n) / spec.sensor.ego_rate, 9)
    x, y, h = circuit_pose(spec.circuit, spec.circuit.speed * t)
    return EgoTrajectory(t, x, y, h)


# -- objects ----------------------------------------------------------------

@dataclass(frozen=True)
class ObjectPath:
    id: str
    cls: str
    lap: int
    x0: float
    y0: float
    vx: float
    vy: float
    t_ref: float
    t_start: float
    t_end: float
    kind: str = ""

    def position(self, t):
        dt = np.asarray(t, dtype=float) - self.t_ref
        return self.x0 + self.vx * dt, self.y0 + self.vy * dt

    def alive(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return (t >= self.t_start) & (t <= self.t_end)


def _spread(rng, n: int, lo: float, hi: float, min_gap: float) -> list[float]:
    """n sorted positions in [lo, hi] at least ``min_gap`` apart."""
    if n == 0:
        return []
    slack = (hi - lo) - (n - 1) * min_gap
    if slack < 0:
        raise SpecError("too many objects for the zone length")
    u = np.sort(rng.uniform(0.0, slack, n))
    return [float(lo + v + i * min_gap) for i, v in enumerate(u)]


def gen_roster(spec: ScenarioSpec, rng: np.random.Generator) -> list[ObjectPath]:
    """Per-lap roster placed so that objects are gated while the ego is in the zone."""
    c = spec.circuit
    v = c.speed
    lo, hi = c.zone_x
    x_lo, x_hi = lo + 16.0, hi + 3.0  # gated span of a static object lies inside the zone
    out: list[ObjectPath] = []
    for lap, (t_in, t_out) in enumerate(zone_times(spec)):
        scen = spec.lap_scenario(lap)
        t0, t1 = t_in - 6.0, t_out + 3.0
        n_park = int(rng.integers(3, 6)) if scen == "I" else int(rng.integers(2, 4))
        n_on = int(rng.integers(1, 3)) if scen == "I" else int(rng.integers(0, 2))
        n_side = int(rng.integers(0, 2))
        n_ped = 0 if scen == "I" else int(rng.integers(2, 5))
        k = 0

        def add(cls, kind, x0, y0, vx, vy):
            nonlocal k
            k += 1
            out.append(ObjectPath(f"L{lap + 1}-{cls[0]}{k}", cls, lap + 1, x0, y0, vx, vy, t_in, t0, t1, kind))

        for x in _spread(rng, n_park, x_lo, x_hi, 7.0):
            add("vehicle", "parked", x, -4.5, 0.0, 0.0)
        for x_meet in _spread(rng, n_on, x_lo + 2.0, x_hi - 6.0, 10.0):
            speed = float(rng.uniform(3.0, 5.0))
            t_meet = t_in + (x_meet - lo) / v
            add("vehicle", "oncoming", x_meet + speed * (t_meet - t_in), 3.5, -speed, 0.0)
        if n_side:
            add("vehicle", "side_road", float(rng.uniform(x_lo + 10, x_hi - 10)), -9.0, 0.0, 0.0)
        for x in _spread(rng, n_ped, x_lo, x_hi, 6.0):
            side = float(rng.choice([-7.0, 7.0]))
            walk = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.8, 1.5))
            add("pedestrian", "sidewalk", x - walk * (x - lo) / v, side, walk, 0.0)
    return out


# -- detections -------------------------------------------------------------

def scan_grid(spec: ScenarioSpec) -> np.ndarray:
    n = int(math.floor(duration(spec) * spec.sensor.det_rate)) + 1
    return np.round(np.arange(n) / spec.sensor.det_rate, 9)


def gen_detections(spec: ScenarioSpec, traj: EgoTrajectory, objects: list[ObjectPath],
                   rngs: dict, gating: GatingConfig = GatingConfig()) -> tuple[list[Detection], dict]:
    """True positions plus noise, misses and clutter; returns detections and per-scan bookkeeping.

    Misses, noise and clutter each draw from their own stream, and every
    object consumes its draws at every scan whether or not it is visible, so
    streams stay aligned when the roster visibility changes.
    """
    s = spec.sensor
    ts = scan_grid(spec)
    ex, ey, eh = interpolate_poses(traj, ts)
    dets: list[Detection] = []
    n_clutter = np.zeros(ts.size, dtype=int)
    origin = {}
    for i, t in enumerate(ts):
        for ob in objects:
            hit = rngs["misses"].random() < s.p_detect
            noise = rngs["noise"].normal(0.0, 1.0, 2) * s.meas_noise
            if not ob.alive(t):
                continue
            px, py = ob.position(t)
            if math.hypot(px - ex[i], py - ey[i]) > s.sensor_range or not hit:
                continue
            d = Detection(float(t), ob.cls, float(px + noise[0]), float(py + noise[1]), 1.0)
            dets.append(d)
            origin[(d.t, d.cls, d.x, d.y)] = ob.id
        nc = int(rngs["clutter"].poisson(s.clutter_rate))
        n_clutter[i] = nc
        if nc:
            xf = rngs["clutter"].uniform(0.0, gating.range_fwd, nc)
            yl = rngs["clutter"].uniform(-gating.range_lat, gating.range_lat, nc)
            cls = rngs["clutter"].choice(["vehicle", "pedestrian"], nc)
            conf = rngs["clutter"].uniform(0.3, 1.0, nc)
            th = math.radians(eh[i])
            wx = ex[i] + math.cos(th) * xf - math.sin(th) * yl
            wy = ey[i] + math.sin(th) * xf + math.cos(th) * yl
            for j in range(nc):
                dets.append(Detection(float(t), str(cls[j]), float(wx[j]), float(wy[j]), float(conf[j])))
    return dets, {"scan_times": ts, "n_clutter": n_clutter, "origin": origin}


def gen_scene(spec: ScenarioSpec, rngs: dict | None = None):
    """Ego trajectory, true object paths and the detection log."""
    rngs = rngs or make_streams(spec.seed)
    traj = gen_trajectory(spec)
    objects = list(spec.roster) if spec.roster is not None else gen_roster(spec, rngs["roster"])
    dets, book = gen_detections(spec, traj, objects, rngs)
    return traj, objects, dets, book


def make_streams(seed: int) -> dict:
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.default_rng(ss) for name, ss in zip(STREAMS, children)}


# -- gaze -------------------------------------------------------------------

def object_geometry(traj: EgoTrajectory, objects: list[ObjectPath], ts: np.ndarray,
                    gating: GatingConfig = GatingConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Gated mask and bearing (deg) of every object at every time, shapes (n_obj, n_t)."""
    ex, ey, eh = interpolate_poses(traj, ts)
    gated = np.zeros((len(objects), ts.size), bool)
    bear = np.full((len(objects), ts.size), np.nan)
    for i, ob in enumerate(objects):
        px, py = ob.position(ts)
        xf, yl = world_to_ego_many(ex, ey, eh, px, py)
        g = gate_many(xf, yl, gating) & ob.alive(ts)
        gated[i] = g
        if g.any():
            bear[i, g] = bearings(xf[g], yl[g])
    return gated, bear


def _attentive(gated, bear, ts, dt, glance_n, rng, sigma) -> np.ndarray:
    """Earliest-deadline glances: each gated object is looked at once for ``glance_n`` samples."""
    n_obj, n_t = gated.shape
    yaw = rng.normal(0.0, sigma, n_t)
    visited = np.zeros(n_obj, bool)
    # samples until each object's current gated run ends
    remaining = np.zeros_like(gated, dtype=int)
    for k in range(n_t - 1, -1, -1):
        nxt = remaining[:, k + 1] if k + 1 < n_t else 0
        remaining[:, k] = np.where(gated[:, k], nxt + 1, 0)
    k = 0
    min_n = max(2, int(math.ceil(0.4 / dt - 1e-9)))
    while k < n_t:
        cand = np.flatnonzero(gated[:, k] & ~visited & (remaining[:, k] >= min_n))
        if cand.size == 0:
            k += 1
            continue
        j = cand[np.argmin(remaining[cand, k])]
        n = min(glance_n, remaining[j, k])
        seg = slice(k, k + n)
        yaw[seg] = bear[j, seg] + rng.normal(0.0, 0.5, n)
        # anything inside the foveal cone during the glance counts as visited too
        near = gated[:, seg] & (np.abs(wrap_angles(np.nan_to_num(bear[:, seg]) - yaw[seg])) <= 3.0)
        visited |= near.sum(axis=1) >= min_n
        visited[j] = True
        k += n
    return yaw


def gen_gaze(spec: ScenarioSpec, traj: EgoTrajectory, objects: list[ObjectPath],
             rng: np.random.Generator, gating: GatingConfig = GatingConfig()):
    """True vehicle-frame head yaw at the landmark rate."""
    rate = spec.camera.landmark_rate
    T = duration(spec)
    ts = np.round(np.arange(int(math.floor(T * rate)) + 1) / rate, 9)
    dt = 1.0 / rate
    yaw = np.zeros(ts.size)
    gated, bear = object_geometry(traj, objects, ts, gating)
    lap_of = np.array([ob.lap for ob in objects])
    bounds = [0.0] + [0.5 * (a[1] + b[0]) for a, b in zip(zone_times(spec), zone_times(spec)[1:])] + [T + 1]
    glance_n = int(round(spec.glance_s * rate))
    for lap in range(spec.laps):
        m = (ts >= bounds[lap]) & (ts < bounds[lap + 1])
        profile = spec.lap_gaze(lap)
        objs = lap_of == lap + 1
        if profile == ATTENTIVE:
            yaw[m] = _attentive(gated[objs][:, m], bear[objs][:, m], ts[m], dt, glance_n, rng,
                                spec.look_ahead_sigma)
        elif profile == INATTENTIVE:
            yaw[m] = rng.normal(0.0, spec.inattentive_sigma, int(m.sum()))
        else:
            yaw[m] = rng.normal(0.0, spec.look_ahead_sigma, int(m.sum()))
    if spec.script:
        ids = {ob.id: i for i, ob in enumerate(objects)}
        for g in spec.script:
            sel = (ts >= g.t - 1e-9) & (ts < g.t + g.duration - 1e-9)
            if isinstance(g.target, str):
                if g.target not in ids:
                    raise SpecError(f"scripted glance at unknown object {g.target!r}")
                b = bear[ids[g.target], sel]
                if np.isnan(b).any():
                    raise SpecError(f"scripted glance at {g.target!r} while it is not gated")
                yaw[sel] = b
            else:
                yaw[sel] = float(g.target)
    return ts, wrap_angles(yaw)


def true_observations(traj, objects, ts, yaw, cases, regions: GazeRegions = GazeRegions(),
                      gating: GatingConfig = GatingConfig()) -> dict:
    """Replay the true yaw against true object bearings: best region per case and object."""
    gated, bear = object_geometry(traj, objects, ts, gating)
    dt = float(np.median(np.diff(ts)))
    out = {}
    for case_id, t0, t1 in cases:
        inside = (ts >= t0 - 1e-9) & (ts <= t1 + 1e-9)
        res = {}
        for i, ob in enumerate(objects):
            g = gated[i] & inside
            if not g.any():
                continue
            fv = pv = 0
            for k in np.flatnonzero(g):
                r = gaze_hit(yaw[k], bear[i, k], regions)
                fv += r == FV
                pv += r == PV
            if fv * dt >= regions.dwell_min - 1e-9:
                res[ob.id] = FV
            elif (fv + pv) * dt >= regions.dwell_min - 1e-9:
                res[ob.id] = PV
            else:
                res[ob.id] = None
        out[case_id] = res
    return out


# -- landmarks --------------------------------------------------------------

def render_landmarks(ts, yaw_cam, pitch, roll, template: FaceTemplate, camera: CameraSpec,
                     rng_noise: np.random.Generator, rng_outliers: np.random.Generator):
    """Project the template under each head pose; add pixel noise and gross outliers.

    Returns the frames and the boolean mask of corrupted frames.
    """
    K = camera.intrinsics
    pts = template.points_3d()
    t_head = np.asarray(camera.head_position, dtype=float)
    frames, corrupted = [], []
    w, h = camera.image_size
    for t, y, p, r in zip(ts, yaw_cam, pitch, roll):
        R = rotation_from_ypr(float(y), float(p), float(r)) @ FRONTAL
        px = K.project(pts @ R.T + t_head)
        px = px + rng_noise.normal(0.0, camera.noise_px, px.shape)
        bad = rng_outliers.random() < camera.outlier_rate
        junk = np.c_[rng_outliers.uniform(0, w, 4), rng_outliers.uniform(0, h, 4)]
        if bad:
            px = junk
        frames.append(LandmarkFrame(float(t), px))
        corrupted.append(bad)
    return frames, np.asarray(corrupted, bool)


# -- full scenario ----------------------------------------------------------

@dataclass
class Scenario:
    spec: ScenarioSpec
    traj: EgoTrajectory
    objects: list
    detections: list
    landmarks: list
    corrupted: np.ndarray
    yaw_t: np.ndarray
    yaw_vehicle: np.ndarray
    yaw_camera: np.ndarray
    annotations: list
    truth: dict = field(default_factory=dict)


def generate(spec: ScenarioSpec, template: FaceTemplate | None = None) -> Scenario:
    rngs = make_streams(spec.seed)
    traj, objects, dets, book = gen_scene(spec, rngs)
    ts, yaw_v = gen_gaze(spec, traj, objects, rngs["gaze"])
    cam = spec.camera
    yaw_c = wrap_angles(cam.mount_offset + cam.sign * yaw_v)
    pitch = rngs["gaze"].normal(-5.0, 1.0, ts.size)
    roll = rngs["gaze"].normal(0.0, 1.0, ts.size)
    frames, corrupted = render_landmarks(ts, yaw_c, pitch, roll, template or FaceTemplate(), cam,
                                         rngs["landmarks"], rngs["outliers"])
    annotations = [Annotation(f"{spec.driver_id}-lap{k + 1}", spec.driver_id, k + 1) for k in range(spec.laps)]
    windows = [(a.case_id, t0, t1) for a, (t0, t1) in zip(annotations, zone_times(spec))]
    truth = {
        "seed": spec.seed,
        "driver_id": spec.driver_id,
        "mount_offset": cam.mount_offset,
        "sign": cam.sign,
        "laps": [
            {"case_id": a.case_id, "lap": a.lap, "scenario": spec.lap_scenario(a.lap - 1),
             "gaze": spec.lap_gaze(a.lap - 1), "t_in": w[1], "t_out": w[2]}
            for a, w in zip(annotations, windows)
        ],
        "objects": [asdict(o) for o in objects],
        "observed": true_observations(traj, objects, ts, yaw_v, windows),
        "corrupted_frames": int(corrupted.sum()),
        "clutter_detections": int(book["n_clutter"].sum()),
    }
    return Scenario(spec, traj, objects, dets, frames, corrupted, ts, yaw_v, yaw_c, annotations, truth)


def write_scenario(sc: Scenario, out_dir) -> Path:
    """Write a scenario directory in the pipeline's ingestion formats."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(out / "trajectory.csv", sc.traj)
    with (out / "landmarks.jsonl").open("w") as fh:
        for f in sc.landmarks:
            fh.write(landmark_record(f) + "\n")
    ego = sc.spec.sensor.frame == "ego"
    if ego:
        ex, ey, eh = interpolate_poses(sc.traj, [d.t for d in sc.detections])
    with (out / "detections.jsonl").open("w") as fh:
        for i, d in enumerate(sc.detections):
            rec = detection_record(d)
            if ego:
                xf, yl = world_to_ego_many(ex[i], ey[i], eh[i], d.x, d.y)
                rec.update(x=float(xf), y=float(yl), frame="ego")
            fh.write(json.dumps(rec) + "\n")
    (out / "intrinsics.json").write_text(json.dumps(sc.spec.camera.intrinsics.to_dict(), indent=2) + "\n")
    write_zones(out / "zones.json", [sc.spec.circuit.zone()])
    write_annotations(out / "annotations.csv", sc.annotations)
    (out / "truth.json").write_text(json.dumps(sc.truth, indent=2, sort_keys=True) + "\n")
    return out


# -- cohorts ----------------------------------------------------------------

@dataclass(frozen=True)
class CohortCase:
    case_id: str
    scenario: str
    attention: str
    veh_fv: float
    veh_pv: float
    ped_fv: float
    ped_pv: float
    ped_share: float


def field_cohort(seed: int = 0, n_objects: int = 40) -> list[CohortCase]:
    """25 metric-level cases drawn uniformly from the ranges reported for the field study.

    Layout: 15 Scenario I (pedestrian share U[0, 0.05]) and 10 Scenario II
    (U[0.05, 0.45]); 10 Low and 15 Regular, split proportionally across
    scenarios (I: 9 Regular + 6 Low, II: 6 Regular + 4 Low). Observation rates
    (FV + PV fraction): Low vehicles U[0, 0.20]; Regular vehicles U[0.30, 0.60]
    and pedestrians U[0, 0.25]; Low pedestrians U[0, 0.05] in Scenario I
    ("nearly non-existent") and U[0, 0.25] in Scenario II. Each observation
    rate is split into FV and PV by an independent U[0, 1] fraction.
    """
    rng = np.random.default_rng(seed)
    layout = [("I", "Regular")] * 9 + [("I", "Low")] * 6 + [("II", "Regular")] * 6 + [("II", "Low")] * 4
    out = []
    for i, (scen, att) in enumerate(layout):
        share = rng.uniform(0.0, 0.05) if scen == "I" else rng.uniform(0.05, 0.45)
        veh = rng.uniform(0.30, 0.60) if att == "Regular" else rng.uniform(0.0, 0.20)
        ped = rng.uniform(0.0, 0.05) if (att == "Low" and scen == "I") else rng.uniform(0.0, 0.25)
        fv_v, fv_p = rng.uniform(0.0, 1.0, 2)
        out.append(CohortCase(f"case{i + 1:02d}", scen, att, veh * fv_v, veh * (1 - fv_v),
                              ped * fv_p, ped * (1 - fv_p), share))
    return out
