"""Gating, case segmentation, gaze/bearing intersection and per-case metrics."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import shapely
from shapely.geometry import Polygon

from .errors import EmptyCase, InputFileError, InvalidInput
from .geometry import EgoTrajectory, bearing, bearings, interpolate_poses, world_to_ego_many, wrap_angle

FV, PV = "FV", "PV"


@dataclass(frozen=True)
class GatingConfig:
    fov_half: float = 45.0
    range_fwd: float = 15.0
    range_lat: float = 10.0

    def __post_init__(self):
        if min(self.fov_half, self.range_fwd, self.range_lat) <= 0:
            raise InvalidInput("gating limits must be positive")


@dataclass(frozen=True)
class GazeRegions:
    fv_half: float = 5.0
    pv_band: float = 5.0
    pv_weight: float = 0.5
    dwell_min: float = 0.2

    def __post_init__(self):
        if self.fv_half <= 0 or self.pv_band < 0 or not 0 <= self.pv_weight <= 1 or self.dwell_min < 0:
            raise InvalidInput("invalid gaze region parameters")


def gate(p, cfg: GatingConfig = GatingConfig()) -> bool:
    x, y = float(p[0]), float(p[1])
    if not (0.0 < x <= cfg.range_fwd and abs(y) <= cfg.range_lat):
        return False
    return abs(bearing(p)) <= cfg.fov_half


def gate_many(x, y, cfg: GatingConfig = GatingConfig()) -> np.ndarray:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    ok = (x > 0) & (x <= cfg.range_fwd) & (np.abs(y) <= cfg.range_lat)
    b = np.degrees(np.arctan2(y, np.where(ok, x, 1.0)))
    return ok & (np.abs(b) <= cfg.fov_half)


def gaze_hit(yaw_vehicle: float, obj_bearing: float, regions: GazeRegions = GazeRegions()) -> str | None:
    d = abs(wrap_angle(obj_bearing - yaw_vehicle))
    if d <= regions.fv_half:
        return FV
    if d <= regions.fv_half + regions.pv_band:
        return PV
    return None


# -- zones and cases --------------------------------------------------------

@dataclass(frozen=True)
class Zone:
    name: str
    polygon_xy: tuple

    def __post_init__(self):
        poly = Polygon(self.polygon_xy)
        if len(self.polygon_xy) < 3 or not poly.is_valid or poly.area <= 0:
            raise InvalidInput(f"zone {self.name!r} is not a simple polygon")

    @property
    def polygon(self) -> Polygon:
        return Polygon(self.polygon_xy)

    def contains(self, x, y) -> np.ndarray:
        return shapely.contains_xy(self.polygon, np.asarray(x, float), np.asarray(y, float))


def read_zones(path) -> list[Zone]:
    try:
        data = json.loads(Path(path).read_text())
        return [Zone(z["name"], tuple(tuple(map(float, p)) for p in z["polygon_xy"])) for z in data["zones"]]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise InputFileError(path, None, str(exc)) from exc


def write_zones(path, zones: list[Zone]) -> None:
    data = {"zones": [{"name": z.name, "polygon_xy": [list(p) for p in z.polygon_xy]} for z in zones]}
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


@dataclass(frozen=True)
class CaseWindow:
    case_id: str
    driver_id: str
    lap: int
    t0: float
    t1: float
    zone: str

    def __post_init__(self):
        if not self.t0 < self.t1:
            raise InvalidInput("case window needs t0 < t1")


@dataclass(frozen=True)
class Annotation:
    case_id: str
    driver_id: str
    lap: int


def read_annotations(path) -> list[Annotation]:
    out = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["case_id", "driver_id", "lap"]:
            raise InputFileError(path, 1, "expected header case_id,driver_id,lap")
        for i, row in enumerate(reader, 2):
            try:
                out.append(Annotation(row["case_id"], row["driver_id"], int(row["lap"])))
            except (TypeError, ValueError) as exc:
                raise InputFileError(path, i, str(exc)) from exc
    return out


def write_annotations(path, rows: list[Annotation]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "driver_id", "lap"])
        for a in rows:
            w.writerow([a.case_id, a.driver_id, a.lap])


def zone_intervals(traj: EgoTrajectory, zone: Zone) -> list[tuple[float, float]]:
    """Maximal runs of trajectory samples inside the zone, as (t_first, t_last)."""
    inside = zone.contains(traj.x, traj.y)
    edges = np.diff(np.r_[0, inside.astype(np.int8), 0])
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    return [(float(traj.t[a]), float(traj.t[b])) for a, b in zip(starts, ends)]


def split_cases(traj: EgoTrajectory, zone: Zone, annotations: list[Annotation] | None = None,
                min_duration: float = 3.0, driver_id: str = "driver", ledger=None) -> list[CaseWindow]:
    """One case per zone traversal lasting at least ``min_duration`` seconds.

    Annotations, when given, are matched to the kept traversals in
    chronological order. Traversals beyond the annotation list get generated
    ids and a warning.
    """
    kept = []
    for t0, t1 in zone_intervals(traj, zone):
        if t1 - t0 < min_duration:
            if ledger is not None:
                ledger.warn("cases", "ShortTraversal", f"{t1 - t0:.2f} s in {zone.name}", t=t0)
            continue
        kept.append((t0, t1))
    if not kept and ledger is not None:
        ledger.warn("cases", "ZoneNeverEntered", zone.name)
    annotations = list(annotations or [])
    if annotations and len(annotations) != len(kept) and ledger is not None:
        ledger.warn("cases", "AnnotationMismatch",
                    f"{len(annotations)} annotations for {len(kept)} traversals of {zone.name}")
    cases = []
    for i, (t0, t1) in enumerate(kept):
        if i < len(annotations):
            a = annotations[i]
            cases.append(CaseWindow(a.case_id, a.driver_id, a.lap, t0, t1, zone.name))
        else:
            cases.append(CaseWindow(f"{driver_id}-{zone.name}-{i + 1:02d}", driver_id, i + 1, t0, t1, zone.name))
    return cases


# -- observation ------------------------------------------------------------

@dataclass
class GazeSample:
    t: float
    yaw: float
    bearing: float
    region: str | None


@dataclass
class TrackObservation:
    track_id: str
    cls: str
    region: str | None
    fv_dwell: float
    pv_dwell: float
    gated_samples: int
    samples: list = field(default_factory=list)

    @property
    def gated(self) -> bool:
        return self.gated_samples > 0


def observe_tracks(yaw, tracks, traj: EgoTrajectory, case: CaseWindow,
                   gating: GatingConfig = GatingConfig(), regions: GazeRegions = GazeRegions(),
                   yaw_max_gap: float = 0.5) -> list[TrackObservation]:
    """Best gaze region per track over the case window.

    ``yaw`` is the filtered vehicle-frame :class:`YawSeries`. Each gated track
    state with a usable yaw contributes one scan interval of dwell to the
    region it falls in. Tracks never gated inside the window are omitted.
    """
    out = []
    eps = 1e-9
    for tr in tracks:
        t = np.asarray(tr.t, float)
        sel = (t >= case.t0 - eps) & (t <= case.t1 + eps)
        if not sel.any():
            continue
        dt = float(np.median(np.diff(t))) if t.size > 1 else 0.0
        ts = t[sel]
        pos = np.asarray(tr.states, float)[sel, :2]
        ex, ey, eh = interpolate_poses(traj, ts)
        xf, yl = world_to_ego_many(ex, ey, eh, pos[:, 0], pos[:, 1])
        gated = gate_many(xf, yl, gating)
        if not gated.any():
            continue
        b = bearings(xf[gated], yl[gated])
        y = yaw.sample(ts[gated], yaw_max_gap)
        fv = pv = 0
        samples = []
        for ti, bi, yi in zip(ts[gated], b, y):
            region = None if math.isnan(yi) else gaze_hit(yi, bi, regions)
            fv += region == FV
            pv += region == PV
            samples.append(GazeSample(float(ti), float(yi), float(bi), region))
        fv_dwell, pv_dwell = fv * dt, pv * dt
        if fv_dwell >= regions.dwell_min - eps:
            best = FV
        elif fv_dwell + pv_dwell >= regions.dwell_min - eps:
            best = PV
        else:
            best = None
        out.append(TrackObservation(tr.id, tr.cls, best, fv_dwell, pv_dwell, int(gated.sum()), samples))
    return out


# -- metrics ----------------------------------------------------------------

@dataclass(frozen=True)
class CaseMetrics:
    n_veh: int
    n_ped: int
    veh_fv: float
    veh_pv: float
    ped_fv: float
    ped_pv: float
    ped_share: float
    s_veh: float
    s_ped: float
    veh_absent: bool = False
    ped_absent: bool = False

    @classmethod
    def from_fractions(cls, veh_fv, veh_pv, ped_fv, ped_pv, n_veh=1, n_ped=1,
                       pv_weight: float = GazeRegions.pv_weight) -> "CaseMetrics":
        for v in (veh_fv, veh_pv, ped_fv, ped_pv):
            if not 0.0 <= v <= 1.0:
                raise InvalidInput("fractions must lie in [0, 1]")
        if veh_fv + veh_pv > 1 + 1e-12 or ped_fv + ped_pv > 1 + 1e-12:
            raise InvalidInput("FV + PV fraction exceeds 1")
        total = n_veh + n_ped
        return cls(
            n_veh=int(n_veh), n_ped=int(n_ped),
            veh_fv=float(veh_fv), veh_pv=float(veh_pv), ped_fv=float(ped_fv), ped_pv=float(ped_pv),
            ped_share=n_ped / total if total else 0.0,
            s_veh=veh_fv + pv_weight * veh_pv,
            s_ped=ped_fv + pv_weight * ped_pv,
            veh_absent=n_veh == 0, ped_absent=n_ped == 0,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CaseMetrics":
        return cls(**d)


def case_metrics(observations: list[TrackObservation], regions: GazeRegions = GazeRegions()) -> CaseMetrics:
    """Per-track fractions by class; raises EmptyCase without gated tracks."""
    counts = {"vehicle": [0, 0, 0], "pedestrian": [0, 0, 0]}  # n, fv, pv
    for ob in observations:
        if not ob.gated:
            continue
        c = counts[ob.cls]
        c[0] += 1
        c[1] += ob.region == FV
        c[2] += ob.region == PV
    (nv, vfv, vpv), (np_, pfv, ppv) = counts["vehicle"], counts["pedestrian"]
    if nv + np_ == 0:
        raise EmptyCase("no gated tracks in case")

    def frac(k, n):
        return k / n if n else 0.0

    return CaseMetrics.from_fractions(frac(vfv, nv), frac(vpv, nv), frac(pfv, np_), frac(ppv, np_),
                                      nv, np_, regions.pv_weight)
