"""End-to-end orchestration: ingest, head pose, yaw filter, tracking, cases, metrics, classification.

An input is either one session directory or a directory of session
subdirectories. A session holds ``trajectory.csv``, ``landmarks.jsonl``,
``detections.jsonl``, ``intrinsics.json`` and ``zones.json``, optionally
``annotations.csv`` and ``template.json``. Cases from all sessions are pooled
for classification.

Each stage can persist its output under ``<out>/<session>/`` (JSONL mirroring
the in-memory types) and later stages reuse those files when asked to.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .attention import CaseMetrics, CaseWindow, GazeSample, TrackObservation, case_metrics, \
    observe_tracks, read_annotations, read_zones, split_cases
from .classify import LOW, REGULAR, SCENARIO_I, SCENARIO_II, CaseLabel, classify_cases
from .config import AUTO, PipelineConfig
from .errors import DegenerateClustering, EmptyCase, InputFileError
from .geometry import EgoTrajectory, interpolate_poses, read_trajectory_csv, wrap_angles
from .headpose import FaceTemplate, HeadPoseSample, calibrate_mount_offset, estimate_batch, \
    read_intrinsics, read_landmarks, read_template, to_vehicle_yaw
from .ledger import Ledger
from .tracker import CLASSES, Track, read_detections, scan_times, track_scene
from .yawfilter import YawSeries, filter_pipeline, write_filter_csv

REQUIRED = ("trajectory.csv", "landmarks.jsonl", "detections.jsonl", "intrinsics.json", "zones.json")
SCHEMA = "driver-attention-report/1"


def find_sessions(root) -> list[Path]:
    """The directory itself if it is a session, else its session subdirectories (sorted)."""
    root = Path(root)
    if not root.is_dir():
        raise InputFileError(root, None, "input directory does not exist")
    if (root / "trajectory.csv").exists():
        sessions = [root]
    else:
        sessions = sorted(p for p in root.iterdir() if p.is_dir() and (p / "trajectory.csv").exists())
    if not sessions:
        raise InputFileError(root, None, "no session directory (trajectory.csv) found")
    for s in sessions:
        for name in REQUIRED:
            if not (s / name).exists():
                raise InputFileError(s / name, None, "required input file missing")
    return sessions


# -- ingestion --------------------------------------------------------------

@dataclass
class SessionInputs:
    name: str
    path: Path
    traj: EgoTrajectory
    frames: list
    detections: list
    intrinsics: object
    template: FaceTemplate
    zones: list
    annotations: list | None


def ingest_session(path, cfg: PipelineConfig, ledger: Ledger) -> SessionInputs:
    path = Path(path)
    traj = read_trajectory_csv(path / "trajectory.csv")
    ledger.count("ingest.trajectory", used=len(traj))
    frames = read_landmarks(path / "landmarks.jsonl", ledger)
    dets = read_detections(path / "detections.jsonl", traj, cfg["detections.min_conf"], ledger)
    K = read_intrinsics(path / "intrinsics.json")
    template = read_template(path / "template.json") if (path / "template.json").exists() else FaceTemplate()
    zones = read_zones(path / "zones.json")
    ann = read_annotations(path / "annotations.csv") if (path / "annotations.csv").exists() else None
    return SessionInputs(path.name, path, traj, frames, dets, K, template, zones, ann)


# -- head pose and yaw ------------------------------------------------------

@dataclass
class YawStage:
    samples: list
    mount_offset: float
    raw: YawSeries
    filtered: YawSeries


def headpose_stage(inp: SessionInputs, cfg: PipelineConfig, ledger: Ledger) -> YawStage:
    samples = estimate_batch(inp.frames, inp.template, inp.intrinsics, ledger, cfg["headpose.refine"])
    t = np.array([s.t for s in samples], float)
    yaw_cam = np.array([s.yaw for s in samples], float)
    offset = cfg["headpose.mount_offset"]
    if offset == AUTO:
        offset = calibrate_mount_offset(t, yaw_cam, inp.traj, cfg["headpose.straight_max_rate"],
                                        cfg["headpose.straight_min_duration"]) if t.size else None
        if offset is None:
            ledger.warn("headpose", "NoStraightSegments", f"{inp.name}: mount offset defaults to 0")
            offset = 0.0
    raw = YawSeries(t, to_vehicle_yaw(yaw_cam, offset, cfg["headpose.sign"]) if t.size else t,
                    [s.ambiguous for s in samples])
    filtered = filter_pipeline(raw, cfg.filter_config(), ledger)
    return YawStage(samples, float(offset), raw, filtered)


def tracking_stage(inp: SessionInputs, cfg: PipelineConfig, ledger: Ledger) -> dict[str, list[Track]]:
    params = {cls: cfg.gmphd(cls) for cls in CLASSES}
    times = scan_times([d.t for d in inp.detections])
    return track_scene(inp.detections, params, times, ledger, cfg["tracker.min_length"])


# -- cases ------------------------------------------------------------------

@dataclass
class CaseResult:
    session: str
    window: CaseWindow
    observations: list = field(default_factory=list)
    metrics: CaseMetrics | None = None

    @property
    def case_id(self) -> str:
        return self.window.case_id

    def to_dict(self) -> dict:
        return {
            "session": self.session,
            "window": asdict(self.window),
            "metrics": None if self.metrics is None else self.metrics.to_dict(),
            "observations": [_obs_dict(o, samples=True) for o in self.observations],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CaseResult":
        obs = [TrackObservation(o["track_id"], o["class"], o["region"], o["fv_dwell"], o["pv_dwell"],
                                o["gated_samples"], [GazeSample(**s) for s in o.get("samples", [])])
               for o in d["observations"]]
        m = None if d["metrics"] is None else CaseMetrics.from_dict(d["metrics"])
        return cls(d["session"], CaseWindow(**d["window"]), obs, m)


def _obs_dict(o: TrackObservation, samples: bool) -> dict:
    d = {"track_id": o.track_id, "class": o.cls, "region": o.region, "fv_dwell": o.fv_dwell,
         "pv_dwell": o.pv_dwell, "gated_samples": o.gated_samples}
    if samples:
        d["samples"] = [asdict(s) for s in o.samples]
    return d


def analyze_stage(inp: SessionInputs, yaw: YawStage, tracks: dict, cfg: PipelineConfig,
                  ledger: Ledger) -> list[CaseResult]:
    all_tracks = [tr for cls in CLASSES for tr in tracks.get(cls, [])]
    windows = []
    for i, zone in enumerate(inp.zones):
        ann = inp.annotations if i == 0 else None
        if i == 1 and inp.annotations:
            ledger.warn("cases", "AnnotationsFirstZoneOnly", f"{inp.name}: annotations applied to {inp.zones[0].name}")
        windows += split_cases(inp.traj, zone, ann, cfg["cases.min_duration"], inp.name, ledger)
    windows.sort(key=lambda w: (w.t0, w.zone))
    out = []
    for w in windows:
        obs = observe_tracks(yaw.filtered, all_tracks, inp.traj, w, cfg.gating(), cfg.regions(),
                             cfg["yawfilter.max_gap"])
        try:
            m = case_metrics(obs, cfg.regions())
        except EmptyCase as exc:
            ledger.warn("cases", "EmptyCase", f"{w.case_id}: {exc}", t=w.t0)
            ledger.count("cases", dropped=1)
            out.append(CaseResult(inp.name, w, obs, None))
            continue
        ledger.count("cases", used=1)
        out.append(CaseResult(inp.name, w, obs, m))
    return out


def classify_stage(cases: list[CaseResult], cfg: PipelineConfig, ledger: Ledger) -> tuple[dict, dict]:
    """Pooled classification of every case with metrics; returns (labels by case id, models)."""
    usable = [c for c in cases if c.metrics is not None]
    if len(usable) < 2:
        if usable:
            ledger.warn("classify", "TooFewCases", f"{len(usable)} analyzable case(s); need 2")
        return {}, {}
    try:
        labels, models = classify_cases([(c.case_id, c.metrics) for c in usable], cfg["classify.binary"], ledger)
    except DegenerateClustering as exc:
        ledger.warn("classify", "DegenerateClustering", str(exc))
        return {}, {}
    return {lb.case_id: lb for lb in labels}, models


def _dedupe_case_ids(cases: list[CaseResult], ledger: Ledger) -> None:
    seen: dict[str, int] = {}
    for c in cases:
        seen[c.case_id] = seen.get(c.case_id, 0) + 1
    for c in cases:
        if seen[c.case_id] > 1:
            new = f"{c.session}/{c.case_id}"
            ledger.warn("cases", "DuplicateCaseId", f"{c.case_id} renamed {new}")
            w = c.window
            c.window = CaseWindow(new, w.driver_id, w.lap, w.t0, w.t1, w.zone)


# -- report -----------------------------------------------------------------

def build_report(cfg: PipelineConfig, sessions: list[dict], cases: list[CaseResult], labels: dict,
                 models: dict, ledger: Ledger) -> dict:
    rows = []
    for c in cases:
        if c.metrics is None:
            continue
        lb = labels.get(c.case_id)
        w = c.window
        rows.append({
            "case_id": w.case_id, "driver_id": w.driver_id, "lap": w.lap, "session": c.session,
            "zone": w.zone, "t0": w.t0, "t1": w.t1,
            "metrics": c.metrics.to_dict(),
            "label": None if lb is None else lb.to_dict(),
            "tracks": [_obs_dict(o, samples=False) for o in c.observations],
        })
    scen = {SCENARIO_I: 0, SCENARIO_II: 0}
    att = {LOW: 0, REGULAR: 0}
    drivers: dict[str, list] = {}
    for r in rows:
        lb = r["label"]
        if lb is not None:
            scen[lb["scenario"]] += 1
            att[lb["attention"]] += 1
        drivers.setdefault(r["driver_id"], []).append(
            {"lap": r["lap"], "case_id": r["case_id"], "attention": None if lb is None else lb["attention"]})
    for seq in drivers.values():
        seq.sort(key=lambda e: (e["lap"], e["case_id"]))
    return {
        "schema": SCHEMA,
        "version": __version__,
        "config": cfg.to_dict(),
        "sessions": sessions,
        "cases": rows,
        "summary": {"n_cases": len(rows), "n_labeled": sum(att.values()), "scenario": scen, "attention": att},
        "drivers": drivers,
        "models": models,
        "warnings": ledger.to_dict(),
    }


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


# -- plot data --------------------------------------------------------------

def _num(v) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def write_overlay_csv(path, traj: EgoTrajectory, yaw: YawSeries, tracks: dict, max_gap: float) -> None:
    """Ego pose, world-frame head yaw and track positions on a shared time axis."""
    rows = []
    if len(yaw):
        inside = (yaw.t >= traj.t0) & (yaw.t <= traj.t1)
        ts = yaw.t[inside]
        if ts.size:
            ex, ey, eh = interpolate_poses(traj, ts)
            yw = wrap_angles(eh + yaw.yaw[inside])
            for i, t in enumerate(ts):
                rows.append((float(t), "", [ex[i], ey[i], eh[i], yw[i]], "", None, None))
    for cls in CLASSES:
        for tr in tracks.get(cls, []):
            ts = np.asarray(tr.t, float)
            ok = (ts >= traj.t0) & (ts <= traj.t1)
            if not ok.any():
                continue
            ex, ey, eh = interpolate_poses(traj, ts[ok])
            y = yaw.sample(ts[ok], max_gap)
            yw = np.where(np.isnan(y), np.nan, wrap_angles(eh + np.nan_to_num(y)))
            pos = tr.positions[ok]
            for i, t in enumerate(ts[ok]):
                rows.append((float(t), tr.id, [ex[i], ey[i], eh[i], yw[i]], cls, pos[i, 0], pos[i, 1]))
    rows.sort(key=lambda r: (r[0], r[1]))
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "ego_x", "ego_y", "ego_heading", "yaw_world", "track_id", "class", "obj_x", "obj_y"])
        for t, tid, ego, cls, ox, oy in rows:
            w.writerow([repr(t)] + [_num(v) for v in ego] + [tid, cls, _num(ox), _num(oy)])


def write_angle_trace_csv(path, cases: list[CaseResult]) -> None:
    """Gated (yaw, bearing) pairs per track: where the head-yaw and object-angle curves meet."""
    rows = []
    for c in cases:
        for o in c.observations:
            for s in o.samples:
                rows.append((s.t, o.track_id, s.yaw, s.bearing, s.region or ""))
    rows.sort(key=lambda r: (r[0], r[1]))
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "yaw_ego", "track_id", "bearing", "region"])
        for t, tid, yaw, b, region in rows:
            w.writerow([repr(float(t)), _num(yaw), tid, _num(b), region])


FIG6_HEADER = ["case_id", "driver_id", "lap", "scenario", "attention", "n_veh", "veh_fv", "veh_pv", "veh_none",
               "n_ped", "ped_fv", "ped_pv", "ped_none", "s_veh", "s_ped", "ped_share"]


def write_fig6_csv(path, report: dict) -> None:
    """Stacked-bar data per case: FV / PV / not observed fractions for each class."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIG6_HEADER)
        for r in report["cases"]:
            m = r["metrics"]
            lb = r["label"] or {}
            veh_none = 0.0 if m["veh_absent"] else max(0.0, 1.0 - m["veh_fv"] - m["veh_pv"])
            ped_none = 0.0 if m["ped_absent"] else max(0.0, 1.0 - m["ped_fv"] - m["ped_pv"])
            w.writerow([r["case_id"], r["driver_id"], r["lap"], lb.get("scenario", ""), lb.get("attention", ""),
                        m["n_veh"], repr(m["veh_fv"]), repr(m["veh_pv"]), repr(veh_none),
                        m["n_ped"], repr(m["ped_fv"]), repr(m["ped_pv"]), repr(ped_none),
                        repr(m["s_veh"]), repr(m["s_ped"]), repr(m["ped_share"])])


# -- persistence ------------------------------------------------------------

def _write_jsonl(path, records) -> None:
    with Path(path).open("w") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


def _read_jsonl(path) -> list[dict]:
    out = []
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    out.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise InputFileError(path, lineno, str(exc)) from None
    return out


def save_yaw(dir_, st: YawStage) -> None:
    d = Path(dir_)
    _write_jsonl(d / "headpose.jsonl", [s.to_dict() for s in st.samples])
    _write_jsonl(d / "yaw.jsonl", [
        {"t": t, "yaw": y, "ambiguous": a, "interpolated": i, "mount_offset": st.mount_offset}
        for t, y, a, i in zip(st.filtered.t.tolist(), st.filtered.yaw.tolist(),
                              st.filtered.ambiguous.tolist(), st.filtered.interpolated.tolist())
    ])
    write_filter_csv(d / "yaw_filter.csv", st.raw, st.filtered)


def load_yaw(dir_, cfg: PipelineConfig) -> YawStage:
    d = Path(dir_)
    samples = [HeadPoseSample.from_dict(r) for r in _read_jsonl(d / "headpose.jsonl")]
    recs = _read_jsonl(d / "yaw.jsonl")
    offset = recs[0]["mount_offset"] if recs else (
        0.0 if cfg["headpose.mount_offset"] == AUTO else cfg["headpose.mount_offset"])
    t = np.array([s.t for s in samples], float)
    raw = YawSeries(t, to_vehicle_yaw([s.yaw for s in samples], offset, cfg["headpose.sign"]) if t.size else t,
                    [s.ambiguous for s in samples])
    filtered = YawSeries([r["t"] for r in recs], [r["yaw"] for r in recs],
                         [r["ambiguous"] for r in recs], [r["interpolated"] for r in recs])
    return YawStage(samples, float(offset), raw, filtered)


def save_tracks(dir_, tracks: dict) -> None:
    _write_jsonl(Path(dir_) / "tracks.jsonl", [tr.to_dict() for cls in CLASSES for tr in tracks.get(cls, [])])


def load_tracks(dir_) -> dict:
    out = {cls: [] for cls in CLASSES}
    for r in _read_jsonl(Path(dir_) / "tracks.jsonl"):
        st = r["states"]
        out[r["class"]].append(Track(r["id"], r["class"], [s["t"] for s in st],
                                     [np.array([s["x"], s["y"], s["vx"], s["vy"]]) for s in st],
                                     [s["coasted"] for s in st]))
    return out


def save_cases(dir_, cases: list[CaseResult]) -> None:
    _write_jsonl(Path(dir_) / "cases.jsonl", [c.to_dict() for c in cases])


def load_cases(dir_) -> list[CaseResult]:
    return [CaseResult.from_dict(r) for r in _read_jsonl(Path(dir_) / "cases.jsonl")]


# -- driver -----------------------------------------------------------------

STAGES = ("ingest", "headpose", "track", "analyze", "classify", "report")


@dataclass
class SessionState:
    inputs: SessionInputs
    yaw: YawStage | None = None
    tracks: dict | None = None
    cases: list | None = None


@dataclass
class PipelineResult:
    report: dict
    ledger: Ledger
    sessions: list = field(default_factory=list)
    cases: list = field(default_factory=list)


def run_pipeline(input_dir, cfg: PipelineConfig | None = None, out_dir=None, until: str = "report",
                 reuse: bool = False, ledger: Ledger | None = None) -> PipelineResult:
    """Run the stages up to ``until``; persist intermediates and outputs when ``out_dir`` is given.

    With ``reuse``, stages before ``until`` load their persisted outputs from
    ``out_dir`` when present instead of recomputing; ``until`` itself always runs.
    """
    cfg = cfg or PipelineConfig()
    cfg.validate()
    ledger = ledger if ledger is not None else Ledger()
    if until not in STAGES:
        raise ValueError(f"unknown stage {until!r}")
    stop = STAGES.index(until)
    out = Path(out_dir) if out_dir is not None else None
    states = [SessionState(ingest_session(p, cfg, ledger)) for p in find_sessions(input_dir)]

    def sdir(st: SessionState) -> Path | None:
        if out is None:
            return None
        d = out / st.inputs.name
        d.mkdir(parents=True, exist_ok=True)
        return d

    for st in states:
        d = sdir(st)
        if stop >= 1:
            if reuse and stop > 1 and d is not None and (d / "yaw.jsonl").exists():
                st.yaw = load_yaw(d, cfg)
            else:
                st.yaw = headpose_stage(st.inputs, cfg, ledger)
                if d is not None:
                    save_yaw(d, st.yaw)
        if stop >= 2:
            if reuse and stop > 2 and d is not None and (d / "tracks.jsonl").exists():
                st.tracks = load_tracks(d)
            else:
                st.tracks = tracking_stage(st.inputs, cfg, ledger)
                if d is not None:
                    save_tracks(d, st.tracks)
        if stop >= 3:
            if reuse and stop > 3 and d is not None and (d / "cases.jsonl").exists():
                st.cases = load_cases(d)
            else:
                st.cases = analyze_stage(st.inputs, st.yaw, st.tracks, cfg, ledger)
                if d is not None:
                    save_cases(d, st.cases)

    cases = [c for st in states for c in (st.cases or [])]
    _dedupe_case_ids(cases, ledger)
    labels, models = classify_stage(cases, cfg, ledger) if stop >= 4 else ({}, {})
    if out is not None and stop >= 4:
        (out / "labels.json").write_text(json.dumps(
            {"labels": [labels[k].to_dict() for k in sorted(labels)], "models": models},
            indent=2, sort_keys=True) + "\n")
    sessions = [{
        "name": st.inputs.name,
        "frames": len(st.inputs.frames),
        "detections": len(st.inputs.detections),
        "mount_offset": None if st.yaw is None else st.yaw.mount_offset,
        "tracks": None if st.tracks is None else {cls: len(st.tracks.get(cls, [])) for cls in CLASSES},
        "cases": None if st.cases is None else len(st.cases),
    } for st in states]
    report = build_report(cfg, sessions, cases, labels, models, ledger)
    if out is not None and stop >= 5:
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(dumps_report(report))
        write_fig6_csv(out / "fig6_bars.csv", report)
        for st in states:
            d = sdir(st)
            write_overlay_csv(d / "overlay.csv", st.inputs.traj, st.yaw.filtered, st.tracks,
                              cfg["yawfilter.max_gap"])
            write_angle_trace_csv(d / "angle_trace.csv", st.cases)
            write_filter_csv(d / "yaw_filter.csv", st.yaw.raw, st.yaw.filtered)
    return PipelineResult(report, ledger, states, cases)


def load_labels(path) -> tuple[dict, dict]:
    d = json.loads(Path(path).read_text())
    return {r["case_id"]: CaseLabel(**r) for r in d["labels"]}, d["models"]

