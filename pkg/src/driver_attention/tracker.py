"""Gaussian-mixture PHD filter over centroid detections, plus track linking.

State vector is ``[x, y, vx, vy]`` in the world frame with a constant-velocity
motion model. The PHD intensity is carried as a :class:`Mixture` of weighted
Gaussians whose weight sum is the expected object count.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InputFileError, InvalidInput, OutOfRange, ScanFailure
from .geometry import ego_to_world, interpolate_pose

CLASSES = ("vehicle", "pedestrian")
H = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
LINK_GATE = 9.21  # chi-square 99% for 2 dof
MAX_MISSED = 3
MIN_TRACK_LENGTH = 3
JITTER = 1e-9


@dataclass(frozen=True)
class GmphdParams:
    p_survival: float = 0.99
    p_detect: float = 0.9
    clutter_density: float = 1e-4
    process_noise_accel: float = 1.0
    meas_noise: float = 0.5
    prune_threshold: float = 1e-5
    merge_threshold: float = 4.0
    max_components: int = 100
    birth_weight: float = 0.05
    birth_cov: tuple = (4.0, 4.0, 4.0, 4.0)
    extract_threshold: float = 0.5

    def __post_init__(self):
        for name in ("p_survival", "p_detect"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise InvalidInput(f"{name} must be in (0, 1]")
        if self.clutter_density < 0 or self.birth_weight < 0:
            raise InvalidInput("clutter_density and birth_weight must be >= 0")
        for name in ("meas_noise", "prune_threshold", "merge_threshold", "extract_threshold"):
            if getattr(self, name) <= 0:
                raise InvalidInput(f"{name} must be > 0")
        if self.process_noise_accel < 0 or self.max_components < 1:
            raise InvalidInput("process_noise_accel must be >= 0 and max_components >= 1")

    @property
    def R(self) -> np.ndarray:
        return self.meas_noise ** 2 * np.eye(2)

    @property
    def birth_P(self) -> np.ndarray:
        b = np.asarray(self.birth_cov, dtype=float)
        return np.diag(b) if b.ndim == 1 else b


def default_params(cls: str, **overrides) -> GmphdParams:
    """Per-class defaults: pedestrians get a gentler acceleration model."""
    if cls not in CLASSES:
        raise InvalidInput(f"unknown class {cls!r}")
    base = {"process_noise_accel": 0.5} if cls == "pedestrian" else {}
    base.update(overrides)
    return GmphdParams(**base)


@dataclass
class Mixture:
    w: np.ndarray  # (n,)
    m: np.ndarray  # (n, 4)
    P: np.ndarray  # (n, 4, 4)

    @classmethod
    def empty(cls) -> "Mixture":
        return cls(np.zeros(0), np.zeros((0, 4)), np.zeros((0, 4, 4)))

    @classmethod
    def single(cls, w, m, P) -> "Mixture":
        return cls(np.array([float(w)]), np.asarray(m, float)[None, :], np.asarray(P, float)[None, :, :])

    def __len__(self) -> int:
        return self.w.size

    @property
    def expected_count(self) -> float:
        return float(self.w.sum())

    def concat(self, other: "Mixture") -> "Mixture":
        return Mixture(np.r_[self.w, other.w], np.vstack([self.m, other.m]),
                       np.concatenate([self.P, other.P]))

    def take(self, idx) -> "Mixture":
        return Mixture(self.w[idx], self.m[idx], self.P[idx])

    def is_valid(self) -> bool:
        """Every covariance symmetric (1e-9) and positive definite."""
        if len(self) == 0:
            return True
        if np.abs(self.P - np.swapaxes(self.P, 1, 2)).max() > 1e-9:
            return False
        return bool(np.all(np.linalg.eigvalsh(self.P) > 0))


def cv_matrices(dt: float, accel: float) -> tuple[np.ndarray, np.ndarray]:
    """Transition F and discrete white-acceleration noise Q for one step."""
    F = np.eye(4)
    F[0, 2] = F[1, 3] = dt
    q = np.array([[dt ** 4 / 4, dt ** 3 / 2], [dt ** 3 / 2, dt ** 2]]) * accel ** 2
    Q = np.zeros((4, 4))
    Q[np.ix_([0, 2], [0, 2])] = q
    Q[np.ix_([1, 3], [1, 3])] = q
    return F, Q


def birth_mixture(measurements, params: GmphdParams) -> Mixture:
    z = np.asarray(measurements, float).reshape(-1, 2)
    if params.birth_weight == 0 or z.shape[0] == 0:
        return Mixture.empty()
    n = z.shape[0]
    m = np.zeros((n, 4))
    m[:, :2] = z
    return Mixture(np.full(n, params.birth_weight), m, np.repeat(params.birth_P[None], n, axis=0))


def predict(mixture: Mixture, params: GmphdParams, dt: float, birth_measurements=None) -> Mixture:
    if not dt > 0:
        raise InvalidInput("dt must be positive")
    F, Q = cv_matrices(dt, params.process_noise_accel)
    P = F @ mixture.P @ F.T + Q
    out = Mixture(mixture.w * params.p_survival, mixture.m @ F.T, 0.5 * (P + np.swapaxes(P, 1, 2)))
    if birth_measurements is not None:
        out = out.concat(birth_mixture(birth_measurements, params))
    return out


def _safe_cholesky(S: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        S = 0.5 * (S + np.swapaxes(S, -1, -2)) + JITTER * np.eye(S.shape[-1])
        try:
            return np.linalg.cholesky(S)
        except np.linalg.LinAlgError as exc:
            raise ScanFailure("innovation covariance not positive definite") from exc


def update(mixture: Mixture, measurements, params: GmphdParams) -> Mixture:
    """GM-PHD measurement update (missed copies first, then one block per measurement)."""
    z = np.asarray(measurements, float).reshape(-1, 2)
    pd = params.p_detect
    missed = Mixture((1.0 - pd) * mixture.w, mixture.m.copy(), mixture.P.copy())
    if z.shape[0] == 0 or len(mixture) == 0:
        return missed

    S = mixture.P[:, :2, :2] + params.R
    L = _safe_cholesky(S)
    S_inv = np.linalg.inv(S)
    K = mixture.P[:, :, :2] @ S_inv
    IKH = np.eye(4) - K @ H
    Pu = IKH @ mixture.P @ np.swapaxes(IKH, 1, 2) + K @ params.R @ np.swapaxes(K, 1, 2)
    Pu = 0.5 * (Pu + np.swapaxes(Pu, 1, 2))
    log_norm = -np.log(2 * np.pi) - np.log(np.diagonal(L, axis1=1, axis2=2)).sum(axis=1)

    innov = z[:, None, :] - mixture.m[None, :, :2]  # (k, n, 2)
    d2 = np.einsum("kni,nij,knj->kn", innov, S_inv, innov)
    like = np.exp(log_norm[None, :] - 0.5 * d2)
    num = pd * mixture.w[None, :] * like
    denom = params.clutter_density + num.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        wz = np.where(denom > 0, num / denom, 0.0)
    mz = mixture.m[None, :, :] + np.einsum("nij,knj->kni", K, innov)
    k, n = wz.shape
    detected = Mixture(wz.reshape(-1), mz.reshape(-1, 4), np.tile(Pu, (k, 1, 1)))
    return missed.concat(detected)


def prune_merge(mixture: Mixture, params: GmphdParams) -> Mixture:
    """Vo-Ma pruning, moment-preserving greedy merging and capping."""
    keep = np.flatnonzero(mixture.w > params.prune_threshold)
    if keep.size == 0:
        return Mixture.empty()
    w, m, P = mixture.w[keep], mixture.m[keep], mixture.P[keep]
    P_inv = np.linalg.inv(P)
    alive = np.ones(w.size, bool)
    out_w, out_m, out_P = [], [], []
    while alive.any():
        idx = np.flatnonzero(alive)
        j = idx[np.argmax(w[idx])]
        d = m[idx] - m[j]
        d2 = np.einsum("ni,nij,nj->n", d, P_inv[idx], d)
        grp = idx[d2 <= params.merge_threshold]
        wg = w[grp]
        W = wg.sum()
        mean = (wg[:, None] * m[grp]).sum(axis=0) / W
        dm = m[grp] - mean
        cov = (wg[:, None, None] * (P[grp] + dm[:, :, None] * dm[:, None, :])).sum(axis=0) / W
        out_w.append(W)
        out_m.append(mean)
        out_P.append(0.5 * (cov + cov.T))
        alive[grp] = False
    merged = Mixture(np.array(out_w), np.array(out_m), np.array(out_P))
    if len(merged) > params.max_components:
        order = np.argsort(-merged.w, kind="stable")[: params.max_components]
        merged = merged.take(np.sort(order))
    return merged


# -- filtering loop ---------------------------------------------------------

@dataclass
class ScanResult:
    t: float
    mixture: Mixture
    failed: bool = False


def run_filter(scans, params: GmphdParams, initial: Mixture | None = None,
               ledger=None, label: str = "tracker") -> list[ScanResult]:
    """Run predict/update/prune over ``scans``: a sequence of ``(t, Z)``.

    Births for scan k come from the measurements of scan k-1. A scan whose
    update fails numerically keeps the predicted mixture.
    """
    mix = initial if initial is not None else Mixture.empty()
    history: list[ScanResult] = []
    prev_t, prev_z = None, None
    for t, z in scans:
        z = np.asarray(z, float).reshape(-1, 2)
        if prev_t is not None:
            mix = predict(mix, params, t - prev_t, prev_z)
        failed = False
        try:
            mix = update(mix, z, params)
        except ScanFailure as exc:
            failed = True
            if ledger is not None:
                ledger.warn(label, "ScanFailure", str(exc), t=float(t))
        mix = prune_merge(mix, params)
        if not mix.is_valid():
            mix.P = 0.5 * (mix.P + np.swapaxes(mix.P, 1, 2)) + JITTER * np.eye(4)
            if ledger is not None:
                ledger.warn(label, "CovarianceRepair", t=float(t))
        history.append(ScanResult(float(t), mix, failed))
        prev_t, prev_z = t, z
    return history


# -- track extraction -------------------------------------------------------

@dataclass
class Track:
    id: str
    cls: str
    t: list = field(default_factory=list)
    states: list = field(default_factory=list)
    coasted: list = field(default_factory=list)
    # linking bookkeeping, not part of the output
    _P: np.ndarray | None = field(default=None, repr=False)
    _missed: int = field(default=0, repr=False)

    @property
    def positions(self) -> np.ndarray:
        return np.asarray(self.states, float).reshape(-1, 4)[:, :2]

    @property
    def n_extracted(self) -> int:
        return int(len(self.coasted) - sum(self.coasted))

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "class": self.cls,
            "states": [
                {"t": t, "x": s[0], "y": s[1], "vx": s[2], "vy": s[3], "coasted": c}
                for t, s, c in zip(self.t, np.asarray(self.states).tolist(), self.coasted)
            ],
        }


def extract_tracks(history: list[ScanResult], params: GmphdParams, cls: str = "vehicle",
                   min_length: int = MIN_TRACK_LENGTH) -> list[Track]:
    """Link per-scan estimates (components above ``extract_threshold``) into tracks.

    Estimates are assigned to open tracks by Hungarian matching on Mahalanobis
    distance within :data:`LINK_GATE`. An unmatched track coasts on its CV
    prediction; after more than :data:`MAX_MISSED` consecutive misses it is
    closed and its trailing coasted states are dropped. Tracks with fewer than
    ``min_length`` extracted states are discarded as clutter fragments.
    """
    open_tracks: list[Track] = []
    closed: list[Track] = []
    counter = 0
    prev_t = None
    for scan in history:
        mix = scan.mixture
        sel = np.flatnonzero(mix.w > params.extract_threshold)
        est_m, est_P = mix.m[sel], mix.P[sel]
        dt = None if prev_t is None else scan.t - prev_t
        prev_t = scan.t

        preds, pred_P = [], []
        if dt is not None:
            F, Q = cv_matrices(dt, params.process_noise_accel)
            for tr in open_tracks:
                preds.append(F @ np.asarray(tr.states[-1]))
                pred_P.append(F @ tr._P @ F.T + Q)

        matched_tracks, matched_est = set(), set()
        if open_tracks and sel.size:
            cost = np.full((len(open_tracks), sel.size), np.inf)
            for i, (p, pp) in enumerate(zip(preds, pred_P)):
                d = est_m[:, :2] - p[:2]
                S = pp[:2, :2] + est_P[:, :2, :2]
                cost[i] = np.einsum("ni,nij,nj->n", d, np.linalg.inv(S), d)
            big = LINK_GATE * 10 + 1.0
            rows, cols = linear_sum_assignment(np.where(cost <= LINK_GATE, cost, big))
            for r, c in zip(rows, cols):
                if cost[r, c] <= LINK_GATE:
                    tr = open_tracks[r]
                    tr.t.append(scan.t)
                    tr.states.append(est_m[c].copy())
                    tr.coasted.append(False)
                    tr._P = est_P[c].copy()
                    tr._missed = 0
                    matched_tracks.add(r)
                    matched_est.add(c)

        still_open = []
        for i, tr in enumerate(open_tracks):
            if i not in matched_tracks:
                tr._missed += 1
                if tr._missed > MAX_MISSED:
                    closed.append(tr)
                    continue
                tr.t.append(scan.t)
                tr.states.append(preds[i])
                tr.coasted.append(True)
                tr._P = pred_P[i]
            still_open.append(tr)
        open_tracks = still_open

        for c in range(sel.size):
            if c not in matched_est:
                counter += 1
                open_tracks.append(Track(f"{cls}-{counter:04d}", cls, [scan.t], [est_m[c].copy()],
                                         [False], est_P[c].copy()))
    closed.extend(open_tracks)
    for tr in closed:
        while tr.coasted and tr.coasted[-1]:
            tr.t.pop()
            tr.states.pop()
            tr.coasted.pop()
        tr.states = [np.asarray(s, float) for s in tr.states]
        tr._P = None
    closed = [tr for tr in closed if tr.n_extracted >= min_length]
    closed.sort(key=lambda tr: int(tr.id.rsplit("-", 1)[1]))
    return closed


# -- scenes -----------------------------------------------------------------

@dataclass(frozen=True)
class Detection:
    t: float
    cls: str
    x: float
    y: float
    conf: float = 1.0


def scan_times(times, nominal_dt: float | None = None) -> np.ndarray:
    """Sorted unique detection times with long gaps filled by empty scans."""
    ts = np.unique(np.asarray(times, float))
    if ts.size < 2:
        return ts
    dt = nominal_dt or float(np.median(np.diff(ts)))
    out = [ts[0]]
    for a, b in zip(ts[:-1], ts[1:]):
        n = int(round((b - a) / dt))
        if n > 1:
            out.extend(a + dt * np.arange(1, n))
        out.append(b)
    return np.asarray(out)


def track_scene(detections, params: dict | GmphdParams | None = None, times=None,
                ledger=None, min_length: int = MIN_TRACK_LENGTH) -> dict[str, list[Track]]:
    """Run the filter and linker independently for each class."""
    detections = list(detections)
    if times is None:
        times = scan_times([d.t for d in detections])
    out: dict[str, list[Track]] = {}
    for cls in CLASSES:
        if isinstance(params, GmphdParams):
            p = params
        else:
            p = (params or {}).get(cls) or default_params(cls)
        by_t: dict[float, list] = {}
        for d in detections:
            if d.cls == cls:
                by_t.setdefault(d.t, []).append((d.x, d.y))
        scans = [(t, np.asarray(by_t.get(t, []), float).reshape(-1, 2)) for t in times]
        history = run_filter(scans, p, ledger=ledger, label=f"tracker.{cls}")
        out[cls] = extract_tracks(history, p, cls, min_length)
    return out


def ospa(X, Y, c: float = 5.0, p: float = 2.0) -> float:
    """OSPA distance between two planar point sets."""
    X = np.asarray(X, float).reshape(-1, 2)
    Y = np.asarray(Y, float).reshape(-1, 2)
    m, n = X.shape[0], Y.shape[0]
    if m == 0 and n == 0:
        return 0.0
    if m == 0 or n == 0:
        return float(c)
    if m > n:
        X, Y, m, n = Y, X, n, m
    D = np.minimum(np.linalg.norm(X[:, None] - Y[None], axis=2), c) ** p
    r, k = linear_sum_assignment(D)
    return float(((D[r, k].sum() + c ** p * (n - m)) / n) ** (1.0 / p))


def estimates_at(tracks: list[Track], t: float, include_coasted: bool = True,
                 tol: float = 1e-9) -> np.ndarray:
    """Positions of all tracks at time ``t``."""
    pts = []
    for tr in tracks:
        for ti, s, c in zip(tr.t, tr.states, tr.coasted):
            if abs(ti - t) <= tol and (include_coasted or not c):
                pts.append(s[:2])
    return np.asarray(pts, float).reshape(-1, 2)


# -- IO ---------------------------------------------------------------------

def parse_detection(rec: dict, traj=None) -> Detection:
    t = float(rec["t"])
    cls = rec["class"]
    if cls not in CLASSES:
        raise InvalidInput(f"unknown class {cls!r}")
    x, y = float(rec["x"]), float(rec["y"])
    conf = float(rec.get("conf", 1.0))
    if not all(map(math.isfinite, (t, x, y, conf))):
        raise InvalidInput("non-finite detection field")
    frame = rec.get("frame", "world")
    if frame == "ego":
        if traj is None:
            raise InvalidInput("ego-frame detection without a trajectory")
        x, y = ego_to_world(interpolate_pose(traj, t), (x, y))
    elif frame != "world":
        raise InvalidInput(f"unknown frame {frame!r}")
    return Detection(t, cls, float(x), float(y), conf)


def read_detections(path, traj=None, min_conf: float = 0.3, ledger=None) -> list[Detection]:
    """Read the detection JSONL log, converting ego-frame records to world."""
    stage = "ingest.detections"
    out: list[Detection] = []
    used = dropped = 0
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                det = parse_detection(rec, traj)
            except OutOfRange as exc:
                dropped += 1
                if ledger is not None:
                    ledger.warn(stage, "OutsideTrajectory", str(exc), t=rec.get("t"))
                continue
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise InputFileError(str(path), lineno, str(exc)) from exc
            if det.conf < min_conf:
                dropped += 1
                if ledger is not None:
                    ledger.warn(stage, "LowConfidence", f"conf={det.conf}", t=det.t)
                continue
            used += 1
            out.append(det)
    if ledger is not None:
        ledger.count(stage, used=used, dropped=dropped)
    out.sort(key=lambda d: (d.t, d.cls))
    return out


def detection_record(d: Detection) -> dict:
    return {"t": d.t, "class": d.cls, "x": d.x, "y": d.y, "frame": "world", "conf": d.conf}
