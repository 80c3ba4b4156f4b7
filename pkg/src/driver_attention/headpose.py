"""Head orientation from four coplanar facial landmarks.

The chain is: undistort pixel landmarks -> exact 4-point homography between
the planar face template and the normalized image -> IPPE decomposition into
two candidate rigid poses -> pick the lower reprojection error -> Tait-Bryan
decomposition of the head rotation.

Camera frame follows the usual pinhole convention (x right, y down, z along
the optical axis). The face template is expressed with x to the subject's
image-right and y *up*, so a face looking straight into the camera has
model->camera rotation ``FRONTAL = diag(1, -1, -1)``. Head rotations reported
here are relative to that frontal pose: ``R_head = R_model_to_cam @ FRONTAL``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateHomography,
    InputFileError,
    InvalidInput,
    PoseInfeasible,
    UndistortFailure,
)
from .geometry import EgoTrajectory, wrap_angle, wrap_angles

FRONTAL = np.diag([1.0, -1.0, -1.0])
LANDMARK_NAMES = ("A", "B", "C", "D")
AMBIGUITY_FLAG_RATIO = 0.9
REFINE_SKIP_FACTOR = 10.0  # a candidate this much worse than the refined best stays unrefined
GIMBAL_PITCH_DEG = 89.0


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    k1: float = 0.0
    k2: float = 0.0
    p1: float = 0.0
    p2: float = 0.0

    def __post_init__(self):
        vals = (self.fx, self.fy, self.cx, self.cy, self.k1, self.k2, self.p1, self.p2)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidInput("non-finite intrinsics")
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidInput("focal lengths must be positive")
        if not (0 <= self.cx <= 4096 and 0 <= self.cy <= 4096):
            raise InvalidInput("principal point outside 0..4096")

    @property
    def has_distortion(self) -> bool:
        return any((self.k1, self.k2, self.p1, self.p2))

    def distort(self, xy: np.ndarray) -> np.ndarray:
        """Apply radial-tangential distortion to normalized points."""
        xy = np.asarray(xy, dtype=float)
        x, y = xy[..., 0], xy[..., 1]
        r2 = x * x + y * y
        radial = 1.0 + self.k1 * r2 + self.k2 * r2 * r2
        xd = x * radial + 2 * self.p1 * x * y + self.p2 * (r2 + 2 * x * x)
        yd = y * radial + self.p1 * (r2 + 2 * y * y) + 2 * self.p2 * x * y
        return np.stack([xd, yd], axis=-1)

    def to_pixels(self, xy_norm: np.ndarray) -> np.ndarray:
        d = self.distort(xy_norm)
        return np.stack([self.fx * d[..., 0] + self.cx, self.fy * d[..., 1] + self.cy], axis=-1)

    def project(self, pts_cam: np.ndarray) -> np.ndarray:
        pts_cam = np.asarray(pts_cam, dtype=float)
        return self.to_pixels(pts_cam[..., :2] / pts_cam[..., 2:3])

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("fx", "fy", "cx", "cy", "k1", "k2", "p1", "p2")}


@dataclass(frozen=True)
class FaceTemplate:
    """Planar face model in millimetres (z = 0 implied).

    A, B are the outer eye canthi; C, D the jaw angles.
    """

    A: tuple[float, float] = (-45.0, 35.0)
    B: tuple[float, float] = (45.0, 35.0)
    C: tuple[float, float] = (-65.0, -45.0)
    D: tuple[float, float] = (65.0, -45.0)

    def __post_init__(self):
        pts = self.points_mm()
        if not np.all(np.isfinite(pts)):
            raise InvalidInput("non-finite template point")
        for i, j, k in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
            if abs(_cross2(pts[j] - pts[i], pts[k] - pts[i])) < 1e-6:
                raise InvalidInput("three template points are collinear")

    def points_mm(self) -> np.ndarray:
        return np.array([self.A, self.B, self.C, self.D], dtype=float)

    def model_xy(self) -> np.ndarray:
        """Template points in metres."""
        return self.points_mm() / 1000.0

    def points_3d(self) -> np.ndarray:
        xy = self.model_xy()
        return np.column_stack([xy, np.zeros(4)])

    def is_symmetric(self, tol: float = 1e-9) -> bool:
        p = self.points_mm()
        return (np.allclose(p[0] * [-1, 1], p[1], atol=tol)
                and np.allclose(p[2] * [-1, 1], p[3], atol=tol))


@dataclass(frozen=True)
class LandmarkFrame:
    t: float
    points: np.ndarray  # (4, 2) pixels in A, B, C, D order

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.shape != (4, 2) or not np.all(np.isfinite(pts)):
            raise InvalidInput("landmark frame needs four finite pixel points")
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class HeadPoseSample:
    t: float
    yaw: float
    pitch: float
    roll: float
    reproj_err: float
    ambiguity_ratio: float
    flags: frozenset = field(default_factory=frozenset)

    @property
    def ambiguous(self) -> bool:
        return "ambiguous" in self.flags

    def to_dict(self) -> dict:
        return {
            "t": self.t, "yaw": self.yaw, "pitch": self.pitch, "roll": self.roll,
            "reproj_err": self.reproj_err, "ambiguity_ratio": self.ambiguity_ratio,
            "flags": sorted(self.flags),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HeadPoseSample":
        return cls(float(d["t"]), float(d["yaw"]), float(d["pitch"]), float(d["roll"]),
                   float(d["reproj_err"]), float(d["ambiguity_ratio"]),
                   frozenset(d.get("flags", ())))


def _cross2(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


# --- rotations ----------------------------------------------------------------

def rot_vertical(deg: float) -> np.ndarray:
    """Rotation about the camera's vertical (y) axis."""
    a = math.radians(deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_lateral(deg: float) -> np.ndarray:
    """Rotation about the camera's lateral (x) axis."""
    a = math.radians(deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_optical(deg: float) -> np.ndarray:
    a = math.radians(deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_from_ypr(yaw: float, pitch: float, roll: float) -> np.ndarray:
    """Head rotation for intrinsic yaw-pitch-roll (vertical, lateral, optical)."""
    return rot_vertical(yaw) @ rot_lateral(pitch) @ rot_optical(roll)


def extract_yaw(R: np.ndarray) -> tuple[float, float, float, bool]:
    """Decompose a head rotation into ``(yaw, pitch, roll, gimbal)``.

    Inverse of :func:`rotation_from_ypr`. ``gimbal`` is set when
    ``|pitch| > 89 deg``, where yaw and roll are poorly separated.
    """
    R = np.asarray(R, dtype=float)
    pitch = math.degrees(math.asin(max(-1.0, min(1.0, -R[1, 2]))))
    yaw = math.degrees(math.atan2(R[0, 2], R[2, 2]))
    roll = math.degrees(math.atan2(R[1, 0], R[1, 1]))
    return wrap_angle(yaw), wrap_angle(pitch), wrap_angle(roll), abs(pitch) > GIMBAL_PITCH_DEG


# --- image preprocessing ------------------------------------------------------

UNDISTORT_ITERATIONS = 10
UNDISTORT_TOL = 1e-4


def undistort_normalize(points, K: CameraIntrinsics) -> np.ndarray:
    """Pixels -> undistorted normalized image coordinates.

    Distortion is inverted with a fixed number of fixed-point iterations; a
    point whose re-distortion misses the observation is reported as
    :class:`UndistortFailure`.
    """
    px = np.asarray(points, dtype=float)
    xd = np.stack([(px[..., 0] - K.cx) / K.fx, (px[..., 1] - K.cy) / K.fy], axis=-1)
    if not K.has_distortion:
        return xd
    xy = xd.copy()
    with np.errstate(all="ignore"):
        for _ in range(UNDISTORT_ITERATIONS):
            x, y = xy[..., 0], xy[..., 1]
            r2 = x * x + y * y
            radial = 1.0 + K.k1 * r2 + K.k2 * r2 * r2
            dx = 2 * K.p1 * x * y + K.p2 * (r2 + 2 * x * x)
            dy = K.p1 * (r2 + 2 * y * y) + 2 * K.p2 * x * y
            xy = np.stack([(xd[..., 0] - dx) / radial, (xd[..., 1] - dy) / radial], axis=-1)
        resid = np.abs(K.distort(xy) - xd)
    if not np.all(np.isfinite(xy)) or np.any(resid > UNDISTORT_TOL):
        raise UndistortFailure("distortion inversion did not converge")
    return xy


# --- homography ---------------------------------------------------------------

def _similarity_normalizer(pts: np.ndarray) -> np.ndarray:
    c = pts.mean(axis=0)
    d = np.sqrt(((pts - c) ** 2).sum(axis=1)).mean()
    if d <= 0:
        raise DegenerateHomography("coincident points")
    s = math.sqrt(2.0) / d
    return np.array([[s, 0, -s * c[0]], [0, s, -s * c[1]], [0, 0, 1.0]])


def _any_three_collinear(pts: np.ndarray, rel_tol: float = 1e-9) -> bool:
    scale = max(np.ptp(pts[:, 0]), np.ptp(pts[:, 1]), 1e-300) ** 2
    for i, j, k in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
        if abs(_cross2(pts[j] - pts[i], pts[k] - pts[i])) <= rel_tol * scale:
            return True
    return False


def homography_4pt(model_xy, img_norm) -> np.ndarray:
    """Exact homography mapping 4 planar model points onto 4 image points.

    Minimal DLT with Hartley normalisation; result scaled so ``H[2, 2] == 1``.
    """
    X = np.asarray(model_xy, dtype=float)
    x = np.asarray(img_norm, dtype=float)
    if X.shape != (4, 2) or x.shape != (4, 2):
        raise InvalidInput("homography_4pt needs exactly four 2-D correspondences")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(x))):
        raise DegenerateHomography("non-finite correspondences")
    if _any_three_collinear(X) or _any_three_collinear(x):
        raise DegenerateHomography("three collinear points")
    Tm, Ti = _similarity_normalizer(X), _similarity_normalizer(x)
    Xn = (Tm @ np.column_stack([X, np.ones(4)]).T).T
    xn = (Ti @ np.column_stack([x, np.ones(4)]).T).T
    u, v, p, q = Xn[:, 0], Xn[:, 1], xn[:, 0], xn[:, 1]
    A = np.zeros((8, 9))
    A[0::2, 0], A[0::2, 1], A[0::2, 2] = u, v, 1.0
    A[1::2, 3], A[1::2, 4], A[1::2, 5] = u, v, 1.0
    A[0::2, 6], A[0::2, 7], A[0::2, 8] = -p * u, -p * v, -p
    A[1::2, 6], A[1::2, 7], A[1::2, 8] = -q * u, -q * v, -q
    _, s, vt = np.linalg.svd(A)
    if s[-1] < 1e-10 * s[0]:
        raise DegenerateHomography("rank-deficient DLT system")
    Hn = vt[-1].reshape(3, 3)
    H = np.linalg.inv(Ti) @ Hn @ Tm
    if abs(H[2, 2]) < 1e-12 * np.abs(H).max():
        raise DegenerateHomography("model origin maps to infinity")
    return H / H[2, 2]


def apply_homography(H: np.ndarray, pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    h = np.column_stack([pts, np.ones(len(pts))]) @ H.T
    return h[:, :2] / h[:, 2:3]


# --- IPPE -----------------------------------------------------------------------

def _rotation_z_to(v: np.ndarray) -> np.ndarray:
    """Rotation taking the optical axis onto the unit direction ``v``."""
    k = np.array([-v[1], v[0], 0.0])  # e_z x v
    s = np.linalg.norm(k)
    c = v[2]
    if s < 1e-15:
        return np.eye(3)
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + kx + kx @ kx * ((1 - c) / (s * s))


def _translation_lsq(R: np.ndarray, model_xy: np.ndarray, img_norm: np.ndarray) -> np.ndarray:
    """Least-squares translation given rotation: x_i (r3.P + tz) = r1.P + tx."""
    P = model_xy @ R[:, :2].T
    A = np.zeros((2 * len(P), 3))
    b = np.zeros(2 * len(P))
    A[0::2, 0] = 1.0
    A[0::2, 2] = -img_norm[:, 0]
    b[0::2] = img_norm[:, 0] * P[:, 2] - P[:, 0]
    A[1::2, 1] = 1.0
    A[1::2, 2] = -img_norm[:, 1]
    b[1::2] = img_norm[:, 1] * P[:, 2] - P[:, 1]
    return np.linalg.solve(A.T @ A, A.T @ b)


def ippe_decompose(H, model_xy=None, img_norm=None) -> list[tuple[np.ndarray, np.ndarray]]:
    """The two IPPE pose candidates for a plane-to-image homography.

    With ``R2`` the first two columns of the rotation and ``t`` the
    translation, the projection ``pi(R2 u + t)`` has Jacobian
    ``J = (1/t_z) [I | -v] R2`` at the model origin, where ``v = H(0)``.
    Rotating the optical axis onto the ray through ``v`` (``Rv``) turns
    ``[I | -v] Rv`` into ``[B | 0]``, so ``B^-1 J`` equals the top 2x2 block of
    ``Rv^T R2`` scaled by ``1/t_z``. Its largest singular value gives the
    scale and the missing third row is fixed up to a joint sign, which is
    where the two solutions come from.

    Translations come from the homography alone, or from least squares over
    the correspondences when ``model_xy``/``img_norm`` are given.
    """
    H = np.asarray(H, dtype=float)
    if not np.all(np.isfinite(H)) or abs(np.linalg.det(H)) < 1e-300:
        raise PoseInfeasible("homography is not invertible")
    H = H / H[2, 2]
    v = np.array([H[0, 2], H[1, 2]])
    J = np.array([
        [H[0, 0] - H[2, 0] * H[0, 2], H[0, 1] - H[2, 1] * H[0, 2]],
        [H[1, 0] - H[2, 0] * H[1, 2], H[1, 1] - H[2, 1] * H[1, 2]],
    ])
    ray = np.array([v[0], v[1], 1.0])
    Rv = _rotation_z_to(ray / np.linalg.norm(ray))
    B = (np.array([[1.0, 0.0, -v[0]], [0.0, 1.0, -v[1]]]) @ Rv)[:, :2]
    A = np.linalg.solve(B, J)
    _, sv, vt = np.linalg.svd(A)
    gamma = sv[0]
    if gamma < 1e-12:
        raise PoseInfeasible("homography Jacobian vanishes at the model origin")
    M = A / gamma
    # I - M^T M = (1 - r^2) v2 v2^T with r the singular-value ratio, so the
    # missing third row is +-sqrt(1 - r^2) v2
    r = min(1.0, sv[1] / gamma)
    if 1.0 - r <= 64 * np.finfo(float).eps:
        r = 1.0  # tilt below the roundoff floor of the singular values
    b = math.sqrt((1.0 - r) * (1.0 + r)) * vt[1]
    b0, b1 = b
    candidates = []
    for sign in (1.0, -1.0):
        c0 = np.array([M[0, 0], M[1, 0], sign * b0])
        c1 = np.array([M[0, 1], M[1, 1], sign * b1])
        c2 = np.array([c0[1] * c1[2] - c0[2] * c1[1], c0[2] * c1[0] - c0[0] * c1[2],
                       c0[0] * c1[1] - c0[1] * c1[0]])
        Rt = np.column_stack([c0, c1, c2])
        R = _orthonormalize(Rv @ Rt)
        if model_xy is not None and img_norm is not None:
            t = _translation_lsq(R, np.asarray(model_xy, float), np.asarray(img_norm, float))
        else:
            t = ray / gamma
        candidates.append((R, t))
    feasible = [(R, t) for R, t in candidates if t[2] > 0]
    if not feasible:
        raise PoseInfeasible("no candidate places the plane in front of the camera")
    if len(feasible) == 1:
        feasible = feasible * 2
    return feasible


def _orthonormalize(R: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(R)
    Q = u @ vt
    if np.linalg.det(Q) < 0:
        u[:, -1] *= -1
        Q = u @ vt
    return Q


# --- refinement ---------------------------------------------------------------

def _rodrigues(w: np.ndarray) -> np.ndarray:
    th = math.sqrt(float(w @ w))
    kx = np.array([[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]])
    if th < 1e-12:
        return np.eye(3) + kx
    return np.eye(3) + math.sin(th) / th * kx + (1 - math.cos(th)) / (th * th) * kx @ kx


def refine_pose(R, t, model_xy, img_norm, max_iter: int = 20):
    """Levenberg-Marquardt on the normalized reprojection error.

    IPPE reads the plane tilt from the homography's local affine part, where a
    small tilt is only a second-order (cosine) effect; the perspective cue
    used here is first-order, which matters near frontal poses.
    """
    P = np.asarray(model_xy, float)
    x = np.asarray(img_norm, dtype=float)

    def residual(R, t):
        Q = P @ R[:, :2].T + t  # planar model: z = 0
        if Q[:, 2].min() <= 0:
            return None, Q
        return (Q[:, :2] / Q[:, 2:3] - x).ravel(), Q

    r, Q = residual(R, t)
    if r is None:
        return R, t
    cost = float(r @ r)
    lam = 1e-6
    n = len(P)
    J = np.zeros((2 * n, 6))
    diag = np.arange(6)
    for _ in range(max_iter):
        if cost < 1e-26:
            break
        a, b, c = (Q - t).T
        iz = 1.0 / Q[:, 2]
        u, v = Q[:, 0] * iz, Q[:, 1] * iz
        # rows of d(pi)/d(RP) times d(RP)/dw = -[RP]x for R <- exp(w) R
        J[0::2, 0], J[0::2, 1], J[0::2, 2] = -u * b * iz, (c + u * a) * iz, -b * iz
        J[1::2, 0], J[1::2, 1], J[1::2, 2] = -(c + v * b) * iz, v * a * iz, a * iz
        J[0::2, 3], J[0::2, 5] = iz, -u * iz
        J[1::2, 4], J[1::2, 5] = iz, -v * iz
        A = J.T @ J
        g = J.T @ r
        dA = A[diag, diag] + 1e-12
        while True:
            Ad = A.copy()
            Ad[diag, diag] += lam * dA
            step = np.linalg.solve(Ad, -g)
            Rn = _rodrigues(step[:3]) @ R
            tn = t + step[3:]
            rn, Qn = residual(Rn, tn)
            if rn is not None and float(rn @ rn) <= cost:
                break
            lam *= 10
            if lam > 1e8:
                return _orthonormalize(R), t
        new_cost = float(rn @ rn)
        R, t, r, Q = Rn, tn, rn, Qn
        lam = max(lam / 10, 1e-12)
        converged = cost - new_cost <= 1e-6 * cost or float(np.abs(step[:3]).max()) < 1e-5
        cost = new_cost
        if converged:
            break
    return _orthonormalize(R), t


# --- selection ----------------------------------------------------------------

def reprojection_rms(R: np.ndarray, t: np.ndarray, model_xy, img_norm) -> float:
    P = np.asarray(model_xy, float) @ R[:, :2].T + t  # planar model: z = 0
    if P[:, 2].min() <= 0:
        return math.inf
    d = P[:, :2] / P[:, 2:3] - img_norm
    return math.sqrt(float(np.einsum("ij,ij->", d, d)) / len(d))


def choose_by_error(err_a: float, err_b: float) -> tuple[int, float]:
    """Index of the lower error (ties -> first) and selected/rejected ratio."""
    idx = 0 if err_a <= err_b else 1
    sel, rej = (err_a, err_b) if idx == 0 else (err_b, err_a)
    if rej == 0.0:
        return idx, 1.0
    return idx, sel / rej


def select_pose(candidates, model_xy, img_norm):
    """Pick the candidate with the lower RMS reprojection error.

    Returns ``(R, t, reproj_err, ambiguity_ratio)``; errors are in normalized
    image units.
    """
    errs = [reprojection_rms(R, t, model_xy, img_norm) for R, t in candidates]
    idx, ratio = choose_by_error(errs[0], errs[1])
    R, t = candidates[idx]
    return R, t, errs[idx], ratio


def estimate_head_pose(frame: LandmarkFrame, template: FaceTemplate,
                       K: CameraIntrinsics, refine: bool = True) -> HeadPoseSample:
    """Full landmark -> yaw chain for one frame; raises on per-frame failure.

    The IPPE candidates are polished by :func:`refine_pose` before selection
    unless ``refine`` is false. The better candidate is refined first; the
    other is skipped when its unrefined error already exceeds
    ``REFINE_SKIP_FACTOR`` times the refined best, where it lies far outside
    the ambiguity band and its refinement only costs time.
    """
    model_xy = template.model_xy()
    img = undistort_normalize(frame.points, K)
    H = homography_4pt(model_xy, img)
    cands = ippe_decompose(H, model_xy, img)
    if refine:
        errs = [reprojection_rms(R, t, model_xy, img) for R, t in cands]
        order = sorted(range(len(cands)), key=errs.__getitem__)
        best = refine_pose(*cands[order[0]], model_xy, img)
        refined = {order[0]: best}
        best_err = reprojection_rms(*best, model_xy, img)
        for i in order[1:]:
            if errs[i] <= REFINE_SKIP_FACTOR * best_err:
                refined[i] = refine_pose(*cands[i], model_xy, img)
        cands = [refined.get(i, c) for i, c in enumerate(cands)]
    R, t, _, ratio = select_pose(cands, model_xy, img)
    yaw, pitch, roll, gimbal = extract_yaw(R @ FRONTAL)
    px = K.project(template.points_3d() @ R.T + t)
    err_px = float(np.sqrt(np.mean(np.sum((px - frame.points) ** 2, axis=1))))
    flags = set()
    if ratio > AMBIGUITY_FLAG_RATIO:
        flags.add("ambiguous")
    if gimbal:
        flags.add("gimbal")
    return HeadPoseSample(frame.t, yaw, pitch, roll, err_px, ratio, frozenset(flags))


def estimate_batch(frames, template: FaceTemplate, K: CameraIntrinsics, ledger=None,
                   refine: bool = True):
    """Run :func:`estimate_head_pose` over a log, skipping failed frames."""
    out = []
    for fr in frames:
        try:
            out.append(estimate_head_pose(fr, template, K, refine))
        except (UndistortFailure, DegenerateHomography, PoseInfeasible,
                np.linalg.LinAlgError) as exc:
            if ledger is not None:
                ledger.warn("headpose", type(exc).__name__, str(exc), t=fr.t)
                ledger.count("headpose", dropped=1)
            continue
        if ledger is not None:
            ledger.count("headpose", used=1)
    out.sort(key=lambda s: s.t)
    return out


# --- camera -> vehicle yaw ----------------------------------------------------

def to_vehicle_yaw(yaw_camera, mount_offset: float, sign: int = -1):
    """``sign * (yaw_camera - mount_offset)``, wrapped."""
    if sign not in (1, -1):
        raise InvalidInput("sign must be +1 or -1")
    return wrap_angles(sign * (np.asarray(yaw_camera, dtype=float) - mount_offset))


def straight_segments(traj: EgoTrajectory, max_rate: float = 1.0,
                      min_duration: float = 3.0) -> list[tuple[float, float]]:
    """Intervals where ``|heading rate| < max_rate`` deg/s for ``min_duration``."""
    ok = np.abs(traj.heading_rate()) < max_rate
    out = []
    i, n = 0, len(ok)
    while i < n:
        if not ok[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and ok[j + 1]:
            j += 1
        if traj.t[j] - traj.t[i] >= min_duration:
            out.append((float(traj.t[i]), float(traj.t[j])))
        i = j + 1
    return out


def calibrate_mount_offset(t, yaw_camera, traj: EgoTrajectory,
                           max_rate: float = 1.0, min_duration: float = 3.0) -> float | None:
    """Median camera yaw over straight-driving segments (None if there are none)."""
    t = np.asarray(t, dtype=float)
    yaw = np.asarray(yaw_camera, dtype=float)
    mask = np.zeros(t.shape, dtype=bool)
    for a, b in straight_segments(traj, max_rate, min_duration):
        mask |= (t >= a) & (t <= b)
    if not mask.any():
        return None
    ref = float(np.median(yaw[mask]))
    # median of wrapped angles is taken about a reference to stay off the seam
    return wrap_angle(ref + float(np.median(wrap_angles(yaw[mask] - ref))))


# --- file formats -------------------------------------------------------------

def read_intrinsics(path) -> CameraIntrinsics:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
        return CameraIntrinsics(**{k: float(d.get(k, 0.0)) for k in
                                   ("fx", "fy", "cx", "cy", "k1", "k2", "p1", "p2")})
    except (OSError, ValueError, TypeError) as exc:
        raise InputFileError(path, None, str(exc)) from None


def read_template(path) -> FaceTemplate:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
        return FaceTemplate(**{k: (float(d[k][0]), float(d[k][1])) for k in LANDMARK_NAMES})
    except (OSError, ValueError, TypeError, KeyError, IndexError) as exc:
        raise InputFileError(path, None, str(exc)) from None


def parse_landmark_record(line: str) -> LandmarkFrame:
    d = json.loads(line)
    pts = [[float(d[k][0]), float(d[k][1])] for k in LANDMARK_NAMES]
    return LandmarkFrame(float(d["t"]), np.array(pts))


def read_landmarks(path, ledger=None) -> list[LandmarkFrame]:
    """Landmark JSONL; malformed records are skipped and recorded."""
    path = Path(path)
    frames = []
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise InputFileError(path, None, str(exc)) from None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            frames.append(parse_landmark_record(line))
        except (ValueError, KeyError, TypeError, IndexError) as exc:
            if ledger is not None:
                ledger.warn("ingest", "BadLandmarkRecord", f"{path.name}:{lineno}: {exc}")
                ledger.count("ingest.landmarks", dropped=1)
    frames.sort(key=lambda f: f.t)
    out = []
    for f in frames:
        if out and f.t <= out[-1].t:
            if ledger is not None:
                ledger.warn("ingest", "DuplicateTimestamp", f"t={f.t}", t=f.t)
                ledger.count("ingest.landmarks", dropped=1)
            continue
        out.append(f)
    if ledger is not None:
        ledger.count("ingest.landmarks", used=len(out))
    return out


def landmark_record(frame: LandmarkFrame) -> str:
    d = {"t": frame.t}
    for name, p in zip(LANDMARK_NAMES, frame.points):
        d[name] = [float(p[0]), float(p[1])]
    return json.dumps(d)
