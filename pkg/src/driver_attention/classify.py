"""Cascaded k-means attention classification.

Stage 1 clusters the vehicle and pedestrian observation scores separately;
stage 2 clusters the pair of normalized stage-1 scores into Low/Regular. A
separate 1-dim fit on the pedestrian share labels each case Scenario I or II.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DegenerateClustering, InvalidInput

MAX_ITER = 100
TOL = 1e-9
Z_CLIP = (-0.5, 1.5)
LOW, REGULAR = "Low", "Regular"
SCENARIO_I, SCENARIO_II = "I", "II"


@dataclass
class KMeansModel:
    k: int
    centroids: np.ndarray  # (k, d)
    assignment: np.ndarray  # (n,)
    sse: float
    n_iter: int
    sse_history: list = field(default_factory=list)
    guarded: bool = False  # 1-dim result replaced by the exhaustive optimum

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "centroids": self.centroids.tolist(),
            "assignment": self.assignment.tolist(),
            "sse": self.sse,
            "n_iter": self.n_iter,
            "guarded": self.guarded,
        }


def _as_points(points) -> np.ndarray:
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or not np.all(np.isfinite(X)):
        raise InvalidInput("points must be a finite (n,) or (n, d) array")
    return X


def _assign(X: np.ndarray, C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest centroid (ties to the lower index) and the squared distance."""
    d2 = ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
    a = np.argmin(d2, axis=1)
    return a, d2[np.arange(X.shape[0]), a]


def _means(X: np.ndarray, a: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Exactly rounded cluster means; an empty cluster keeps its centroid."""
    out = C.copy()
    for j in range(C.shape[0]):
        members = X[a == j]
        if members.shape[0]:
            out[j] = [math.fsum(col) / members.shape[0] for col in members.T]
    return out


def _sse(d2: np.ndarray) -> float:
    return math.fsum(d2.tolist())


def _farthest_pair(X: np.ndarray) -> tuple[int, int]:
    """Indices (into lexicographically sorted X) of the farthest pair; first such pair wins."""
    if X.shape[1] == 1:
        return 0, X.shape[0] - 1
    d2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
    i, j = np.unravel_index(np.argmax(np.triu(d2, 1)), d2.shape)
    return int(i), int(j)


def optimal_split_1d(values) -> tuple[float, int]:
    """Exhaustive best 2-partition of 1-dim data: (sse, n_low) over sorted values."""
    v = np.sort(np.asarray(values, dtype=float))
    best = (math.inf, 0)
    for s in range(1, v.size):
        lo, hi = v[:s], v[s:]
        sse = math.fsum(((lo - math.fsum(lo) / lo.size) ** 2).tolist()) + \
            math.fsum(((hi - math.fsum(hi) / hi.size) ** 2).tolist())
        if sse < best[0]:
            best = (sse, s)
    return best


def kmeans_fit(points, k: int = 2, max_iter: int = MAX_ITER, tol: float = TOL) -> KMeansModel:
    """Deterministic Lloyd's k-means (k=2) with farthest-pair initialization.

    Points are processed in lexicographic order and sums are exactly rounded,
    so the fit is bit-identical under any permutation of the input. For 1-dim
    data the Lloyd optimum is checked against an exhaustive split search and
    replaced if a split with lower SSE exists.
    """
    if k != 2:
        raise InvalidInput("only k=2 is supported")
    X = _as_points(points)
    order = np.lexsort(X.T[::-1])
    Xs = X[order]
    if np.unique(Xs, axis=0).shape[0] < k:
        raise DegenerateClustering(f"fewer than {k} distinct points")

    i, j = _farthest_pair(Xs)
    C = Xs[[i, j]].copy()
    a, d2 = _assign(Xs, C)
    history = [_sse(d2)]
    slack = 64 * np.finfo(float).eps * math.fsum((Xs ** 2).ravel().tolist())  # rounding in the means
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        C_new = _means(Xs, a, C)
        a, d2 = _assign(Xs, C_new)
        sse = _sse(d2)
        assert sse <= history[-1] * (1 + 1e-12) + slack, "Lloyd SSE increased"
        history.append(sse)
        moved = float(np.abs(C_new - C).max())
        C = C_new
        if moved < tol:
            break

    guarded = False
    if Xs.shape[1] == 1:
        opt_sse, n_low = optimal_split_1d(Xs[:, 0])
        if opt_sse < history[-1] * (1 - 1e-12):
            a = (np.arange(Xs.shape[0]) >= n_low).astype(int)
            C = _means(Xs, a, C)
            a, d2 = _assign(Xs, C)
            history.append(_sse(d2))
            guarded = True

    assignment = np.empty_like(a)
    assignment[order] = a
    return KMeansModel(k, C, assignment, history[-1], n_iter, history, guarded)


def _low_high(model: KMeansModel) -> tuple[int, int]:
    c = model.centroids[:, 0]
    return (0, 1) if c[0] <= c[1] else (1, 0)


# -- classifiers ------------------------------------------------------------

def scenario_classify(ped_shares) -> list[str]:
    """Scenario I for the cluster with the lower pedestrian-share centroid."""
    model = kmeans_fit(np.asarray(ped_shares, dtype=float))
    lo, _ = _low_high(model)
    return [SCENARIO_I if a == lo else SCENARIO_II for a in model.assignment]


@dataclass
class CaseLabel:
    case_id: str
    scenario: str
    attention: str
    veh_cluster: int
    ped_cluster: int
    z_veh: float
    z_ped: float
    s_veh: float
    s_ped: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class StageOne:
    model: KMeansModel | None
    z: np.ndarray
    cluster: np.ndarray  # 1 = high-score cluster


def _stage_one(scores: np.ndarray, present: np.ndarray, binary: bool) -> StageOne:
    """Fit on the cases where the class is present; absent cases get z = NaN."""
    model = kmeans_fit(scores[present])
    lo, hi = _low_high(model)
    c_lo, c_hi = model.centroids[lo, 0], model.centroids[hi, 0]
    cluster = np.zeros(scores.size, int)
    cluster[present] = (model.assignment == hi).astype(int)
    if binary:
        z = cluster.astype(float)
    else:
        z = np.clip((scores - c_lo) / (c_hi - c_lo), *Z_CLIP)
    z[~present] = np.nan
    return StageOne(model, z, cluster)


def attention_classify(case_ids, s_veh, s_ped, scenarios=None, binary: bool = False,
                       ledger=None, veh_absent=None, ped_absent=None) -> tuple[list[CaseLabel], dict]:
    """Two stage-1 fits, one stage-2 fit; returns labels and the fitted models.

    A case without gated objects of one class carries no evidence about
    attention to that class: stage 1 is fit on the cases where the class is
    present, and an absent feature's z takes the value of the case's other z.
    A degenerate stage-1 feature (fewer than two distinct scores) contributes
    z = 0 for every case. If both features are degenerate, or the stage-2
    points coincide, DegenerateClustering is raised.
    """
    case_ids = list(case_ids)
    n = len(case_ids)
    if n < 2:
        raise DegenerateClustering("need at least two cases")
    s_veh = np.asarray(s_veh, dtype=float)
    s_ped = np.asarray(s_ped, dtype=float)
    absent = {
        "veh": np.zeros(n, bool) if veh_absent is None else np.asarray(veh_absent, bool),
        "ped": np.zeros(n, bool) if ped_absent is None else np.asarray(ped_absent, bool),
    }
    if np.any(absent["veh"] & absent["ped"]):
        raise InvalidInput("a case needs at least one present class")
    stages = {}
    for name, s in (("veh", s_veh), ("ped", s_ped)):
        try:
            stages[name] = _stage_one(s, ~absent[name], binary)
        except DegenerateClustering:
            if ledger is not None:
                ledger.warn("classify", "DegenerateStageOne", f"{name} scores have < 2 distinct values")
            stages[name] = StageOne(None, np.zeros(n), np.zeros(n, int))
    if stages["veh"].model is None and stages["ped"].model is None:
        raise DegenerateClustering("both stage-1 features are degenerate")

    z_veh, z_ped = stages["veh"].z, stages["ped"].z
    Z = np.c_[np.where(np.isnan(z_veh), z_ped, z_veh), np.where(np.isnan(z_ped), z_veh, z_ped)]
    final = kmeans_fit(Z)
    sums = final.centroids.sum(axis=1)
    low = 0 if sums[0] <= sums[1] else 1
    scenarios = list(scenarios) if scenarios is not None else [SCENARIO_I] * n
    labels = [
        CaseLabel(cid, scenarios[i], LOW if final.assignment[i] == low else REGULAR,
                  int(stages["veh"].cluster[i]), int(stages["ped"].cluster[i]),
                  float(Z[i, 0]), float(Z[i, 1]), float(s_veh[i]), float(s_ped[i]))
        for i, cid in enumerate(case_ids)
    ]
    models = {
        "veh": None if stages["veh"].model is None else stages["veh"].model.to_dict(),
        "ped": None if stages["ped"].model is None else stages["ped"].model.to_dict(),
        "final": final.to_dict(),
        "low_cluster": low,
        "mode": "binary" if binary else "score",
    }
    return labels, models


def classify_cases(cases, binary: bool = False, ledger=None) -> tuple[list[CaseLabel], dict]:
    """Classify ``(case_id, CaseMetrics)`` pairs: scenario plus attention.

    A cohort whose pedestrian shares cannot be clustered (e.g. all zero) is
    reported as all Scenario I with a warning.
    """
    cases = list(cases)
    shares = [m.ped_share for _, m in cases]
    try:
        scenarios = scenario_classify(shares)
    except DegenerateClustering as exc:
        if ledger is not None:
            ledger.warn("classify", "DegenerateScenario", str(exc))
        scenarios = [SCENARIO_I] * len(cases)
    labels, models = attention_classify([cid for cid, _ in cases], [m.s_veh for _, m in cases],
                                        [m.s_ped for _, m in cases], scenarios, binary, ledger,
                                        [m.veh_absent for _, m in cases], [m.ped_absent for _, m in cases])
    return labels, models
