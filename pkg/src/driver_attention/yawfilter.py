"""Outlier removal, gap filling and smoothing of the head-yaw time series."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidInput
from .geometry import unwrap_deg, wrap_angles

MAD_SCALE = 1.4826
MAD_FLOOR_DEG = 0.5
AMBIGUOUS_NSIGMA_FACTOR = 0.75


@dataclass(frozen=True)
class FilterConfig:
    hampel_window: int = 11
    hampel_nsigma: float = 3.0
    smooth_window: int = 5
    max_gap: float = 0.5

    def __post_init__(self):
        for name in ("hampel_window", "smooth_window"):
            w = getattr(self, name)
            if w < 3 or w % 2 == 0:
                raise InvalidInput(f"{name} must be odd and >= 3")
        if self.hampel_nsigma <= 0 or self.max_gap <= 0:
            raise InvalidInput("hampel_nsigma and max_gap must be positive")


class YawSeries:
    """Timestamped yaw samples (degrees) with ``ambiguous``/``interpolated`` flags."""

    def __init__(self, t, yaw, ambiguous=None, interpolated=None):
        t = np.asarray(t, dtype=float)
        yaw = np.asarray(yaw, dtype=float)
        if t.shape != yaw.shape or t.ndim != 1:
            raise InvalidInput("t and yaw must be equal-length 1-D arrays")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise InvalidInput("yaw timestamps must be strictly increasing")
        self.t = t
        self.yaw = wrap_angles(yaw) if yaw.size else yaw
        n = t.size
        self.ambiguous = np.zeros(n, bool) if ambiguous is None else np.asarray(ambiguous, bool)
        self.interpolated = np.zeros(n, bool) if interpolated is None else np.asarray(interpolated, bool)

    def __len__(self) -> int:
        return self.t.size

    def subset(self, mask) -> "YawSeries":
        return YawSeries(self.t[mask], self.yaw[mask], self.ambiguous[mask], self.interpolated[mask])

    def nominal_dt(self) -> float:
        if len(self) < 2:
            return math.nan
        return float(np.median(np.diff(self.t)))

    def sample(self, ts, max_gap: float) -> np.ndarray:
        """Yaw at arbitrary times along the shortest arc; NaN inside open gaps.

        A time is usable when it lies between two samples at most ``max_gap``
        apart (or coincides with a sample).
        """
        ts = np.asarray(ts, dtype=float)
        out = np.full(ts.shape, np.nan)
        if len(self) == 0:
            return out
        un = unwrap_deg(self.yaw)
        i = np.searchsorted(self.t, ts, side="right") - 1
        exact = (i >= 0) & (self.t[np.clip(i, 0, None)] == ts)
        out[exact] = self.yaw[i[exact]]
        inner = (i >= 0) & (i < len(self) - 1) & ~exact
        j = i[inner]
        gap = self.t[j + 1] - self.t[j]
        ok = gap <= max_gap + 1e-9
        f = (ts[inner] - self.t[j]) / gap
        vals = un[j] + f * (un[j + 1] - un[j])
        res = np.where(ok, wrap_angles(vals), np.nan)
        out[inner] = res
        return out


def _rolling(x: np.ndarray, window: int) -> np.ndarray:
    """Centered windows, NaN-padded so edge windows shrink."""
    half = window // 2
    padded = np.concatenate([np.full(half, np.nan), x, np.full(half, np.nan)])
    return sliding_window_view(padded, window)


def _wrap_nan(a: np.ndarray) -> np.ndarray:
    r = np.mod(a + 180.0, 360.0) - 180.0
    return np.where(r <= -180.0, 180.0, r)


def _local_unwrap(w: np.ndarray) -> np.ndarray:
    """Express each window row on a continuous branch around its circular mean.

    Sequential unwrapping lets one gross spike near the +-180 seam shift the
    rest of the series by 360; anchoring each window avoids that.
    """
    r = np.deg2rad(w)
    anchor = np.rad2deg(np.arctan2(np.nanmean(np.sin(r), axis=1), np.nanmean(np.cos(r), axis=1)))
    return anchor[:, None] + _wrap_nan(w - anchor[:, None])


def hampel_mask(series: YawSeries, window: int = 11, nsigma: float = 3.0,
                mad_floor: float = MAD_FLOOR_DEG) -> np.ndarray:
    """Boolean mask of outliers by the rolling median/MAD rule."""
    if len(series) == 0:
        return np.zeros(0, bool)
    w = _local_unwrap(_rolling(series.yaw, window))
    x = w[:, window // 2]
    med = np.nanmedian(w, axis=1)
    mad = np.nanmedian(np.abs(w - med[:, None]), axis=1)
    scale = MAD_SCALE * np.maximum(mad, mad_floor)
    k = np.where(series.ambiguous, nsigma * AMBIGUOUS_NSIGMA_FACTOR, nsigma)
    return np.abs(x - med) > k * scale


def hampel(series: YawSeries, window: int = 11, nsigma: float = 3.0, ledger=None) -> YawSeries:
    if len(series) < window:
        if ledger is not None:
            ledger.warn("yawfilter", "SeriesTooShort", f"{len(series)} samples < window {window}")
        return series
    mask = hampel_mask(series, window, nsigma)
    if ledger is not None:
        for t in series.t[mask]:
            ledger.warn("yawfilter", "HampelOutlier", t=float(t))
        ledger.count("yawfilter", used=int((~mask).sum()), dropped=int(mask.sum()))
    return series.subset(~mask)


def fill_gaps(series: YawSeries, max_gap: float = 0.5, nominal_dt: float | None = None) -> YawSeries:
    """Linearly (shortest arc) fill gaps no longer than ``max_gap`` seconds."""
    if len(series) < 2:
        return series
    dt = nominal_dt or series.nominal_dt()
    gaps = np.diff(series.t)
    t_parts, y_parts, amb_parts, int_parts = [], [], [], []
    for i, gap in enumerate(gaps):
        t_parts.append(series.t[i:i + 1])
        y_parts.append(series.yaw[i:i + 1])
        amb_parts.append(series.ambiguous[i:i + 1])
        int_parts.append(series.interpolated[i:i + 1])
        if gap <= 1.5 * dt or gap > max_gap + 1e-9:
            continue
        n_ins = int(round(gap / dt)) - 1
        if n_ins < 1:
            continue
        f = np.arange(1, n_ins + 1) / (n_ins + 1)
        y0 = series.yaw[i]
        dy = wrap_angles(series.yaw[i + 1] - y0)
        t_parts.append(series.t[i] + f * gap)
        y_parts.append(wrap_angles(y0 + f * dy))
        amb_parts.append(np.zeros(n_ins, bool))
        int_parts.append(np.ones(n_ins, bool))
    t_parts.append(series.t[-1:])
    y_parts.append(series.yaw[-1:])
    amb_parts.append(series.ambiguous[-1:])
    int_parts.append(series.interpolated[-1:])
    return YawSeries(np.concatenate(t_parts), np.concatenate(y_parts),
                     np.concatenate(amb_parts), np.concatenate(int_parts))


def smooth(series: YawSeries, window: int = 5) -> YawSeries:
    """Centered rolling median, re-wrapped afterward.

    Edge windows shrink symmetrically (width 1, 3, ... at the ends) so a
    monotone signal passes through unchanged.
    """
    n = len(series)
    if n == 0:
        return series
    half = window // 2
    w = _local_unwrap(_rolling(series.yaw, window))
    cols = np.arange(window) - half
    reach = np.minimum(np.arange(n), np.arange(n)[::-1])
    w[np.abs(cols)[None, :] > reach[:, None]] = np.nan
    med = np.nanmedian(w, axis=1)
    return YawSeries(series.t, med, series.ambiguous, series.interpolated)


def filter_pipeline(series: YawSeries, config: FilterConfig = FilterConfig(), ledger=None) -> YawSeries:
    """hampel -> fill_gaps -> smooth."""
    nominal = series.nominal_dt()
    s = hampel(series, config.hampel_window, config.hampel_nsigma, ledger)
    s = fill_gaps(s, config.max_gap, nominal if math.isfinite(nominal) else None)
    return smooth(s, config.smooth_window)


def write_filter_csv(path, raw: YawSeries, filtered: YawSeries) -> None:
    """``t,raw_yaw,filtered_yaw`` on the union of timestamps (blank if absent)."""
    raw_map = dict(zip(raw.t.tolist(), raw.yaw.tolist()))
    filt_map = dict(zip(filtered.t.tolist(), filtered.yaw.tolist()))
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "raw_yaw", "filtered_yaw"])
        for t in sorted(set(raw_map) | set(filt_map)):
            w.writerow([repr(t),
                        repr(raw_map[t]) if t in raw_map else "",
                        repr(filt_map[t]) if t in filt_map else ""])
