"""Flat ``key.path = value`` pipeline configuration.

Every tunable of every stage has a dotted key with a typed default. Config
files are plain text, one ``key = value`` per line, ``#`` comments allowed;
``--set key=value`` overrides are applied on top.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .attention import GatingConfig, GazeRegions
from .errors import InputFileError, InvalidInput
from .tracker import CLASSES, GmphdParams, default_params
from .yawfilter import FilterConfig

AUTO = "auto"

DEFAULTS: dict[str, object] = {
    "headpose.mount_offset": AUTO,
    "headpose.sign": -1,
    "headpose.refine": True,
    "headpose.straight_max_rate": 1.0,
    "headpose.straight_min_duration": 3.0,
    "yawfilter.hampel_window": 11,
    "yawfilter.hampel_nsigma": 3.0,
    "yawfilter.smooth_window": 5,
    "yawfilter.max_gap": 0.5,
    "detections.min_conf": 0.3,
    "tracker.min_length": 3,
    "gating.fov_half": 45.0,
    "gating.range_fwd": 15.0,
    "gating.range_lat": 10.0,
    "regions.fv_half": 5.0,
    "regions.pv_band": 5.0,
    "regions.pv_weight": 0.5,
    "regions.dwell_min": 0.2,
    "cases.min_duration": 3.0,
    "classify.binary": False,
}
_GMPHD_KEYS = ("p_survival", "p_detect", "clutter_density", "process_noise_accel", "meas_noise",
               "prune_threshold", "merge_threshold", "max_components", "birth_weight", "extract_threshold")
for _cls in CLASSES:
    _p = default_params(_cls)
    for _k in _GMPHD_KEYS:
        DEFAULTS[f"tracker.{_cls}.{_k}"] = getattr(_p, _k)
    DEFAULTS[f"tracker.{_cls}.birth_cov"] = ",".join(repr(float(v)) for v in _p.birth_cov)


def _parse(key: str, raw: str):
    default = DEFAULTS[key]
    raw = raw.strip()
    try:
        if key == "headpose.mount_offset" and raw.lower() == AUTO:
            return AUTO
        if isinstance(default, bool):
            if raw.lower() in ("true", "1", "yes", "on"):
                return True
            if raw.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(default, int):
            return int(raw)
        if key.endswith("birth_cov"):
            vals = [float(v) for v in raw.split(",")]
            if len(vals) != 4:
                raise ValueError("birth_cov needs 4 comma-separated variances")
            return ",".join(repr(v) for v in vals)
        return float(raw)
    except ValueError as exc:
        raise InvalidInput(f"{key}: {exc}") from None


@dataclass
class PipelineConfig:
    values: dict = field(default_factory=lambda: dict(DEFAULTS))

    def __getitem__(self, key: str):
        return self.values[key]

    def set(self, key: str, raw) -> None:
        if key not in DEFAULTS:
            raise InvalidInput(f"unknown config key {key!r}")
        self.values[key] = _parse(key, str(raw))

    def apply(self, assignments) -> "PipelineConfig":
        """Apply ``key=value`` strings (``--set`` overrides)."""
        for item in assignments or ():
            if "=" not in item:
                raise InvalidInput(f"expected key=value, got {item!r}")
            k, v = item.split("=", 1)
            self.set(k.strip(), v)
        return self

    @classmethod
    def load(cls, path=None, overrides=None) -> "PipelineConfig":
        cfg = cls()
        if path is not None:
            path = Path(path)
            try:
                lines = path.read_text().splitlines()
            except OSError as exc:
                raise InputFileError(path, None, str(exc)) from None
            for lineno, line in enumerate(lines, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise InputFileError(path, lineno, "expected 'key = value'")
                k, v = line.split("=", 1)
                try:
                    cfg.set(k.strip(), v)
                except InvalidInput as exc:
                    raise InputFileError(path, lineno, str(exc)) from None
        return cfg.apply(overrides)

    def dump(self) -> str:
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in sorted(self.values.items()))

    def to_dict(self) -> dict:
        return dict(sorted(self.values.items()))

    # -- typed views --------------------------------------------------------

    def filter_config(self) -> FilterConfig:
        return FilterConfig(self["yawfilter.hampel_window"], self["yawfilter.hampel_nsigma"],
                            self["yawfilter.smooth_window"], self["yawfilter.max_gap"])

    def gmphd(self, cls: str) -> GmphdParams:
        kw = {k: self[f"tracker.{cls}.{k}"] for k in _GMPHD_KEYS}
        kw["birth_cov"] = tuple(float(v) for v in self[f"tracker.{cls}.birth_cov"].split(","))
        return GmphdParams(**kw)

    def gating(self) -> GatingConfig:
        return GatingConfig(self["gating.fov_half"], self["gating.range_fwd"], self["gating.range_lat"])

    def regions(self) -> GazeRegions:
        return GazeRegions(self["regions.fv_half"], self["regions.pv_band"], self["regions.pv_weight"],
                           self["regions.dwell_min"])

    def validate(self) -> None:
        self.filter_config()
        self.gating()
        self.regions()
        for cls in CLASSES:
            self.gmphd(cls)
        if self["headpose.sign"] not in (1, -1):
            raise InvalidInput("headpose.sign must be +1 or -1")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)
