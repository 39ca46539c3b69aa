"""Run configuration: every threshold in one YAML file with documented defaults."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import InputError

# name -> (low, high, low inclusive, high inclusive)
RANGES = {
    "cone_half_angle": (0.0, 90.0, False, False),
    "gap_tolerance": (0.0, 5.0, True, True),
    "min_duration": (0.0, 5.0, True, True),
    "min_overlap": (0.0, 10.0, True, True),
    "latency_window": (0.0, 30.0, False, True),
    "iou_threshold": (0.0, 1.0, False, True),
    "quantum": (0.0, 5.0, False, True),
}

# Fields that do not affect results and so stay out of the config hash.
UNHASHED = {"out_dir", "jobs"}


@dataclass
class StatsOptions:
    levene_center: str = "mean"
    standardize: bool = True
    categorical_week: bool = False
    arcsine: bool = True
    z_alternative: str = "greater"
    shapiro_max_n: int = 5000
    drop_censored: bool = True

    def validate(self):
        if self.levene_center not in ("mean", "median"):
            raise InputError("stats.levene_center must be 'mean' or 'median'")
        if self.z_alternative not in ("two-sided", "greater", "less"):
            raise InputError("stats.z_alternative must be two-sided, greater or less")
        if not 3 <= self.shapiro_max_n <= 5000:
            raise InputError("stats.shapiro_max_n must lie in 3..5000")


@dataclass
class SimOptions:
    participants: int = 13
    sessions: int = 25
    weeks: int = 4
    session_length: float = 1800.0
    frame_rate: float = 30.0
    noise_deg: float = 0.0
    follow_probability: float = 0.8
    frames: bool = False
    drift: dict = field(default_factory=dict)

    def validate(self):
        if self.participants < 2 or self.weeks < 2:
            raise InputError("sim.participants and sim.weeks must be at least 2")
        if not 1 <= self.sessions <= 30:
            raise InputError("sim.sessions must lie in 1..30")
        if self.session_length <= 0 or self.frame_rate <= 0:
            raise InputError("sim.session_length and sim.frame_rate must be positive")
        if self.noise_deg < 0:
            raise InputError("sim.noise_deg must be non-negative")
        if not 0 <= self.follow_probability <= 1:
            raise InputError("sim.follow_probability must lie in [0, 1]")


@dataclass
class RunConfig:
    scene: str | None = None
    inputs: list[str] = field(default_factory=list)
    annotations: list[str] = field(default_factory=list)
    sessions_table: str | None = None
    participants_table: str | None = None
    cone_half_angle: float = 10.0
    gap_tolerance: float = 0.2
    min_duration: float = 0.1
    min_overlap: float = 0.25
    latency_window: float = 3.0
    iou_threshold: float = 0.5
    quantum: float = 0.25
    frame_rate: float | None = None
    n_weeks: int = 4
    role_policy: str = "horizontal"
    face_map: dict[int, str] = field(default_factory=dict)
    out_dir: str = "out"
    seed: int = 0
    jobs: int = 1
    stats: StatsOptions = field(default_factory=StatsOptions)
    sim: SimOptions = field(default_factory=SimOptions)

    def __post_init__(self):
        if isinstance(self.stats, Mapping):
            self.stats = StatsOptions(**self.stats)
        if isinstance(self.sim, Mapping):
            self.sim = SimOptions(**self.sim)
        if isinstance(self.inputs, str):
            self.inputs = [self.inputs]
        if isinstance(self.annotations, str):
            self.annotations = [self.annotations]
        self.face_map = {int(k): str(v) for k, v in (self.face_map or {}).items()}
        self.validate()

    def validate(self) -> None:
        for name, (lo, hi, lo_inc, hi_inc) in RANGES.items():
            v = getattr(self, name)
            try:
                v = float(v)
            except (TypeError, ValueError):
                raise InputError(f"{name} must be a number, got {v!r}") from None
            ok_lo = v >= lo if lo_inc else v > lo
            ok_hi = v <= hi if hi_inc else v < hi
            if not (ok_lo and ok_hi):
                lb, rb = "[" if lo_inc else "(", "]" if hi_inc else ")"
                raise InputError(f"{name}={v} outside {lb}{lo}, {hi}{rb}")
            setattr(self, name, v)
        if self.frame_rate is not None and self.frame_rate <= 0:
            raise InputError("frame_rate must be positive")
        if not 1 <= self.n_weeks <= 5:
            raise InputError("n_weeks must lie in 1..5")
        if self.role_policy not in ("horizontal", "explicit", "seat"):
            raise InputError(f"unknown role_policy {self.role_policy!r}")
        if self.jobs < 1:
            raise InputError("jobs must be at least 1")
        self.stats.validate()
        self.sim.validate()

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any] | None) -> "RunConfig":
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise InputError(f"unknown config key(s): {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise InputError(f"bad config: {exc}") from None

    @classmethod
    def load(cls, path: str | Path | None) -> "RunConfig":
        if path is None:
            return cls()
        try:
            with open(path, encoding="utf-8") as fh:
                data = yaml.safe_load(fh)
        except OSError as exc:
            raise InputError(f"cannot read config {path}: {exc.strerror}") from None
        except yaml.YAMLError as exc:
            raise InputError(f"config {path} is not valid YAML: {exc}") from None
        if data is not None and not isinstance(data, Mapping):
            raise InputError(f"config {path} must be a mapping")
        cfg = cls.from_mapping(data)
        base = Path(path).parent
        for key in ("scene", "sessions_table", "participants_table"):
            v = getattr(cfg, key)
            if v and not Path(v).is_absolute():
                setattr(cfg, key, str(base / v))
        cfg.inputs = [p if Path(p).is_absolute() else str(base / p) for p in cfg.inputs]
        cfg.annotations = [p if Path(p).is_absolute() else str(base / p) for p in cfg.annotations]
        return cfg

    def with_overrides(self, **overrides) -> "RunConfig":
        data = self.to_dict()
        for k, v in overrides.items():
            if v is None:
                continue
            if "." in k:
                group, sub = k.split(".", 1)
                data[group][sub] = v
            else:
                data[k] = v
        return RunConfig.from_mapping(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        """sha256 over the canonical JSON of every result-affecting setting."""
        data = {k: v for k, v in self.to_dict().items() if k not in UNHASHED}
        blob = json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode()).hexdigest()

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)
