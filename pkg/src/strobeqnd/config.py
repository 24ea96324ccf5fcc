"""Run configuration: strict YAML parsing, validation and run manifests.

A configuration file has the top-level sections ``ensemble``, ``dynamics``,
``strobe``, ``polarimeter``, ``analysis`` and ``sweep`` plus the scalar keys
``experiment``, ``seed``, ``trajectories``, ``threads`` and ``output_dir``.
Every section is optional (defaults apply) but unknown keys anywhere are an
error.  Numbers may be written in any YAML form, including ``1e6``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import __version__
from .dynamics import (
    DynamicsConfig,
    EnsembleParams,
    StrobeWaveform,
    validate_dynamics,
    validate_params,
    validate_strobe,
)
from .errors import ConfigError
from .pipeline import check_sampling
from .polarimeter import PolarimeterConfig, validate_polarimeter
from .spin_model import AtomSpec

EXPERIMENTS = ("psd", "sweep_strobe", "sweep_duty", "sweep_polarization", "optimize_protocol")


@dataclass(frozen=True)
class AnalysisConfig:
    segment_len: int = 0  # 0 selects a quarter of the record
    n_widths: float = 10.0


@dataclass(frozen=True)
class SweepConfig:
    f_s: tuple = tuple(float(f) for f in range(260_000, 340_001, 10_000))
    duty: tuple = (0.05, 0.1, 0.2, 0.4, 0.8)
    P0: tuple = (0.0, 0.3, 0.6, 0.9)
    polarized_P0: float = 0.85
    od: tuple = (1e2, 3e2, 1e3, 3e3, 1e4, 1e5)
    r_se_over_r_sd: tuple = (0.0, 10.0, 100.0)
    total_time: float = 1.0
    n_starts: int = 8


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "psd"
    seed: int = 0
    trajectories: int = 200
    threads: int = 1
    output_dir: str = "out"
    ensemble: EnsembleParams = field(default_factory=EnsembleParams)
    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)
    strobe: StrobeWaveform = field(default_factory=StrobeWaveform)
    polarimeter: PolarimeterConfig = field(default_factory=PolarimeterConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def dynamics_with_seed(self) -> DynamicsConfig:
        return dataclasses.replace(self.dynamics, seed=self.seed)


# --- parsing ----------------------------------------------------------------

_SECTIONS = {
    "ensemble": EnsembleParams,
    "dynamics": DynamicsConfig,
    "strobe": StrobeWaveform,
    "polarimeter": PolarimeterConfig,
    "analysis": AnalysisConfig,
    "sweep": SweepConfig,
}
# fields that are set elsewhere and may not appear in a section
_HIDDEN = {("dynamics", "seed")}


def _field_kind(cls, name):
    default = {f.name: f for f in dataclasses.fields(cls)}[name]
    if default.default is not dataclasses.MISSING:
        value = default.default
    else:
        value = default.default_factory()
    if isinstance(value, bool):
        return bool
    if isinstance(value, int):
        return int
    if isinstance(value, float):
        return float
    if isinstance(value, tuple):
        return tuple
    return type(value)


def _as_float(value, path, issues):
    if isinstance(value, bool):
        issues.append((path, f"expected a number, got {value!r}"))
        return None
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            pass
    issues.append((path, f"expected a number, got {value!r}"))
    return None


def _as_int(value, path, issues):
    if isinstance(value, bool):
        issues.append((path, f"expected an integer, got {value!r}"))
        return None
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        try:
            return int(value)
        except ValueError:
            pass
    issues.append((path, f"expected an integer, got {value!r}"))
    return None


def _coerce(kind, value, path, issues):
    if kind is float:
        return _as_float(value, path, issues)
    if kind is int:
        return _as_int(value, path, issues)
    if kind is bool:
        if isinstance(value, bool):
            return value
        issues.append((path, f"expected true or false, got {value!r}"))
        return None
    if kind is tuple:
        if not isinstance(value, (list, tuple)):
            issues.append((path, f"expected a list of numbers, got {value!r}"))
            return None
        out = [_as_float(v, f"{path}[{i}]", issues) for i, v in enumerate(value)]
        return None if any(v is None for v in out) else tuple(out)
    if kind is str:
        if isinstance(value, str):
            return value
        issues.append((path, f"expected a string, got {value!r}"))
        return None
    raise TypeError(kind)


def _parse_section(name, cls, data, issues):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        issues.append((name, "expected a mapping"))
        return cls()
    allowed = [f.name for f in dataclasses.fields(cls) if (name, f.name) not in _HIDDEN]
    kwargs = {}
    for key, value in data.items():
        path = f"{name}.{key}"
        if name == "ensemble" and key == "nuclear_spin":
            v = _as_float(value, path, issues)
            if v is not None:
                try:
                    kwargs["atom"] = AtomSpec(v)
                except ValueError as exc:
                    issues.append((path, str(exc)))
            continue
        if key not in allowed or (name == "ensemble" and key == "atom"):
            known = ["nuclear_spin"] + [a for a in allowed if a != "atom"] if name == "ensemble" else allowed
            issues.append((path, f"unknown key; expected one of {', '.join(known)}"))
            continue
        v = _coerce(_field_kind(cls, key), value, path, issues)
        if v is not None:
            kwargs[key] = v
    return cls(**kwargs)


def from_dict(data) -> RunConfig:
    """Build and validate a RunConfig; raises ConfigError listing every problem."""
    issues = []
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError([("", "top level must be a mapping")])
    kwargs = {}
    scalar = {"experiment": str, "seed": int, "trajectories": int, "threads": int, "output_dir": str}
    for key, value in data.items():
        if key in _SECTIONS:
            kwargs[key] = _parse_section(key, _SECTIONS[key], value, issues)
        elif key in scalar:
            v = _coerce(scalar[key], value, key, issues)
            if v is not None:
                kwargs[key] = v
        else:
            issues.append((key, f"unknown key; expected one of {', '.join(list(scalar) + list(_SECTIONS))}"))
    cfg = RunConfig(**kwargs)
    issues += validate(cfg)
    if issues:
        raise ConfigError(issues)
    return cfg


def validate(cfg: RunConfig):
    """Every violated invariant of ``cfg`` as ``(field_path, message)``."""
    issues = []
    if cfg.experiment not in EXPERIMENTS:
        issues.append(("experiment", f"must be one of {', '.join(EXPERIMENTS)}"))
    if not 0 <= cfg.seed < 2**64:
        issues.append(("seed", "must be an unsigned 64-bit integer"))
    if cfg.trajectories < 1:
        issues.append(("trajectories", "must be >= 1"))
    if cfg.threads < 1:
        issues.append(("threads", "must be >= 1"))
    issues += validate_params(cfg.ensemble)
    issues += validate_strobe(cfg.strobe)
    sw = cfg.sweep
    f_s_max = cfg.strobe.f_s
    if cfg.experiment == "sweep_strobe" and sw.f_s:
        f_s_max = max(f_s_max, max(sw.f_s))
    issues += validate_dynamics(cfg.dynamics, f_s_max)
    issues += validate_polarimeter(cfg.polarimeter, cfg.dynamics.f_L)
    if cfg.dynamics.dt > 0 and cfg.polarimeter.sample_rate > 0:
        try:
            check_sampling(cfg.dynamics, cfg.polarimeter)
        except ConfigError as exc:
            issues += exc.issues
    if cfg.analysis.segment_len < 0 or cfg.analysis.segment_len == 1:
        issues.append(("analysis.segment_len", "must be 0 (automatic) or >= 2"))
    elif cfg.dynamics.dt > 0 and cfg.dynamics.duration > 0 and cfg.analysis.segment_len > cfg.dynamics.n_samples:
        issues.append(("analysis.segment_len", f"exceeds the record length of {cfg.dynamics.n_samples} samples"))
    if not cfg.analysis.n_widths > 0:
        issues.append(("analysis.n_widths", "must be > 0"))
    for name, values, ok, rule in (
        ("f_s", sw.f_s, lambda v: v > 0, "> 0"),
        ("duty", sw.duty, lambda v: 0 < v <= 1, "in (0, 1]"),
        ("P0", sw.P0, lambda v: 0 <= v < 1, "in [0, 1)"),
        ("od", sw.od, lambda v: v > 0, "> 0"),
        ("r_se_over_r_sd", sw.r_se_over_r_sd, lambda v: v >= 0, ">= 0"),
    ):
        if not values:
            issues.append((f"sweep.{name}", "must not be empty"))
        for i, v in enumerate(values):
            if not (math.isfinite(v) and ok(v)):
                issues.append((f"sweep.{name}[{i}]", f"must be {rule}"))
    if not 0 <= sw.polarized_P0 < 1:
        issues.append(("sweep.polarized_P0", "must lie in [0, 1)"))
    if not sw.total_time > 0:
        issues.append(("sweep.total_time", "must be > 0"))
    if sw.n_starts < 1:
        issues.append(("sweep.n_starts", "must be >= 1"))
    return issues


def load(path) -> RunConfig:
    """Parse and validate a YAML config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([(str(path), f"cannot read: {exc.strerror}")]) from None
    return loads(text, str(path))


def loads(text: str, source="<string>") -> RunConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}:{mark.column + 1}" if mark else source
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError([(where, f"YAML parse error: {problem}")]) from None
    return from_dict(data)


# --- serialization -----------------------------------------------------------

def _section_dict(obj):
    out = {}
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        if isinstance(value, AtomSpec):
            out["nuclear_spin"] = float(value.nuclear_spin)
        elif isinstance(value, tuple):
            out[f.name] = [float(v) for v in value]
        else:
            out[f.name] = value
    return out


def to_dict(cfg: RunConfig) -> dict:
    """Effective configuration as plain data (inverse of ``from_dict``)."""
    out = {k: getattr(cfg, k) for k in ("experiment", "seed", "trajectories", "threads", "output_dir")}
    for name in _SECTIONS:
        section = _section_dict(getattr(cfg, name))
        if name == "dynamics":
            section.pop("seed")
        out[name] = section
    return out


def dumps(cfg: RunConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False, default_flow_style=False)


def config_hash(cfg: RunConfig) -> str:
    """SHA-256 of the canonical effective configuration (run-control keys excluded).

    ``threads`` and ``output_dir`` do not change results and are left out.
    """
    d = to_dict(cfg)
    d.pop("threads")
    d.pop("output_dir")
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class RunManifest:
    config_hash: str
    version: str
    seed: int
    wall_clock_s: float
    outputs: list
    experiment: str = ""
    config_file: str = "config.yaml"
    platform: str = field(default_factory=platform.platform)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2) + "\n"


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def make_manifest(cfg: RunConfig, outputs, wall_clock_s, out_dir) -> RunManifest:
    out_dir = Path(out_dir)
    files = [{"path": str(Path(p).relative_to(out_dir)), "sha256": file_sha256(p)} for p in outputs]
    return RunManifest(config_hash(cfg), __version__, cfg.seed, round(wall_clock_s, 3), files, cfg.experiment)
