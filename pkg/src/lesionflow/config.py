"""Declarative run configuration: one YAML file, documented defaults,
unknown keys rejected. Command-line flags override file values."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .preprocess import DEFAULT_CHANNEL_MEAN, DEFAULT_CHANNEL_STD
from .taxonomy import ClassTaxonomy, default_taxonomy, taxonomy_from_mapping
from .timing import (
    DEFAULT_TARGETS,
    PRESET_NAMES,
    PRESET_TABLE1,
    FolderTargets,
    TimingModel,
    timing_preset,
)

_TOP_LEVEL_KEYS = {
    "workspace",
    "seed",
    "backend",
    "batch_size",
    "retry_limit",
    "anonymization_salt",
    "weight_seed",
    "oversample_threshold",
    "time_scale",
    "timing_realization",
    "allow_failures",
    "parallel_prediction",
    "timing_preset",
    "normalization",
    "taxonomy",
    "targets",
    "timing",
}

_TIMING_KEYS = {
    "load_s",
    "infer_s",
    "call_overhead_s",
    "batch_overhead_s",
    "uipath_overhead_s",
    "aa_overhead_s",
}


@dataclass
class Config:
    workspace: Path = Path("workspace")
    seed: int = 7
    backend: str = "reference"
    batch_size: int = 32
    retry_limit: int = 1
    anonymization_salt: str = "lesionflow"
    weight_seed: int = 0
    oversample_threshold: int = 200
    time_scale: float = 0.01
    timing_realization: str = "sleep"
    allow_failures: bool = False
    parallel_prediction: bool = False
    timing_preset: str = PRESET_TABLE1
    channel_mean: tuple[float, float, float] = DEFAULT_CHANNEL_MEAN
    channel_std: tuple[float, float, float] = DEFAULT_CHANNEL_STD
    taxonomy: ClassTaxonomy = field(default_factory=default_taxonomy)
    targets: FolderTargets = field(default_factory=lambda: DEFAULT_TARGETS)
    explicit_timing: TimingModel | None = None

    def resolve_timing(self, preset: str | None = None) -> tuple[TimingModel, str]:
        """The active TimingModel and a label describing where it came from.

        An explicit ``timing`` block wins over presets unless a preset is
        forced on the command line.
        """
        if preset is None and self.explicit_timing is not None:
            return self.explicit_timing, "explicit"
        name = preset or self.timing_preset
        return timing_preset(name, self.targets), name


def _require_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown config key(s) in {where}: {sorted(unknown)}")


def _triple(value, where: str) -> tuple[float, float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(f"{where} must be a list of 3 numbers")
    return tuple(float(v) for v in value)


def load_config(path: Path | str | None = None) -> Config:
    """Parse a YAML config file; a missing path yields all defaults."""
    cfg = Config()
    if path is None:
        return cfg
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError("config file must contain a mapping at the top level")
    _require_keys(data, _TOP_LEVEL_KEYS, "top level")

    if "workspace" in data:
        cfg.workspace = Path(str(data["workspace"]))
    for key, caster in (
        ("seed", int),
        ("batch_size", int),
        ("retry_limit", int),
        ("weight_seed", int),
        ("oversample_threshold", int),
        ("time_scale", float),
        ("allow_failures", bool),
        ("parallel_prediction", bool),
    ):
        if key in data:
            setattr(cfg, key, caster(data[key]))
    for key in ("backend", "anonymization_salt", "timing_realization", "timing_preset"):
        if key in data:
            setattr(cfg, key, str(data[key]))
    if cfg.timing_preset not in PRESET_NAMES:
        raise ConfigError(f"timing_preset must be one of {PRESET_NAMES}, got {cfg.timing_preset!r}")

    if "normalization" in data:
        section = data["normalization"] or {}
        _require_keys(section, {"mean", "std"}, "normalization")
        if "mean" in section:
            cfg.channel_mean = _triple(section["mean"], "normalization.mean")
        if "std" in section:
            cfg.channel_std = _triple(section["std"], "normalization.std")

    if "taxonomy" in data:
        section = data["taxonomy"] or {}
        _require_keys(section, {"majors", "subtypes"}, "taxonomy")
        majors = [str(m) for m in section.get("majors", [])]
        subtypes = {
            str(major): [str(s) for s in labels]
            for major, labels in (section.get("subtypes") or {}).items()
        }
        cfg.taxonomy = taxonomy_from_mapping(majors, subtypes)

    if "targets" in data:
        section = data["targets"] or {}
        _require_keys(section, {"uipath", "aa", "v1", "v2"}, "targets")
        cfg.targets = FolderTargets(
            uipath=float(section.get("uipath", DEFAULT_TARGETS.uipath)),
            aa=float(section.get("aa", DEFAULT_TARGETS.aa)),
            v1=float(section.get("v1", DEFAULT_TARGETS.v1)),
            v2=float(section.get("v2", DEFAULT_TARGETS.v2)),
        )

    if "timing" in data:
        section = data["timing"] or {}
        _require_keys(section, _TIMING_KEYS, "timing")
        missing = _TIMING_KEYS - set(section)
        if missing:
            raise ConfigError(f"timing block must set all of {sorted(_TIMING_KEYS)}; missing {sorted(missing)}")
        cfg.explicit_timing = TimingModel(**{k: float(v) for k, v in section.items()})

    return cfg
