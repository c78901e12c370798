"""
Flat ``key = value`` configuration files with dotted keys.

    # comment
    tlinkage.tau = 0.15
    track.models = stationary,cv,ca
    vehicle.0.motion = cv

Pipeline sections are ``segmentation``, ``tlinkage``, ``rectfit``, ``assoc`` and
``track``; scenario files use ``scenario``, ``sensor`` and ``vehicle.<i>``.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

from .association import AssocConfig
from .errors import InvalidSpec
from .rectfit import RectFitConfig
from .segmentation import SegmentationConfig
from .sim import CORPORA, ScenarioSpec, SensorSpec, VehicleSpec
from .tlinkage import TLinkageConfig
from .tracking import TrackConfig


@dataclass(frozen=True)
class PipelineConfig:
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    tlinkage: TLinkageConfig = field(default_factory=TLinkageConfig)
    rectfit: RectFitConfig = field(default_factory=RectFitConfig)
    assoc: AssocConfig = field(default_factory=AssocConfig)
    track: TrackConfig = field(default_factory=TrackConfig)


SECTIONS = {f.name: f.default_factory for f in dataclasses.fields(PipelineConfig)}


def parse_kv(text: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidSpec(f"line {lineno}: expected 'key = value', got {raw.strip()!r}",
                              f"line{lineno}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise InvalidSpec(f"line {lineno}: empty key", f"line{lineno}")
        if key in out:
            raise InvalidSpec(f"duplicate key {key}", key)
        out[key] = value
    return out


def load_kv(path) -> dict[str, str]:
    return parse_kv(Path(path).read_text())


def _coerce(key: str, raw: str, default):
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if isinstance(default, enum.Enum):
            return type(default)(raw.lower())
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            value = float(raw)
            if math.isnan(value):
                raise ValueError(raw)
            return value
        return raw
    except ValueError:
        raise InvalidSpec(f"bad value {raw!r} for {key}", key) from None


def _apply(obj, prefix: str, items: dict[str, str]):
    fields = {f.name: f for f in dataclasses.fields(obj)}
    changes = {}
    for name, raw in items.items():
        key = f"{prefix}.{name}"
        if name not in fields:
            raise InvalidSpec(f"unknown key {key}", key)
        changes[name] = _coerce(key, raw, getattr(obj, name))
    return dataclasses.replace(obj, **changes)


def _group(kv: dict[str, str]) -> dict[str, dict[str, str]]:
    groups: dict[str, dict[str, str]] = {}
    for key, value in kv.items():
        if "." not in key:
            raise InvalidSpec(f"key {key} must be dotted (section.name)", key)
        section, name = key.split(".", 1)
        groups.setdefault(section, {})[name] = value
    return groups


def pipeline_config(kv: dict[str, str] | None = None) -> PipelineConfig:
    cfg = PipelineConfig()
    for section, items in _group(kv or {}).items():
        if section not in SECTIONS:
            key = f"{section}.{next(iter(items))}"
            raise InvalidSpec(f"unknown key {key}", key)
        cfg = dataclasses.replace(cfg, **{section: _apply(getattr(cfg, section), section, items)})
    try:
        cfg.track.model_kinds
    except ValueError:
        raise InvalidSpec(f"bad value {cfg.track.models!r} for track.models", "track.models") from None
    if not cfg.track.model_kinds:
        raise InvalidSpec("track.models must name at least one model", "track.models")
    return cfg


def load_pipeline_config(path=None) -> PipelineConfig:
    return pipeline_config(load_kv(path) if path else {})


def scenario_from_kv(kv: dict[str, str]) -> tuple[ScenarioSpec, int | None]:
    """
    Build a scenario from config keys; returns ``(spec, seed_or_None)``.

    ``scenario.corpus = tableI`` (or mixed/three/single) starts from a canned
    corpus; explicit ``vehicle.*`` keys then replace its vehicle list.
    """
    groups = _group(kv)
    scenario_items = dict(groups.pop("scenario", {}))
    sensor_items = groups.pop("sensor", {})
    vehicle_items = groups.pop("vehicle", {})
    if groups:
        section = next(iter(groups))
        key = f"{section}.{next(iter(groups[section]))}"
        raise InvalidSpec(f"unknown key {key}", key)

    seed = None
    if "seed" in scenario_items:
        seed = _coerce("scenario.seed", scenario_items.pop("seed"), 0)
    corpus = scenario_items.pop("corpus", None)
    if corpus is not None:
        if corpus not in CORPORA:
            raise InvalidSpec(f"unknown corpus {corpus!r} for scenario.corpus", "scenario.corpus")
        spec = CORPORA[corpus](seed or 0)
    else:
        spec = ScenarioSpec()

    for name in ("sensor", "vehicles"):
        if name in scenario_items:
            raise InvalidSpec(f"unknown key scenario.{name}", f"scenario.{name}")
    spec = _apply(spec, "scenario", scenario_items)
    if sensor_items:
        spec = dataclasses.replace(spec, sensor=_apply(spec.sensor, "sensor", sensor_items))

    if vehicle_items:
        per_vehicle: dict[int, dict[str, str]] = {}
        for name, value in vehicle_items.items():
            index, _, attr = name.partition(".")
            if not index.isdigit() or not attr:
                key = f"vehicle.{name}"
                raise InvalidSpec(f"vehicle keys look like vehicle.<i>.<field>, got {key}", key)
            per_vehicle.setdefault(int(index), {})[attr] = value
        if sorted(per_vehicle) != list(range(len(per_vehicle))):
            raise InvalidSpec("vehicle indices must be 0..n-1 without gaps", "vehicle")
        vehicles = tuple(_apply(VehicleSpec(), f"vehicle.{i}", per_vehicle[i])
                         for i in range(len(per_vehicle)))
        spec = dataclasses.replace(spec, vehicles=vehicles)
    return spec.validate(), seed


def load_scenario(path) -> tuple[ScenarioSpec, int | None]:
    return scenario_from_kv(load_kv(path))


def dump_kv(cfg) -> str:
    """Render a config dataclass tree back to key-value text."""
    lines = []
    for section in dataclasses.fields(cfg):
        sub = getattr(cfg, section.name)
        for f in dataclasses.fields(sub):
            value = getattr(sub, f.name)
            if isinstance(value, enum.Enum):
                value = value.value
            lines.append(f"{section.name}.{f.name} = {value}")
    return "\n".join(lines) + "\n"


__all__ = ["PipelineConfig", "SensorSpec", "parse_kv", "load_kv", "pipeline_config",
           "load_pipeline_config", "scenario_from_kv", "load_scenario", "dump_kv"]
