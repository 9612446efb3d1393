"""Declarative scenario files.

A scenario is a TOML document describing a sweep grid: which access modes
to run, at which network sizes, hidden-node levels (or explicit radio
ranges), source rates, and seeds, plus the MAC and schedule parameters
shared by every cell. Unknown keys are rejected so a typo cannot silently
fall back to a default.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from importlib import resources

from .csma import BackoffParams
from .engine import MODES
from .errors import ParseError, ValidationError
from .topology import HNP_FORMULAS


@dataclass(frozen=True)
class CsmaSettings:
    c_nb: int = 5
    c_be: int = 7
    max_attempts: int = 8
    unit_backoff_us: int = 1000
    txn_duration_us: int = 4000
    window_exponent_cap: int = 8

    def to_backoff_params(self) -> BackoffParams:
        return BackoffParams(
            c_nb=self.c_nb,
            c_be=self.c_be,
            max_attempts=self.max_attempts,
            unit_backoff_us=self.unit_backoff_us,
            txn_duration_us=self.txn_duration_us,
            window_exponent_cap=self.window_exponent_cap,
        )


@dataclass(frozen=True)
class TschSettings:
    slot_ms: float = 10.0
    slotframe_length: "int | None" = None
    channels: int = 16
    reserved_slots: int = 2
    sink_radios: int = 1


@dataclass(frozen=True)
class HybridSettings:
    """Group-window sizing and the in-window contention parameters."""

    margin: float = 1.5
    entry_jitter_us: int = 1000
    c_nb: int = 0
    c_be: int = 1
    max_attempts: int = 16
    unit_backoff_us: int = 250

    def to_backoff_params(self, txn_duration_us: int) -> BackoffParams:
        return BackoffParams(
            c_nb=self.c_nb,
            c_be=self.c_be,
            max_attempts=self.max_attempts,
            unit_backoff_us=self.unit_backoff_us,
            txn_duration_us=txn_duration_us,
        )


@dataclass(frozen=True)
class EngineSettings:
    queue_cap: int = 64
    warmup_fraction: float = 0.1
    hnp_formula: str = "receiver_centric"


@dataclass(frozen=True)
class Scenario:
    name: str
    modes: tuple[str, ...]
    node_counts: tuple[int, ...]
    source_rates: tuple[float, ...]
    duration_s: float
    seeds: tuple[int, ...]
    description: str = ""
    area_side: float = 100.0
    target_hidden: "tuple[float, ...] | None" = None
    comm_radius: "tuple[float, ...] | None" = None
    hidden_tolerance: float = 0.03
    engine: EngineSettings = field(default_factory=EngineSettings)
    csma: CsmaSettings = field(default_factory=CsmaSettings)
    tsch: TschSettings = field(default_factory=TschSettings)
    hybrid: HybridSettings = field(default_factory=HybridSettings)

    @property
    def hidden_axis(self) -> tuple[tuple[str, float], ...]:
        """The radio-range axis as (kind, value) pairs.

        kind is "target" when the range is calibrated to a hidden-node
        level and "radius" when it is given directly.
        """
        if self.target_hidden is not None:
            return tuple(("target", v) for v in self.target_hidden)
        return tuple(("radius", v) for v in self.comm_radius)


_SECTION_TYPES = {
    "engine": EngineSettings,
    "csma": CsmaSettings,
    "tsch": TschSettings,
    "hybrid": HybridSettings,
}

_TOP_SCALARS = {
    "name": str,
    "description": str,
    "area_side": float,
    "duration_s": float,
    "hidden_tolerance": float,
}

_TOP_LISTS = {
    "modes": str,
    "node_counts": int,
    "source_rates": float,
    "seeds": int,
    "target_hidden": float,
    "comm_radius": float,
}

_REQUIRED = ("modes", "node_counts", "source_rates", "duration_s", "seeds")


def _coerce(value: Any, want: type, where: str) -> Any:
    if want is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if want is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(f"{where}: expected an integer, got {value!r}")
        return value
    if not isinstance(value, want):
        raise ValidationError(f"{where}: expected {want.__name__}, got {value!r}")
    return value


def _build_section(cls, raw: dict, prefix: str):
    known = {f.name: f.type for f in fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        if key not in known:
            raise ValidationError(f"unknown key '{prefix}.{key}'")
        ann = known[key]
        if ann is float or ann == "float":
            kwargs[key] = _coerce(value, float, f"{prefix}.{key}")
        elif ann is int or ann == "int" or "int | None" in str(ann):
            kwargs[key] = _coerce(value, int, f"{prefix}.{key}")
        else:
            kwargs[key] = _coerce(value, str, f"{prefix}.{key}")
    return cls(**kwargs)


def scenario_from_dict(doc: dict, default_name: str = "scenario") -> Scenario:
    if not isinstance(doc, dict):
        raise ValidationError("scenario document must be a table")
    kwargs: dict[str, Any] = {}
    for key, value in doc.items():
        if key in _SECTION_TYPES:
            if not isinstance(value, dict):
                raise ValidationError(f"'{key}' must be a table")
            kwargs[key] = _build_section(_SECTION_TYPES[key], value, key)
        elif key in _TOP_SCALARS:
            kwargs[key] = _coerce(value, _TOP_SCALARS[key], key)
        elif key in _TOP_LISTS:
            if not isinstance(value, list) or not value:
                raise ValidationError(f"'{key}' must be a non-empty list")
            elem = _TOP_LISTS[key]
            kwargs[key] = tuple(_coerce(v, elem, f"{key}[{i}]") for i, v in enumerate(value))
        else:
            raise ValidationError(f"unknown key '{key}'")

    for req in _REQUIRED:
        if req not in kwargs:
            raise ValidationError(f"missing required key '{req}'")
    has_target = "target_hidden" in kwargs
    has_radius = "comm_radius" in kwargs
    if has_target == has_radius:
        raise ValidationError("give exactly one of 'target_hidden' or 'comm_radius'")

    kwargs.setdefault("name", default_name)
    sc = Scenario(**kwargs)
    _check_values(sc)
    return sc


def _check_values(sc: Scenario) -> None:
    for m in sc.modes:
        if m not in MODES:
            raise ValidationError(f"unknown mode '{m}' (choose from {', '.join(MODES)})")
    if len(set(sc.modes)) != len(sc.modes):
        raise ValidationError("duplicate entries in 'modes'")
    for n in sc.node_counts:
        if n < 2:
            raise ValidationError("node counts must be at least 2")
    for r in sc.source_rates:
        if r <= 0:
            raise ValidationError("source rates must be positive")
    if sc.duration_s <= 0:
        raise ValidationError("duration_s must be positive")
    if not sc.seeds:
        raise ValidationError("at least one seed is required")
    if sc.target_hidden is not None:
        for h in sc.target_hidden:
            if not 0.0 <= h < 1.0:
                raise ValidationError("target_hidden values must be in [0, 1)")
    if sc.comm_radius is not None:
        for r in sc.comm_radius:
            if r <= 0:
                raise ValidationError("comm_radius values must be positive")
    if sc.hidden_tolerance <= 0:
        raise ValidationError("hidden_tolerance must be positive")
    if sc.area_side <= 0:
        raise ValidationError("area_side must be positive")
    if sc.engine.hnp_formula not in HNP_FORMULAS:
        raise ValidationError(
            f"unknown hnp_formula '{sc.engine.hnp_formula}' "
            f"(choose from {', '.join(HNP_FORMULAS)})"
        )
    if not 0 <= sc.engine.warmup_fraction < 1:
        raise ValidationError("warmup_fraction must be in [0, 1)")
    if sc.engine.queue_cap < 1:
        raise ValidationError("queue_cap must be at least 1")
    if sc.tsch.channels < 1 or sc.tsch.sink_radios < 1:
        raise ValidationError("tsch.channels and tsch.sink_radios must be at least 1")
    if sc.tsch.reserved_slots < 0:
        raise ValidationError("tsch.reserved_slots cannot be negative")
    if sc.hybrid.margin <= 0:
        raise ValidationError("hybrid.margin must be positive")


def load_scenario(path) -> Scenario:
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read scenario file {p}: {exc}") from exc
    try:
        doc = tomllib.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ParseError(f"invalid scenario file {p}: {exc}") from exc
    return scenario_from_dict(doc, default_name=p.stem)


def _preset_dir():
    return resources.files("meshmac") / "presets"


def list_presets() -> list[str]:
    out = []
    for entry in _preset_dir().iterdir():
        if entry.name.endswith(".toml"):
            out.append(entry.name[: -len(".toml")])
    return sorted(out)


def load_preset(name: str) -> Scenario:
    entry = _preset_dir() / f"{name}.toml"
    try:
        raw = entry.read_bytes()
    except (FileNotFoundError, OSError) as exc:
        raise ParseError(f"no preset named '{name}' (try: {', '.join(list_presets())})") from exc
    doc = tomllib.loads(raw.decode("utf-8"))
    return scenario_from_dict(doc, default_name=name)
