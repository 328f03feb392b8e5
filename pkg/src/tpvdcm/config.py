"""Plain-text scenario configuration.

Either dotted keys or bracketed sections::

    sim.experiment = costmap
    [driver]
    K_a = 30.0      # comments run to end of line

Bare keys before any section header belong to `sim`. Anything not given
keeps its default.
"""
from __future__ import annotations

import math
from dataclasses import fields, replace
from pathlib import Path

from .controller import DriverParams, ParameterError
from .sim import (
    CameraParams,
    LeadParams,
    PerceptionParams,
    ScenarioConfig,
    TrackParams,
    VehicleParams,
    validate_config,
)
from .track import TrackError, check_oval_params


class ConfigError(ValueError):
    pass


_SECTIONS = {
    "driver": DriverParams,
    "track": TrackParams,
    "vehicle": VehicleParams,
    "lead": LeadParams,
    "camera": CameraParams,
    "perception": PerceptionParams,
}
# dt lives in sim and is copied into the driver
_HIDDEN = {("driver", "dt")}


def _scalar_fields(cls) -> dict:
    return {f.name: f for f in fields(cls) if f.name not in _SECTIONS}


def valid_keys() -> list[str]:
    keys = [f"sim.{k}" for k in _scalar_fields(ScenarioConfig)]
    for sec, cls in _SECTIONS.items():
        keys += [f"{sec}.{f.name}" for f in fields(cls) if (sec, f.name) not in _HIDDEN]
    return keys


def _convert(raw: str, default, key: str):
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            val = float(raw)
            if not math.isfinite(val):
                raise ValueError(raw)
            return val
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {type(default).__name__}") from None


def parse_text(text: str, source: str = "<config>") -> ScenarioConfig:
    values: dict[str, dict[str, str]] = {}
    section = "sim"
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"{source}:{lineno}: malformed section header {line!r}")
            section = line[1:-1].strip()
            if section != "sim" and section not in _SECTIONS:
                raise ConfigError(
                    f"{source}:{lineno}: unknown section {section!r}; "
                    f"valid sections: sim, {', '.join(_SECTIONS)}"
                )
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        sec, _, name = key.rpartition(".")
        sec = sec or section
        full = f"{sec}.{name}"
        if full not in valid_keys():
            raise ConfigError(
                f"{source}:{lineno}: unknown key {full!r}; valid keys: {', '.join(valid_keys())}"
            )
        values.setdefault(sec, {})[name] = raw

    base = ScenarioConfig()
    top = {}
    for name, raw in values.get("sim", {}).items():
        top[name] = _convert(raw, getattr(base, name), f"sim.{name}")
    if "dt" in top and not top["dt"] > 0:
        raise ConfigError(f"{source}: sim.dt must be > 0, got {top['dt']}")

    subs = {}
    for sec, cls in _SECTIONS.items():
        default = getattr(base, sec)
        kw = {n: _convert(r, getattr(default, n), f"{sec}.{n}") for n, r in values.get(sec, {}).items()}
        if sec == "driver":
            kw["dt"] = top.get("dt", base.dt)
        try:
            subs[sec] = replace(default, **kw)
        except ParameterError as exc:
            raise ConfigError(f"{source}: {sec}: {exc}") from None

    cfg = replace(base, **top, **subs)
    check_ranges(cfg, source)
    return cfg


def check_ranges(cfg: ScenarioConfig, source: str = "<config>") -> None:
    try:
        validate_config(cfg)
        t = cfg.track
        check_oval_params(t.outer_diameter, t.aspect_ratio, t.half_width, t.spacing)
    except (ValueError, TrackError) as exc:
        raise ConfigError(f"{source}: {exc}") from None
    v = cfg.vehicle
    if not (v.wheelbase > 0 and v.a_max > 0 and v.integ_max >= 0):
        raise ConfigError(f"{source}: vehicle needs wheelbase > 0, a_max > 0, integ_max >= 0")
    c = cfg.camera
    if not (0 < c.fov_deg < 180 and c.width > 0 and c.height > 0):
        raise ConfigError(f"{source}: camera needs 0 < fov_deg < 180 and a positive image size")
    p = cfg.perception
    if p.far_rows >= 128:
        raise ConfigError(f"{source}: perception.far_rows must be < 128 (cost-map height)")
    if p.costmap_rate_hz < 0 or p.detection_rate_hz < 0:
        raise ConfigError(f"{source}: sensor rates must be >= 0")
    lead = cfg.lead
    if min(lead.length, lead.width, lead.height) <= 0 or lead.dropout_hold < 0 or lead.harmonics < 0:
        raise ConfigError(f"{source}: lead dimensions must be positive, dropout_hold and harmonics >= 0")


def parse_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_text(text, str(path))
