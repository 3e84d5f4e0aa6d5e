"""Run configuration as flat ``section.key=value`` text."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .mac import MacParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NdnParams:
    cs_capacity: int = 10_000
    interest_lifetime_s: float = 4.0
    payload_bytes: int = 1024

    def __post_init__(self) -> None:
        if self.cs_capacity < 0:
            raise ValueError("ndn.cs_capacity must be >= 0")
        if self.interest_lifetime_s <= 0:
            raise ValueError("ndn.interest_lifetime_s must be positive")
        if self.payload_bytes <= 0:
            raise ValueError("ndn.payload_bytes must be positive")


@dataclass(frozen=True)
class TrafficParams:
    rate_min: int = 50
    rate_max: int = 100
    ref_hz: int = 100
    modified_fraction: float = 0.5

    def __post_init__(self) -> None:
        if not 0 < self.rate_min <= self.rate_max:
            raise ValueError("traffic.rate_min must be positive and <= traffic.rate_max")
        if self.ref_hz <= 0:
            raise ValueError("traffic.ref_hz must be positive")
        if not 0 <= self.modified_fraction <= 1:
            raise ValueError("traffic.modified_fraction must be in [0, 1]")


@dataclass(frozen=True)
class WiredParams:
    rate_mbps: float = 1000.0
    delay_ms: float = 30.0

    def __post_init__(self) -> None:
        if self.rate_mbps <= 0 or self.delay_ms < 0:
            raise ValueError("wired.rate_mbps must be positive and wired.delay_ms >= 0")


CHANNELS = ("dcf", "ideal")


@dataclass(frozen=True)
class Config:
    horizon_s: float = 300.0
    channel: str = "dcf"
    mac: MacParams = field(default_factory=MacParams)
    ndn: NdnParams = field(default_factory=NdnParams)
    traffic: TrafficParams = field(default_factory=TrafficParams)
    wired: WiredParams = field(default_factory=WiredParams)

    def __post_init__(self) -> None:
        if self.horizon_s <= 0:
            raise ValueError("horizon_s must be positive")
        if self.channel not in CHANNELS:
            raise ValueError(f"channel must be one of {CHANNELS}")

    def items(self) -> list[tuple[str, Any]]:
        out: list[tuple[str, Any]] = []
        for f in fields(self):
            value = getattr(self, f.name)
            if hasattr(value, "__dataclass_fields__"):
                out.extend((f"{f.name}.{g.name}", getattr(value, g.name)) for g in fields(value))
            else:
                out.append((f.name, value))
        return out

    def dumps(self) -> str:
        return "".join(f"{k}={_fmt(v)}\n" for k, v in sorted(self.items()))

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()

    def with_overrides(self, overrides: dict[str, str]) -> "Config":
        return apply_overrides(self, overrides)


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _coerce(raw: str, like: Any, key: str) -> Any:
    try:
        if isinstance(like, bool):
            return raw.strip().lower() in ("1", "true", "yes")
        if isinstance(like, int):
            return int(raw)
        if isinstance(like, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {type(like).__name__}") from None
    return raw.strip()


def apply_overrides(config: Config, overrides: dict[str, str]) -> Config:
    top: dict[str, Any] = {}
    sections: dict[str, dict[str, Any]] = {}
    known = dict(config.items())
    for key, raw in overrides.items():
        if key not in known:
            raise ConfigError(f"unknown configuration key {key!r}")
        value = _coerce(raw, known[key], key)
        if "." in key:
            sec, name = key.split(".", 1)
            sections.setdefault(sec, {})[name] = value
        else:
            top[key] = value
    try:
        for sec, values in sections.items():
            top[sec] = replace(getattr(config, sec), **values)
        return replace(config, **top)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_config(text: str, base: Config | None = None) -> Config:
    overrides: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, value = line.split("=", 1)
        overrides[key.strip()] = value.strip()
    return apply_overrides(base or Config(), overrides)


def load_config(path: str | Path) -> Config:
    return parse_config(Path(path).read_text(encoding="utf-8"))
