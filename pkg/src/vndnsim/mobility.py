"""Vehicle presence traces for one avenue segment with a midway access point.

Only presence matters to the network model, so a vehicle is reduced to an
entry time, an exit time, its speed and its request rate.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, replace
from pathlib import Path

from .kernel import RngStream

AVENUE_M = 172.0
HORIZON_S = 300.0
VEHICLES = 125
ENTRY_WINDOW_S = 280.0
SPEED_MEAN_KMH = 31.0
SPEED_SD_KMH = 8.0
SPEED_MIN_KMH = 5.0
SPEED_MAX_KMH = 60.0
STOP_PROBABILITY = 0.15
STOP_PAUSE_S = 10.0
RATE_MIN = 50
RATE_MAX = 100

HEADER = "vehicle_id,enter_s,exit_s,speed_mps,rate_pps,app"
APPS = ("cbr", "modified", "unassigned")
MAX_SPEED_MPS = SPEED_MAX_KMH / 3.6


class TraceError(ValueError):
    """A trace file violates the format or a field invariant."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(f"row {row}: {message}" if row is not None else message)
        self.row = row


@dataclass(frozen=True)
class VehicleTrace:
    vehicle_id: int
    enter_s: float
    exit_s: float
    speed_mps: float
    rate_pps: int
    app: str = "unassigned"

    @property
    def dwell_s(self) -> float:
        return self.exit_s - self.enter_s

    def with_app(self, app: str) -> "VehicleTrace":
        return replace(self, app=app)


def dwell_time(speed_mps: float, paused: bool = False) -> float:
    """Seconds spent on the avenue at constant speed, plus an optional stop."""
    return AVENUE_M / speed_mps + (STOP_PAUSE_S if paused else 0.0)


def _floor3(x: float) -> float:
    return int(x * 1000) / 1000


def generate_trace(seed: int, vehicles: int = VEHICLES, rate_range: tuple[int, int] = (RATE_MIN, RATE_MAX),
                   horizon_s: float = HORIZON_S) -> list[VehicleTrace]:
    """Draw one replication of vehicle presence.

    Entries are uniform over the first 280 s; speed is normal(31, 8) km/h
    truncated to [5, 60] by rejection; 15% of vehicles pause 10 s at a stop.
    Presence is clipped at the horizon. Values are kept at millisecond
    resolution so that the CSV form round-trips exactly.
    """
    lo, hi = rate_range
    entry_rng = RngStream("trace/enter", seed)
    speed_rng = RngStream("trace/speed", seed)
    stop_rng = RngStream("trace/stop", seed)
    rate_rng = RngStream("trace/rate", seed)
    window = min(ENTRY_WINDOW_S, horizon_s - 1.0)
    rows = []
    for vid in range(vehicles):
        enter = round(entry_rng.random() * window, 3)
        while True:
            kmh = speed_rng.normal(SPEED_MEAN_KMH, SPEED_SD_KMH)
            if SPEED_MIN_KMH <= kmh <= SPEED_MAX_KMH:
                break
        speed = _floor3(kmh / 3.6)
        paused = stop_rng.bernoulli(STOP_PROBABILITY)
        exit_ = round(min(horizon_s, enter + dwell_time(speed, paused)), 3)
        rate = rate_rng.uniform_int(lo, hi)
        rows.append(VehicleTrace(vid, enter, exit_, speed, rate))
    return rows


def emit_trace(rows: list[VehicleTrace]) -> str:
    out = io.StringIO()
    out.write(HEADER + "\n")
    for r in rows:
        out.write(f"{r.vehicle_id},{r.enter_s:.3f},{r.exit_s:.3f},{r.speed_mps:.3f},{r.rate_pps},{r.app}\n")
    return out.getvalue()


def write_trace(rows: list[VehicleTrace], path: str | Path) -> Path:
    path = Path(path)
    path.write_bytes(emit_trace(rows).encode("utf-8"))
    return path


def parse_trace(text: str, vehicles: int | None = VEHICLES, horizon_s: float = HORIZON_S,
                rate_range: tuple[int, int] = (RATE_MIN, RATE_MAX)) -> list[VehicleTrace]:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].strip() != HEADER:
        raise TraceError(f"missing or wrong header, expected {HEADER!r}", row=0)
    rows = []
    seen = set()
    for lineno, line in enumerate(lines[1:], start=1):
        parts = line.split(",")
        if len(parts) != 6:
            raise TraceError(f"expected 6 fields, got {len(parts)}", row=lineno)
        try:
            vid = int(parts[0])
            enter, exit_, speed = float(parts[1]), float(parts[2]), float(parts[3])
            rate = int(parts[4])
        except ValueError as exc:
            raise TraceError(f"malformed field ({exc})", row=lineno) from None
        app = parts[5].strip()
        if app not in APPS:
            raise TraceError(f"unknown app {app!r}", row=lineno)
        if vid in seen:
            raise TraceError(f"duplicate vehicle_id {vid}", row=lineno)
        seen.add(vid)
        if not 0 <= enter < exit_ <= horizon_s:
            raise TraceError(f"need 0 <= enter_s < exit_s <= {horizon_s:g}, got {enter}..{exit_}", row=lineno)
        if not 0 < speed <= MAX_SPEED_MPS:
            raise TraceError(f"speed_mps {speed} outside (0, {MAX_SPEED_MPS:.3f}]", row=lineno)
        if not rate_range[0] <= rate <= rate_range[1]:
            raise TraceError(f"rate_pps {rate} outside {list(rate_range)}", row=lineno)
        rows.append(VehicleTrace(vid, enter, exit_, speed, rate, app))
    if vehicles is not None and len(rows) != vehicles:
        raise TraceError(f"expected {vehicles} vehicles, found {len(rows)}")
    return rows


def load_trace(path: str | Path, **kwargs) -> list[VehicleTrace]:
    try:
        text = Path(path).read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise TraceError(f"{path}: not UTF-8 ({exc})") from None
    return parse_trace(text, **kwargs)


def trace_hash(rows: list[VehicleTrace]) -> str:
    return hashlib.sha256(emit_trace(rows).encode("utf-8")).hexdigest()


def concurrency(rows: list[VehicleTrace], horizon_s: float = HORIZON_S, step_s: float = 1.0) -> list[int]:
    """Vehicles present at each sampling instant 0, step, 2*step, ..."""
    n = int(horizon_s / step_s)
    return [sum(1 for r in rows if r.enter_s <= k * step_s < r.exit_s) for k in range(n)]
