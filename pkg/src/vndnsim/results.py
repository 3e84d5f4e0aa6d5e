"""Result file schemas: totals, per-second series, link counters, frame logs, manifests.

Every file is UTF-8 with LF line endings and a header row. Row order is
fixed (instance order, then replication, then app or second) so that equal
runs give byte-identical files.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable

from . import __version__
from .mac import BROADCAST, Frame, MacCounters
from .scenarios import INSTANCE_ORDER, RunMetrics

TOTALS_HEADER = "instance,replication,app,interests_sent,data_received"
SERIES_HEADER = "instance,replication,second,interests_sent,data_received"
LINKS_HEADER = ("instance,replication,medium,enqueued,delivered,collided,queue_dropped,retry_exhausted,"
                "expired,flushed,broadcast_frames,unicast_frames")
FRAMES_HEADER = "time_ns,medium,src,dest,service,bytes,outcome"

TOTALS = "totals.csv"
SERIES = "timeseries.csv"
LINKS = "links.csv"
MANIFEST = "manifest.txt"
FRAMES = "frames.log"


class ResultsError(ValueError):
    pass


@dataclass(frozen=True)
class TotalsRow:
    instance: str
    replication: int
    app: str
    interests_sent: int
    data_received: int


@dataclass(frozen=True)
class SeriesRow:
    instance: str
    replication: int
    second: int
    interests_sent: int
    data_received: int


@dataclass(frozen=True)
class LinkRow:
    instance: str
    replication: int
    medium: str
    enqueued: int
    delivered: int
    collided: int
    queue_dropped: int
    retry_exhausted: int
    expired: int
    flushed: int
    broadcast_frames: int
    unicast_frames: int

    @property
    def dropped(self) -> int:
        return self.queue_dropped + self.retry_exhausted + self.expired + self.flushed

    def conserved(self) -> bool:
        return self.delivered + self.collided + self.dropped == self.enqueued


# -- rendering ------------------------------------------------------------------------


def totals_lines(m: RunMetrics) -> list[str]:
    return [f"{m.instance},{m.replication},{app},{m.interests_sent[app]},{m.data_received[app]}"
            for app in m.apps()]


def series_lines(m: RunMetrics) -> list[str]:
    return [f"{m.instance},{m.replication},{s},{sent},{recv}" for s, sent, recv in m.series()]


def links_lines(m: RunMetrics) -> list[str]:
    wireless = m.mac_total()
    w = m.wireless_frames
    wired = MacCounters()
    for k, v in m.p2p.items():
        setattr(wired, k, v)
    rows = []
    for medium, c, bcast, ucast in (
        ("wireless", wireless, w.get("broadcast", 0), w.get("unicast", 0)),
        # the wired link carries unicast frames only
        ("wired", wired, 0, wired.delivered + wired.flushed),
    ):
        rows.append(f"{m.instance},{m.replication},{medium},{c.enqueued},{c.delivered},{c.collided},"
                    f"{c.queue_dropped},{c.retry_exhausted},{c.expired},{c.flushed},{bcast},{ucast}")
    return rows


def render(header: str, lines: Iterable[str]) -> str:
    return header + "\n" + "".join(line + "\n" for line in lines)


def write_text(path: Path, text: str) -> None:
    path.write_bytes(text.encode("utf-8"))


def write_run(m: RunMetrics, out: Path) -> dict[str, Path]:
    out.mkdir(parents=True, exist_ok=True)
    files = {TOTALS: render(TOTALS_HEADER, totals_lines(m)),
             SERIES: render(SERIES_HEADER, series_lines(m)),
             LINKS: render(LINKS_HEADER, links_lines(m))}
    for name, text in files.items():
        write_text(out / name, text)
    return {name: out / name for name in files}


# -- parsing ------------------------------------------------------------------------------


def _rows(text: str, header: str, what: str) -> list[list[str]]:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != header:
        raise ResultsError(f"{what}: expected header {header!r}")
    n = header.count(",") + 1
    out = []
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != n:
            raise ResultsError(f"{what} line {i}: expected {n} fields, got {len(parts)}")
        out.append(parts)
    return out


def _int(value: str, what: str) -> int:
    try:
        v = int(value)
    except ValueError:
        raise ResultsError(f"{what}: {value!r} is not an integer") from None
    if v < 0:
        raise ResultsError(f"{what}: negative count {v}")
    return v


def parse_totals(text: str) -> list[TotalsRow]:
    rows = []
    for parts in _rows(text, TOTALS_HEADER, "totals"):
        inst, rep, app = parts[0], _int(parts[1], "replication"), parts[2]
        sent, recv = _int(parts[3], "interests_sent"), _int(parts[4], "data_received")
        if recv > sent:
            raise ResultsError(f"totals {inst} r{rep} {app}: data_received {recv} exceeds interests_sent {sent}")
        rows.append(TotalsRow(inst, rep, app, sent, recv))
    return rows


def parse_series(text: str) -> list[SeriesRow]:
    return [SeriesRow(p[0], _int(p[1], "replication"), _int(p[2], "second"), _int(p[3], "interests_sent"),
                      _int(p[4], "data_received"))
            for p in _rows(text, SERIES_HEADER, "timeseries")]


def parse_links(text: str) -> list[LinkRow]:
    return [LinkRow(p[0], _int(p[1], "replication"), p[2], *(_int(v, "counter") for v in p[3:]))
            for p in _rows(text, LINKS_HEADER, "links")]


def read_text(path: Path) -> str:
    try:
        return path.read_bytes().decode("utf-8")
    except FileNotFoundError:
        raise ResultsError(f"missing file {path}") from None
    except UnicodeDecodeError as exc:
        raise ResultsError(f"{path}: not UTF-8 ({exc})") from None


# -- per-run samples ---------------------------------------------------------------------------


def run_samples(rows: Iterable[TotalsRow], metric: str, app: str | None = None) -> dict[str, dict[int, float]]:
    """Per-instance, per-replication value of ``satisfaction`` or ``data_received``.

    Apps are summed unless ``app`` selects one of them.
    """
    from .stats import satisfaction

    sums: dict[tuple[str, int], list[int]] = {}
    for r in rows:
        if app is not None and r.app != app:
            continue
        acc = sums.setdefault((r.instance, r.replication), [0, 0])
        acc[0] += r.interests_sent
        acc[1] += r.data_received
    out: dict[str, dict[int, float]] = {}
    for (inst, rep), (sent, recv) in sums.items():
        if metric == "satisfaction":
            value = satisfaction(sent, recv)
        elif metric == "data_received":
            value = float(recv)
        elif metric == "interests_sent":
            value = float(sent)
        else:
            raise ResultsError(f"unknown metric {metric!r}")
        out.setdefault(inst, {})[rep] = value
    return out


def ordered_instances(names: Iterable[str]) -> list[str]:
    order = {n: i for i, n in enumerate(INSTANCE_ORDER)}
    return sorted(set(names), key=lambda n: (order.get(n, len(order)), n))


# -- frame logs ----------------------------------------------------------------------------------


class FrameLogWriter:
    """Frame-log hook that writes one line per frame outcome."""

    def __init__(self, fh: IO[str]):
        self.fh = fh
        fh.write(FRAMES_HEADER + "\n")

    def __call__(self, t: int, frame: Frame, outcome: str) -> None:
        dest = "broadcast" if frame.dest == BROADCAST else frame.dest
        medium = "wireless" if frame.wireless else "wired"
        self.fh.write(f"{t},{medium},{frame.src},{dest},{frame.service},{frame.nbytes},{outcome}\n")


def tally_frame_log(path: Path) -> Counter:
    """Count ``(medium, cast)`` pairs in a frame log."""
    counts: Counter = Counter()
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != FRAMES_HEADER:
            raise ResultsError(f"{path}: expected header {FRAMES_HEADER!r}")
        for line in fh:
            parts = line.split(",", 4)
            counts[(parts[1], "broadcast" if parts[3] == "broadcast" else "unicast")] += 1
    return counts


# -- manifests ----------------------------------------------------------------------------------


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def manifest_text(fields: dict[str, object]) -> str:
    """``key=value`` lines; callers pass keys in a fixed order."""
    body = {"tool": "vndnsim", "tool_version": __version__, **fields}
    return "".join(f"{k}={v}\n" for k, v in body.items())


def parse_manifest(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        if line and "=" in line:
            k, v = line.split("=", 1)
            out[k] = v
    return out
