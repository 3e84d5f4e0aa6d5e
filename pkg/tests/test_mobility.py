import math
from statistics import NormalDist

import pytest
from hypothesis import given
from hypothesis import strategies as st

from vndnsim.mobility import (
    HEADER,
    TraceError,
    VehicleTrace,
    concurrency,
    dwell_time,
    emit_trace,
    generate_trace,
    load_trace,
    parse_trace,
    trace_hash,
    write_trace,
)


@pytest.fixture(scope="module")
def traces():
    return [generate_trace(42 + k) for k in range(1, 32)]


def expected_dwell_s() -> float:
    """E[172 / v] under normal(31, 8) km/h truncated to [5, 60], plus the expected stop."""
    dist = NormalDist(31, 8)
    lo, hi, steps = 5.0, 60.0, 20_000
    h = (hi - lo) / steps
    num = den = 0.0
    for i in range(steps):
        kmh = lo + (i + 0.5) * h
        w = dist.pdf(kmh)
        num += w * 172 / (kmh / 3.6)
        den += w
    return num / den + 0.15 * 10


def test_dwell_at_mean_speed():
    assert dwell_time(31 / 3.6) == pytest.approx(19.974, abs=1e-3)
    assert dwell_time(31 / 3.6, paused=True) == pytest.approx(29.974, abs=1e-3)


def test_shape(traces):
    for rows in traces:
        assert len(rows) == 125
        assert [r.vehicle_id for r in rows] == list(range(125))
        for r in rows:
            assert 0 <= r.enter_s <= 280 and r.enter_s < r.exit_s <= 300
            assert 50 <= r.rate_pps <= 100
            assert r.app == "unassigned"


def test_speed_statistics(traces):
    kmh = [r.speed_mps * 3.6 for rows in traces for r in rows]
    assert abs(sum(kmh) / len(kmh) - 31) <= 1.5
    assert max(kmh) <= 60 and min(kmh) >= 5 - 0.01


def test_mean_concurrency(traces):
    expected = 125 * expected_dwell_s() / 300
    assert 8 < expected < 10
    samples = [c for rows in traces for c in concurrency(rows)]
    assert abs(sum(samples) / len(samples) - expected) <= 3


def test_stop_fraction(traces):
    paused = sum(1 for rows in traces for r in rows
                 if r.exit_s < 300 and r.dwell_s - 172 / r.speed_mps > 5)
    n = 31 * 125
    assert abs(paused / n - 0.15) < 4 * math.sqrt(0.15 * 0.85 / n)


def test_same_seed_same_bytes():
    assert emit_trace(generate_trace(7)) == emit_trace(generate_trace(7))
    assert trace_hash(generate_trace(7)) != trace_hash(generate_trace(8))


@given(st.integers(0, 2 ** 31))
def test_round_trip(seed):
    rows = generate_trace(seed, vehicles=20)
    assert parse_trace(emit_trace(rows), vehicles=20) == rows


def test_file_round_trip(tmp_path):
    rows = [r.with_app("cbr") for r in generate_trace(7)]
    path = write_trace(rows, tmp_path / "t.csv")
    assert load_trace(path) == rows
    assert path.read_bytes().startswith(HEADER.encode() + b"\n")


def _text(rows):
    return emit_trace(rows)


def _rows(n=125):
    return [VehicleTrace(i, 1.0, 20.0, 8.0, 60) for i in range(n)]


def test_exit_before_enter_names_row():
    rows = _rows()
    rows[4] = VehicleTrace(4, 30.0, 20.0, 8.0, 60)
    with pytest.raises(TraceError) as err:
        parse_trace(_text(rows))
    assert err.value.row == 5 and "row 5" in str(err.value)


def test_wrong_count():
    with pytest.raises(TraceError, match="expected 125"):
        parse_trace(_text(_rows(124)))


@pytest.mark.parametrize("line, what", [
    ("3,1.000,20.000,8.000,60", "fields"),
    ("3,1.000,20.000,fast,60,cbr", "malformed"),
    ("3,1.000,20.000,17.000,60,cbr", "speed"),
    ("3,1.000,20.000,8.000,101,cbr", "rate"),
    ("3,1.000,20.000,8.000,60,video", "app"),
    ("0,1.000,20.000,8.000,60,cbr", "duplicate"),
    ("3,1.000,300.500,8.000,60,cbr", "exit"),
])
def test_bad_rows(line, what):
    text = HEADER + "\n0,1.000,20.000,8.000,60,cbr\n" + line + "\n"
    with pytest.raises(TraceError, match=what) as err:
        parse_trace(text, vehicles=2)
    assert err.value.row == 2


def test_bad_header():
    with pytest.raises(TraceError, match="header"):
        parse_trace("id,enter\n")
