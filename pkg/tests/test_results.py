import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import small_trace
from vndnsim.config import Config
from vndnsim.mac import BASIC, BROADCAST, FULL, Frame
from vndnsim.results import (
    FRAMES_HEADER,
    LINKS_HEADER,
    TOTALS_HEADER,
    FrameLogWriter,
    ResultsError,
    TotalsRow,
    manifest_text,
    ordered_instances,
    parse_links,
    parse_manifest,
    parse_series,
    parse_totals,
    read_text,
    render,
    run_samples,
    tally_frame_log,
    write_run,
)
from vndnsim.scenarios import run_instance


@pytest.fixture(scope="module")
def run():
    return run_instance("native-2", small_trace(), 1, 1, Config(horizon_s=12.0))


def test_write_and_parse(tmp_path, run):
    files = write_run(run, tmp_path)
    totals = parse_totals(read_text(files["totals.csv"]))
    assert [r.app for r in totals] == ["cbr", "modified"]
    assert sum(r.interests_sent for r in totals) == run.total_sent()
    series = parse_series(read_text(files["timeseries.csv"]))
    assert [r.second for r in series] == list(range(run.n_bins))
    links = parse_links(read_text(files["links.csv"]))
    assert [l.medium for l in links] == ["wireless", "wired"]
    assert all(l.conserved() for l in links)
    assert links[0].unicast_frames == 0 and links[0].broadcast_frames == links[0].enqueued
    assert files["totals.csv"].read_bytes().count(b"\r") == 0


def test_totals_validation():
    with pytest.raises(ResultsError, match="header"):
        parse_totals("instance,app\n")
    with pytest.raises(ResultsError, match="exceeds"):
        parse_totals(TOTALS_HEADER + "\nnative-1,1,cbr,10,11\n")
    with pytest.raises(ResultsError, match="negative"):
        parse_totals(TOTALS_HEADER + "\nnative-1,1,cbr,-1,0\n")
    with pytest.raises(ResultsError, match="fields"):
        parse_totals(TOTALS_HEADER + "\nnative-1,1,cbr,10\n")
    with pytest.raises(ResultsError, match="integer"):
        parse_links(LINKS_HEADER + "\nn,1,wired,a,0,0,0,0,0,0,0,0\n")


def test_missing_file(tmp_path):
    with pytest.raises(ResultsError, match="missing"):
        read_text(tmp_path / "nope.csv")


def test_run_samples():
    rows = [TotalsRow("native-2", 1, "cbr", 10, 5), TotalsRow("native-2", 1, "modified", 10, 10),
            TotalsRow("native-2", 2, "cbr", 4, 1), TotalsRow("native-2", 2, "modified", 4, 1)]
    assert run_samples(rows, "satisfaction") == {"native-2": {1: 0.75, 2: 0.25}}
    assert run_samples(rows, "satisfaction", "modified") == {"native-2": {1: 1.0, 2: 0.25}}
    assert run_samples(rows, "data_received") == {"native-2": {1: 15.0, 2: 2.0}}
    with pytest.raises(ResultsError):
        run_samples(rows, "latency")


def test_instance_order():
    assert ordered_instances(["overlay-2", "native-1", "zzz", "native-1"]) == ["native-1", "overlay-2", "zzz"]


def test_frame_log(tmp_path):
    path = tmp_path / "frames.log"
    with open(path, "w") as fh:
        log = FrameLogWriter(fh)
        log(5, Frame(1, BROADCAST, BASIC, 81, None), "delivered")
        log(9, Frame(1, 1000, FULL, 109, None), "collided")
        log(12, Frame(1000, 1001, FULL, 1121, None, wireless=False), "delivered")
    lines = path.read_text().splitlines()
    assert lines[0] == FRAMES_HEADER
    assert lines[1] == "5,wireless,1,broadcast,basic,81,delivered"
    counts = tally_frame_log(path)
    assert counts == {("wireless", "broadcast"): 1, ("wireless", "unicast"): 1, ("wired", "unicast"): 1}


def test_frame_log_wrong_header(tmp_path):
    (tmp_path / "f.log").write_text("nope\n")
    with pytest.raises(ResultsError):
        tally_frame_log(tmp_path / "f.log")


@given(st.dictionaries(st.from_regex(r"[a-z_.]{1,12}", fullmatch=True), st.from_regex(r"[ -~]{0,20}", fullmatch=True),
                       max_size=6))
def test_manifest_round_trip(fields):
    parsed = parse_manifest(manifest_text(fields))
    assert parsed["tool"] == "vndnsim"
    for k, v in fields.items():
        if k not in ("tool", "tool_version"):
            assert parsed[k] == v


def test_render():
    assert render("a,b", ["1,2"]) == "a,b\n1,2\n"
    assert render("a,b", []) == "a,b\n"
