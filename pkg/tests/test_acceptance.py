"""End-to-end acceptance run: 31 traces, four instances, 124 simulations.

The campaign runs once through the CLI at ``--jobs 4`` and once more at
``--jobs 1`` for the determinism check, so this module takes a while.
Deselect it with ``-m "not acceptance"`` for a quick unit run.
"""

import time
from itertools import product

import numpy as np
import pytest

from conftest import record_criterion
from vndnsim.cli import analyze, main, trace_name
from vndnsim.config import Config
from vndnsim.mobility import load_trace
from vndnsim.results import LINKS, SERIES, TOTALS, parse_links, parse_totals, read_text, run_samples, \
    tally_frame_log
from vndnsim.scenarios import INSTANCE_ORDER, run_instance
from vndnsim.stats import mann_whitney_u, mean, u_statistic, vargha_delaney_a12

pytestmark = pytest.mark.acceptance

RUNS = 31
BUDGET_S = 15 * 60
COMBINED = (TOTALS, SERIES, LINKS, "manifest.txt")


@pytest.fixture(scope="module")
def traces(tmp_path_factory):
    out = tmp_path_factory.mktemp("traces")
    assert main(["gen-traces", "--runs", str(RUNS), "--seed", "42", "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def campaign(traces, tmp_path_factory):
    out = tmp_path_factory.mktemp("campaign") / "jobs4"
    t0 = time.perf_counter()
    code = main(["campaign", "--traces", str(traces), "--out", str(out), "--jobs", "4"])
    elapsed = time.perf_counter() - t0
    assert code == 0
    return out, elapsed


@pytest.fixture(scope="module")
def rows(campaign):
    return parse_totals(read_text(campaign[0] / TOTALS))


@pytest.fixture(scope="module")
def tables(campaign):
    out = campaign[0]
    return analyze(read_text(out / TOTALS), read_text(out / SERIES))


def samples(rows, metric, app=None):
    per_run = run_samples(rows, metric, app)
    return {inst: [per_run[inst][k] for k in sorted(per_run[inst])] for inst in per_run}


def test_c01_campaign_wall_clock(campaign, rows):
    out, elapsed = campaign
    n_runs = len({(r.instance, r.replication) for r in rows})
    ok = n_runs == 124 and elapsed < BUDGET_S
    record_criterion(1, ok, f"{n_runs} runs in {elapsed:.0f} s at --jobs 4 (budget {BUDGET_S} s)")
    assert n_runs == 124
    assert elapsed < BUDGET_S


def test_c02_overlay_satisfaction(rows):
    sat = samples(rows, "satisfaction")
    m1, m2 = mean(sat["overlay-1"]), mean(sat["overlay-2"])
    ok = m1 >= 0.95 and m2 >= 0.95
    record_criterion(2, ok, f"overlay-1 {m1:.4f}, overlay-2 {m2:.4f} (need >= 0.95)")
    assert ok


def test_c03_native_bands_and_ordering(rows):
    sat = samples(rows, "satisfaction")
    n1, n2 = sat["native-1"], sat["native-2"]
    m1, m2 = mean(n1), mean(n2)
    p = mann_whitney_u(n2, n1).p_value
    a12 = vargha_delaney_a12(n2, n1)
    ok = 0.08 <= m1 <= 0.35 and 0.18 <= m2 <= 0.50 and p < 0.05 and a12 >= 0.8
    record_criterion(3, ok, f"native-1 {m1:.4f} in [0.08, 0.35], native-2 {m2:.4f} in [0.18, 0.50], "
                            f"p {p:.3g} < 0.05, A12(native-2, native-1) {a12:.3f} >= 0.8")
    assert ok


def test_c04_overlay_equivalence(rows):
    recv = samples(rows, "data_received")
    p = mann_whitney_u(recv["overlay-1"], recv["overlay-2"]).p_value
    record_criterion(4, p > 0.05, f"data received overlay-1 vs overlay-2: p {p:.4f} > 0.05")
    assert p > 0.05


def test_c05_dominance(rows):
    worst = {}
    for metric in ("data_received", "satisfaction"):
        s = samples(rows, metric)
        worst[metric] = min(vargha_delaney_a12(s[o], s[n])
                            for o, n in product(("overlay-1", "overlay-2"), ("native-1", "native-2")))
    ok = all(v >= 0.99 for v in worst.values())
    record_criterion(5, ok, "min A12(overlay-x, native-y): "
                            + ", ".join(f"{k} {v:.4f}" for k, v in worst.items()) + " (need >= 0.99)")
    assert ok


def test_c06_per_app_split(rows):
    native2 = [r for r in rows if r.instance == "native-2"]
    cbr = mean(samples(native2, "satisfaction", "cbr")["native-2"])
    mod = mean(samples(native2, "satisfaction", "modified")["native-2"])
    ratio = mod / cbr
    ok = mod > cbr and 1.5 <= ratio <= 3.5
    record_criterion(6, ok, f"native-2 modified {mod:.4f} vs cbr {cbr:.4f}, ratio {ratio:.2f} in [1.5, 3.5]")
    assert ok


def test_c07_data_volume(rows):
    recv = samples(rows, "data_received")
    ratio = mean(recv["overlay-2"]) / mean(recv["native-2"])
    record_criterion(7, ratio >= 2, f"mean data received overlay-2 / native-2 = {ratio:.2f} (need >= 2)")
    assert ratio >= 2


def test_c08_mac_conservation(campaign):
    links = parse_links(read_text(campaign[0] / LINKS))
    bad = [(l.instance, l.replication, l.medium) for l in links if not l.conserved()]
    runs = len({(l.instance, l.replication) for l in links})
    ok = runs == 124 and not bad and len(links) == 248
    record_criterion(8, ok, f"{len(links) - len(bad)}/{len(links)} medium rows conserved over {runs} runs")
    assert ok


def test_c09_deployment_purity(campaign, traces, tmp_path):
    # every run's per-cast frame tallies, as recorded at each frame outcome
    links = [l for l in parse_links(read_text(campaign[0] / LINKS)) if l.medium == "wireless"]
    bad = [(l.instance, l.replication) for l in links
           if (l.unicast_frames if l.instance.startswith("native") else l.broadcast_frames) != 0]
    # full frame logs for replication 1 of every instance, checked against those tallies
    logged = {}
    for inst in INSTANCE_ORDER:
        out = tmp_path / inst
        assert main(["simulate", "--instance", inst, "--trace", str(traces / trace_name(1)),
                     "--replication", "1", "--out", str(out), "--frame-log"]) == 0
        logged[inst] = tally_frame_log(out / "frames.log")
    for inst, counts in logged.items():
        row = next(l for l in links if l.instance == inst and l.replication == 1)
        wrong = "unicast" if inst.startswith("native") else "broadcast"
        if counts[("wireless", wrong)] != 0:
            bad.append((inst, "frame log"))
        if (counts[("wireless", "broadcast")], counts[("wireless", "unicast")]) != (row.broadcast_frames,
                                                                                    row.unicast_frames):
            bad.append((inst, "log/tally mismatch"))
    ok = not bad and len(links) == 124
    record_criterion(9, ok, f"{len(links)} runs tallied, 4 full frame logs cross-checked, violations: {bad or 'none'}")
    assert ok


def test_c10_ideal_channel(traces):
    trace = load_trace(traces / trace_name(1))
    sat = {}
    for inst in INSTANCE_ORDER:
        m = run_instance(inst, trace, 1, 1, Config(channel="ideal"))
        sat[inst] = m.total_received() / m.total_sent()
    ok = all(v == 1.0 for v in sat.values())
    record_criterion(10, ok, "ideal channel satisfaction " + ", ".join(f"{k} {v}" for k, v in sat.items()))
    assert ok


def test_c11_statistics_oracles():
    rng = np.random.default_rng(20240611)
    exact = mann_whitney_u([1, 2], [3, 4])
    checks = [exact.method == "exact" and exact.p_value == 1 / 3]
    for _ in range(100):
        a = rng.integers(0, 6, rng.integers(1, 7)).tolist()
        b = rng.integers(0, 6, rng.integers(1, 7)).tolist()
        wins = sum(1.0 if x > y else 0.5 if x == y else 0.0 for x, y in product(a, b))
        checks.append(vargha_delaney_a12(a, b) == wins / (len(a) * len(b)))
    for _ in range(1000):
        a = rng.integers(0, 20, rng.integers(1, 40)).tolist()
        b = rng.integers(0, 20, rng.integers(1, 40)).tolist()
        checks.append(u_statistic(a, b) + u_statistic(b, a) == len(a) * len(b))
    ok = all(checks)
    record_criterion(11, ok, f"{sum(checks)}/{len(checks)} exact checks (p=1/3, 100 A12 brute-force, 1000 U+U')")
    assert ok


def test_c12_determinism(campaign, traces, tables, tmp_path):
    again = tmp_path / "jobs1"
    assert main(["campaign", "--traces", str(traces), "--out", str(again), "--jobs", "1"]) == 0
    diff = [name for name in COMBINED if (again / name).read_bytes() != (campaign[0] / name).read_bytes()]
    redo = analyze(read_text(again / TOTALS), read_text(again / SERIES))
    diff += [name for name in tables if redo[name] != tables[name]]
    record_criterion(12, not diff, "repeat campaign (--jobs 1) byte-identical: "
                                   + ("all combined files and analysis tables" if not diff else f"differs in {diff}"))
    assert not diff
