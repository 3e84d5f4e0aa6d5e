"""Command-line entry point: gen-traces, simulate, campaign, analyze.

Exit codes: 0 success, 2 usage error, 3 validation error, 4 runtime fault.
"""

from __future__ import annotations

import argparse
import sys
import time
from functools import partial
from pathlib import Path
from typing import Sequence

from . import __version__
from .config import Config, ConfigError, apply_overrides, load_config
from .kernel import SimulationFault
from .mobility import TraceError, emit_trace, generate_trace, load_trace, trace_hash
from .results import (
    FRAMES,
    LINKS,
    LINKS_HEADER,
    MANIFEST,
    SERIES,
    SERIES_HEADER,
    TOTALS,
    TOTALS_HEADER,
    FrameLogWriter,
    ResultsError,
    manifest_text,
    ordered_instances,
    parse_series,
    parse_totals,
    read_text,
    render,
    run_samples,
    sha256_file,
    write_run,
    write_text,
)
from .scenarios import (
    APP_ORDER,
    INSTANCE_ORDER,
    CampaignError,
    SetupError,
    UnknownInstance,
    get_instance,
    run_campaign,
    run_id,
    run_instance,
)
from .stats import StatsError, format_matrix, mean, pairwise_matrices, shapiro_wilk

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_RUNTIME = 4

METRICS = ("satisfaction", "data_received")


class ValidationError(Exception):
    pass


def trace_name(k: int) -> str:
    return f"trace-{k:03d}.csv"


def _config(args: argparse.Namespace) -> Config:
    config = load_config(args.config) if args.config else Config()
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    return apply_overrides(config, overrides)


def _outdir(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValidationError(f"cannot create output directory {out}: {exc.strerror}") from None
    probe = out / ".write-test"
    try:
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise ValidationError(f"output directory {out} is not writable: {exc.strerror}") from None
    return out


def _load_trace(path: Path, config: Config):
    return load_trace(path, horizon_s=config.horizon_s,
                      rate_range=(config.traffic.rate_min, config.traffic.rate_max))


def run_manifest(instance: str, replication: int, seed: int, config: Config, trace_sha: str) -> str:
    return manifest_text({"instance": instance, "replication": replication, "seed": seed,
                          "config_sha256": config.digest(), "trace_sha256": trace_sha})


# -- gen-traces -----------------------------------------------------------------------------


def cmd_gen_traces(args: argparse.Namespace) -> int:
    if args.runs < 1:
        raise ValidationError("--runs must be at least 1")
    config = _config(args)
    out = _outdir(args.out)
    lines = []
    for k in range(1, args.runs + 1):
        rows = generate_trace(args.seed + k, horizon_s=config.horizon_s,
                              rate_range=(config.traffic.rate_min, config.traffic.rate_max))
        text = emit_trace(rows)
        write_text(out / trace_name(k), text)
        lines.append(f"{trace_name(k)}={trace_hash(rows)}")
    extra = {"runs": args.runs, "seed": args.seed, "config_sha256": config.digest()}
    write_text(out / MANIFEST, manifest_text(extra) + "".join(line + "\n" for line in lines))
    print(f"wrote {args.runs} trace(s) to {out}")
    return EXIT_OK


# -- simulate ---------------------------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> int:
    inst = get_instance(args.instance)
    config = _config(args)
    trace = _load_trace(Path(args.trace), config)
    out = _outdir(args.out)
    fh = open(out / FRAMES, "w", encoding="utf-8", newline="\n") if args.frame_log else None
    try:
        log = FrameLogWriter(fh) if fh else None
        m = run_instance(inst, trace, args.replication, args.seed, config, frame_log=log)
    finally:
        if fh:
            fh.close()
    write_run(m, out)
    write_text(out / MANIFEST, run_manifest(inst.id, args.replication, args.seed, config, trace_hash(trace)))
    sat = m.total_received() / m.total_sent() if m.total_sent() else float("nan")
    print(f"{inst.id} r{args.replication}: {m.total_sent()} interests, {m.total_received()} data, "
          f"satisfaction {sat:.4f}, {m.wall_s:.1f}s")
    return EXIT_OK


# -- campaign ---------------------------------------------------------------------------------


def _campaign_worker(task: tuple, out: str, frame_log: bool):
    """Run one replication in a worker and persist its files; the manifest goes last."""
    instance, trace, replication, seed, config = task
    run_dir = Path(out) / "runs" / run_id(instance, replication)
    run_dir.mkdir(parents=True, exist_ok=True)
    fh = open(run_dir / FRAMES, "w", encoding="utf-8", newline="\n") if frame_log else None
    try:
        m = run_instance(instance, trace, replication, seed, config,
                         frame_log=FrameLogWriter(fh) if fh else None)
    finally:
        if fh:
            fh.close()
    write_run(m, run_dir)
    write_text(run_dir / MANIFEST, run_manifest(instance, replication, seed, config, trace_hash(trace)))
    return m


def _run_complete(run_dir: Path, manifest: str) -> bool:
    if not (run_dir / MANIFEST).exists():
        return False
    if read_text(run_dir / MANIFEST) != manifest:
        return False
    return all((run_dir / name).exists() for name in (TOTALS, SERIES, LINKS))


def combine_runs(out: Path, ids: list[str]) -> dict[str, str]:
    """Concatenate per-run files (in the given order) into the combined results."""
    texts = {}
    for name, header in ((TOTALS, TOTALS_HEADER), (SERIES, SERIES_HEADER), (LINKS, LINKS_HEADER)):
        body = []
        for rid in ids:
            lines = read_text(out / "runs" / rid / name).split("\n")
            body.extend(line for line in lines[1:] if line)
        texts[name] = render(header, body)
        write_text(out / name, texts[name])
    return texts


def cmd_campaign(args: argparse.Namespace) -> int:
    config = _config(args)
    instances = args.instances.split(",") if args.instances else list(INSTANCE_ORDER)
    for inst in instances:
        get_instance(inst)
    if args.replications < 1:
        raise ValidationError("--replications must be at least 1")
    if args.jobs < 1:
        raise ValidationError("--jobs must be at least 1")
    tdir = Path(args.traces)
    traces, hashes = [], []
    for k in range(1, args.replications + 1):
        path = tdir / trace_name(k)
        if not path.exists():
            raise ValidationError(f"missing trace {trace_name(k)} in {tdir}")
        rows = _load_trace(path, config)
        traces.append(rows)
        hashes.append(trace_hash(rows))

    out = Path(args.out)
    prior = out.exists() and ((out / "runs").exists() or (out / TOTALS).exists())
    if prior and not args.resume:
        raise ValidationError(f"{out} already holds campaign output; pass --resume to continue it")
    out = _outdir(args.out)

    manifests = {}
    for inst in instances:
        for k in range(1, args.replications + 1):
            manifests[(inst, k)] = run_manifest(inst, k, args.seed, config, hashes[k - 1])
    done = set()
    if args.resume:
        for (inst, k), man in manifests.items():
            if _run_complete(out / "runs" / run_id(inst, k), man):
                done.add((inst, k))
    pending = len(manifests) - len(done)
    print(f"campaign: {len(manifests)} runs, {len(done)} already complete, {pending} to run, jobs={args.jobs}",
          file=sys.stderr)

    t0 = time.perf_counter()
    count = [0]

    def progress(m) -> None:
        count[0] += 1
        sat = m.total_received() / m.total_sent() if m.total_sent() else float("nan")
        print(f"[{count[0]}/{pending}] {run_id(m.instance, m.replication)} satisfaction={sat:.4f} "
              f"({m.wall_s:.1f}s)", file=sys.stderr)

    worker = partial(_campaign_worker, out=str(out), frame_log=args.frame_logs)
    run_campaign(traces, instances, args.seed, config, args.jobs, on_result=progress,
                 skip=lambda inst, k: (inst, k) in done, worker=worker)

    ordered = [run_id(i, k) for i in ordered_instances(instances) for k in range(1, args.replications + 1)]
    texts = combine_runs(out, ordered)
    fields = {"instances": ",".join(ordered_instances(instances)), "replications": args.replications,
              "seed": args.seed, "config_sha256": config.digest()}
    for k, h in enumerate(hashes, start=1):
        fields[f"trace_sha256.{k:03d}"] = h
    for name in (TOTALS, SERIES, LINKS):
        fields[f"sha256.{name}"] = sha256_file(out / name)
    write_text(out / MANIFEST, manifest_text(fields))
    write_text(out / "config.txt", config.dumps())
    print(f"campaign finished in {time.perf_counter() - t0:.1f}s; {texts[TOTALS].count(chr(10)) - 1} totals rows "
          f"in {out / TOTALS}", file=sys.stderr)
    return EXIT_OK


# -- analyze ------------------------------------------------------------------------------------


def _fmt(v: float) -> str:
    return f"{v:.10g}"


def analyze(totals_text: str, series_text: str | None = None) -> dict[str, str]:
    """Build every analysis table from combined results; returns file name -> text."""
    rows = parse_totals(totals_text)
    present = ordered_instances(r.instance for r in rows)
    missing = [i for i in INSTANCE_ORDER if i not in present]
    if missing:
        raise ValidationError(f"results do not cover instance(s) {', '.join(missing)}")
    instances = list(INSTANCE_ORDER)
    files: dict[str, str] = {}

    pair_lines, matrix_text, normal_lines = [], [], []
    for metric in METRICS:
        per_run = run_samples(rows, metric)
        samples = {i: [per_run[i][k] for k in sorted(per_run[i])] for i in instances}
        mats = pairwise_matrices(samples, metric, instances)
        for pr in mats.pairs:
            pair_lines.append(f"{metric},{pr.instance_a},{pr.instance_b},{_fmt(pr.u_statistic)},"
                              f"{_fmt(pr.p_value)},{_fmt(pr.a12)}")
        matrix_text.append(format_matrix(instances, mats.p, f"{metric}: Mann-Whitney p-value"))
        matrix_text.append(format_matrix(instances, mats.a12, f"{metric}: A12(row, column)"))
        for inst in instances:
            values = samples[inst]
            try:
                res = shapiro_wilk(values)
                normal_lines.append(f"{metric},{inst},{len(values)},{_fmt(res.statistic)},{_fmt(res.p_value)}")
            except StatsError:
                normal_lines.append(f"{metric},{inst},{len(values)},nan,nan")
    files["analysis.csv"] = render("metric,instance_a,instance_b,u_statistic,p_value,a12", pair_lines)
    files["matrices.txt"] = "\n".join(matrix_text)
    files["normality.csv"] = render("metric,instance,n,w,p_value", normal_lines)

    sat = run_samples(rows, "satisfaction")
    sent = run_samples(rows, "interests_sent")
    recv = run_samples(rows, "data_received")
    summary = []
    for inst in instances:
        vals = list(sat[inst].values())
        summary.append(f"{inst},{len(vals)},{_fmt(mean(vals))},{_fmt(min(vals))},{_fmt(max(vals))},"
                       f"{_fmt(mean(list(sent[inst].values())))},{_fmt(mean(list(recv[inst].values())))}")
    files["summary.csv"] = render("instance,replications,mean_satisfaction,min_satisfaction,max_satisfaction,"
                                  "mean_interests_sent,mean_data_received", summary)

    per_app = []
    for inst in instances:
        if get_instance(inst).scenario != 2:
            continue
        for app in APP_ORDER:
            app_rows = [r for r in rows if r.instance == inst and r.app == app]
            if not app_rows:
                raise ValidationError(f"{inst} has no {app} rows")
            s = run_samples(app_rows, "satisfaction", app)[inst]
            per_app.append(f"{inst},{app},{len(s)},{sum(r.interests_sent for r in app_rows)},"
                           f"{sum(r.data_received for r in app_rows)},{_fmt(mean(list(s.values())))}")
    files["per_app.csv"] = render("instance,app,replications,interests_sent,data_received,mean_satisfaction",
                                  per_app)

    if series_text is not None:
        acc: dict[tuple[str, int], list[int]] = {}
        reps: dict[str, set] = {}
        for r in parse_series(series_text):
            a = acc.setdefault((r.instance, r.second), [0, 0])
            a[0] += r.interests_sent
            a[1] += r.data_received
            reps.setdefault(r.instance, set()).add(r.replication)
        lines = []
        for inst in ordered_instances(reps):
            n = len(reps[inst])
            for sec in sorted(s for i, s in acc if i == inst):
                a = acc[(inst, sec)]
                lines.append(f"{inst},{sec},{_fmt(a[0] / n)},{_fmt(a[1] / n)}")
        files["series_mean.csv"] = render("instance,second,mean_interests_sent,mean_data_received", lines)
    return files


def cmd_analyze(args: argparse.Namespace) -> int:
    results = Path(args.results)
    totals_text = read_text(results)
    series_path = Path(args.timeseries) if args.timeseries else results.with_name(SERIES)
    series_text = read_text(series_path) if (args.timeseries or series_path.exists()) else None
    files = analyze(totals_text, series_text)
    out = _outdir(args.out)
    for name, text in files.items():
        write_text(out / name, text)
    fields = {"results_sha256": sha256_file(results)}
    if series_text is not None:
        fields["timeseries_sha256"] = sha256_file(series_path)
    write_text(out / MANIFEST, manifest_text(fields))
    sys.stdout.write(files["matrices.txt"])
    return EXIT_OK


# -- entry point ------------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vndnsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def config_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="key=value configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one configuration key")

    p = sub.add_parser("gen-traces", help="generate vehicle presence traces")
    p.add_argument("--runs", type=int, default=31)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    config_flags(p)
    p.set_defaults(func=cmd_gen_traces)

    p = sub.add_parser("simulate", help="run one instance on one trace")
    p.add_argument("--instance", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--replication", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--frame-log", action="store_true", help="write a per-frame outcome log")
    config_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("campaign", help="run every instance on every trace")
    p.add_argument("--traces", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--replications", type=int, default=31)
    p.add_argument("--instances", help="comma-separated subset (default: all four)")
    p.add_argument("--resume", action="store_true", help="keep completed runs of a previous invocation")
    p.add_argument("--frame-logs", action="store_true", help="write a frame log for every run")
    config_flags(p)
    p.set_defaults(func=cmd_campaign)

    p = sub.add_parser("analyze", help="statistics over combined campaign results")
    p.add_argument("--results", required=True, help="combined totals.csv")
    p.add_argument("--timeseries", help="combined timeseries.csv (default: next to --results)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except (ValidationError, ConfigError, TraceError, ResultsError, SetupError, StatsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except UnknownInstance as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (CampaignError, SimulationFault) as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
