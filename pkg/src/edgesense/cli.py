"""Command line interface.

Subcommands:
  gen-trace   synthesize an hourly pollutant trace (and an event schedule)
  run         simulate one policy over a trace and print its metrics
  compare     run several policies x seeds over one shared trace
  report      re-render saved comparison or run artifacts

Exit codes: 0 success, 2 bad usage or bad input (config, trace, events),
1 unexpected runtime failure. EDGESENSE_LOG=quiet|info|debug controls
stderr logging (default quiet).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import math
import os
import sys
import time

from . import __version__, core, engine, metrics, trace
from ._util import atomic_write_text, stable_json
from .core import ConfigError, SimConfig
from .engine import RunResult, run_simulation, save_run, write_round_log_csv
from .policy import POLICY_ORDER, PolicyKind
from .trace import TraceError, TraceSet

log = logging.getLogger("edgesense.cli")

_LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging() -> None:
    name = os.environ.get("EDGESENSE_LOG", "quiet").strip().lower()
    level = _LOG_LEVELS.get(name)
    if level is None:
        print(f"warning: EDGESENSE_LOG={name!r} not recognized, using quiet", file=sys.stderr)
        level = logging.WARNING
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def parse_seed_list(text: str) -> list[int]:
    """Accept '7', '1,2,5' or '1..5' (inclusive range)."""
    text = text.strip()
    if ".." in text:
        lo, _, hi = text.partition("..")
        try:
            start, stop = int(lo), int(hi)
        except ValueError:
            raise ValueError(f"bad seed range {text!r}") from None
        if stop < start:
            raise ValueError(f"empty seed range {text!r}")
        return list(range(start, stop + 1))
    try:
        seeds = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ValueError(f"bad seed list {text!r}") from None
    if not seeds:
        raise ValueError(f"bad seed list {text!r}")
    return seeds


def _parse_policies(text: str) -> list[PolicyKind]:
    kinds = [PolicyKind.from_name(part.strip()) for part in text.split(",") if part.strip()]
    if not kinds:
        raise ValueError("no policies given")
    seen = set()
    out = []
    for k in kinds:
        if k not in seen:
            seen.add(k)
            out.append(k)
    return out


def _load_cfg(args) -> SimConfig:
    overrides: dict = {}
    for item in getattr(args, "set", None) or []:
        key, value = core.parse_override(item)
        overrides[key] = value
    if getattr(args, "hierarchy", None) is not None:
        overrides["hierarchy"] = args.hierarchy == "on"
    return core.load_config(args.config, overrides)


def _build_traces(cfg: SimConfig, args, world_seed: int) -> TraceSet:
    """Shared world for a run or comparison: either a loaded trace CSV (events
    optional) or a synthetic one derived from world_seed."""
    if args.trace:
        hourly = trace.load_csv(args.trace, expected_zones=cfg.n_zones)
        events = trace.load_events_csv(args.events) if args.events else []
        return trace.build_round_trace(cfg, hourly, events)
    if not args.synthetic:
        raise ConfigError(["either --trace FILE or --synthetic is required"])
    if args.events:
        raise ConfigError(["--events only applies together with --trace"])
    log.info("synthesizing trace (seed %d, %d zones, %d rounds)", world_seed, cfg.n_zones, cfg.rounds)
    hourly = trace.generate_synthetic(cfg, rng_seed=world_seed)
    events = trace.draw_events(
        cfg.rounds, cfg.n_zones, cfg.rounds_per_day, rng_seed=world_seed
    )
    return trace.build_round_trace(cfg, hourly, events)


def _add_common(p: argparse.ArgumentParser, with_trace: bool = True) -> None:
    p.add_argument("--config", metavar="FILE", help="key=value config file")
    p.add_argument("--set", metavar="KEY=VALUE", action="append",
                   help="override one config field (repeatable)")
    if with_trace:
        p.add_argument("--trace", metavar="CSV", help="hourly trace to replay")
        p.add_argument("--events", metavar="CSV", help="event schedule for --trace")
        p.add_argument("--synthetic", action="store_true",
                       help="synthesize the trace instead of loading one")
        p.add_argument("--hierarchy", choices=("on", "off"),
                       help="toggle per-zone budget allocation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgesense",
        description="Trace-driven simulator for sensor activation policies.",
    )
    parser.add_argument("--version", action="version", version=f"edgesense {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-trace", help="write an hourly synthetic trace CSV")
    _add_common(g, with_trace=False)
    g.add_argument("--seed", type=int, help="generator seed (default: config seed)")
    g.add_argument("--out", required=True, metavar="CSV", help="hourly trace output path")
    g.add_argument("--events-out", metavar="CSV", help="also write an event schedule")

    r = sub.add_parser("run", help="simulate one policy over a trace")
    _add_common(r)
    r.add_argument("--policy", required=True, help="static, periodic, ucb or adaptive")
    r.add_argument("--seed", type=int, help="run seed (default: config seed)")
    r.add_argument("--out", metavar="JSON", help="write the full run record")
    r.add_argument("--round-log", metavar="CSV", help="write the per-round activation log")

    c = sub.add_parser("compare", help="run policies x seeds over one shared trace")
    _add_common(c)
    c.add_argument("--policies", default=",".join(k.value for k in POLICY_ORDER),
                   help="comma-separated policy names (default: all four)")
    c.add_argument("--seeds", default="1..5", help="seed list: '3', '1,2,7' or '1..5'")
    c.add_argument("--jobs", type=int, default=1, help="parallel workers (default 1)")
    c.add_argument("--out", metavar="DIR", help="directory for summary artifacts")

    p = sub.add_parser("report", help="render saved comparison or run output")
    p.add_argument("--in", dest="input", required=True, metavar="PATH",
                   help="comparison dir, summary.json, or run JSON")
    p.add_argument("--format", choices=("text", "json", "csv"), default="text")
    p.add_argument("--out", metavar="FILE", help="write instead of printing")
    return parser


def _cmd_gen_trace(args) -> int:
    cfg = _load_cfg(args)
    seed = cfg.seed if args.seed is None else args.seed
    hourly = trace.generate_synthetic(cfg, rng_seed=seed)
    trace.write_csv(hourly, args.out)
    print(f"wrote {args.out}: {hourly.n_rounds} hourly frames, {hourly.n_zones} zones")
    if args.events_out:
        events = trace.draw_events(cfg.rounds, cfg.n_zones, cfg.rounds_per_day, rng_seed=seed)
        trace.write_events_csv(events, args.events_out)
        print(f"wrote {args.events_out}: {len(events)} events")
    return 0


def _run_metrics_text(m: metrics.RunMetrics) -> str:
    det = "n/a" if m.detection_rate is None else f"{m.detection_rate * 100:.1f}% ({m.n_detected}/{m.n_events})"
    life = "inf" if math.isinf(m.lifetime) else f"{m.lifetime:.0f} d"
    return (
        f"policy={m.policy} seed={m.seed} rounds={m.rounds}\n"
        f"  energy      {m.avg_daily_energy:.2f} mAh/node/day (total {m.total_spent:.1f} mAh)\n"
        f"  detection   {det}\n"
        f"  lifetime    {life}\n"
        f"  activations {m.mean_selected_per_round:.1f} nodes/round"
    )


def _cmd_run(args) -> int:
    cfg = _load_cfg(args)
    seed = cfg.seed if args.seed is None else args.seed
    policy = PolicyKind.from_name(args.policy)
    traces = _build_traces(cfg, args, world_seed=seed)
    t0 = time.perf_counter()
    run = run_simulation(cfg, traces, policy, seed=seed)
    log.info("run finished in %.2fs", time.perf_counter() - t0)
    print(_run_metrics_text(metrics.compute_run_metrics(run)))
    if run.clamp_warnings:
        log.warning("%d feedback values were clamped into [0, 1]", run.clamp_warnings)
    if args.out:
        save_run(run, args.out)
        print(f"wrote {args.out}")
    if args.round_log:
        write_round_log_csv(run, args.round_log)
        print(f"wrote {args.round_log}")
    return 0


def _compare_task(payload) -> RunResult:
    cfg_values, traces, policy_name, seed = payload
    cfg = SimConfig(**cfg_values)
    return run_simulation(cfg, traces, PolicyKind.from_name(policy_name), seed=seed)


def run_comparison(cfg: SimConfig, traces: TraceSet, policies, seeds, jobs: int = 1) -> metrics.Comparison:
    """Simulate every (policy, seed) pair over one shared trace and aggregate.
    Results are merged in task order, so worker count never changes output."""
    tasks = [(cfg.to_dict(), traces, k.value, s) for k in policies for s in seeds]
    if jobs > 1 and len(tasks) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_compare_task, tasks))
    else:
        runs = [_compare_task(t) for t in tasks]
    return metrics.compare(runs, policy_order=[k.value for k in policies])


def _cmd_compare(args) -> int:
    cfg = _load_cfg(args)
    policies = _parse_policies(args.policies)
    seeds = parse_seed_list(args.seeds)
    traces = _build_traces(cfg, args, world_seed=cfg.seed)
    t0 = time.perf_counter()
    comp = run_comparison(cfg, traces, policies, seeds, jobs=max(1, args.jobs))
    log.info("%d runs finished in %.2fs", len(policies) * len(seeds), time.perf_counter() - t0)
    text = metrics.render_text(comp)
    print(text, end="")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        outputs = {
            "summary.txt": text,
            "summary.json": metrics.render_json(comp),
            "summary.csv": metrics.render_summary_csv(comp),
            "per_seed.csv": metrics.render_per_seed_csv(comp),
            "plot.csv": metrics.render_plot_csv(comp),
        }
        for name, content in outputs.items():
            atomic_write_text(os.path.join(args.out, name), content)
        print(f"wrote {len(outputs)} files to {args.out}")
    return 0


def _comparison_from_dict(d: dict) -> str:
    # saved summaries re-render from their JSON form without re-simulation
    lines = []
    policies = d["policies"]
    header = ["policy", "energy mAh/day", "detection %", "lifetime d", "energy cut %"]
    rows = []
    for p in policies:
        det = p["detection_rate"]
        rows.append([
            p["policy"],
            f"{p['avg_daily_energy_mAh']:.1f}",
            "n/a" if det is None else f"{det * 100:.1f}",
            "inf" if p["lifetime_days"] is None else f"{p['lifetime_days']:.0f}",
            "baseline" if p["energy_reduction_pct"] in (None, 0.0) and p["policy"] == "static"
            else ("n/a" if p["energy_reduction_pct"] is None else f"{p['energy_reduction_pct']:+.1f}"),
        ])
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip())
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    lines.append("")
    lines.append(f"seeds: {', '.join(str(s) for s in d['seeds'])}   trace: {d['trace_hash'][:12]}")
    return "\n".join(lines) + "\n"


def _cmd_report(args) -> int:
    path = args.input
    if os.path.isdir(path):
        path = os.path.join(path, "summary.json")
    with open(path, "r", encoding="utf-8") as fh:
        d = json.load(fh)
    fmt = d.get("format", "")
    if fmt == "edgesense-comparison/1":
        if args.format == "json":
            out = stable_json(d)
        elif args.format == "csv":
            out = _summary_csv_from_dict(d)
        else:
            out = _comparison_from_dict(d)
    elif fmt == engine.RUN_FORMAT:
        run = engine.load_run(path)
        m = metrics.compute_run_metrics(run)
        if args.format == "json":
            out = stable_json(metrics.to_json_dict(metrics.compare([run])))
        elif args.format == "csv":
            out = metrics.render_per_seed_csv(metrics.compare([run]))
        else:
            out = _run_metrics_text(m) + "\n"
    else:
        raise TraceError(f"{path}: unrecognized format {fmt!r}")
    if args.out:
        atomic_write_text(args.out, out)
        print(f"wrote {args.out}")
    else:
        print(out, end="")
    return 0


def _summary_csv_from_dict(d: dict) -> str:
    import csv as _csv
    import io

    buf = io.StringIO()
    w = _csv.writer(buf, lineterminator="\n")
    w.writerow(["policy", "avg_daily_energy_mAh", "detection_rate", "lifetime_days",
                "energy_reduction_pct", "detection_delta_pp", "lifetime_extension_pct"])
    for p in d["policies"]:
        w.writerow([
            p["policy"], repr(p["avg_daily_energy_mAh"]),
            "" if p["detection_rate"] is None else repr(p["detection_rate"]),
            "" if p["lifetime_days"] is None else int(p["lifetime_days"]),
            "" if p["energy_reduction_pct"] is None else repr(p["energy_reduction_pct"]),
            "" if p["detection_delta_pp"] is None else repr(p["detection_delta_pp"]),
            "" if p["lifetime_extension_pct"] is None else repr(p["lifetime_extension_pct"]),
        ])
    return buf.getvalue()


_COMMANDS = {
    "gen-trace": _cmd_gen_trace,
    "run": _cmd_run,
    "compare": _cmd_compare,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, TraceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc.strerror}: {exc.filename}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        log.exception("unexpected failure")
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
