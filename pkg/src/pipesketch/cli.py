"""Command-line entry point: generate, replay, eval, snapshot.

Exit codes: 0 success, 1 runtime failure (I/O, malformed trace in strict
mode), 2 usage error. All output is deterministic for fixed flags: the
only randomness is the seeded generator, and no report field depends on
wall time. PIPESKETCH_SEED serves as the fallback seed when --seed is
not given.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

from .cpu import CpuTracker
from .errors import PipesketchError
from .evaluate import precision_at_k, snapshot_replay
from .memory import MemoryTracker
from .oracle import ground_truth
from .sketch import TopKReport
from .trace import read_trace, write_trace
from .workload import WorkloadSpec, generate

_KIND_FLAGS = {
    "zipf-alloc": "zipf_alloc",
    "fork-bomb": "fork_bomb",
    "cyclic-train": "cyclic_train",
    "sched-mix": "sched_mix",
}


@dataclass
class RunConfig:
    """Sketch and replay settings shared by replay/eval/snapshot."""

    d: int = 5
    n: int = 2000
    seed: int = 0
    priority_pids: tuple = ()
    ks: tuple = (10,)
    interval_ns: int = 2_000_000_000
    strict: bool = False
    identity_hash: bool = False

    def hash_params(self):
        return [(1, 0)] * self.d if self.identity_hash else None


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _unit_fraction(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must be in [0, 1], got {value}")
    return value


def _k_list(text: str) -> tuple:
    parts = [p for p in text.split(",") if p.strip()]
    if not parts:
        raise argparse.ArgumentTypeError("expected a comma-separated list of k values")
    ks = tuple(int(p) for p in parts)
    if any(k < 1 for k in ks):
        raise argparse.ArgumentTypeError("every k must be >= 1")
    return ks


def _env_seed() -> int:
    return int(os.environ.get("PIPESKETCH_SEED", "0"))


def _add_sketch_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("-d", "--stages", type=_positive_int, default=5,
                   help="pipeline stages (default 5)")
    p.add_argument("-n", "--slots", type=_positive_int, default=2000,
                   help="slots per stage (default 2000)")
    p.add_argument("--seed", type=int, default=None,
                   help="hash-parameter seed (default: $PIPESKETCH_SEED or 0)")
    p.add_argument("--priority-pid", type=_nonneg_int, action="append", default=[],
                   metavar="PID", help="track this pid losslessly (repeatable)")
    p.add_argument("--identity-hash", action="store_true",
                   help="use a=1, b=0 in every stage (deterministic slot layout)")
    p.add_argument("--strict", action="store_true",
                   help="abort on the first malformed trace line")


def _config_from(args) -> RunConfig:
    return RunConfig(
        d=args.stages,
        n=args.slots,
        seed=args.seed if args.seed is not None else _env_seed(),
        priority_pids=tuple(sorted(set(args.priority_pid))),
        ks=getattr(args, "ks", (10,)),
        interval_ns=getattr(args, "interval_ns", 2_000_000_000),
        strict=args.strict,
        identity_hash=args.identity_hash,
    )


def _emit(text: str, out_path) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        print(text, end="" if text.endswith("\n") else "\n")


def _topk_cells(report: TopKReport) -> list:
    return [[e.pid, e.value] for e in report.entries]


# -- commands -----------------------------------------------------------------


def cmd_generate(args) -> int:
    spec = WorkloadSpec(
        kind=_KIND_FLAGS[args.kind],
        pid_count=args.pids,
        event_count=args.events,
        zipf_s=args.zipf_s,
        free_ratio=args.free_ratio,
        period_ns=args.period_ns,
        seed=args.seed if args.seed is not None else _env_seed(),
    )
    trace = generate(spec)
    nbytes = write_trace(trace, args.output)
    print(f"wrote {args.output}: {len(trace)} events, {nbytes} bytes")
    return 0


def cmd_replay(args) -> int:
    cfg = _config_from(args)
    trace = read_trace(args.trace, strict=cfg.strict)
    report = {
        "trace": {
            "path": str(args.trace),
            "events": len(trace),
            "memory_events": trace.n_mem,
            "sched_events": trace.n_sched,
            "skipped_lines": trace.skipped_lines,
            "last_ts": trace.last_ts(),
        },
        "config": {
            "stages": cfg.d,
            "slots": cfg.n,
            "seed": cfg.seed,
            "priority_pids": list(cfg.priority_pids),
            "identity_hash": cfg.identity_hash,
        },
    }
    if args.pipeline in ("memory", "both"):
        tracker = MemoryTracker(
            cfg.d, cfg.n, seed=cfg.seed,
            priority_pids=cfg.priority_pids, hash_params=cfg.hash_params(),
        )
        tracker.replay(trace)
        report["memory"] = _pipeline_report(tracker, args.k)
        report["memory"]["live_ptrs"] = tracker.live_ptrs
    if args.pipeline in ("cpu", "both"):
        tracker = CpuTracker(
            cfg.d, cfg.n, seed=cfg.seed,
            priority_pids=cfg.priority_pids, hash_params=cfg.hash_params(),
        )
        tracker.replay(trace)
        report["cpu"] = _pipeline_report(tracker, args.k)
    _emit(json.dumps(report, sort_keys=True, indent=2) + "\n", args.output)
    return 0


def _pipeline_report(tracker, k: int) -> dict:
    sk = tracker.sketch
    return {
        "top_k": _topk_cells(tracker.top_k(k)),
        "priority": {str(pid): value for pid, value in sorted(tracker.priority.items())},
        "stats": tracker.stats.as_dict(),
        "footprint_bytes": sk.footprint_bytes(),
        "sketch": {
            "mode": sk.mode,
            "occupied_slots": sk.occupied_slots(),
            "inserted_value": sk.inserted_value,
            "decremented_value": sk.decremented_value,
            "discarded_entries": sk.discarded_entries,
            "discarded_value": sk.discarded_value,
        },
    }


def cmd_eval(args) -> int:
    cfg = _config_from(args)
    trace = read_trace(args.trace, strict=cfg.strict)
    oracle = ground_truth(trace)
    mem = MemoryTracker(cfg.d, cfg.n, seed=cfg.seed,
                        priority_pids=cfg.priority_pids, hash_params=cfg.hash_params())
    mem.replay(trace)
    cpu = CpuTracker(cfg.d, cfg.n, seed=cfg.seed,
                     priority_pids=cfg.priority_pids, hash_params=cfg.hash_params())
    cpu.replay(trace)
    mem_res = {r.k: r for r in precision_at_k(mem, oracle, cfg.ks)}
    cpu_res = {r.k: r for r in precision_at_k(cpu, oracle, cfg.ks)}
    if args.format == "csv":
        lines = ["k,cpu_accuracy_pct,mem_accuracy_pct"]
        for k in cfg.ks:
            lines.append(f"{k},{cpu_res[k].overlap_pct:.1f},{mem_res[k].overlap_pct:.1f}")
        _emit("\n".join(lines) + "\n", args.output)
    else:
        rows = [
            {
                "k": k,
                "cpu_accuracy_pct": cpu_res[k].overlap_pct,
                "mem_accuracy_pct": mem_res[k].overlap_pct,
                "truncated": cpu_res[k].truncated or mem_res[k].truncated,
            }
            for k in cfg.ks
        ]
        _emit(json.dumps(rows, sort_keys=True, indent=2) + "\n", args.output)
    return 0


def cmd_snapshot(args) -> int:
    cfg = _config_from(args)
    metric = "pid_usage" if args.metric == "pid-usage" else args.metric
    if metric == "pid_usage" and args.pid is None:
        raise PipesketchError("--metric pid-usage requires --pid")
    trace = read_trace(args.trace, strict=cfg.strict)
    series = snapshot_replay(
        trace, d=cfg.d, n=cfg.n, interval_ns=args.interval_ns,
        metric=metric, pipeline=args.pipeline, pid=args.pid, k=args.k,
        seed=cfg.seed, priority_pids=cfg.priority_pids,
    )
    lines = ["timestamp_ns,value"]
    for ts, value in series.points:
        if isinstance(value, TopKReport):
            cell = ";".join(f"{e.pid}:{e.value}" for e in value.entries)
        else:
            cell = str(value)
        lines.append(f"{ts},{cell}")
    _emit("\n".join(lines) + "\n", args.output)
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pipesketch",
        description="Approximate top-k process resource accounting over replayable traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic JSONL trace")
    g.add_argument("--kind", choices=sorted(_KIND_FLAGS), required=True)
    g.add_argument("--pids", type=_positive_int, default=100, help="distinct pid count")
    g.add_argument("--events", type=_positive_int, required=True, help="total event count")
    g.add_argument("--zipf-s", type=float, default=1.2, help="zipf skew exponent")
    g.add_argument("--free-ratio", type=_unit_fraction, default=0.5,
                   help="fraction of allocations later freed")
    g.add_argument("--period-ns", type=_positive_int, default=1_000_000_000,
                   help="cycle period for cyclic-train")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("-o", "--output", required=True, help="trace file path")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("replay", help="replay a trace and report sketch state")
    r.add_argument("trace")
    _add_sketch_flags(r)
    r.add_argument("-k", type=_positive_int, default=10, help="top-k size in the report")
    r.add_argument("--pipeline", choices=["memory", "cpu", "both"], default="both")
    r.add_argument("-o", "--output", default=None, help="report path (default stdout)")
    r.set_defaults(func=cmd_replay)

    e = sub.add_parser("eval", help="top-k precision against the exact oracle")
    e.add_argument("trace")
    _add_sketch_flags(e)
    e.add_argument("--ks", type=_k_list, required=True,
                   help="comma-separated k values, e.g. 1,5,10,20,30")
    e.add_argument("--format", choices=["csv", "json"], default="csv")
    e.add_argument("-o", "--output", default=None)
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("snapshot", help="sample a metric at a fixed replay cadence")
    s.add_argument("trace")
    _add_sketch_flags(s)
    s.add_argument("--interval-ns", type=_positive_int, required=True)
    s.add_argument("--metric", choices=["topk", "pid-usage"], default="pid-usage")
    s.add_argument("--pid", type=_nonneg_int, default=None)
    s.add_argument("--pipeline", choices=["memory", "cpu"], default="memory")
    s.add_argument("-k", type=_positive_int, default=10)
    s.add_argument("-o", "--output", default=None)
    s.set_defaults(func=cmd_snapshot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (PipesketchError, OSError, ValueError) as exc:
        print(f"pipesketch: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
