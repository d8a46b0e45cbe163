"""Precision and responsiveness evaluation against the exact oracle.

Top-k precision is unordered set overlap between the sketch's top-k pids
and the oracle's, at the same tie-break rule. Responsiveness is studied
by replaying a trace on a simulated clock and snapshotting at a fixed
cadence; a periodogram over the snapshot series shows whether cyclic
behavior survives the chosen sampling interval.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .cpu import CpuTracker
from .memory import MemoryTracker
from .oracle import OracleState
from .sketch import TopKReport
from .trace import MemoryEvent, Trace

IDLE_PID = 0


@dataclass
class PrecisionResult:
    """Overlap of sketch vs oracle top-k at one k.

    ``truncated`` is set when fewer than k distinct pids existed, in which
    case the overlap denominator is the distinct count instead of k.
    """

    k: int
    overlap_pct: float
    timestamp: int = 0
    truncated: bool = False


def precision_at_k(
    tracker: Union[MemoryTracker, CpuTracker],
    oracle: OracleState,
    ks: Sequence[int],
) -> list[PrecisionResult]:
    """Set overlap between tracker top-k and exact top-k for each k.

    The oracle side is filtered the way the sketch path is fed: priority
    pids never enter the sketch, and the CPU pipeline never sees idle
    (pid 0), so both are excluded from the exact ranking being compared.
    """
    exclude = set(tracker.priority)
    if isinstance(tracker, CpuTracker):
        exclude.add(IDLE_PID)
        oracle_rank = oracle.top_cpu
    else:
        oracle_rank = oracle.top_mem
    results = []
    for k in ks:
        if k < 1:
            raise ValueError(f"k must be at least 1, got {k}")
        exact = oracle_rank(k, exclude=exclude)
        reported = set(tracker.top_k(k).pids())
        denom = min(k, len(exact))
        if denom == 0:
            overlap = 100.0
        else:
            overlap = 100.0 * len(reported & {p for p, _ in exact}) / denom
        results.append(
            PrecisionResult(
                k=k,
                overlap_pct=overlap,
                timestamp=tracker.last_ts,
                truncated=len(exact) < k,
            )
        )
    return results


@dataclass
class SnapshotSeries:
    """Metric samples on the replay clock, spaced exactly interval_ns."""

    interval_ns: int
    metric: str
    points: list[tuple[int, Union[int, TopKReport]]] = field(default_factory=list)

    def timestamps(self) -> list[int]:
        return [t for t, _ in self.points]

    def values(self) -> list:
        return [v for _, v in self.points]


def snapshot_replay(
    trace: Trace,
    d: int,
    n: int,
    interval_ns: int,
    metric: str = "pid_usage",
    pipeline: str = "memory",
    pid: Optional[int] = None,
    k: int = 10,
    seed: int = 0,
    priority_pids: Iterable[int] = (),
    span_ns: Optional[int] = None,
) -> SnapshotSeries:
    """Replay a trace, sampling a metric at every multiple of interval_ns.

    Pure simulation on the trace's own timestamps; wall time plays no
    part. The snapshot at time T reflects every event with ts <= T. The
    series covers multiples of the interval up to ``span_ns`` (default:
    the first multiple at or past the last event). An empty trace yields
    an empty series.

    ``metric``: "pid_usage" samples one pid's current usage (the exact
    counter for a priority pid, the sketch estimate otherwise; requires
    ``pid``); "topk" samples a full TopKReport.
    """
    if interval_ns < 1:
        raise ValueError(f"interval_ns must be >= 1, got {interval_ns}")
    if metric not in ("pid_usage", "topk"):
        raise ValueError(f"unknown metric {metric!r}")
    if metric == "pid_usage" and pid is None:
        raise ValueError("pid_usage metric requires a pid")
    if pipeline not in ("memory", "cpu"):
        raise ValueError(f"unknown pipeline {pipeline!r}")

    series = SnapshotSeries(interval_ns=interval_ns, metric=metric)
    if len(trace) == 0:
        return series
    if pipeline == "memory":
        tracker = MemoryTracker(d, n, seed=seed, priority_pids=priority_pids)
        feed = tracker.on_event
    else:
        tracker = CpuTracker(d, n, seed=seed, priority_pids=priority_pids)
        feed = tracker.on_sched

    def sample():
        if metric == "topk":
            return tracker.top_k(k)
        if pid in tracker.priority:
            return tracker.priority[pid]
        return tracker.sketch.query(pid)

    if span_ns is None:
        last = trace.last_ts()
        steps = max(1, -(-last // interval_ns))  # ceil, at least one point
    else:
        steps = max(1, -(-span_ns // interval_ns))

    events = trace.events()
    pending = next(events, None)
    for step in range(1, steps + 1):
        horizon = step * interval_ns
        while pending is not None and pending.ts <= horizon:
            if pipeline == "memory":
                if isinstance(pending, MemoryEvent):
                    feed(pending)
            elif not isinstance(pending, MemoryEvent):
                feed(pending)
            pending = next(events, None)
        series.points.append((horizon, sample()))
    return series


def resolution_ratio(fine_interval_ns: float, coarse_interval_ns: float) -> float:
    """How many fine-grained samples fit in one coarse sample: coarse/fine."""
    if fine_interval_ns <= 0 or coarse_interval_ns <= 0:
        raise ValueError("intervals must be positive")
    return coarse_interval_ns / fine_interval_ns


def periodogram(values: Sequence[float], interval_ns: int):
    """Magnitude spectrum of a mean-removed snapshot series.

    Returns (frequencies_hz, magnitudes), DC excluded.
    """
    x = np.asarray(values, dtype=np.float64)
    if len(x) < 2:
        return np.zeros(0), np.zeros(0)
    x = x - x.mean()
    mags = np.abs(np.fft.rfft(x))
    freqs = np.fft.rfftfreq(len(x), d=interval_ns * 1e-9)
    return freqs[1:], mags[1:]


def dominant_frequency_hz(values: Sequence[float], interval_ns: int) -> float:
    """Frequency of the largest non-DC periodogram bin; 0.0 for flat or
    too-short series."""
    freqs, mags = periodogram(values, interval_ns)
    if len(mags) == 0 or not mags.any():
        return 0.0
    return float(freqs[int(np.argmax(mags))])
