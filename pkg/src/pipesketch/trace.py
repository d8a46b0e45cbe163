"""Replayable event traces: record types, columnar storage, JSONL format.

A trace is an ordered stream of three record kinds, one JSON object per
line, ordered by ``ts`` (nanoseconds since trace start):

    {"ts":0,"type":"alloc","pid":7,"tid":7,"ptr":"1","size":4096}
    {"ts":10,"type":"dealloc","pid":7,"tid":7,"ptr":"1"}
    {"ts":20,"type":"sched","cpu":0,"prev_tid":0,"next_tid":7,"next_pid":7}

``ptr`` is serialized as a decimal string so 64-bit tokens survive JSON
readers that truncate integers at 53 bits. Unknown fields are rejected in
strict mode and ignored otherwise.

In memory a trace is stored column-wise (one numpy array per field, memory
and sched events in separate blocks) so that generation, oracle accounting,
and bulk replay stay vectorizable; ``events()`` re-materializes record
objects in file order for per-event consumers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Union

import numpy as np

from .errors import TraceFormatError

ALLOC = "alloc"
DEALLOC = "dealloc"
SCHED = "sched"

_U64_MAX = (1 << 64) - 1
_I64_MAX = (1 << 63) - 1

_ALLOC_FIELDS = {"ts", "type", "pid", "tid", "ptr", "size"}
_DEALLOC_FIELDS = {"ts", "type", "pid", "tid", "ptr"}
_SCHED_FIELDS = {"ts", "type", "cpu", "prev_tid", "next_tid", "next_pid"}


@dataclass(frozen=True)
class MemoryEvent:
    """One allocation or deallocation.

    ``size`` is meaningful for allocations only; a deallocation's size is
    resolved through the live ptr-size table at replay time.
    """

    ts: int
    kind: str  # ALLOC or DEALLOC
    pid: int
    tid: int
    ptr: int
    size: int = 0


@dataclass(frozen=True)
class SchedEvent:
    """One scheduler context switch on a logical CPU."""

    ts: int
    cpu: int
    prev_tid: int
    next_tid: int
    next_pid: int


Event = Union[MemoryEvent, SchedEvent]


class Trace:
    """A column-stored event stream in replay order.

    Memory and sched events live in separate column blocks; ``*_seq``
    holds each event's position in the original stream, so interleaving
    (and therefore replay order) is exactly reconstructible.
    """

    __slots__ = (
        "mem_seq", "mem_ts", "mem_is_dealloc", "mem_pid", "mem_tid",
        "mem_ptr", "mem_size",
        "sched_seq", "sched_ts", "sched_cpu", "sched_prev", "sched_next",
        "sched_next_pid",
        "skipped_lines",
    )

    def __init__(
        self,
        mem_seq, mem_ts, mem_is_dealloc, mem_pid, mem_tid, mem_ptr, mem_size,
        sched_seq, sched_ts, sched_cpu, sched_prev, sched_next, sched_next_pid,
        skipped_lines: int = 0,
    ):
        self.mem_seq = np.asarray(mem_seq, dtype=np.int64)
        self.mem_ts = np.asarray(mem_ts, dtype=np.int64)
        self.mem_is_dealloc = np.asarray(mem_is_dealloc, dtype=np.bool_)
        self.mem_pid = np.asarray(mem_pid, dtype=np.int64)
        self.mem_tid = np.asarray(mem_tid, dtype=np.int64)
        self.mem_ptr = np.asarray(mem_ptr, dtype=np.uint64)
        self.mem_size = np.asarray(mem_size, dtype=np.int64)
        self.sched_seq = np.asarray(sched_seq, dtype=np.int64)
        self.sched_ts = np.asarray(sched_ts, dtype=np.int64)
        self.sched_cpu = np.asarray(sched_cpu, dtype=np.int64)
        self.sched_prev = np.asarray(sched_prev, dtype=np.int64)
        self.sched_next = np.asarray(sched_next, dtype=np.int64)
        self.sched_next_pid = np.asarray(sched_next_pid, dtype=np.int64)
        self.skipped_lines = skipped_lines

    # -- construction ------------------------------------------------------

    @classmethod
    def empty(cls) -> "Trace":
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z, z.astype(bool), z, z, z.astype(np.uint64), z, z, z, z, z, z, z)

    @classmethod
    def from_events(cls, events: Iterable[Event]) -> "Trace":
        """Build a trace from record objects; order is preserved.

        Raises ValueError when timestamps regress, since replay and the
        snapshot clock rely on ts-ordered streams.
        """
        mem = {k: [] for k in ("seq", "ts", "dealloc", "pid", "tid", "ptr", "size")}
        sch = {k: [] for k in ("seq", "ts", "cpu", "prev", "next", "next_pid")}
        last_ts = None
        for seq, ev in enumerate(events):
            if last_ts is not None and ev.ts < last_ts:
                raise ValueError(
                    f"event {seq} has ts={ev.ts}, before predecessor ts={last_ts}"
                )
            last_ts = ev.ts
            if isinstance(ev, MemoryEvent):
                if ev.kind not in (ALLOC, DEALLOC):
                    raise ValueError(f"unknown memory event kind {ev.kind!r}")
                mem["seq"].append(seq)
                mem["ts"].append(ev.ts)
                mem["dealloc"].append(ev.kind == DEALLOC)
                mem["pid"].append(ev.pid)
                mem["tid"].append(ev.tid)
                mem["ptr"].append(ev.ptr)
                mem["size"].append(ev.size)
            elif isinstance(ev, SchedEvent):
                sch["seq"].append(seq)
                sch["ts"].append(ev.ts)
                sch["cpu"].append(ev.cpu)
                sch["prev"].append(ev.prev_tid)
                sch["next"].append(ev.next_tid)
                sch["next_pid"].append(ev.next_pid)
            else:
                raise TypeError(f"not a trace event: {ev!r}")
        return cls(
            mem["seq"], mem["ts"], mem["dealloc"], mem["pid"], mem["tid"],
            np.array(mem["ptr"], dtype=np.uint64), mem["size"],
            sch["seq"], sch["ts"], sch["cpu"], sch["prev"], sch["next"],
            sch["next_pid"],
        )

    # -- views ---------------------------------------------------------------

    @property
    def n_mem(self) -> int:
        return len(self.mem_ts)

    @property
    def n_sched(self) -> int:
        return len(self.sched_ts)

    def __len__(self) -> int:
        return self.n_mem + self.n_sched

    def last_ts(self) -> int:
        """Timestamp of the final event, 0 for an empty trace."""
        candidates = []
        if self.n_mem:
            candidates.append(int(self.mem_ts[-1]))
        if self.n_sched:
            candidates.append(int(self.sched_ts[-1]))
        return max(candidates, default=0)

    def mem_event(self, i: int) -> MemoryEvent:
        return MemoryEvent(
            ts=int(self.mem_ts[i]),
            kind=DEALLOC if self.mem_is_dealloc[i] else ALLOC,
            pid=int(self.mem_pid[i]),
            tid=int(self.mem_tid[i]),
            ptr=int(self.mem_ptr[i]),
            size=int(self.mem_size[i]),
        )

    def sched_event(self, i: int) -> SchedEvent:
        return SchedEvent(
            ts=int(self.sched_ts[i]),
            cpu=int(self.sched_cpu[i]),
            prev_tid=int(self.sched_prev[i]),
            next_tid=int(self.sched_next[i]),
            next_pid=int(self.sched_next_pid[i]),
        )

    def events(self) -> Iterator[Event]:
        """Record objects in replay (original stream) order."""
        i = j = 0
        n_mem, n_sched = self.n_mem, self.n_sched
        mem_seq, sched_seq = self.mem_seq, self.sched_seq
        while i < n_mem or j < n_sched:
            take_mem = j >= n_sched or (i < n_mem and mem_seq[i] < sched_seq[j])
            if take_mem:
                yield self.mem_event(i)
                i += 1
            else:
                yield self.sched_event(j)
                j += 1


# -- JSONL serialization ------------------------------------------------------


def event_to_json(ev: Event) -> str:
    """One compact JSON line for an event (no trailing newline)."""
    if isinstance(ev, MemoryEvent):
        if ev.kind == ALLOC:
            return (
                f'{{"ts":{ev.ts},"type":"alloc","pid":{ev.pid},"tid":{ev.tid},'
                f'"ptr":"{ev.ptr}","size":{ev.size}}}'
            )
        return (
            f'{{"ts":{ev.ts},"type":"dealloc","pid":{ev.pid},"tid":{ev.tid},'
            f'"ptr":"{ev.ptr}"}}'
        )
    return (
        f'{{"ts":{ev.ts},"type":"sched","cpu":{ev.cpu},"prev_tid":{ev.prev_tid},'
        f'"next_tid":{ev.next_tid},"next_pid":{ev.next_pid}}}'
    )


def _require_int(obj: dict, key: str, lo: int = 0, hi: int = _I64_MAX) -> int:
    v = obj.get(key)
    if not isinstance(v, int) or isinstance(v, bool) or not (lo <= v <= hi):
        raise ValueError(f"field {key!r} must be an integer in [{lo}, {hi}], got {v!r}")
    return v


def _require_ptr(obj: dict) -> int:
    v = obj.get("ptr")
    if not isinstance(v, str) or not v.isdigit():
        raise ValueError(f"field 'ptr' must be a decimal string, got {v!r}")
    ptr = int(v)
    if ptr > _U64_MAX:
        raise ValueError(f"ptr {v} exceeds 64 bits")
    return ptr


def parse_record(obj: dict, strict: bool = False) -> Event:
    """Decode one parsed JSON object into an event record.

    Raises ValueError on malformed records. In strict mode any field
    outside the record type's schema is also an error.
    """
    rtype = obj.get("type")
    if rtype == ALLOC:
        allowed = _ALLOC_FIELDS
    elif rtype == DEALLOC:
        allowed = _DEALLOC_FIELDS
    elif rtype == SCHED:
        allowed = _SCHED_FIELDS
    else:
        raise ValueError(f"unknown record type {rtype!r}")
    if strict:
        extra = set(obj) - allowed
        if extra:
            raise ValueError(f"unknown fields for {rtype}: {sorted(extra)}")
    ts = _require_int(obj, "ts")
    if rtype == SCHED:
        return SchedEvent(
            ts=ts,
            cpu=_require_int(obj, "cpu"),
            prev_tid=_require_int(obj, "prev_tid"),
            next_tid=_require_int(obj, "next_tid"),
            next_pid=_require_int(obj, "next_pid"),
        )
    pid = _require_int(obj, "pid")
    tid = _require_int(obj, "tid")
    ptr = _require_ptr(obj)
    if rtype == ALLOC:
        size = _require_int(obj, "size", lo=1)
        return MemoryEvent(ts=ts, kind=ALLOC, pid=pid, tid=tid, ptr=ptr, size=size)
    return MemoryEvent(ts=ts, kind=DEALLOC, pid=pid, tid=tid, ptr=ptr, size=0)


def parse_line(line: str, strict: bool = False) -> Event:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ValueError("record is not a JSON object")
    return parse_record(obj, strict=strict)


def write_trace(trace: Trace, path) -> int:
    """Write a trace as JSONL; returns the number of bytes written."""
    path = Path(path)
    total = 0
    with path.open("w", encoding="utf-8") as fh:
        for ev in trace.events():
            total += fh.write(event_to_json(ev) + "\n")
    return total


def read_trace(path, strict: bool = False) -> Trace:
    """Load a JSONL trace file.

    Strict mode aborts with TraceFormatError (carrying the 1-based line
    number) on the first malformed or out-of-order line; lenient mode
    skips such lines and reports the count in ``Trace.skipped_lines``.
    Blank lines are ignored in both modes.
    """
    mem = {k: [] for k in ("seq", "ts", "dealloc", "pid", "tid", "ptr", "size")}
    sch = {k: [] for k in ("seq", "ts", "cpu", "prev", "next", "next_pid")}
    skipped = 0
    seq = 0
    last_ts = None
    loads = json.loads
    with Path(path).open("r", encoding="utf-8") as fh:
        # field extraction is inlined rather than routed through event
        # objects: at millions of lines the per-record dataclass costs more
        # than the parse itself. Validation stays in the shared _require_*
        # helpers so this loop and parse_record cannot drift apart.
        for lineno, line in enumerate(fh, start=1):
            try:
                obj = loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("record is not a JSON object")
                rtype = obj.get("type")
                if rtype == ALLOC or rtype == DEALLOC:
                    if strict:
                        extra = set(obj) - (_ALLOC_FIELDS if rtype == ALLOC else _DEALLOC_FIELDS)
                        if extra:
                            raise ValueError(f"unknown fields for {rtype}: {sorted(extra)}")
                    ts = _require_int(obj, "ts")
                    if last_ts is not None and ts < last_ts:
                        raise ValueError(f"ts={ts} regresses below predecessor ts={last_ts}")
                    pid = _require_int(obj, "pid")
                    tid = _require_int(obj, "tid")
                    ptr = _require_ptr(obj)
                    size = _require_int(obj, "size", lo=1) if rtype == ALLOC else 0
                    last_ts = ts
                    mem["seq"].append(seq)
                    mem["ts"].append(ts)
                    mem["dealloc"].append(rtype == DEALLOC)
                    mem["pid"].append(pid)
                    mem["tid"].append(tid)
                    mem["ptr"].append(ptr)
                    mem["size"].append(size)
                elif rtype == SCHED:
                    if strict:
                        extra = set(obj) - _SCHED_FIELDS
                        if extra:
                            raise ValueError(f"unknown fields for sched: {sorted(extra)}")
                    ts = _require_int(obj, "ts")
                    if last_ts is not None and ts < last_ts:
                        raise ValueError(f"ts={ts} regresses below predecessor ts={last_ts}")
                    cpu = _require_int(obj, "cpu")
                    prev_tid = _require_int(obj, "prev_tid")
                    next_tid = _require_int(obj, "next_tid")
                    next_pid = _require_int(obj, "next_pid")
                    last_ts = ts
                    sch["seq"].append(seq)
                    sch["ts"].append(ts)
                    sch["cpu"].append(cpu)
                    sch["prev"].append(prev_tid)
                    sch["next"].append(next_tid)
                    sch["next_pid"].append(next_pid)
                else:
                    raise ValueError(f"unknown record type {rtype!r}")
            except ValueError as exc:
                if not line.strip():
                    continue  # blank lines are ignored, not counted
                if strict:
                    msg = f"invalid JSON: {exc}" if isinstance(exc, json.JSONDecodeError) else str(exc)
                    raise TraceFormatError(msg, line=lineno) from exc
                skipped += 1
                continue
            seq += 1
    return Trace(
        mem["seq"], mem["ts"], mem["dealloc"], mem["pid"], mem["tid"],
        np.array(mem["ptr"], dtype=np.uint64), mem["size"],
        sch["seq"], sch["ts"], sch["cpu"], sch["prev"], sch["next"],
        sch["next_pid"],
        skipped_lines=skipped,
    )
