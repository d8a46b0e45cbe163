"""On-CPU time accounting from scheduler context-switch events.

A switch event closes the outgoing thread's slice (delta between its
scheduled-in timestamp and now, attributed to its owning process) and
opens a slice for the incoming thread. Attribution feeds a monotonic
sketch, or the lossless priority table for user-specified pids. Idle
(pid 0) time is measured but not attributed unless pid 0 is explicitly
in the priority set.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import NotTrackedError
from .sketch import MODE_MONOTONIC, HashPipeSketch, TopKReport
from .trace import SchedEvent, Trace


@dataclass
class CpuStats:
    """Replay observability counters.

    ``first_observations`` are switch-outs of threads never seen switched
    in (cold start); ``negative_deltas`` are whole events rejected because
    the slice delta went backwards (cross-CPU clock skew); ``out_of_order``
    are whole events rejected for regressing the per-CPU clock;
    ``resched_overwrites`` are switch-ins for threads that already had an
    open slice (a missed switch-out, overwritten so a lost event cannot
    fabricate a giant delta). ``measured_ns`` sums every accepted positive
    delta, attributed or idle-suppressed.
    """

    events: int = 0
    attributed_slices: int = 0
    attributed_ns: int = 0
    measured_ns: int = 0
    idle_suppressed_ns: int = 0
    first_observations: int = 0
    negative_deltas: int = 0
    out_of_order: int = 0
    resched_overwrites: int = 0
    zero_deltas: int = 0

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


class CpuTracker:
    """Single-writer consumer of scheduler switch events."""

    def __init__(
        self,
        d: int,
        n: int,
        seed: int = 0,
        priority_pids: Iterable[int] = (),
        hash_params: Optional[Sequence[tuple[int, int]]] = None,
    ):
        self.sketch = HashPipeSketch(
            d, n, seed=seed, mode=MODE_MONOTONIC, hash_params=hash_params
        )
        self.priority = {int(pid): 0 for pid in priority_pids}
        self.sched_in: dict[int, tuple[int, int, int]] = {}  # tid -> (ts, pid, cpu)
        self._cpu_last_ts: dict[int, int] = {}
        self.stats = CpuStats()
        self.last_ts = 0

    def on_sched(self, e: SchedEvent) -> None:
        """Apply one switch event. Events must arrive in trace order."""
        st = self.stats
        st.events += 1
        last = self._cpu_last_ts.get(e.cpu)
        if last is not None and e.ts < last:
            st.out_of_order += 1
            return
        rec = self.sched_in.get(e.prev_tid)
        if rec is not None:
            delta = e.ts - rec[0]
            if delta < 0:
                st.negative_deltas += 1
                return
        else:
            st.first_observations += 1
        self._cpu_last_ts[e.cpu] = e.ts
        if e.ts > self.last_ts:
            self.last_ts = e.ts
        if rec is not None:
            del self.sched_in[e.prev_tid]
            pid = rec[1]
            if delta == 0:
                st.zero_deltas += 1
            else:
                st.measured_ns += delta
                if pid in self.priority:
                    self.priority[pid] += delta
                    st.attributed_slices += 1
                    st.attributed_ns += delta
                elif pid == 0:
                    st.idle_suppressed_ns += delta
                else:
                    self.sketch.insert_positive(pid, delta)
                    st.attributed_slices += 1
                    st.attributed_ns += delta
        if e.next_tid in self.sched_in:
            st.resched_overwrites += 1
        self.sched_in[e.next_tid] = (e.ts, e.next_pid, e.cpu)

    def replay(self, trace: Trace) -> None:
        """Bulk-apply every sched event of a trace via the compiled kernel.

        Bit-identical to per-event ``on_sched`` feeding, but requires a
        fresh tracker.
        """
        if self.stats.events or self.sched_in or self.sketch.occupied_slots():
            raise RuntimeError("bulk replay requires a fresh tracker")
        if trace.n_sched == 0:
            return
        prio_sorted = np.array(sorted(self.priority), dtype=np.int64)
        prio_vals = np.zeros(len(prio_sorted), dtype=np.int64)
        uniq_tids, tid_idx = _kernels.factorize(
            np.concatenate([trace.sched_prev, trace.sched_next])
        )
        prev_idx = tid_idx[: trace.n_sched]
        next_idx = tid_idx[trace.n_sched :]
        uniq_cpus, cpu_idx = _kernels.factorize(trace.sched_cpu)
        next_prio_idx = _kernels.priority_indices(trace.sched_next_pid, prio_sorted)
        nt = len(uniq_tids)
        in_live = np.zeros(nt, dtype=np.bool_)
        in_ts = np.zeros(nt, dtype=np.int64)
        in_pid = np.zeros(nt, dtype=np.int64)
        in_cpu = np.zeros(nt, dtype=np.int64)
        in_opi = np.zeros(nt, dtype=np.int64)
        cpu_last = np.full(len(uniq_cpus), -1, dtype=np.int64)
        counters = np.zeros(_kernels.N_COUNTERS, dtype=np.int64)
        _kernels.replay_sched(
            trace.sched_ts, cpu_idx, prev_idx, next_idx,
            trace.sched_next_pid, next_prio_idx,
            in_live, in_ts, in_pid, in_cpu, in_opi, cpu_last,
            self.sketch.stage_pids, self.sketch.stage_values,
            self.sketch._hash_a, self.sketch._hash_b,
            prio_vals, counters,
        )
        for i, pid in enumerate(prio_sorted.tolist()):
            self.priority[pid] = int(prio_vals[i])
        for i in np.flatnonzero(in_live):
            # in_cpu holds the factorized index; map back to the raw value
            self.sched_in[int(uniq_tids[i])] = (
                int(in_ts[i]), int(in_pid[i]), int(uniq_cpus[in_cpu[i]])
            )
        for i, cpu in enumerate(uniq_cpus.tolist()):
            if cpu_last[i] >= 0:
                self._cpu_last_ts[int(cpu)] = int(cpu_last[i])
        st = self.stats
        st.events += trace.n_sched
        st.attributed_slices += int(counters[_kernels.C_ATTRIBUTED_SLICES])
        st.attributed_ns += int(counters[_kernels.C_ATTRIBUTED_NS])
        st.measured_ns += int(counters[_kernels.C_MEASURED_NS])
        st.idle_suppressed_ns += int(counters[_kernels.C_IDLE_NS])
        st.first_observations += int(counters[_kernels.C_FIRST_OBS])
        st.negative_deltas += int(counters[_kernels.C_NEG_DELTAS])
        st.out_of_order += int(counters[_kernels.C_OUT_OF_ORDER])
        st.resched_overwrites += int(counters[_kernels.C_RESCHED])
        st.zero_deltas += int(counters[_kernels.C_ZERO_DELTAS])
        sk = self.sketch
        sk.inserted_value += int(counters[_kernels.C_INSERTED_VALUE])
        sk.discarded_value += int(counters[_kernels.C_DISCARDED_VALUE])
        sk.discarded_entries += int(counters[_kernels.C_DISCARDED_ENTRIES])
        last = int(counters[_kernels.C_LAST_TS])
        if last > self.last_ts:
            self.last_ts = last

    def top_k(self, k: int) -> TopKReport:
        """Sketch-side top-k over accumulated on-CPU nanoseconds."""
        return self.sketch.top_k(k, timestamp=self.last_ts)

    def priority_oncpu(self, pid: int) -> int:
        """Exact accumulated on-CPU nanoseconds for a tracked pid."""
        try:
            return self.priority[pid]
        except KeyError:
            raise NotTrackedError(f"pid {pid} is not in the priority set") from None
