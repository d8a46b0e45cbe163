"""Memory accounting: allocation/deallocation replay into a signed sketch.

Every live allocation is remembered in a ptr-size table so deallocations
can be attributed with their exact size to the pid that allocated them.
User-specified priority pids bypass the sketch entirely and are counted
losslessly; everything else flows through the always-kick pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import NotTrackedError
from .sketch import MODE_SIGNED, HashPipeSketch, TopKReport
from .trace import DEALLOC, MemoryEvent, Trace


@dataclass
class MemoryStats:
    """Replay observability counters.

    ``dropped_deallocs`` are frees of pointers never seen live (returned
    without action); ``double_allocs`` are allocations over a still-live
    pointer (old mapping overwritten); ``unmatched_decrements`` are frees
    whose owner had already been evicted from every sketch stage.
    """

    events: int = 0
    allocs: int = 0
    deallocs: int = 0
    dropped_deallocs: int = 0
    double_allocs: int = 0
    unmatched_decrements: int = 0
    priority_allocs: int = 0
    priority_deallocs: int = 0

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


class MemoryTracker:
    """Single-writer consumer of allocation/deallocation events."""

    def __init__(
        self,
        d: int,
        n: int,
        seed: int = 0,
        priority_pids: Iterable[int] = (),
        hash_params: Optional[Sequence[tuple[int, int]]] = None,
    ):
        self.sketch = HashPipeSketch(
            d, n, seed=seed, mode=MODE_SIGNED, hash_params=hash_params
        )
        self.priority = {int(pid): 0 for pid in priority_pids}
        self._ptr_table: dict[int, tuple[int, int]] = {}  # ptr -> (size, owner pid)
        self._bulk_table = None  # (uniq_ptrs, live, size, owner) pending merge
        self.stats = MemoryStats()
        self.last_ts = 0

    @property
    def ptr_table(self) -> dict[int, tuple[int, int]]:
        """Live allocations. Bulk replay leaves the table in column form;
        it is materialized into the dict on first access."""
        if self._bulk_table is not None:
            uniq_ptrs, live, tbl_size, tbl_owner = self._bulk_table
            self._bulk_table = None
            for i in np.flatnonzero(live):
                self._ptr_table[int(uniq_ptrs[i])] = (int(tbl_size[i]), int(tbl_owner[i]))
        return self._ptr_table

    @property
    def live_ptrs(self) -> int:
        count = len(self._ptr_table)
        if self._bulk_table is not None:
            count += int(self._bulk_table[1].sum())
        return count

    def on_event(self, e: MemoryEvent) -> None:
        """Apply one event. Events must arrive in trace (ts) order."""
        self.stats.events += 1
        if e.ts > self.last_ts:
            self.last_ts = e.ts
        if e.kind == DEALLOC:
            self.stats.deallocs += 1
            entry = self.ptr_table.pop(e.ptr, None)
            if entry is None:
                self.stats.dropped_deallocs += 1
                return
            size, owner = entry
            if owner in self.priority:
                self.priority[owner] -= size
                self.stats.priority_deallocs += 1
            elif not self.sketch.apply_decrement(owner, size):
                self.stats.unmatched_decrements += 1
            return
        self.stats.allocs += 1
        if e.ptr in self.ptr_table:
            self.stats.double_allocs += 1
        self.ptr_table[e.ptr] = (e.size, e.pid)
        if e.pid in self.priority:
            self.priority[e.pid] += e.size
            self.stats.priority_allocs += 1
        else:
            self.sketch.insert_positive(e.pid, e.size)

    def replay(self, trace: Trace) -> None:
        """Bulk-apply every memory event of a trace via the compiled kernel.

        Produces bit-identical state to feeding ``on_event`` one event at
        a time, but requires a fresh tracker (the kernel's dense tables
        start empty).
        """
        if self.stats.events or self._ptr_table or self.sketch.occupied_slots():
            raise RuntimeError("bulk replay requires a fresh tracker")
        if trace.n_mem == 0:
            return
        prio_sorted = np.array(sorted(self.priority), dtype=np.int64)
        prio_vals = np.zeros(len(prio_sorted), dtype=np.int64)
        uniq_ptrs, ptr_idx = _kernels.factorize(trace.mem_ptr)
        prio_idx = _kernels.priority_indices(trace.mem_pid, prio_sorted)
        live = np.zeros(len(uniq_ptrs), dtype=np.bool_)
        tbl_size = np.zeros(len(uniq_ptrs), dtype=np.int64)
        tbl_owner = np.zeros(len(uniq_ptrs), dtype=np.int64)
        tbl_opi = np.zeros(len(uniq_ptrs), dtype=np.int64)
        counters = np.zeros(_kernels.N_COUNTERS, dtype=np.int64)
        _kernels.replay_memory(
            trace.mem_is_dealloc, trace.mem_pid, ptr_idx, trace.mem_size,
            prio_idx, live, tbl_size, tbl_owner, tbl_opi,
            self.sketch.stage_pids, self.sketch.stage_values,
            self.sketch._hash_a, self.sketch._hash_b,
            prio_vals, counters,
        )
        for i, pid in enumerate(prio_sorted.tolist()):
            self.priority[pid] = int(prio_vals[i])
        self._bulk_table = (uniq_ptrs, live, tbl_size, tbl_owner)
        st = self.stats
        deallocs = int(trace.mem_is_dealloc.sum())
        st.events += trace.n_mem
        st.deallocs += deallocs
        st.allocs += trace.n_mem - deallocs
        st.dropped_deallocs += int(counters[_kernels.C_DROPPED_DEALLOCS])
        st.double_allocs += int(counters[_kernels.C_DOUBLE_ALLOCS])
        st.unmatched_decrements += int(counters[_kernels.C_UNMATCHED_DECS])
        st.priority_allocs += int(counters[_kernels.C_PRIO_ALLOCS])
        st.priority_deallocs += int(counters[_kernels.C_PRIO_DEALLOCS])
        sk = self.sketch
        sk.inserted_value += int(counters[_kernels.C_INSERTED_VALUE])
        sk.decremented_value += int(counters[_kernels.C_DECREMENTED_VALUE])
        sk.discarded_value += int(counters[_kernels.C_DISCARDED_VALUE])
        sk.discarded_entries += int(counters[_kernels.C_DISCARDED_ENTRIES])
        last = int(trace.mem_ts[-1])
        if last > self.last_ts:
            self.last_ts = last

    def top_k(self, k: int) -> TopKReport:
        """Sketch-side top-k; priority pids live on the lossless path and
        are reported separately, not merged in."""
        return self.sketch.top_k(k, timestamp=self.last_ts)

    def priority_usage(self, pid: int) -> int:
        """Exact net bytes for a tracked pid."""
        try:
            return self.priority[pid]
        except KeyError:
            raise NotTrackedError(f"pid {pid} is not in the priority set") from None
