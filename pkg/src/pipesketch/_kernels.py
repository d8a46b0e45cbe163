"""Compiled bulk-replay kernels.

These mirror the per-event semantics of MemoryTracker.on_event,
CpuTracker.on_sched, and the sketch update rules, but run over whole
column blocks at once. Hash tables are replaced by dense arrays indexed
with np.unique-factorized ptr/tid/cpu codes, so the hot loops contain no
hashing beyond the sketch's own multiply-add.

The equivalence between these kernels and the pure-Python per-event path
is asserted by tests/test_kernels.py; any semantic change must land in
both places.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# Slots in the shared int64 counters array. A single layout serves both
# kernels; unused slots stay zero.
C_DROPPED_DEALLOCS = 0
C_DOUBLE_ALLOCS = 1
C_UNMATCHED_DECS = 2
C_PRIO_ALLOCS = 3
C_PRIO_DEALLOCS = 4
C_INSERTED_VALUE = 5
C_DECREMENTED_VALUE = 6
C_DISCARDED_VALUE = 7
C_DISCARDED_ENTRIES = 8
C_ATTRIBUTED_SLICES = 9
C_ATTRIBUTED_NS = 10
C_MEASURED_NS = 11
C_IDLE_NS = 12
C_FIRST_OBS = 13
C_NEG_DELTAS = 14
C_OUT_OF_ORDER = 15
C_RESCHED = 16
C_ZERO_DELTAS = 17
C_LAST_TS = 18
N_COUNTERS = 19

_EMPTY = -1


def factorize(arr: np.ndarray):
    """Sorted unique values and per-element indices into them.

    Output is identical to ``np.unique(arr, return_inverse=True)``; when
    the value range is small relative to the array (the common case for
    pids/tids and generator-assigned ptr tokens) a counting pass replaces
    the full sort.
    """
    if len(arr) == 0:
        return arr.astype(np.int64), np.zeros(0, dtype=np.int64)
    amax = int(arr.max())
    if 0 <= int(arr.min()) and amax <= max(4096, 4 * len(arr)):
        counts = np.bincount(arr.astype(np.int64), minlength=amax + 1)
        uniques = np.flatnonzero(counts)
        lookup = np.zeros(amax + 1, dtype=np.int64)
        lookup[uniques] = np.arange(len(uniques), dtype=np.int64)
        return uniques.astype(arr.dtype), lookup[arr.astype(np.int64)]
    uniques, idx = np.unique(arr, return_inverse=True)
    return uniques, idx.astype(np.int64)


def priority_indices(pids: np.ndarray, prio_sorted: np.ndarray) -> np.ndarray:
    """Per-element index into prio_sorted, or -1 for non-priority pids."""
    out = np.full(len(pids), -1, dtype=np.int64)
    if len(prio_sorted) == 0 or len(pids) == 0:
        return out
    pos = np.searchsorted(prio_sorted, pids)
    pos = np.minimum(pos, len(prio_sorted) - 1)
    hit = prio_sorted[pos] == pids
    out[hit] = pos[hit]
    return out


@njit(inline="always")
def _insert_positive(spids, svals, ha, hb, pid, amount, counters):
    # Always-kick at stage 0, compare-kick later; the final carry is
    # discarded and accounted. All hash math stays in uint64 so the
    # multiply wraps exactly like the masked Python implementation.
    d, n = spids.shape
    un = np.uint64(n)
    counters[C_INSERTED_VALUE] += amount
    cp = pid
    cv = amount
    for i in range(d):
        h = np.int64((ha[i] * np.uint64(cp) + hb[i]) % un)
        resident = spids[i, h]
        if resident == _EMPTY:
            spids[i, h] = cp
            svals[i, h] = cv
            return
        if resident == cp:
            svals[i, h] += cv
            return
        if i == 0 or cv > svals[i, h]:
            spids[i, h] = cp
            tmp = svals[i, h]
            svals[i, h] = cv
            cv = tmp
            cp = resident
    counters[C_DISCARDED_ENTRIES] += 1
    counters[C_DISCARDED_VALUE] += cv


@njit(cache=True)
def replay_memory(
    is_dealloc, pids, ptr_idx, sizes, prio_idx,
    live, tbl_size, tbl_owner, tbl_opi,
    spids, svals, ha, hb, prio_vals, counters,
):
    d, n = spids.shape
    un = np.uint64(n)
    for j in range(pids.shape[0]):
        slot = ptr_idx[j]
        if is_dealloc[j]:
            if not live[slot]:
                counters[C_DROPPED_DEALLOCS] += 1
                continue
            live[slot] = False
            size = tbl_size[slot]
            owner = tbl_owner[slot]
            opi = tbl_opi[slot]
            if opi >= 0:
                prio_vals[opi] -= size
                counters[C_PRIO_DEALLOCS] += 1
                continue
            matched = False
            for i in range(d):
                h = np.int64((ha[i] * np.uint64(owner) + hb[i]) % un)
                if spids[i, h] == owner:
                    svals[i, h] -= size
                    counters[C_DECREMENTED_VALUE] += size
                    matched = True
                    break
            if not matched:
                counters[C_UNMATCHED_DECS] += 1
        else:
            if live[slot]:
                counters[C_DOUBLE_ALLOCS] += 1
            live[slot] = True
            tbl_size[slot] = sizes[j]
            tbl_owner[slot] = pids[j]
            tbl_opi[slot] = prio_idx[j]
            if prio_idx[j] >= 0:
                prio_vals[prio_idx[j]] += sizes[j]
                counters[C_PRIO_ALLOCS] += 1
            else:
                _insert_positive(spids, svals, ha, hb, pids[j], sizes[j], counters)


@njit(cache=True)
def replay_sched(
    ts, cpu_idx, prev_idx, next_idx, next_pid, next_prio_idx,
    in_live, in_ts, in_pid, in_cpu, in_opi, cpu_last,
    spids, svals, ha, hb, prio_vals, counters,
):
    for j in range(ts.shape[0]):
        c = cpu_idx[j]
        t = ts[j]
        if cpu_last[c] >= 0 and t < cpu_last[c]:
            counters[C_OUT_OF_ORDER] += 1
            continue
        pslot = prev_idx[j]
        has_rec = in_live[pslot]
        delta = np.int64(0)
        if has_rec:
            delta = t - in_ts[pslot]
            if delta < 0:
                counters[C_NEG_DELTAS] += 1
                continue
        else:
            counters[C_FIRST_OBS] += 1
        cpu_last[c] = t
        counters[C_LAST_TS] = t
        if has_rec:
            in_live[pslot] = False
            pid = in_pid[pslot]
            opi = in_opi[pslot]
            if delta == 0:
                counters[C_ZERO_DELTAS] += 1
            else:
                counters[C_MEASURED_NS] += delta
                if opi >= 0:
                    prio_vals[opi] += delta
                    counters[C_ATTRIBUTED_SLICES] += 1
                    counters[C_ATTRIBUTED_NS] += delta
                elif pid == 0:
                    counters[C_IDLE_NS] += delta
                else:
                    _insert_positive(spids, svals, ha, hb, pid, delta, counters)
                    counters[C_ATTRIBUTED_SLICES] += 1
                    counters[C_ATTRIBUTED_NS] += delta
        nslot = next_idx[j]
        if in_live[nslot]:
            counters[C_RESCHED] += 1
        in_live[nslot] = True
        in_ts[nslot] = t
        in_pid[nslot] = next_pid[j]
        in_cpu[nslot] = c
        in_opi[nslot] = next_prio_idx[j]
