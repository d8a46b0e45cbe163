"""Exact per-pid ground truth from full trace replay.

The oracle applies the same attribution rules as the trackers (owner-pid
charging through the live ptr table, unknown frees dropped, slice deltas
from scheduled-in records) but keeps every counter losslessly. It shares
no code with the sketch path it is used to judge.

Besides final totals, the oracle keeps the per-event charge it resolved
(which pid, how much), so net-usage and on-CPU time series at any bucket
width come from a single pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import FrozenSet, Iterable

import numpy as np
from numba import njit

from ._kernels import factorize
from .trace import Trace


@njit(cache=True)
def _account_memory(is_dealloc, pid_idx, ptr_idx, sizes,
                    live, tbl_size, tbl_owner_idx,
                    net, charged_idx, charged_delta):
    dropped = 0
    for j in range(pid_idx.shape[0]):
        slot = ptr_idx[j]
        if is_dealloc[j]:
            if not live[slot]:
                dropped += 1
                charged_idx[j] = -1
                continue
            live[slot] = False
            owner = tbl_owner_idx[slot]
            net[owner] -= tbl_size[slot]
            charged_idx[j] = owner
            charged_delta[j] = -tbl_size[slot]
        else:
            live[slot] = True
            tbl_size[slot] = sizes[j]
            tbl_owner_idx[slot] = pid_idx[j]
            net[pid_idx[j]] += sizes[j]
            charged_idx[j] = pid_idx[j]
            charged_delta[j] = sizes[j]
    return dropped


@njit(cache=True)
def _account_sched(ts, cpu_idx, prev_idx, next_idx, next_pid_idx,
                   in_live, in_ts, in_pid_idx, cpu_last,
                   oncpu, charged_idx, charged_delta):
    first_obs = 0
    for j in range(ts.shape[0]):
        charged_idx[j] = -1
        c = cpu_idx[j]
        t = ts[j]
        if cpu_last[c] >= 0 and t < cpu_last[c]:
            continue
        pslot = prev_idx[j]
        has_rec = in_live[pslot]
        delta = np.int64(0)
        if has_rec:
            delta = t - in_ts[pslot]
            if delta < 0:
                continue
        else:
            first_obs += 1
        cpu_last[c] = t
        if has_rec:
            in_live[pslot] = False
            if delta > 0:
                p = in_pid_idx[pslot]
                oncpu[p] += delta
                charged_idx[j] = p
                charged_delta[j] = delta
        nslot = next_idx[j]
        in_live[nslot] = True
        in_ts[nslot] = t
        in_pid_idx[nslot] = next_pid_idx[j]
    return first_obs


def _top(pids: np.ndarray, totals: np.ndarray, k: int, exclude: FrozenSet[int]):
    pairs = [
        (int(p), int(v))
        for p, v in zip(pids.tolist(), totals.tolist())
        if v != 0 and int(p) not in exclude
    ]
    pairs.sort(key=lambda it: (-it[1], it[0]))
    return pairs[:k]


@dataclass
class OracleState:
    """Lossless accounting results for one trace.

    ``cpu_ns`` includes idle (pid 0) time when idle slices completed;
    callers comparing against the sketch path exclude it at top-k
    extraction, mirroring the tracker's idle suppression.
    """

    trace: Trace
    mem_pids: np.ndarray
    mem_net_by_idx: np.ndarray
    cpu_pids: np.ndarray
    cpu_ns_by_idx: np.ndarray
    mem_charged_pid: np.ndarray  # per memory event; -1 = dropped free
    mem_charged_delta: np.ndarray
    cpu_charged_pid: np.ndarray  # per sched event; -1 = nothing attributed
    cpu_charged_delta: np.ndarray
    dropped_deallocs: int
    first_observations: int

    @property
    def mem_net(self) -> dict[int, int]:
        return dict(zip(self.mem_pids.tolist(), self.mem_net_by_idx.tolist()))

    @property
    def cpu_ns(self) -> dict[int, int]:
        return dict(zip(self.cpu_pids.tolist(), self.cpu_ns_by_idx.tolist()))

    def net_bytes(self, pid: int) -> int:
        i = np.searchsorted(self.mem_pids, pid)
        if i < len(self.mem_pids) and self.mem_pids[i] == pid:
            return int(self.mem_net_by_idx[i])
        return 0

    def oncpu_ns(self, pid: int) -> int:
        i = np.searchsorted(self.cpu_pids, pid)
        if i < len(self.cpu_pids) and self.cpu_pids[i] == pid:
            return int(self.cpu_ns_by_idx[i])
        return 0

    def top_mem(self, k: int, exclude: Iterable[int] = ()) -> list[tuple[int, int]]:
        """Exact top-k by net bytes, zero-valued pids omitted; ties break
        by ascending pid (the same rule the sketch reports use)."""
        return _top(self.mem_pids, self.mem_net_by_idx, k, frozenset(exclude))

    def top_cpu(self, k: int, exclude: Iterable[int] = ()) -> list[tuple[int, int]]:
        return _top(self.cpu_pids, self.cpu_ns_by_idx, k, frozenset(exclude))

    def mem_series(self, bucket_ns: int, pid: int | None = None):
        """Net charged bytes at the end of each bucket (a level, cumulative).

        Returns (timestamps, values) where timestamps[i] = (i+1)*bucket_ns.
        ``pid=None`` aggregates every pid.
        """
        if bucket_ns < 1:
            raise ValueError("bucket_ns must be >= 1")
        tr = self.trace
        if tr.n_mem == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        mask = self.mem_charged_pid >= 0
        if pid is not None:
            mask &= self.mem_charged_pid == pid
        buckets = tr.mem_ts // bucket_ns
        nb = int(buckets[-1]) + 1
        per_bucket = np.zeros(nb, dtype=np.int64)
        np.add.at(per_bucket, buckets[mask], self.mem_charged_delta[mask])
        ts = (np.arange(nb, dtype=np.int64) + 1) * bucket_ns
        return ts, np.cumsum(per_bucket)

    def cpu_series(self, bucket_ns: int, pid: int | None = None):
        """On-CPU nanoseconds charged within each bucket (a rate)."""
        if bucket_ns < 1:
            raise ValueError("bucket_ns must be >= 1")
        tr = self.trace
        if tr.n_sched == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        mask = self.cpu_charged_pid >= 0
        if pid is not None:
            mask &= self.cpu_charged_pid == pid
        buckets = tr.sched_ts // bucket_ns
        nb = int(buckets[-1]) + 1
        per_bucket = np.zeros(nb, dtype=np.int64)
        np.add.at(per_bucket, buckets[mask], self.cpu_charged_delta[mask])
        ts = (np.arange(nb, dtype=np.int64) + 1) * bucket_ns
        return ts, per_bucket


def ground_truth(trace: Trace) -> OracleState:
    """Exact per-pid net bytes and on-CPU nanoseconds for a trace."""
    # memory side
    if trace.n_mem:
        mem_pids, pid_idx = factorize(trace.mem_pid)
        uniq_ptrs, ptr_idx = factorize(trace.mem_ptr)
        net = np.zeros(len(mem_pids), dtype=np.int64)
        live = np.zeros(len(uniq_ptrs), dtype=np.bool_)
        tbl_size = np.zeros(len(uniq_ptrs), dtype=np.int64)
        tbl_owner = np.zeros(len(uniq_ptrs), dtype=np.int64)
        charged_idx = np.zeros(trace.n_mem, dtype=np.int64)
        charged_delta = np.zeros(trace.n_mem, dtype=np.int64)
        dropped = _account_memory(
            trace.mem_is_dealloc, pid_idx.astype(np.int64),
            ptr_idx.astype(np.int64), trace.mem_size,
            live, tbl_size, tbl_owner, net, charged_idx, charged_delta,
        )
        mem_charged = np.where(charged_idx >= 0, mem_pids[np.maximum(charged_idx, 0)], -1)
    else:
        mem_pids = np.zeros(0, dtype=np.int64)
        net = np.zeros(0, dtype=np.int64)
        mem_charged = np.zeros(0, dtype=np.int64)
        charged_delta = np.zeros(0, dtype=np.int64)
        dropped = 0
    mem_charged_delta = charged_delta

    # cpu side
    if trace.n_sched:
        cpu_pids, next_pid_idx = factorize(trace.sched_next_pid)
        uniq_tids, tid_idx = factorize(
            np.concatenate([trace.sched_prev, trace.sched_next])
        )
        uniq_cpus, cpu_idx = factorize(trace.sched_cpu)
        oncpu = np.zeros(len(cpu_pids), dtype=np.int64)
        in_live = np.zeros(len(uniq_tids), dtype=np.bool_)
        in_ts = np.zeros(len(uniq_tids), dtype=np.int64)
        in_pid_idx = np.zeros(len(uniq_tids), dtype=np.int64)
        cpu_last = np.full(len(uniq_cpus), -1, dtype=np.int64)
        s_charged_idx = np.zeros(trace.n_sched, dtype=np.int64)
        s_charged_delta = np.zeros(trace.n_sched, dtype=np.int64)
        first_obs = _account_sched(
            trace.sched_ts, cpu_idx.astype(np.int64),
            tid_idx[: trace.n_sched], tid_idx[trace.n_sched :],
            next_pid_idx.astype(np.int64),
            in_live, in_ts, in_pid_idx, cpu_last,
            oncpu, s_charged_idx, s_charged_delta,
        )
        cpu_charged = np.where(
            s_charged_idx >= 0, cpu_pids[np.maximum(s_charged_idx, 0)], -1
        )
    else:
        cpu_pids = np.zeros(0, dtype=np.int64)
        oncpu = np.zeros(0, dtype=np.int64)
        cpu_charged = np.zeros(0, dtype=np.int64)
        s_charged_delta = np.zeros(0, dtype=np.int64)
        first_obs = 0

    return OracleState(
        trace=trace,
        mem_pids=mem_pids,
        mem_net_by_idx=net,
        cpu_pids=cpu_pids,
        cpu_ns_by_idx=oncpu,
        mem_charged_pid=mem_charged,
        mem_charged_delta=mem_charged_delta,
        cpu_charged_pid=cpu_charged,
        cpu_charged_delta=s_charged_delta,
        dropped_deallocs=int(dropped),
        first_observations=int(first_obs),
    )
