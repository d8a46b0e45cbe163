"""Deterministic synthetic trace generation.

Four kinds:

* ``zipf_alloc`` — allocation stream whose pid popularity follows a zipf
  law (pid 1 is rank 1, the heaviest); a ``free_ratio`` fraction of
  allocations is freed after a random delay.
* ``fork_bomb`` — waves of fresh, never-reused pids, each making a burst
  of small short-lived allocations.
* ``sched_mix`` — context-switch stream over a couple of CPUs where each
  pid's on-CPU share follows the same zipf law (tid == pid).
* ``cyclic_train`` — a training-loop shape: pid 1 allocates through the
  first half of every period and frees through the second half, so its
  net usage is a sawtooth at 1/period; an interleaved sched stream gives
  pid 1 an on-CPU share oscillating at the same period.

Identical specs produce byte-identical traces: all draws come from one
seeded generator and everything else is arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .trace import Trace

KINDS = ("zipf_alloc", "fork_bomb", "cyclic_train", "sched_mix")

SCHED_CPUS = 2  # logical CPUs emitted by sched_mix


@dataclass(frozen=True)
class WorkloadSpec:
    kind: str
    pid_count: int
    event_count: int
    zipf_s: float = 1.2
    free_ratio: float = 0.5
    period_ns: int = 1_000_000_000
    seed: int = 0

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown workload kind {self.kind!r}")
        if self.event_count < 1:
            raise ConfigError(f"event_count must be >= 1, got {self.event_count}")
        if self.pid_count < 1:
            raise ConfigError(f"pid_count must be >= 1, got {self.pid_count}")
        if not 0.0 <= self.free_ratio <= 1.0:
            raise ConfigError(f"free_ratio must be in [0, 1], got {self.free_ratio}")
        if self.kind in ("zipf_alloc", "sched_mix") and self.zipf_s <= 0:
            raise ConfigError(f"zipf_s must be > 0, got {self.zipf_s}")
        if self.kind == "cyclic_train" and self.period_ns < 1:
            raise ConfigError(f"period_ns must be >= 1, got {self.period_ns}")


def _strictly_increasing(ts: np.ndarray) -> np.ndarray:
    # minimal forward bumps: out[i] = max(ts[i], out[i-1] + 1)
    idx = np.arange(len(ts), dtype=np.int64)
    return np.maximum.accumulate(ts - idx) + idx


def _zipf_pids(rng, count: int, pid_count: int, s: float) -> np.ndarray:
    """Inverse-CDF draws over a precomputed rank table; pid 1 is rank 1."""
    weights = np.arange(1, pid_count + 1, dtype=np.float64) ** -s
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    return np.searchsorted(cdf, rng.random(count), side="right").astype(np.int64) + 1


def _alloc_split(event_count: int, free_ratio: float) -> tuple[int, int]:
    allocs = max(1, int(round(event_count / (1.0 + free_ratio))))
    allocs = min(allocs, event_count)
    return allocs, event_count - allocs


def _paired_memory_trace(
    rng,
    alloc_ts: np.ndarray,
    pids: np.ndarray,
    sizes: np.ndarray,
    frees: int,
    max_delay: int,
) -> Trace:
    """Merge an alloc column block with delayed frees of a random subset."""
    n_alloc = len(alloc_ts)
    ptrs = np.arange(1, n_alloc + 1, dtype=np.uint64)
    freed = np.sort(rng.choice(n_alloc, size=frees, replace=False))
    delays = rng.integers(1_000, max(2_000, max_delay), size=frees, dtype=np.int64)
    dealloc_ts = alloc_ts[freed] + delays

    all_ts = np.concatenate([alloc_ts, dealloc_ts])
    order = np.argsort(all_ts, kind="stable")
    ts = _strictly_increasing(all_ts[order])
    is_dealloc = order >= n_alloc
    if frees:
        dealloc_src = freed[np.maximum(order - n_alloc, 0)]
    else:
        dealloc_src = np.zeros(len(order), dtype=np.int64)
    src = np.where(is_dealloc, dealloc_src, order)
    pid = pids[src]
    ptr = ptrs[src]
    size = np.where(is_dealloc, 0, sizes[src])
    n = len(ts)
    z = np.zeros(0, dtype=np.int64)
    return Trace(
        np.arange(n, dtype=np.int64), ts, is_dealloc, pid, pid, ptr, size,
        z, z, z, z, z, z,
    )


def _gen_zipf_alloc(spec: WorkloadSpec, rng) -> Trace:
    n_alloc, n_free = _alloc_split(spec.event_count, spec.free_ratio)
    gaps = rng.integers(200, 1500, size=n_alloc, dtype=np.int64)
    alloc_ts = np.cumsum(gaps)
    pids = _zipf_pids(rng, n_alloc, spec.pid_count, spec.zipf_s)
    # log-uniform sizes, 64 B .. 128 KiB
    sizes = np.exp2(rng.uniform(6.0, 17.0, size=n_alloc)).astype(np.int64)
    span = int(alloc_ts[-1]) if n_alloc else 1
    return _paired_memory_trace(rng, alloc_ts, pids, sizes, n_free, span // 3)


def _gen_fork_bomb(spec: WorkloadSpec, rng) -> Trace:
    n_alloc, n_free = _alloc_split(spec.event_count, spec.free_ratio)
    gaps = rng.integers(50, 500, size=n_alloc, dtype=np.int64)
    alloc_ts = np.cumsum(gaps)
    # consecutive blocks of allocations per pid: each wave is a fresh pid
    # from a monotonically increasing counter, never reused
    pids = 1 + (np.arange(n_alloc, dtype=np.int64) * spec.pid_count) // n_alloc
    sizes = rng.integers(64, 4096, size=n_alloc, dtype=np.int64)
    return _paired_memory_trace(rng, alloc_ts, pids, sizes, n_free, 50_000)


def _dedup_consecutive(draws: np.ndarray, want: int) -> np.ndarray:
    keep = np.ones(len(draws), dtype=bool)
    keep[1:] = draws[1:] != draws[:-1]
    out = draws[keep]
    return out[:want]


def _gen_sched_mix(spec: WorkloadSpec, rng) -> Trace:
    total = spec.event_count
    per_cpu = [total // SCHED_CPUS] * SCHED_CPUS
    per_cpu[0] += total - sum(per_cpu)
    blocks = []
    for cpu, count in enumerate(per_cpu):
        if count == 0:
            continue
        if spec.pid_count == 1:
            tids = np.where(np.arange(count, dtype=np.int64) % 2 == 0, 1, 0)
        else:
            # overdraw, drop consecutive repeats, then trim to size; top up
            # in the rare case dedup removed too many
            draws = _zipf_pids(rng, int(count * 1.3) + 8, spec.pid_count, spec.zipf_s)
            tids = _dedup_consecutive(draws, count)
            while len(tids) < count:
                extra = _zipf_pids(rng, count, spec.pid_count, spec.zipf_s)
                tids = _dedup_consecutive(np.concatenate([tids, extra]), count)
        slices = rng.integers(20_000, 120_000, size=count, dtype=np.int64)
        ts = np.cumsum(slices)
        prev = np.concatenate([[0], tids[:-1]]).astype(np.int64)
        blocks.append((ts, np.full(count, cpu, dtype=np.int64), prev, tids))
    ts = np.concatenate([b[0] for b in blocks])
    cpus = np.concatenate([b[1] for b in blocks])
    prevs = np.concatenate([b[2] for b in blocks])
    nexts = np.concatenate([b[3] for b in blocks])
    order = np.argsort(ts, kind="stable")
    ts = _strictly_increasing(ts[order])
    nexts = nexts[order]
    n = len(ts)
    z = np.zeros(0, dtype=np.int64)
    return Trace(
        z, z, z.astype(bool), z, z, z.astype(np.uint64), z,
        np.arange(n, dtype=np.int64), ts, cpus[order], prevs[order], nexts,
        nexts,  # tid == pid in generated streams
    )


def _cyclic_memory_columns(spec: WorkloadSpec, n_mem: int):
    period = spec.period_ns
    n_periods = max(2, min(40, n_mem // 8))
    slots = max(2, (n_mem // n_periods) & ~1)
    half = slots // 2
    gap = max(1, period // slots)
    total_slots = ((n_mem + slots - 1) // slots) * slots
    idx = np.arange(total_slots, dtype=np.int64)
    period_idx = idx // slots
    slot_in_period = idx % slots
    ts = period_idx * period + slot_in_period * gap
    is_dealloc = slot_in_period >= half
    # the j-th free of a period releases the j-th allocation of that period
    alloc_ordinal = np.where(
        is_dealloc,
        period_idx * half + (slot_in_period - half),
        np.cumsum(~is_dealloc) - 1,
    )
    ts = ts[:n_mem]
    is_dealloc = is_dealloc[:n_mem]
    ptr = (alloc_ordinal[:n_mem] + 1).astype(np.uint64)
    size = np.where(is_dealloc, 0, 1 << 16)
    pid = np.ones(n_mem, dtype=np.int64)
    return ts, is_dealloc, pid, ptr, size.astype(np.int64)


def _cyclic_sched_columns(spec: WorkloadSpec, n_sched: int, span: int):
    """Alternating [pid-1, background] slices; pid 1's share of each pair
    follows a sinusoid with the spec period, so its per-bucket on-CPU time
    oscillates at exactly 1/period."""
    period = spec.period_ns
    pairs = max(1, (n_sched + 1) // 2)
    pair_len = max(2, span // pairs)
    j = np.arange(pairs, dtype=np.int64)
    start = j * pair_len
    share = 0.5 + 0.4 * np.sin(2.0 * math.pi * (start / period))
    split = start + np.maximum(1, (share * pair_len).astype(np.int64))
    if spec.pid_count > 1:
        bg = 2 + (j % (spec.pid_count - 1))
    else:
        bg = np.zeros(pairs, dtype=np.int64)  # idle fills the off-slices
    ts = np.empty(pairs * 2, dtype=np.int64)
    ts[0::2] = start
    ts[1::2] = split
    nxt = np.empty(pairs * 2, dtype=np.int64)
    nxt[0::2] = 1
    nxt[1::2] = bg
    prev = np.concatenate([[0], nxt[:-1]]).astype(np.int64)
    ts, nxt, prev = ts[:n_sched], nxt[:n_sched], prev[:n_sched]
    cpus = np.zeros(n_sched, dtype=np.int64)
    return ts, cpus, prev, nxt


def _gen_cyclic_train(spec: WorkloadSpec, rng) -> Trace:
    total = spec.event_count
    n_mem = (2 * total + 2) // 3
    n_sched = total - n_mem
    m_ts, m_dealloc, m_pid, m_ptr, m_size = _cyclic_memory_columns(spec, n_mem)
    span = int(m_ts[-1]) + 1 if n_mem else spec.period_ns
    if n_sched:
        s_ts, s_cpu, s_prev, s_next = _cyclic_sched_columns(spec, n_sched, span)
    else:
        s_ts = s_cpu = s_prev = s_next = np.zeros(0, dtype=np.int64)

    all_ts = np.concatenate([m_ts, s_ts])
    order = np.argsort(all_ts, kind="stable")
    ts = _strictly_increasing(all_ts[order])
    seq = np.arange(len(ts), dtype=np.int64)
    is_mem = order < n_mem
    mem_src = order[is_mem]
    sched_src = order[~is_mem] - n_mem
    return Trace(
        seq[is_mem], ts[is_mem], m_dealloc[mem_src], m_pid[mem_src],
        m_pid[mem_src], m_ptr[mem_src], m_size[mem_src],
        seq[~is_mem], ts[~is_mem], s_cpu[sched_src], s_prev[sched_src],
        s_next[sched_src], s_next[sched_src],
    )


def generate(spec: WorkloadSpec) -> Trace:
    """Build the trace a spec describes; identical specs give identical
    traces, timestamps strictly increasing, every free referencing an
    earlier allocation's ptr."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "zipf_alloc":
        return _gen_zipf_alloc(spec, rng)
    if spec.kind == "fork_bomb":
        return _gen_fork_bomb(spec, rng)
    if spec.kind == "sched_mix":
        return _gen_sched_mix(spec, rng)
    return _gen_cyclic_train(spec, rng)
