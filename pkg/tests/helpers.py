"""Shared builders for adversarial test traces."""

import random

from pipesketch.trace import ALLOC, DEALLOC, MemoryEvent, SchedEvent


def messy_memory_events(seed, count=4000, pids=60):
    """Alloc/dealloc stream with unknown frees and double allocations."""
    rng = random.Random(seed)
    events = []
    live = []
    ts = 0
    next_ptr = 1
    for _ in range(count):
        ts += rng.randrange(0, 5)
        roll = rng.random()
        if roll < 0.04:
            events.append(
                MemoryEvent(ts, DEALLOC, rng.randrange(pids), 0, ptr=10**9 + rng.randrange(100))
            )
        elif roll < 0.08 and live:
            ptr = rng.choice(live)
            events.append(
                MemoryEvent(ts, ALLOC, rng.randrange(pids), 0, ptr=ptr, size=rng.randrange(1, 2000))
            )
        elif roll < 0.45 and live:
            ptr = live.pop(rng.randrange(len(live)))
            events.append(MemoryEvent(ts, DEALLOC, rng.randrange(pids), 0, ptr=ptr))
        else:
            ptr = next_ptr
            next_ptr += 1
            live.append(ptr)
            events.append(
                MemoryEvent(ts, ALLOC, rng.randrange(pids), 0, ptr=ptr, size=rng.randrange(1, 2000))
            )
    return events


def messy_sched_events(seed, count=4000, tids=40, cpus=3):
    """Switch stream with phantom switch-outs, idle, and missed closes."""
    rng = random.Random(seed)
    events = []
    ts = 0
    running = {c: c for c in range(cpus)}
    for _ in range(count):
        ts += rng.randrange(0, 4)
        cpu = rng.randrange(cpus)
        nxt = rng.randrange(tids)
        if nxt == running[cpu]:
            nxt = (nxt + 1) % tids or 1
        prev = running[cpu]
        if rng.random() < 0.05:
            prev = rng.randrange(tids, tids + 10)
        events.append(SchedEvent(ts, cpu, prev, nxt, next_pid=nxt % 9))
        running[cpu] = nxt
    return events
