"""Multi-stage hash-pipe sketch for approximate per-pid resource totals.

The sketch is a pipeline of ``d`` fixed-size hash tables ("stages"). A new
entry always lands in stage 0: if the hashed slot is occupied by a different
pid, the occupant is kicked out unconditionally and carried to the next
stage. Later stages keep the larger of the resident and carried values and
forward the smaller one. An entry carried past the last stage is discarded,
which is the only place the sketch loses value.

Two update modes exist: ``signed`` (memory accounting, where deallocations
decrement matching slots) and ``monotonic`` (on-CPU time, additive only).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import ConfigError, ModeError

MODE_SIGNED = "signed"
MODE_MONOTONIC = "monotonic"

# Per-slot accounting size used for footprint reporting. This is a declared
# bookkeeping constant (pid + value + padding), independent of the Python
# in-memory representation.
ENTRY_FOOTPRINT_BYTES = 40

_U64_MASK = (1 << 64) - 1

# Sentinel for an empty slot in the pid plane. pid 0 is a legal process
# identifier, so emptiness must be encoded out-of-band.
EMPTY = -1


class SketchEntry(NamedTuple):
    """One occupied slot: a pid and its accumulated signed value."""

    pid: int
    value: int


@dataclass(frozen=True)
class StageHashParams:
    """Multiply-add hash parameters for one stage.

    The slot index of ``pid`` is ``((a * pid + b) mod 2**64) mod n``.
    ``a`` must be odd so the multiplicative part permutes 64-bit residues;
    for power-of-two ``n`` this avoids systematic slot aliasing.
    """

    a: int
    b: int
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"stage must have at least one slot, got n={self.n}")
        if self.a % 2 == 0:
            raise ConfigError(f"hash multiplier must be odd, got a={self.a:#x}")

    def slot(self, pid: int) -> int:
        return ((self.a * pid + self.b) & _U64_MASK) % self.n


def stage_hash(params: StageHashParams, pid: int) -> int:
    """Slot index of ``pid`` under ``params``; deterministic, in [0, n)."""
    return params.slot(pid)


def derive_hash_params(d: int, n: int, seed: int) -> list[StageHashParams]:
    """Seeded per-stage hash parameters; same seed gives identical params."""
    rng = random.Random(seed)
    return [
        StageHashParams(a=rng.getrandbits(64) | 1, b=rng.getrandbits(64), n=n)
        for _ in range(d)
    ]


@dataclass
class TopKReport:
    """Ranked pid/value pairs extracted from a sketch.

    Entries are sorted by value descending with ties broken by ascending
    pid, each pid appears once (multi-stage duplicates are pre-merged),
    and ``len(entries) <= k``. ``timestamp`` is the replay-clock time the
    snapshot was taken, in nanoseconds (0 when there is no replay clock).
    """

    entries: list[SketchEntry]
    k: int
    timestamp: int = 0

    def pids(self) -> list[int]:
        return [e.pid for e in self.entries]


class HashPipeSketch:
    """A ``d``-stage, ``n``-slots-per-stage pipeline sketch.

    Slot state lives in two parallel int64 arrays so that bulk replay
    kernels can operate on it directly; the per-call methods here are the
    reference semantics. All mutating calls must be serialized by the
    caller (single writer); reads may interleave with each other.
    """

    def __init__(
        self,
        d: int,
        n: int,
        seed: int = 0,
        mode: str = MODE_SIGNED,
        hash_params: Optional[Sequence[tuple[int, int]]] = None,
    ):
        if d < 1:
            raise ConfigError(f"need at least one stage, got d={d}")
        if n < 1:
            raise ConfigError(f"need at least one slot per stage, got n={n}")
        if mode not in (MODE_SIGNED, MODE_MONOTONIC):
            raise ConfigError(f"unknown mode {mode!r}")
        self.d = d
        self.n = n
        self.mode = mode
        self.seed = seed
        if hash_params is None:
            self.params = derive_hash_params(d, n, seed)
        else:
            if len(hash_params) != d:
                raise ConfigError(
                    f"expected {d} (a, b) pairs, got {len(hash_params)}"
                )
            self.params = [StageHashParams(a, b, n) for a, b in hash_params]
        # uint64 copies of (a, b) in stage order, consumed by replay kernels
        self._hash_a = np.fromiter((p.a for p in self.params), dtype=np.uint64, count=d)
        self._hash_b = np.fromiter((p.b for p in self.params), dtype=np.uint64, count=d)
        self.stage_pids = np.full((d, n), EMPTY, dtype=np.int64)
        self.stage_values = np.zeros((d, n), dtype=np.int64)
        # Value-conservation counters; see conservation_gap().
        self.inserted_value = 0
        self.decremented_value = 0
        self.discarded_value = 0
        self.discarded_entries = 0

    # -- updates ---------------------------------------------------------

    def insert_positive(self, pid: int, amount: int) -> None:
        """Add ``amount`` to ``pid``, cascading evictions down the stages.

        Stage 0 always admits the incoming entry (forced eviction). At
        stage i >= 1 the slot keeps whichever of resident/carried has the
        larger value and the smaller one is carried on; ties keep the
        resident. A carry surviving past the last stage is dropped and
        accounted in ``discarded_value``.
        """
        if amount <= 0:
            raise ValueError(f"amount must be positive, got {amount}")
        self.inserted_value += amount
        pids = self.stage_pids
        values = self.stage_values
        carried_pid = pid
        carried_value = amount
        for i, p in enumerate(self.params):
            h = p.slot(carried_pid)
            resident = pids[i, h]
            if resident == EMPTY:
                pids[i, h] = carried_pid
                values[i, h] = carried_value
                return
            if resident == carried_pid:
                values[i, h] += carried_value
                return
            if i == 0 or carried_value > values[i, h]:
                pids[i, h] = carried_pid
                carried_value, values[i, h] = int(values[i, h]), carried_value
                carried_pid = int(resident)
        self.discarded_entries += 1
        self.discarded_value += carried_value

    def apply_decrement(self, pid: int, amount: int) -> bool:
        """Subtract ``amount`` from the first stage whose slot holds ``pid``.

        Returns False (sketch unchanged) when no stage holds the pid.
        Decrements never insert or evict, and a slot value may go negative:
        the matching allocation can have been evicted earlier, and clamping
        would hide that drift from the evaluation.
        """
        if amount <= 0:
            raise ValueError(f"amount must be positive, got {amount}")
        if self.mode != MODE_SIGNED:
            raise ModeError("decrements are only valid on a signed-mode sketch")
        for i, p in enumerate(self.params):
            h = p.slot(pid)
            if self.stage_pids[i, h] == pid:
                self.stage_values[i, h] -= amount
                self.decremented_value += amount
                return True
        return False

    # -- reads -----------------------------------------------------------

    def query(self, pid: int) -> int:
        """Sum of this pid's slot values across all stages; 0 if absent."""
        total = 0
        for i, p in enumerate(self.params):
            h = p.slot(pid)
            if self.stage_pids[i, h] == pid:
                total += int(self.stage_values[i, h])
        return total

    def top_k(self, k: int, timestamp: int = 0) -> TopKReport:
        """Merge duplicate pids across stages and return the k largest."""
        if k < 1:
            raise ValueError(f"k must be at least 1, got {k}")
        totals: dict[int, int] = {}
        occupied = self.stage_pids != EMPTY
        for p, v in zip(
            self.stage_pids[occupied].tolist(), self.stage_values[occupied].tolist()
        ):
            totals[p] = totals.get(p, 0) + v
        ranked = sorted(totals.items(), key=lambda it: (-it[1], it[0]))
        entries = [SketchEntry(p, v) for p, v in ranked[:k]]
        return TopKReport(entries=entries, k=k, timestamp=timestamp)

    def slot(self, stage: int, index: int) -> Optional[SketchEntry]:
        """Contents of one slot, or None when empty."""
        pid = int(self.stage_pids[stage, index])
        if pid == EMPTY:
            return None
        return SketchEntry(pid, int(self.stage_values[stage, index]))

    def occupied_slots(self) -> int:
        return int((self.stage_pids != EMPTY).sum())

    def footprint_bytes(self) -> int:
        """Accounting footprint of the core slots: d * n * 40 bytes."""
        return self.d * self.n * ENTRY_FOOTPRINT_BYTES

    def conservation_gap(self) -> int:
        """inserted - decremented - discarded - stored; 0 when conserved.

        Every inserted unit of value is either resident in some slot,
        was removed by a matched decrement, or was discarded past the
        last stage; nothing else may create or destroy value.
        """
        stored = int(self.stage_values[self.stage_pids != EMPTY].sum())
        return (
            self.inserted_value
            - self.decremented_value
            - self.discarded_value
            - stored
        )
