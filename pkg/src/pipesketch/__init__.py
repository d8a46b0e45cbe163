"""pipesketch: approximate top-k process resource accounting over event traces.

A pipeline sketch tracks per-pid memory and on-CPU totals approximately;
user-specified priority pids are tracked losslessly on the side. Traces are
replayable JSONL files, and an exact oracle plus evaluation harness measure
top-k precision and snapshot responsiveness.
"""

from .cpu import CpuStats, CpuTracker
from .errors import (
    ConfigError,
    ModeError,
    NotTrackedError,
    PipesketchError,
    TraceFormatError,
)
from .evaluate import (
    PrecisionResult,
    SnapshotSeries,
    dominant_frequency_hz,
    precision_at_k,
    resolution_ratio,
    snapshot_replay,
)
from .memory import MemoryStats, MemoryTracker
from .oracle import OracleState, ground_truth
from .sketch import (
    MODE_MONOTONIC,
    MODE_SIGNED,
    HashPipeSketch,
    SketchEntry,
    StageHashParams,
    TopKReport,
    stage_hash,
)
from .trace import (
    MemoryEvent,
    SchedEvent,
    Trace,
    read_trace,
    write_trace,
)
from .workload import WorkloadSpec, generate

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "CpuStats",
    "CpuTracker",
    "HashPipeSketch",
    "MODE_MONOTONIC",
    "MODE_SIGNED",
    "MemoryEvent",
    "MemoryStats",
    "MemoryTracker",
    "ModeError",
    "NotTrackedError",
    "OracleState",
    "PipesketchError",
    "PrecisionResult",
    "SchedEvent",
    "SketchEntry",
    "SnapshotSeries",
    "StageHashParams",
    "TopKReport",
    "Trace",
    "TraceFormatError",
    "WorkloadSpec",
    "__version__",
    "dominant_frequency_hz",
    "generate",
    "ground_truth",
    "precision_at_k",
    "read_trace",
    "resolution_ratio",
    "snapshot_replay",
    "stage_hash",
    "write_trace",
]
