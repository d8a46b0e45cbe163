"""JSONL trace format: round-trips, validation, strict/lenient parsing."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pipesketch.errors import TraceFormatError
from pipesketch.trace import (
    ALLOC,
    DEALLOC,
    MemoryEvent,
    SchedEvent,
    Trace,
    event_to_json,
    parse_line,
    read_trace,
    write_trace,
)

SAMPLE_EVENTS = [
    MemoryEvent(ts=0, kind=ALLOC, pid=7, tid=7, ptr=1, size=4096),
    SchedEvent(ts=5, cpu=0, prev_tid=0, next_tid=7, next_pid=7),
    MemoryEvent(ts=10, kind=DEALLOC, pid=7, tid=7, ptr=1),
    SchedEvent(ts=20, cpu=1, prev_tid=7, next_tid=9, next_pid=9),
]


def test_round_trip_each_kind():
    for ev in SAMPLE_EVENTS:
        assert parse_line(event_to_json(ev), strict=True) == ev


def test_ptr_serialized_as_decimal_string():
    big = (1 << 64) - 1
    ev = MemoryEvent(ts=0, kind=ALLOC, pid=1, tid=1, ptr=big, size=8)
    obj = json.loads(event_to_json(ev))
    assert obj["ptr"] == str(big)
    assert parse_line(event_to_json(ev)) == ev


def test_dealloc_carries_no_size_field():
    ev = MemoryEvent(ts=3, kind=DEALLOC, pid=2, tid=2, ptr=5)
    assert "size" not in json.loads(event_to_json(ev))


@pytest.mark.parametrize(
    "line",
    [
        "not json",
        '{"ts":0}',
        '{"ts":0,"type":"mystery"}',
        '{"ts":-1,"type":"alloc","pid":1,"tid":1,"ptr":"1","size":8}',
        '{"ts":0,"type":"alloc","pid":1,"tid":1,"ptr":"1","size":0}',
        '{"ts":0,"type":"alloc","pid":1,"tid":1,"ptr":1,"size":8}',
        '{"ts":0,"type":"alloc","pid":1,"tid":1,"ptr":"0x10","size":8}',
        '{"ts":0,"type":"alloc","pid":1,"tid":1,"ptr":"18446744073709551616","size":8}',
        '{"ts":0,"type":"sched","cpu":0,"prev_tid":0,"next_tid":1}',
        '{"ts":true,"type":"sched","cpu":0,"prev_tid":0,"next_tid":1,"next_pid":1}',
        "[1, 2, 3]",
    ],
)
def test_malformed_lines_rejected(line):
    with pytest.raises(ValueError):
        parse_line(line)


def test_unknown_fields_strict_vs_lenient():
    line = '{"ts":0,"type":"alloc","pid":1,"tid":1,"ptr":"1","size":8,"comm":"x"}'
    assert parse_line(line, strict=False).size == 8
    with pytest.raises(ValueError):
        parse_line(line, strict=True)


def test_file_round_trip(tmp_path):
    path = tmp_path / "t.jsonl"
    nbytes = write_trace(Trace.from_events(SAMPLE_EVENTS), path)
    assert nbytes == path.stat().st_size
    back = read_trace(path, strict=True)
    assert list(back.events()) == SAMPLE_EVENTS
    assert back.skipped_lines == 0


def test_file_round_trip_extreme_ptr_values(tmp_path):
    # 64-bit ptr tokens must survive the columnar store and the decimal
    # string encoding end to end
    events = [
        MemoryEvent(ts=0, kind=ALLOC, pid=1, tid=1, ptr=(1 << 64) - 1, size=8),
        MemoryEvent(ts=1, kind=ALLOC, pid=1, tid=1, ptr=1 << 63, size=8),
        MemoryEvent(ts=2, kind=DEALLOC, pid=1, tid=1, ptr=(1 << 64) - 1),
    ]
    path = tmp_path / "t.jsonl"
    write_trace(Trace.from_events(events), path)
    assert list(read_trace(path, strict=True).events()) == events


def test_reader_loop_matches_single_record_parser(tmp_path):
    # read_trace inlines field extraction for speed; it must accept and
    # reject exactly what parse_line does
    lines = [
        event_to_json(ev) for ev in SAMPLE_EVENTS
    ] + [
        '{"ts":30,"type":"alloc","pid":0,"tid":0,"ptr":"18446744073709551615","size":1}',
        '{"ts":31,"type":"sched","cpu":1023,"prev_tid":1,"next_tid":2,"next_pid":0}',
        '{"ts":32,"type":"alloc","pid":1,"tid":1,"ptr":"9","size":8,"extra":1}',
        '{"ts":33,"type":"dealloc","pid":1,"tid":1,"ptr":"9","junk":true}',
    ]
    path = tmp_path / "t.jsonl"
    path.write_text("\n".join(lines) + "\n")
    lenient = read_trace(path, strict=False)
    expected = [parse_line(l, strict=False) for l in lines]
    assert list(lenient.events()) == expected
    with pytest.raises(TraceFormatError) as exc:
        read_trace(path, strict=True)
    assert exc.value.line == 7  # first line with unknown fields


def test_read_lenient_skips_and_counts(tmp_path):
    path = tmp_path / "t.jsonl"
    lines = [
        event_to_json(SAMPLE_EVENTS[0]),
        "garbage",
        "",
        event_to_json(SAMPLE_EVENTS[2]),
    ]
    path.write_text("\n".join(lines) + "\n")
    tr = read_trace(path, strict=False)
    assert len(tr) == 2
    assert tr.skipped_lines == 1  # blank lines are not counted


def test_read_strict_reports_line_number(tmp_path):
    path = tmp_path / "t.jsonl"
    path.write_text(event_to_json(SAMPLE_EVENTS[0]) + "\ngarbage\n")
    with pytest.raises(TraceFormatError) as exc:
        read_trace(path, strict=True)
    assert exc.value.line == 2


def test_timestamp_regression_is_malformed(tmp_path):
    path = tmp_path / "t.jsonl"
    path.write_text(
        '{"ts":10,"type":"alloc","pid":1,"tid":1,"ptr":"1","size":8}\n'
        '{"ts":5,"type":"alloc","pid":1,"tid":1,"ptr":"2","size":8}\n'
    )
    with pytest.raises(TraceFormatError) as exc:
        read_trace(path, strict=True)
    assert exc.value.line == 2
    lenient = read_trace(path, strict=False)
    assert lenient.skipped_lines == 1
    assert len(lenient) == 1


def test_from_events_rejects_regressing_ts():
    with pytest.raises(ValueError):
        Trace.from_events(
            [
                MemoryEvent(ts=10, kind=ALLOC, pid=1, tid=1, ptr=1, size=8),
                MemoryEvent(ts=5, kind=ALLOC, pid=1, tid=1, ptr=2, size=8),
            ]
        )


def test_trace_preserves_interleaving():
    tr = Trace.from_events(SAMPLE_EVENTS)
    assert tr.n_mem == 2
    assert tr.n_sched == 2
    assert [type(e).__name__ for e in tr.events()] == [
        "MemoryEvent", "SchedEvent", "MemoryEvent", "SchedEvent",
    ]
    assert tr.last_ts() == 20


def test_empty_trace():
    tr = Trace.empty()
    assert len(tr) == 0
    assert tr.last_ts() == 0
    assert list(tr.events()) == []


mem_events = st.builds(
    MemoryEvent,
    ts=st.integers(min_value=0, max_value=10**15),
    kind=st.sampled_from([ALLOC, DEALLOC]),
    pid=st.integers(min_value=0, max_value=2**31),
    tid=st.integers(min_value=0, max_value=2**31),
    ptr=st.integers(min_value=0, max_value=2**64 - 1),
    size=st.integers(min_value=1, max_value=2**40),
)
sched_events = st.builds(
    SchedEvent,
    ts=st.integers(min_value=0, max_value=10**15),
    cpu=st.integers(min_value=0, max_value=1023),
    prev_tid=st.integers(min_value=0, max_value=2**31),
    next_tid=st.integers(min_value=0, max_value=2**31),
    next_pid=st.integers(min_value=0, max_value=2**31),
)


@given(ev=st.one_of(mem_events, sched_events))
@settings(max_examples=200, deadline=None)
def test_round_trip_property(ev):
    if isinstance(ev, MemoryEvent) and ev.kind == DEALLOC:
        ev = MemoryEvent(ev.ts, ev.kind, ev.pid, ev.tid, ev.ptr, 0)
    assert parse_line(event_to_json(ev), strict=True) == ev
