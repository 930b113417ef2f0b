import threading
import time

import pytest

from proxalert.alerts import (
    Dispatcher,
    OutOfRange,
    PagerCommand,
    SinkWriter,
    decode_command,
    dispatch,
    encode_command,
    load_pager_map,
    open_sink,
    sequential_pagers,
)
from proxalert.core import CollisionEvent, EventKind, PlayerId


def _event(pa, pb, frame, t):
    return CollisionEvent(
        pair=(PlayerId(id=pa, tag_ids=(pa,)), PlayerId(id=pb, tag_ids=(pb,))),
        frame=frame,
        t=t,
        kind=EventKind.PREDICTED,
        min_predicted_distance=0.5,
    )


def test_encode_golden_bytes():
    assert encode_command(PagerCommand(pager_id=3, vibration_ms=500, issued_at=0.0)) == b"PAGE 3 500\r\n"


def test_encode_boundary_values():
    assert encode_command(PagerCommand(pager_id=9999, vibration_ms=5000, issued_at=1.0)) == b"PAGE 9999 5000\r\n"
    assert encode_command(PagerCommand(pager_id=1, vibration_ms=100, issued_at=1.0)) == b"PAGE 1 100\r\n"


@pytest.mark.parametrize(
    "pager_id,vibration_ms",
    [(0, 500), (10000, 500), (-3, 500), (3, 99), (3, 5001)],
)
def test_out_of_range_rejected(pager_id, vibration_ms):
    with pytest.raises(OutOfRange):
        PagerCommand(pager_id=pager_id, vibration_ms=vibration_ms, issued_at=0.0)


def test_decode_round_trips_all_valid_lines():
    for pager_id in (1, 9, 42, 9999):
        for ms in (100, 500, 4999, 5000):
            c = PagerCommand(pager_id=pager_id, vibration_ms=ms, issued_at=0.0)
            assert decode_command(encode_command(c)) == c


def test_decode_rejects_padding_and_garbage():
    with pytest.raises(ValueError):
        decode_command(b"PAGE 003 500\r\n")
    with pytest.raises(ValueError):
        decode_command(b"PAGE 3 500\n")
    with pytest.raises(ValueError):
        decode_command(b"BUZZ 3 500\r\n")


def test_dispatch_pages_both_players():
    commands, suppressed = dispatch([_event("1", "2", 10, 1.0)], {"1": 1, "2": 2})
    assert [(c.pager_id, c.vibration_ms) for c in commands] == [(1, 500), (2, 500)]
    assert suppressed == 0


def test_dispatch_refractory_suppression():
    # two events 0.2 s apart sharing player 1: 3 commands, 1 suppression
    events = [_event("1", "2", 10, 1.0), _event("1", "3", 12, 1.2)]
    commands, suppressed = dispatch(events, {"1": 1, "2": 2, "3": 3})
    assert [c.pager_id for c in commands] == [1, 2, 3]
    assert suppressed == 1


def test_dispatch_empty():
    commands, suppressed = dispatch([], {"1": 1})
    assert commands == []
    assert suppressed == 0


def test_dispatch_unmapped_player_not_fatal():
    logged = []
    d = Dispatcher({"1": 1}, log=logged.append)
    commands = d.dispatch([_event("1", "9", 10, 1.0)])
    assert [c.pager_id for c in commands] == [1]
    assert d.unmapped == 1
    assert logged and "9" in logged[0]


def test_dispatch_order_is_stable_and_spacing_enforced():
    # a burst of events across 3 seconds; per-pager spacing must stay >= 1.0 s
    events = []
    t = 0.0
    frame = 0
    for _ in range(30):
        events.append(_event("1", "2", frame, t))
        t += 0.1
        frame += 1
    d = Dispatcher({"1": 1, "2": 2})
    commands = d.dispatch(events)
    issued = [c.issued_at for c in commands]
    assert issued == sorted(issued)
    for pager in (1, 2):
        times = [c.issued_at for c in commands if c.pager_id == pager]
        gaps = [b - a for a, b in zip(times, times[1:])]
        assert all(g >= 1.0 - 1e-9 for g in gaps)
        assert len(times) == 3  # 0.0, 1.0, 2.0 out of a 2.9 s burst


def test_dispatch_page_one_only():
    d = Dispatcher({"1": 1, "2": 2}, page_both=False)
    commands = d.dispatch([_event("1", "2", 10, 1.0)])
    assert [c.pager_id for c in commands] == [1]


def test_sequential_pagers():
    assert sequential_pagers(["b", "a", "c"]) == {"a": 1, "b": 2, "c": 3}


def test_load_pager_map(tmp_path):
    path = tmp_path / "pagers.csv"
    path.write_text("player_id,pager_id\nalice,3\nbob,4\n# comment\n")
    assert load_pager_map(path) == {"alice": 3, "bob": 4}


def test_sink_writer_writes_in_order(tmp_path):
    path = tmp_path / "out.bin"
    writer = SinkWriter(open_sink(f"file:{path}"))
    for i in range(1, 6):
        writer.put(encode_command(PagerCommand(pager_id=i, vibration_ms=500, issued_at=0.0)))
    writer.close()
    lines = path.read_bytes().split(b"\r\n")[:-1]
    assert lines == [f"PAGE {i} 500".encode() for i in range(1, 6)]


def test_sink_writer_drops_oldest_on_overflow():
    class Blocked:
        """Sink whose write blocks until released."""

        def __init__(self):
            self.release = threading.Event()
            self.seen = []

        def write(self, payload):
            self.release.wait(timeout=5.0)
            self.seen.append(payload)

        def flush(self):
            pass

        def close(self):
            pass

    sink = Blocked()
    writer = SinkWriter(sink, maxsize=4)
    for i in range(1, 10):
        writer.put(b"cmd %d\r\n" % i)
    sink.release.set()
    writer.close()
    assert writer.dropped >= 1
    assert writer.dropped + len(sink.seen) == 9
    # whatever survived is still in order
    nums = [int(p.split()[1]) for p in sink.seen]
    assert nums == sorted(nums)


def test_sink_writer_never_blocks_producer():
    class Slow:
        def write(self, payload):
            time.sleep(0.05)

        def flush(self):
            pass

        def close(self):
            pass

    writer = SinkWriter(Slow(), maxsize=2)
    start = time.perf_counter()
    for _ in range(50):
        writer.put(b"PAGE 1 500\r\n")
    elapsed = time.perf_counter() - start
    writer.close()
    assert elapsed < 0.5  # 50 puts against a 2.5 s-slow sink
