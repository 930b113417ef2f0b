"""Haptic pager command encoding and dispatch.

The wire format is a plain ASCII line per command, ``PAGE <pager_id>
<vibration_ms>\\r\\n``, written to a byte-stream sink (file, pipe, serial
device path, or TCP socket) selected by a URI-like string. Dispatch runs
off the frame-processing path: events go into a bounded outbox and a single
dispatcher drains it, so a slow sink can never stall the frame loop
(overflow drops the oldest command and counts it).

Commercial paging hardware tolerates at most a page every couple of
seconds; the per-pager refractory interval (default 1.0 s) suppresses
repeat commands faster than that.
"""

from __future__ import annotations

import queue
import socket
import sys
import threading
from dataclasses import dataclass, field
from typing import IO, Callable, Iterable, Mapping, Sequence

from .core import CollisionEvent

PAGER_ID_RANGE = (1, 9999)
VIBRATION_MS_RANGE = (100, 5000)
DEFAULT_REFRACTORY_S = 1.0
DEFAULT_VIBRATION_MS = 500
DEFAULT_OUTBOX_SIZE = 256


class OutOfRange(ValueError):
    pass


class UnmappedPlayer(KeyError):
    pass


class BadSinkUri(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class PagerCommand:
    pager_id: int
    vibration_ms: int
    issued_at: float

    def __post_init__(self) -> None:
        lo, hi = PAGER_ID_RANGE
        if not lo <= self.pager_id <= hi:
            raise OutOfRange(f"pager_id must lie in [{lo}, {hi}], got {self.pager_id}")
        lo, hi = VIBRATION_MS_RANGE
        if not lo <= self.vibration_ms <= hi:
            raise OutOfRange(f"vibration_ms must lie in [{lo}, {hi}], got {self.vibration_ms}")


def encode_command(c: PagerCommand) -> bytes:
    """ASCII line ``PAGE <pager_id> <vibration_ms>\\r\\n``, decimal, no padding."""
    return f"PAGE {c.pager_id:d} {c.vibration_ms:d}\r\n".encode("ascii")


def decode_command(line: bytes, issued_at: float = 0.0) -> PagerCommand:
    """Inverse of encode_command (timestamps are not on the wire)."""
    text = line.decode("ascii")
    if not text.endswith("\r\n"):
        raise ValueError(f"pager line must end with CRLF: {line!r}")
    parts = text[:-2].split(" ")
    if len(parts) != 3 or parts[0] != "PAGE":
        raise ValueError(f"unrecognized pager line: {line!r}")
    pager_id, vibration_ms = parts[1], parts[2]
    if pager_id != str(int(pager_id)) or vibration_ms != str(int(vibration_ms)):
        raise ValueError(f"pager fields must be plain decimals: {line!r}")
    return PagerCommand(pager_id=int(pager_id), vibration_ms=int(vibration_ms), issued_at=issued_at)


class Dispatcher:
    """Turn collision events into per-player pager commands.

    Both players of a firing pair are paged (configurable). A player whose
    previous command was issued less than ``refractory_s`` ago is skipped
    and counted in ``suppressed``; players without a pager mapping are
    counted in ``unmapped`` and logged, never fatal.
    """

    def __init__(
        self,
        pagers: Mapping[str, int],
        refractory_s: float = DEFAULT_REFRACTORY_S,
        vibration_ms: int = DEFAULT_VIBRATION_MS,
        page_both: bool = True,
        log: Callable[[str], None] | None = None,
    ):
        # kept as-is (not copied): live mode passes a growing mapping that
        # allocates pager ids on first sight
        self.pagers = pagers
        self.refractory_s = refractory_s
        self.vibration_ms = vibration_ms
        self.page_both = page_both
        self.suppressed = 0
        self.unmapped = 0
        self._last_issued: dict[int, float] = {}
        self._log = log or (lambda msg: print(msg, file=sys.stderr))

    def dispatch(self, events: Sequence[CollisionEvent], now: float | None = None) -> list[PagerCommand]:
        """Commands for a batch of events, in event order (stable)."""
        commands: list[PagerCommand] = []
        for event in events:
            recipients = event.pair if self.page_both else event.pair[:1]
            for player in recipients:
                pager = self.pagers.get(player.id)
                if pager is None:
                    self.unmapped += 1
                    self._log(f"no pager mapped for player {player.id!r}; event at frame {event.frame} not paged")
                    continue
                issued_at = event.t if now is None else now
                last = self._last_issued.get(pager)
                if last is not None and issued_at - last < self.refractory_s:
                    self.suppressed += 1
                    continue
                self._last_issued[pager] = issued_at
                commands.append(PagerCommand(pager_id=pager, vibration_ms=self.vibration_ms, issued_at=issued_at))
        return commands


def dispatch(
    events: Sequence[CollisionEvent],
    pagers: Mapping[str, int],
    refractory_s: float = DEFAULT_REFRACTORY_S,
    vibration_ms: int = DEFAULT_VIBRATION_MS,
) -> tuple[list[PagerCommand], int]:
    """One-shot dispatch over a full event list; returns (commands, suppressed)."""
    d = Dispatcher(pagers, refractory_s=refractory_s, vibration_ms=vibration_ms)
    commands = d.dispatch(events)
    return commands, d.suppressed


def sequential_pagers(player_ids: Iterable[str]) -> dict[str, int]:
    """Default pager assignment: players sorted by id get pagers 1, 2, ..."""
    return {pid: i + 1 for i, pid in enumerate(sorted(player_ids))}


def load_pager_map(path) -> dict[str, int]:
    """Pager map file: ``player_id,pager_id`` per line, optional header."""
    pagers: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            player_id, _, pager = line.partition(",")
            player_id, pager = player_id.strip(), pager.strip()
            if player_id.lower() == "player_id":
                continue
            pagers[player_id] = int(pager)
    return pagers


# --- sinks ------------------------------------------------------------------


def open_sink(uri: str) -> IO[bytes]:
    """Open a byte sink from a URI-like string.

    ``file:PATH`` (or a bare path), ``serial:/dev/...`` (opened as a file;
    the transmitter shows up as a character device), ``tcp:host:port``,
    and ``-`` for stdout.
    """
    if uri == "-":
        return sys.stdout.buffer
    scheme, _, rest = uri.partition(":")
    if scheme == "file" and rest:
        return open(rest, "wb")
    if scheme == "serial" and rest:
        return open(rest, "wb", buffering=0)
    if scheme == "tcp" and rest:
        host, _, port = rest.rpartition(":")
        if not host or not port.isdigit():
            raise BadSinkUri(f"tcp sink needs host:port, got {uri!r}")
        sock = socket.create_connection((host, int(port)))
        return sock.makefile("wb")
    if ":" not in uri:
        return open(uri, "wb")
    raise BadSinkUri(f"unrecognized sink URI {uri!r}")


class SinkWriter:
    """Bounded outbox in front of a byte sink, drained by one worker thread.

    ``put`` never blocks: when the outbox is full the oldest queued command
    is dropped and counted. ``close`` flushes whatever is queued.
    """

    def __init__(self, sink: IO[bytes], maxsize: int = DEFAULT_OUTBOX_SIZE):
        self.sink = sink
        self.dropped = 0
        self.written = 0
        self._queue: queue.Queue[bytes | None] = queue.Queue(maxsize=maxsize)
        self._lock = threading.Lock()
        self._worker = threading.Thread(target=self._drain, name="pager-sink", daemon=True)
        self._worker.start()

    def put(self, payload: bytes) -> None:
        with self._lock:
            while True:
                try:
                    self._queue.put_nowait(payload)
                    return
                except queue.Full:
                    try:
                        self._queue.get_nowait()
                        self.dropped += 1
                    except queue.Empty:
                        pass

    def _drain(self) -> None:
        while True:
            payload = self._queue.get()
            if payload is None:
                return
            try:
                self.sink.write(payload)
                self.sink.flush()
                self.written += 1
            except (OSError, ValueError):
                self.dropped += 1

    def close(self) -> None:
        self._queue.put(None)
        self._worker.join(timeout=5.0)
        try:
            if self.sink is not sys.stdout.buffer:
                self.sink.close()
        except (OSError, ValueError):
            pass
