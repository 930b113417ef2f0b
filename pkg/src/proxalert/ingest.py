"""Input parsing: recorded tracking CSV, live NDJSON tag feed, rosters.

Two source shapes feed one pipeline:

* Recorded tracking CSV (league player-tracking export): per-player rows,
  one position per player per frame. Each player's mapped tags receive the
  same position so the downstream dual-tag path is identical for recorded
  and live data.
* Live feed: newline-delimited JSON objects, one tag sample per line,
  ``{"tag": str, "t": s, "x": n, "y": n, "unit": "ft"|"yd", "q": n}``
  (unit defaults to feet; positions are converted to yards here, once).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, TextIO

from .core import (
    DEFAULT_FIELD_BOUNDS,
    DEFAULT_SAMPLE_DT,
    PlayerId,
    Point,
    TagSample,
    Vector,
    feet_to_yards,
)


class IngestError(ValueError):
    pass


class MissingHeader(IngestError):
    pass


class EmptyInput(IngestError):
    pass


class MalformedJson(IngestError):
    pass


class MissingField(IngestError):
    def __init__(self, name: str):
        super().__init__(f"missing feed field {name!r}")
        self.field = name


class NonFiniteCoordinate(IngestError):
    pass


class InvalidTimestamp(IngestError):
    pass


class UnknownPlayer(IngestError):
    pass


@dataclass(frozen=True, slots=True)
class TrackingRecord:
    """One row of recorded tracking data, positions in yards."""

    game_id: str
    play_id: str
    frame_id: int
    player_id: str
    pos: Point
    display_name: str | None = None
    jersey: str | None = None
    speed: float | None = None  # yd/s
    direction: float | None = None  # degrees clockwise from field +y
    event: str | None = None


@dataclass(frozen=True, slots=True)
class FrameBatch:
    """All tag samples for one sampling instant, at most one per tag.

    ``given_velocities`` carries any feed-provided per-player velocity
    (yd/s) alongside the samples so the given-velocity estimator can run
    through the same pipeline as the live path.
    """

    frame: int
    t: float
    samples: tuple[TagSample, ...]
    given_velocities: Mapping[str, Vector] = field(default_factory=dict)

    def __post_init__(self) -> None:
        tags = [s.tag_id for s in self.samples]
        if len(tags) != len(set(tags)):
            raise ValueError(f"duplicate tag sample in frame {self.frame}")


# --- roster -------------------------------------------------------------------


class Roster:
    """player id -> PlayerId mapping with a reverse tag index.

    No tag may map to two players.
    """

    def __init__(self, players: Iterable[PlayerId]):
        self.players: dict[str, PlayerId] = {}
        self.tag_to_player: dict[str, str] = {}
        for p in players:
            if p.id in self.players:
                raise IngestError(f"duplicate player id {p.id!r}")
            for tag in p.tag_ids:
                if tag in self.tag_to_player:
                    raise IngestError(f"tag {tag!r} mapped to two players")
                self.tag_to_player[tag] = p.id
            self.players[p.id] = p

    def __len__(self) -> int:
        return len(self.players)

    def __contains__(self, player_id: str) -> bool:
        return player_id in self.players

    def get(self, player_id: str) -> PlayerId | None:
        return self.players.get(player_id)

    def player_for_tag(self, tag_id: str) -> PlayerId | None:
        pid = self.tag_to_player.get(tag_id)
        return self.players[pid] if pid is not None else None

    def ids(self) -> list[str]:
        return sorted(self.players)

    @classmethod
    def from_csv(cls, path) -> "Roster":
        """Roster file: ``player_id,display_name,tag_id_1,tag_id_2`` (tag 2 optional)."""
        players = []
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise EmptyInput("empty roster file")
            if header[0].strip().lower() != "player_id":
                raise MissingHeader(f"unrecognized roster header {header!r}")
            for row in reader:
                if not row or not row[0].strip():
                    continue
                pid = row[0].strip()
                name = row[1].strip() if len(row) > 1 and row[1].strip() else None
                tags = tuple(tok.strip() for tok in row[2:4] if tok.strip())
                if not tags:
                    raise IngestError(f"player {pid!r} has no tags")
                players.append(PlayerId(id=pid, tag_ids=tags, display_name=name))
        return cls(players)

    @classmethod
    def from_records(cls, records: Iterable[TrackingRecord], drop: frozenset[str] = frozenset({"ball"})) -> "Roster":
        """Synthesize a dual-tag roster from recorded data (one position per
        player per frame becomes two co-located tag samples downstream)."""
        seen: dict[str, str | None] = {}
        for r in records:
            if r.player_id in drop:
                continue
            seen.setdefault(r.player_id, r.display_name)
        return cls(
            PlayerId(id=pid, tag_ids=(f"{pid}:L", f"{pid}:R"), display_name=name)
            for pid, name in seen.items()
        )

    @classmethod
    def from_tag_ids(cls, tag_ids: Iterable[str]) -> "Roster":
        """Auto-roster for a raw feed: tag ids of the form ``player:suffix``
        group under one player; bare tag ids become single-tag players."""
        groups: dict[str, list[str]] = {}
        for tag in tag_ids:
            player = tag.rsplit(":", 1)[0] if ":" in tag else tag
            bucket = groups.setdefault(player, [])
            if tag not in bucket:
                bucket.append(tag)
        players = []
        for pid, tags in groups.items():
            if len(tags) > 2:
                raise IngestError(f"more than two tags grouped under player {pid!r}: {tags}")
            players.append(PlayerId(id=pid, tag_ids=tuple(sorted(tags))))
        return cls(players)


# --- recorded tracking CSV ------------------------------------------------------

# Header names as exported (R-style dots); lookups are case-insensitive with
# dots/underscores stripped so frame.id, frameId and frame_id all resolve.
_CSV_FIELDS = {
    "x": "x",
    "y": "y",
    "s": "s",
    "dis": "dis",
    "dir": "dir",
    "o": "o",
    "event": "event",
    "nflid": "nflId",
    "displayname": "displayName",
    "jerseynumber": "jerseyNumber",
    "team": "team",
    "frameid": "frame.id",
    "gameid": "gameId",
    "playid": "playId",
    "time": "time",
}

CSV_HEADER = [
    "time", "x", "y", "s", "dis", "dir", "event", "nflId",
    "displayName", "jerseyNumber", "team", "frame.id", "gameId", "playId",
]


def _normalize(name: str) -> str:
    return name.strip().lower().replace(".", "").replace("_", "")


def _float_or_none(value: str | None) -> float | None:
    if value is None:
        return None
    value = value.strip()
    if not value or value.upper() in {"NA", "NAN", "NULL"}:
        return None
    try:
        out = float(value)
    except ValueError:
        return None
    return out if math.isfinite(out) else None


@dataclass
class CsvParseResult:
    records: list[TrackingRecord]
    skipped: int


def parse_tracking_csv(
    stream: TextIO | Iterable[str],
    play_filter: tuple[str, str] | None = None,
    field_bounds: tuple[float, float, float, float] = DEFAULT_FIELD_BOUNDS,
) -> CsvParseResult:
    """Parse recorded tracking CSV into TrackingRecords, preserving row order.

    Rows whose mandatory fields (x, y, frame id) do not parse, or whose
    position falls outside ``field_bounds``, are skipped and counted rather
    than aborting the run; recorded files contain NA and event-only rows.
    """
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        raise EmptyInput("no rows in tracking CSV")
    columns: dict[str, int] = {}
    for idx, name in enumerate(header):
        key = _normalize(name)
        if key in _CSV_FIELDS and key not in columns:
            columns[key] = idx
    if "x" not in columns or "y" not in columns or "frameid" not in columns:
        raise MissingHeader(f"unrecognized tracking header {header!r}")

    min_x, min_y, max_x, max_y = field_bounds

    def cell(row: list[str], key: str) -> str | None:
        idx = columns.get(key)
        if idx is None or idx >= len(row):
            return None
        return row[idx]

    records: list[TrackingRecord] = []
    skipped = 0
    for row in reader:
        if not row:
            continue
        x = _float_or_none(cell(row, "x"))
        y = _float_or_none(cell(row, "y"))
        frame_raw = cell(row, "frameid")
        try:
            frame_id = int(float(frame_raw)) if frame_raw not in (None, "") else None
        except ValueError:
            frame_id = None
        if x is None or y is None or frame_id is None or frame_id < 1:
            skipped += 1
            continue
        if not (min_x <= x <= max_x and min_y <= y <= max_y):
            skipped += 1
            continue

        game_id = (cell(row, "gameid") or "").strip()
        play_id = (cell(row, "playid") or "").strip()
        if play_filter is not None and (game_id, play_id) != play_filter:
            continue

        nfl_id = (cell(row, "nflid") or "").strip()
        name = (cell(row, "displayname") or "").strip() or None
        if not nfl_id or nfl_id.upper() == "NA":
            # the untagged ball track has no player id in the export
            player_id = "ball" if (name or "").lower() in ("ball", "football", "") else name
        else:
            player_id = nfl_id
        jersey = (cell(row, "jerseynumber") or "").strip() or None
        event = (cell(row, "event") or "").strip() or None
        records.append(
            TrackingRecord(
                game_id=game_id,
                play_id=play_id,
                frame_id=frame_id,
                player_id=player_id or "ball",
                pos=(x, y),
                display_name=name,
                jersey=jersey,
                speed=_float_or_none(cell(row, "s")),
                direction=_float_or_none(cell(row, "dir")),
                event=event,
            )
        )
    return CsvParseResult(records=records, skipped=skipped)


def write_tracking_csv(records: Sequence[TrackingRecord], stream: TextIO) -> None:
    """Serialize TrackingRecords back to the recorded-CSV schema."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow(
            [
                "",
                _trim(r.pos[0]),
                _trim(r.pos[1]),
                _trim(r.speed) if r.speed is not None else "NA",
                "NA",
                _trim(r.direction) if r.direction is not None else "NA",
                r.event or "NA",
                r.player_id if r.player_id != "ball" else "NA",
                r.display_name or ("ball" if r.player_id == "ball" else "NA"),
                r.jersey or "NA",
                "NA",
                str(r.frame_id),
                r.game_id,
                r.play_id,
            ]
        )


def _trim(value: float) -> str:
    # repr round-trips exactly; strip a trailing .0 for integer-valued floats
    text = repr(float(value))
    return text[:-2] if text.endswith(".0") else text


def extract_given_velocity(r: TrackingRecord) -> Vector | None:
    """Velocity vector from the feed's speed/direction columns, if present.

    Direction follows the dataset convention: degrees clockwise from the
    field +y axis, so 0 deg points +y and 90 deg points +x.
    """
    if r.speed is None or r.direction is None:
        return None
    if r.speed == 0.0:
        return (0.0, 0.0)
    theta = math.radians(r.direction)
    return (r.speed * math.sin(theta), r.speed * math.cos(theta))


@dataclass
class BatchResult:
    batches: list[FrameBatch]
    dropped: int


def records_to_batches(
    records: Sequence[TrackingRecord],
    roster: Roster,
    sample_dt: float = DEFAULT_SAMPLE_DT,
    strict: bool = False,
) -> BatchResult:
    """Group records by frame id into FrameBatches of synthetic tag samples.

    Each mapped tag of a player receives the player's recorded position
    (the recorded feed is per-player). Records for players absent from the
    roster raise UnknownPlayer in strict mode, else are dropped and counted.
    Frame timestamps are (frame_id - 1) * sample_dt; file frame ids are kept.
    """
    ordered = records
    if any(ordered[i].frame_id > ordered[i + 1].frame_id for i in range(len(ordered) - 1)):
        ordered = sorted(records, key=lambda r: r.frame_id)

    batches: list[FrameBatch] = []
    dropped = 0
    current_frame: int | None = None
    samples: list[TagSample] = []
    velocities: dict[str, Vector] = {}

    def close() -> None:
        if current_frame is not None:
            t = (current_frame - 1) * sample_dt
            batches.append(
                FrameBatch(frame=current_frame, t=t, samples=tuple(samples), given_velocities=dict(velocities))
            )

    for r in ordered:
        player = roster.get(r.player_id)
        if player is None:
            if strict:
                raise UnknownPlayer(f"record for unmapped player {r.player_id!r}")
            dropped += 1
            continue
        if r.frame_id != current_frame:
            close()
            current_frame = r.frame_id
            samples = []
            velocities = {}
        t = (r.frame_id - 1) * sample_dt
        for tag in player.tag_ids:
            samples.append(TagSample(tag_id=tag, t=t, pos=r.pos))
        vel = extract_given_velocity(r)
        if vel is not None:
            velocities[player.id] = vel
    close()
    return BatchResult(batches=batches, dropped=dropped)


# --- live NDJSON feed -----------------------------------------------------------


def parse_feed_line(line: str) -> TagSample:
    """Parse one feed line into a TagSample with the position in yards.

    Schema: ``{"tag": str, "t": seconds, "x": n, "y": n,
    "unit": "ft"|"yd" (default "ft"), "q": optional quality}``.
    """
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedJson(f"bad feed line: {exc}") from None
    if not isinstance(obj, dict):
        raise MalformedJson(f"feed line is not a JSON object: {line!r}")

    for name in ("tag", "t", "x", "y"):
        if name not in obj:
            raise MissingField(name)
    tag = obj["tag"]
    if not isinstance(tag, str) or not tag:
        raise MalformedJson(f"tag must be a non-empty string, got {tag!r}")

    try:
        t = float(obj["t"])
        x = float(obj["x"])
        y = float(obj["y"])
    except (TypeError, ValueError) as exc:
        raise MalformedJson(f"non-numeric field: {exc}") from None
    if not (math.isfinite(x) and math.isfinite(y)):
        raise NonFiniteCoordinate(f"coordinates must be finite, got ({obj['x']!r}, {obj['y']!r})")
    if not math.isfinite(t) or t < 0.0:
        raise InvalidTimestamp(f"timestamp must be finite and non-negative, got {obj['t']!r}")

    unit = obj.get("unit", "ft")
    if unit == "ft":
        x, y = feet_to_yards(x), feet_to_yards(y)
    elif unit != "yd":
        raise MalformedJson(f"unknown unit {unit!r}")

    quality = obj.get("q")
    if quality is not None:
        try:
            quality = float(quality)
        except (TypeError, ValueError):
            raise MalformedJson(f"quality must be numeric, got {quality!r}") from None
        quality = min(1.0, max(0.0, quality))
    return TagSample(tag_id=tag, t=t, pos=(x, y), quality=quality)


def format_feed_line(sample: TagSample) -> str:
    """Inverse of parse_feed_line for yard-unit samples (round-trips exactly)."""
    obj: dict = {"tag": sample.tag_id, "t": sample.t, "x": sample.pos[0], "y": sample.pos[1], "unit": "yd"}
    if sample.quality is not None:
        obj["q"] = sample.quality
    return json.dumps(obj, separators=(",", ":"))


class FrameAssembler:
    """Fold a time-ordered tag sample stream into per-frame batches.

    Frame index is ``round((t - t0) / sample_dt)`` with ``t0`` the first
    sample's timestamp. A frame closes when a later frame's first sample
    arrives (or the caller flushes, e.g. on feed timeout/EOF); frames with
    no samples are emitted empty so staleness advances one frame at a time.
    Samples for already-closed frames and non-increasing per-tag timestamps
    are dropped and counted.
    """

    def __init__(self, sample_dt: float):
        self.sample_dt = sample_dt
        self.t0: float | None = None
        self.current: int | None = None
        self._samples: dict[str, TagSample] = {}
        self._last_t: dict[str, float] = {}
        self.dropped_late = 0
        self.dropped_stale = 0

    def frame_of(self, t: float) -> int:
        assert self.t0 is not None
        return round((t - self.t0) / self.sample_dt)

    def frame_time(self, frame: int) -> float:
        assert self.t0 is not None
        return self.t0 + frame * self.sample_dt

    def add(self, sample: TagSample) -> list[FrameBatch]:
        """Feed one sample; return any batches this sample closed."""
        if self.t0 is None:
            self.t0 = sample.t
            self.current = 0
        frame = self.frame_of(sample.t)
        closed: list[FrameBatch] = []
        if frame < self.current:
            self.dropped_late += 1
            return closed
        last = self._last_t.get(sample.tag_id)
        if last is not None and sample.t <= last:
            self.dropped_stale += 1
            return closed
        self._last_t[sample.tag_id] = sample.t
        while frame > self.current:
            closed.append(self._close_current())
        # duplicate tag within one frame keeps the newer reading
        self._samples[sample.tag_id] = sample
        return closed

    def flush(self) -> list[FrameBatch]:
        """Close the in-progress frame (timeout or end of feed)."""
        if self.current is None or not self._samples:
            return []
        return [self._close_current()]

    def _close_current(self) -> FrameBatch:
        batch = FrameBatch(
            frame=self.current,
            t=self.frame_time(self.current),
            samples=tuple(self._samples.values()),
        )
        self._samples.clear()
        self.current += 1
        return batch


def read_feed(stream: Iterable[str], sample_dt: float) -> tuple[list[FrameBatch], int]:
    """Read a whole NDJSON feed into batches; returns (batches, bad_lines)."""
    assembler = FrameAssembler(sample_dt)
    batches: list[FrameBatch] = []
    bad = 0
    for line in stream:
        if not line.strip():
            continue
        try:
            sample = parse_feed_line(line)
        except IngestError:
            bad += 1
            continue
        batches.extend(assembler.add(sample))
    batches.extend(assembler.flush())
    return batches, bad
