"""Pipeline drivers: recorded-data replay, live feed mode, run statistics.

Both drivers run the same frame loop (tracking then prediction, one frame
at a time, gaps filled with empty frames so staleness advances), so max
speed, paced replay, and the live path produce identical event logs: pacing
and queueing affect when a frame is processed, never what it computes.

Per-frame processing latency is measured from frame close to events
emitted, in microseconds; at 10 Hz the hard real-time budget is one sample
interval (10 ms).
"""

from __future__ import annotations

import csv
import math
import socket
import sys
import time
from dataclasses import dataclass, field
from queue import Empty, Queue
from threading import Thread
from typing import IO, Callable, Iterable, TextIO

from .alerts import Dispatcher, SinkWriter, encode_command, open_sink
from .core import (
    CollisionEvent,
    ConfigError,
    MatchReport,
    PlayerId,
    Point,
    RunConfig,
    validate_config,
)
from .evaluation import (
    GroundTruthConfig,
    detect_actual,
    evaluate_fixture,
    is_incident_fixture,
    load_incident_fixture,
    match_events,
    side_by_side_summary,
    summarize,
)
from .ingest import (
    FrameAssembler,
    FrameBatch,
    IngestError,
    Roster,
    parse_feed_line,
    parse_tracking_csv,
    records_to_batches,
)
from .predictor import CollisionPredictor, EVENT_LOG_HEADER, format_event_row
from .tracking import PlayerTracker, TagHistory, TrackState

LATENCY_BUCKETS_US = (50, 100, 200, 500, 1000, 2000, 5000, 10000)
FRAME_TIMEOUT_FACTOR = 1.5


class FeedConnectionError(OSError):
    pass


@dataclass
class RunStats:
    """Counters and the per-frame latency distribution for one run."""

    frames_processed: int = 0
    events_predicted: int = 0
    latencies_us: list[float] = field(default_factory=list)
    counters: dict[str, int] = field(default_factory=dict)
    wall_seconds: float = 0.0

    def record_frame(self, latency_us: float, events: int) -> None:
        self.frames_processed += 1
        self.events_predicted += events
        self.latencies_us.append(latency_us)

    def bump(self, counter: str, amount: int = 1) -> None:
        if amount:
            self.counters[counter] = self.counters.get(counter, 0) + amount

    def histogram(self) -> list[tuple[str, int]]:
        """Latency histogram; bucket counts sum to frames_processed."""
        counts = [0] * (len(LATENCY_BUCKETS_US) + 1)
        for us in self.latencies_us:
            for i, edge in enumerate(LATENCY_BUCKETS_US):
                if us < edge:
                    counts[i] += 1
                    break
            else:
                counts[-1] += 1
        labels = []
        lo = 0
        for edge in LATENCY_BUCKETS_US:
            labels.append(f"[{lo}, {edge}) us")
            lo = edge
        labels.append(f">= {lo} us")
        return list(zip(labels, counts))

    def percentile(self, p: float) -> float:
        """Nearest-rank percentile of the per-frame latency, in microseconds."""
        if not self.latencies_us:
            return 0.0
        ordered = sorted(self.latencies_us)
        rank = max(1, math.ceil(p / 100.0 * len(ordered)))
        return ordered[rank - 1]

    def render(self) -> str:
        lines = [
            f"frames_processed={self.frames_processed}",
            f"events_predicted={self.events_predicted}",
            f"wall_seconds={self.wall_seconds:.3f}",
        ]
        if self.latencies_us:
            lines.append(
                "latency_us "
                f"p50={self.percentile(50):.0f} p99={self.percentile(99):.0f} "
                f"max={max(self.latencies_us):.0f}"
            )
            for label, count in self.histogram():
                if count:
                    lines.append(f"  {label}: {count}")
        for name in sorted(self.counters):
            lines.append(f"{name}={self.counters[name]}")
        return "\n".join(lines) + "\n"


class Pipeline:
    """Tracking plus prediction for one frame stream.

    Also accumulates the raw (unsmoothed) fused position per player per
    frame, which is the ground-truth input for evaluation; that bookkeeping
    sits outside the timed section.
    """

    def __init__(self, roster: Roster, run_cfg: RunConfig, dynamic_roster: bool = False):
        validate_config(run_cfg.predictor)
        self.cfg = run_cfg.predictor
        self.run_cfg = run_cfg
        self.tracker = PlayerTracker(roster, self.cfg, fuse_before_smooth=run_cfg.fuse_before_smooth)
        self.predictor = CollisionPredictor(self.cfg)
        self.dynamic_roster = dynamic_roster
        self.stats = RunStats()
        self.events: list[CollisionEvent] = []
        self.raw_frames: list[tuple[int, float, dict[str, Point]]] = []
        self.rejected_tags = 0

    # -- dynamic roster growth (raw feeds without a roster file) --

    def accept_tag(self, tag_id: str) -> bool:
        roster = self.tracker.roster
        if tag_id in roster.tag_to_player:
            return True
        if not self.dynamic_roster:
            return False
        pid = tag_id.rsplit(":", 1)[0] if ":" in tag_id else tag_id
        player = roster.get(pid)
        if player is None:
            player = PlayerId(id=pid, tag_ids=(tag_id,))
            roster.players[pid] = player
            roster.tag_to_player[tag_id] = pid
            self.tracker.tracks[pid] = TrackState.fresh(player)
            return True
        if len(player.tag_ids) >= 2:
            self.rejected_tags += 1
            return False
        grown = PlayerId(
            id=pid, tag_ids=tuple(sorted((*player.tag_ids, tag_id))), display_name=player.display_name
        )
        roster.players[pid] = grown
        roster.tag_to_player[tag_id] = pid
        track = self.tracker.tracks[pid]
        track.player = grown
        track.histories[tag_id] = TagHistory(tag_id)
        return True

    def process_batch(self, batch: FrameBatch) -> list[CollisionEvent]:
        if self.dynamic_roster:
            for sample in batch.samples:
                self.accept_tag(sample.tag_id)

        raw: dict[str, list[Point]] = {}
        for sample in batch.samples:
            pid = self.tracker.roster.tag_to_player.get(sample.tag_id)
            if pid is not None:
                raw.setdefault(pid, []).append(sample.pos)
        self.raw_frames.append(
            (
                batch.frame,
                batch.t,
                {
                    pid: (sum(p[0] for p in pts) / len(pts), sum(p[1] for p in pts) / len(pts))
                    for pid, pts in raw.items()
                },
            )
        )

        start = time.perf_counter_ns()
        states = self.tracker.advance_frame(batch.frame, batch.t, batch.samples, batch.given_velocities)
        events = self.predictor.step_frame(states)
        latency_us = (time.perf_counter_ns() - start) / 1000.0

        self.stats.record_frame(latency_us, len(events))
        self.events.extend(events)
        return events

    def ground_truth(self) -> list[CollisionEvent]:
        gt_cfg = GroundTruthConfig(
            threshold=self.cfg.threshold, hysteresis_factor=self.cfg.hysteresis_factor
        )
        return detect_actual(self.raw_frames, gt_cfg, players=self.tracker.roster.players)

    def match_report(self) -> MatchReport:
        return match_events(self.events, self.ground_truth(), tolerance=self.cfg.match_tolerance)


def iter_with_gap_fill(batches: Iterable[FrameBatch]) -> Iterable[FrameBatch]:
    """Emit every frame index between the first and last batch, inserting
    empty batches for gaps so staleness advances exactly one per frame."""
    prev: FrameBatch | None = None
    for batch in batches:
        if prev is not None and batch.frame > prev.frame + 1:
            gap = batch.frame - prev.frame
            dt = (batch.t - prev.t) / gap
            for i in range(1, gap):
                yield FrameBatch(frame=prev.frame + i, t=prev.t + dt * i, samples=())
        yield batch
        prev = batch


@dataclass
class ReplayResult:
    events: list[CollisionEvent]
    actual: list[CollisionEvent]
    stats: RunStats
    report: MatchReport | None
    fixture_reports: dict[str, MatchReport] | None = None
    summary_text: str = ""


def _parse_speed(speed: str | float) -> float | None:
    """'max' -> None (no pacing); '2x'/'0.5x'/numeric -> realtime multiplier."""
    if speed is None or speed == "max":
        return None
    if isinstance(speed, (int, float)):
        value = float(speed)
    else:
        text = speed.strip().lower()
        value = float(text[:-1] if text.endswith("x") else text)
    if value <= 0:
        raise ConfigError("BadValue", f"speed must be positive, got {speed!r}")
    return value


def _load_batches(path, run_cfg: RunConfig, play_filter, stats: RunStats) -> tuple[list[FrameBatch], Roster, bool]:
    """Read a data file into batches; returns (batches, roster, dynamic)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        head = fh.readline()
        fh.seek(0)
        if head.lstrip().startswith("{"):
            # NDJSON tag feed: same dynamic-roster path as live mode
            assembler = FrameAssembler(run_cfg.predictor.sample_dt)
            batches: list[FrameBatch] = []
            bad = 0
            for line in fh:
                if not line.strip():
                    continue
                try:
                    sample = parse_feed_line(line)
                except IngestError:
                    bad += 1
                    continue
                batches.extend(assembler.add(sample))
            batches.extend(assembler.flush())
            stats.bump("feed_lines_skipped", bad)
            stats.bump("samples_dropped_late", assembler.dropped_late + assembler.dropped_stale)
            return batches, Roster([]), True
        parsed = parse_tracking_csv(fh, play_filter=play_filter, field_bounds=run_cfg.field_bounds)
        stats.bump("csv_rows_skipped", parsed.skipped)
        roster = Roster.from_records(parsed.records)
        result = records_to_batches(
            parsed.records, roster, sample_dt=run_cfg.predictor.sample_dt, strict=run_cfg.strict_roster
        )
        stats.bump("records_dropped_unrostered", result.dropped)
        return result.batches, roster, False


def replay(
    path,
    run_cfg: RunConfig | None = None,
    speed: str | float = "max",
    play_filter: tuple[str, str] | None = None,
    event_stream: TextIO | None = None,
) -> ReplayResult:
    """Replay a recorded data file through the full pipeline.

    ``speed`` is ``"max"`` or a realtime multiplier (``"1x"``, ``"2x"``, 2.0).
    When the input is a side-by-side incident fixture the run is metrics
    only: no pipeline, just the per-variant match reports.
    """
    run_cfg = run_cfg or RunConfig()
    pace = _parse_speed(speed)

    if is_incident_fixture(path):
        fixture = load_incident_fixture(path)
        reports = evaluate_fixture(fixture, tolerance=run_cfg.predictor.match_tolerance)
        summary = side_by_side_summary(
            list(fixture.actual),
            {name: (list(fixture.predicted[name]), reports[name]) for name in sorted(reports)},
        )
        if event_stream is not None:
            event_stream.write(summary)
        return ReplayResult(
            events=[], actual=list(fixture.actual), stats=RunStats(), report=None,
            fixture_reports=reports, summary_text=summary,
        )

    stats = RunStats()
    batches, roster, dynamic = _load_batches(path, run_cfg, play_filter, stats)
    pipeline = Pipeline(roster, run_cfg, dynamic_roster=dynamic)
    pipeline.stats = stats

    if event_stream is not None:
        writer = csv.writer(event_stream, lineterminator="\n")
        writer.writerow(EVENT_LOG_HEADER)
    start_wall = time.perf_counter()
    t_first: float | None = None
    for batch in iter_with_gap_fill(batches):
        if pace is not None:
            if t_first is None:
                t_first = batch.t
            target = start_wall + (batch.t - t_first) / pace
            delay = target - time.perf_counter()
            if delay > 0:
                time.sleep(delay)
        events = pipeline.process_batch(batch)
        if event_stream is not None and events:
            for event in events:
                writer.writerow(format_event_row(event))
    stats.wall_seconds = time.perf_counter() - start_wall

    report = pipeline.match_report() if pipeline.raw_frames else None
    actual = pipeline.ground_truth() if pipeline.raw_frames else []
    summary = summarize(report, title="predicted vs ground truth") if report else ""
    return ReplayResult(
        events=pipeline.events, actual=actual, stats=stats, report=report, summary_text=summary
    )


# --- live mode -----------------------------------------------------------------


def _open_feed(uri: str, retry_limit: int, backoff_s: float, log: Callable[[str], None]) -> IO[str]:
    if uri == "-":
        return sys.stdin
    scheme, _, rest = uri.partition(":")
    if scheme == "file" and rest:
        return open(rest, "r", encoding="utf-8")
    if scheme == "tcp" and rest:
        host, _, port = rest.rpartition(":")
        if not host or not port.isdigit():
            raise FeedConnectionError(f"tcp feed needs host:port, got {uri!r}")
        attempt = 0
        while True:
            try:
                sock = socket.create_connection((host, int(port)), timeout=5.0)
                return sock.makefile("r", encoding="utf-8")
            except OSError as exc:
                attempt += 1
                if attempt > retry_limit:
                    raise FeedConnectionError(f"cannot connect to feed {uri!r}: {exc}") from exc
                log(f"feed connect failed ({exc}); retry {attempt}/{retry_limit}")
                time.sleep(backoff_s * (2 ** (attempt - 1)))
    if ":" not in uri:
        return open(uri, "r", encoding="utf-8")
    raise FeedConnectionError(f"unrecognized feed URI {uri!r}")


def live(
    feed_uri: str,
    sink_uri: str,
    run_cfg: RunConfig | None = None,
    pagers: dict[str, int] | None = None,
    event_stream: TextIO | None = None,
    retry_limit: int = 5,
    backoff_s: float = 0.5,
    log: Callable[[str], None] | None = None,
) -> RunStats:
    """End-to-end live path: feed -> frames -> prediction -> pager sink.

    A single reader thread feeds an ordered queue; the processing loop
    assembles frames (closing a frame when the next frame's first sample
    arrives, or after a 1.5 x sample_dt lull), runs the pipeline, and hands
    events to the dispatcher, which writes the sink off the frame path.
    Runs until feed EOF or interrupt.
    """
    run_cfg = run_cfg or RunConfig()
    log = log or (lambda msg: print(msg, file=sys.stderr))
    dt = run_cfg.predictor.sample_dt

    feed = _open_feed(feed_uri, retry_limit, backoff_s, log)
    sink = SinkWriter(open_sink(sink_uri))
    pipeline = Pipeline(Roster([]), run_cfg, dynamic_roster=True)
    dispatcher = Dispatcher(
        pagers if pagers is not None else _GrowingPagers(),
        refractory_s=run_cfg.refractory_s,
        vibration_ms=run_cfg.vibration_ms,
        page_both=run_cfg.page_both,
        log=log,
    )
    assembler = FrameAssembler(dt)
    stats = pipeline.stats

    # queue items: ("line", text) | ("eof", None) | ("error", exception)
    lines: Queue[tuple[str, object]] = Queue(maxsize=10000)

    def close_quietly(stream) -> None:
        if stream is not sys.stdin and stream is not feed:
            try:
                stream.close()
            except OSError:
                pass

    def read_feed() -> None:
        current = feed
        while True:
            try:
                for line in current:
                    lines.put(("line", line))
                lines.put(("eof", None))  # graceful close is end of feed
                close_quietly(current)
                return
            except OSError as exc:
                # mid-stream loss: reconnect with backoff (tcp feeds only),
                # resuming at the live point of the broadcast
                log(f"feed connection lost ({exc}); reconnecting")
                close_quietly(current)
                if not feed_uri.startswith("tcp:"):
                    lines.put(("error", FeedConnectionError(f"feed {feed_uri!r} failed: {exc}")))
                    return
                try:
                    current = _open_feed(feed_uri, retry_limit, backoff_s, log)
                except FeedConnectionError as final:
                    lines.put(("error", final))
                    return

    reader = Thread(target=read_feed, name="feed-reader", daemon=True)
    reader.start()

    if event_stream is not None:
        writer = csv.writer(event_stream, lineterminator="\n")
        writer.writerow(EVENT_LOG_HEADER)

    def process(batches: list[FrameBatch]) -> None:
        for batch in batches:
            events = pipeline.process_batch(batch)
            if events:
                if event_stream is not None:
                    for event in events:
                        writer.writerow(format_event_row(event))
                    event_stream.flush()
                for command in dispatcher.dispatch(events):
                    sink.put(encode_command(command))

    start_wall = time.perf_counter()
    try:
        while True:
            try:
                kind, payload = lines.get(timeout=FRAME_TIMEOUT_FACTOR * dt)
            except Empty:
                # frame timeout: a partially filled frame flows into the
                # staleness path instead of stalling the loop
                process(assembler.flush())
                continue
            if kind == "eof":
                break
            if kind == "error":
                process(assembler.flush())
                raise payload
            line = payload
            if not line.strip():
                continue
            try:
                sample = parse_feed_line(line)
            except IngestError:
                stats.bump("feed_lines_skipped")
                continue
            process(assembler.add(sample))
        process(assembler.flush())
    finally:
        # the suppression/overflow counters are part of the report contract
        # even when zero
        stats.counters["samples_dropped_late"] = assembler.dropped_late + assembler.dropped_stale
        stats.counters["alerts_suppressed"] = dispatcher.suppressed
        stats.counters["alerts_unmapped"] = dispatcher.unmapped
        stats.bump("tags_rejected", pipeline.rejected_tags)
        sink.close()
        stats.counters["sink_dropped"] = sink.dropped
        if feed is not sys.stdin:
            feed.close()
    stats.wall_seconds = time.perf_counter() - start_wall
    return stats


class _GrowingPagers(dict):
    """Pager map that allocates the next free id on first sight of a player."""

    def get(self, player_id, default=None):
        if player_id not in self:
            self[player_id] = len(self) + 1
        return dict.get(self, player_id)
