"""Per-pair collision prediction state machine.

A pair fires when the one-step-ahead distance drops below the threshold
while strictly decreasing; hysteresis then holds the pair in an alerted
episode so one physical approach yields exactly one event. Release requires
the measured distance to clear threshold * hysteresis_factor for two
consecutive frames, and at least ``min_event_gap`` frames since the fire.

All transitions are pure (state in, state + optional event out); the engine
applies them pair by pair per frame. With at most 22 players the all-pairs
sweep is 231 distance checks, comfortably inside the sample budget, so no
spatial index is used.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, TextIO

from .core import (
    CollisionEvent,
    EventKind,
    PlayerId,
    PlayerState,
    PredictorConfig,
    pair_key,
)
from .tracking import extrapolate

#: Consecutive frames the measured distance must sit above the release
#: radius before an alerted episode closes.
RELEASE_FRAMES = 2


class StalePlayer(ValueError):
    """A player exceeding max_staleness reached step_pair; callers filter."""


class PairPhase(Enum):
    CLEAR = "clear"
    ALERTED = "alerted"


@dataclass(frozen=True, slots=True)
class PairState:
    """Alert phase and release bookkeeping for one unordered player pair."""

    pair: tuple[str, str]
    phase: PairPhase = PairPhase.CLEAR
    last_measured_distance: float | None = None
    frames_above_release: int = 0
    fired_frame: int | None = None


def pair_distance_now(a: PlayerState, b: PlayerState) -> float:
    """Euclidean distance between the fused positions (same frame)."""
    return math.hypot(a.pos[0] - b.pos[0], a.pos[1] - b.pos[1])


def pair_distance_next(a: PlayerState, b: PlayerState, dt: float) -> float:
    """Euclidean distance between the one-step-extrapolated positions."""
    ax, ay = extrapolate(a, dt)
    bx, by = extrapolate(b, dt)
    return math.hypot(ax - bx, ay - by)


def transition(
    ps: PairState,
    d_now: float,
    d_next: float,
    frame: int,
    t: float,
    players: tuple[PlayerId, PlayerId],
    cfg: PredictorConfig,
) -> tuple[PairState, CollisionEvent | None]:
    """Single-pair fire/release transition on precomputed distances.

    States are constructed directly rather than via dataclasses.replace:
    this runs for every pair every frame and replace() alone would eat a
    third of the frame budget at 22 players.
    """
    if ps.phase is PairPhase.CLEAR:
        if d_next < cfg.threshold and d_next < d_now:
            event = CollisionEvent(
                pair=players,
                frame=frame,
                t=t,
                kind=EventKind.PREDICTED,
                min_predicted_distance=d_next,
            )
            return PairState(ps.pair, PairPhase.ALERTED, d_now, 0, frame), event
        return PairState(ps.pair, PairPhase.CLEAR, d_now, 0, ps.fired_frame), None

    # alerted: count consecutive frames clear of the release radius
    above = ps.frames_above_release + 1 if d_now > cfg.threshold * cfg.hysteresis_factor else 0
    released = (
        above >= RELEASE_FRAMES
        and ps.fired_frame is not None
        and frame - ps.fired_frame >= cfg.min_event_gap
    )
    if released:
        return PairState(ps.pair, PairPhase.CLEAR, d_now, 0, ps.fired_frame), None
    return PairState(ps.pair, PairPhase.ALERTED, d_now, above, ps.fired_frame), None


def step_pair(
    ps: PairState,
    a: PlayerState,
    b: PlayerState,
    cfg: PredictorConfig,
) -> tuple[PairState, CollisionEvent | None]:
    """Advance one pair by one frame from the two player states."""
    if a.frame != b.frame:
        raise ValueError(f"player states from different frames: {a.frame} vs {b.frame}")
    if a.staleness > cfg.max_staleness or b.staleness > cfg.max_staleness:
        raise StalePlayer(
            f"stale player in pair {pair_key(a.player, b.player)}: "
            f"staleness ({a.staleness}, {b.staleness}) > {cfg.max_staleness}"
        )
    d_now = pair_distance_now(a, b)
    d_next = pair_distance_next(a, b, cfg.sample_dt)
    players = (a.player, b.player)
    return transition(ps, d_now, d_next, a.frame, a.t, players, cfg)


class CollisionPredictor:
    """All-pairs predictor holding PairState across frames."""

    def __init__(self, cfg: PredictorConfig):
        self.cfg = cfg
        self.pairs: dict[tuple[str, str], PairState] = {}

    def step_frame(self, states: Mapping[str, PlayerState]) -> list[CollisionEvent]:
        """Run every eligible unordered pair for one complete frame.

        Players whose staleness exceeds max_staleness are excluded until
        refreshed. Events come out sorted by pair id for determinism.
        """
        cfg = self.cfg
        eligible = sorted(pid for pid, s in states.items() if s.staleness <= cfg.max_staleness)
        events: list[CollisionEvent] = []
        dt = cfg.sample_dt
        for i, pa in enumerate(eligible):
            a = states[pa]
            ax, ay = a.pos
            anx = ax + a.vel[0] * dt
            any_ = ay + a.vel[1] * dt
            for pb in eligible[i + 1 :]:
                b = states[pb]
                key = (pa, pb)
                ps = self.pairs.get(key)
                if ps is None:
                    ps = PairState(pair=key)
                d_now = math.hypot(ax - b.pos[0], ay - b.pos[1])
                d_next = math.hypot(anx - (b.pos[0] + b.vel[0] * dt), any_ - (b.pos[1] + b.vel[1] * dt))
                ps, event = transition(ps, d_now, d_next, a.frame, a.t, (a.player, b.player), cfg)
                self.pairs[key] = ps
                if event is not None:
                    events.append(event)
        return events


# --- event log I/O --------------------------------------------------------------

EVENT_LOG_HEADER = ["frame", "t", "kind", "player_a", "player_b", "min_predicted_distance"]


def format_event_row(event: CollisionEvent) -> list[str]:
    a, b = event.pair_key
    mpd = "" if event.min_predicted_distance is None else f"{event.min_predicted_distance:.6f}"
    return [str(event.frame), f"{event.t:.3f}", event.kind.value, a, b, mpd]


def write_event_log(events: Iterable[CollisionEvent], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(EVENT_LOG_HEADER)
    for event in events:
        writer.writerow(format_event_row(event))


def read_event_log(stream: TextIO | Iterable[str]) -> list[CollisionEvent]:
    """Parse an event-log CSV back into CollisionEvents (ids become 1-tag players)."""
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != EVENT_LOG_HEADER:
        raise ValueError(f"unrecognized event log header: {header!r}")
    events = []
    for row in reader:
        if not row:
            continue
        frame, t, kind, pa, pb, mpd = row
        events.append(
            CollisionEvent(
                pair=(PlayerId(id=pa, tag_ids=(pa,)), PlayerId(id=pb, tag_ids=(pb,))),
                frame=int(frame),
                t=float(t),
                kind=EventKind(kind),
                min_predicted_distance=float(mpd) if mpd else None,
            )
        )
    return events
