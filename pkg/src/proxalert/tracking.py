"""Per-player state estimation from noisy per-tag samples.

The pipeline per player per frame: push fresh samples into per-tag rings,
smooth each tag over its last three samples (newest-first weights,
renormalized over however many samples exist), fuse the one or two tag
positions into a player position and shoulder axis, estimate velocity, and
derive orientation. Frames with no fresh sample hold the last state and
increment staleness instead of erroring.

Positions are plain float tuples on purpose: these functions run per player
per frame inside the real-time loop, where small-array overhead dominates
any vectorization win at this scale (at most ~44 samples per frame).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .core import (
    TWO_PI,
    Estimator,
    PlayerId,
    PlayerState,
    Point,
    PredictorConfig,
    TagSample,
    Vector,
)

#: Below this fused speed (yd/s) the velocity direction is too noisy to
#: define orientation; fall back to the shoulder-axis normal.
ORIENTATION_SPEED_GATE = 0.5

#: Two tags closer than this (yd) give no usable shoulder axis.
MIN_AXIS_SEPARATION = 1e-6


class EmptyHistory(ValueError):
    pass


class NoTags(ValueError):
    pass


class ZeroDt(ValueError):
    pass


class StaleFrame(ValueError):
    pass


class TagHistory:
    """Ring of the last three accepted samples for one tag, newest first.

    Rejects non-increasing timestamps (the sample is dropped, not raised:
    out-of-order radio delivery is an expected condition, handled upstream
    by counters).
    """

    __slots__ = ("tag_id", "_ring")

    def __init__(self, tag_id: str):
        self.tag_id = tag_id
        self._ring: list[TagSample] = []

    def __len__(self) -> int:
        return len(self._ring)

    @property
    def newest(self) -> TagSample | None:
        return self._ring[0] if self._ring else None

    def positions(self) -> list[Point]:
        return [s.pos for s in self._ring]

    def push(self, sample: TagSample) -> bool:
        """Accept a sample if its timestamp advances this tag's stream."""
        if self._ring and sample.t <= self._ring[0].t:
            return False
        self._ring.insert(0, sample)
        del self._ring[3:]
        return True


def smooth_tag(history: TagHistory | Sequence[Point], weights: Sequence[float]) -> Point:
    """Weighted average of the newest <= 3 positions, weights renormalized
    over however many samples exist."""
    positions = history.positions() if isinstance(history, TagHistory) else list(history)
    if not positions:
        raise EmptyHistory("cannot smooth an empty tag history")
    n = min(len(positions), len(weights))
    total = 0.0
    x = 0.0
    y = 0.0
    for i in range(n):
        w = weights[i]
        px, py = positions[i]
        x += w * px
        y += w * py
        total += w
    return (x / total, y / total)


def fuse_player(tag_positions: Sequence[Point]) -> tuple[Point, Vector | None]:
    """Mean of the available tag positions, plus the shoulder axis (unit
    vector between the two tags) when both tags are present and separated."""
    if not tag_positions:
        raise NoTags("fuse_player needs at least one tag position")
    if len(tag_positions) == 1:
        return tag_positions[0], None
    (x1, y1), (x2, y2) = tag_positions[0], tag_positions[1]
    pos = ((x1 + x2) / 2.0, (y1 + y2) / 2.0)
    dx, dy = x2 - x1, y2 - y1
    norm = math.hypot(dx, dy)
    if norm <= MIN_AXIS_SEPARATION:
        return pos, None
    return pos, (dx / norm, dy / norm)


def estimate_velocity(prev: PlayerState, pos_now: Point, dt: float) -> Vector:
    """Finite-difference velocity over the true elapsed time.

    When the previous state is stale, the elapsed time is (staleness + 1)
    frames, not one: dividing by the nominal dt after a dropout would spike
    the velocity and fire false alarms.
    """
    if dt <= 0.0:
        raise ZeroDt(f"dt must be positive, got {dt!r}")
    elapsed = dt * (prev.staleness + 1)
    return ((pos_now[0] - prev.pos[0]) / elapsed, (pos_now[1] - prev.pos[1]) / elapsed)


def extrapolate(state: PlayerState, dt: float) -> Point:
    """One-step constant-velocity position prediction."""
    if dt < 0.0:
        raise ZeroDt(f"extrapolation dt must be >= 0, got {dt!r}")
    return (state.pos[0] + state.vel[0] * dt, state.pos[1] + state.vel[1] * dt)


def _orientation_from(
    vel: Vector,
    shoulder_axis: Vector | None,
    previous: float | None,
) -> float | None:
    """Orientation in [0, 2*pi): velocity direction when moving, else the
    shoulder-axis normal (sign picked to stay near the previous heading),
    else carried over."""
    if math.hypot(vel[0], vel[1]) > ORIENTATION_SPEED_GATE:
        return math.atan2(vel[1], vel[0]) % TWO_PI
    if shoulder_axis is not None:
        ax, ay = shoulder_axis
        candidates = (math.atan2(ax, -ay) % TWO_PI, math.atan2(-ax, ay) % TWO_PI)
        if previous is None:
            return candidates[0]
        return min(candidates, key=lambda c: _angle_gap(c, previous))
    return previous


def _angle_gap(a: float, b: float) -> float:
    d = (a - b) % TWO_PI
    return min(d, TWO_PI - d)


@dataclass
class TrackState:
    """Mutable per-player estimator state (single writer per player)."""

    player: PlayerId
    histories: dict[str, TagHistory]
    last_state: PlayerState | None = None

    @classmethod
    def fresh(cls, player: PlayerId) -> "TrackState":
        return cls(player=player, histories={tag: TagHistory(tag) for tag in player.tag_ids})


def advance_track(
    ts: TrackState,
    samples: Sequence[TagSample],
    cfg: PredictorConfig,
    frame: int,
    t: float,
    given_velocity: Vector | None = None,
    fuse_before_smooth: bool = False,
) -> PlayerState | None:
    """Advance one player's track by one frame and return the new state.

    ``samples`` are this frame's fresh samples for this player's tags (may
    be empty: that is the staleness path, not an error). Returns None only
    while the player has never produced a sample (no position exists yet).
    """
    prev = ts.last_state
    if prev is not None and frame <= prev.frame:
        raise StaleFrame(f"frame {frame} does not advance player {ts.player.id} past {prev.frame}")

    fresh = False
    for sample in samples:
        history = ts.histories.get(sample.tag_id)
        if history is None:
            continue
        fresh |= history.push(sample)

    if not fresh:
        if prev is None:
            return None
        state = PlayerState(
            player=ts.player,
            frame=frame,
            t=t,
            pos=prev.pos,
            vel=prev.vel,
            orientation=prev.orientation,
            staleness=prev.staleness + 1,
        )
        ts.last_state = state
        return state

    weights = cfg.smoothing_weights
    if fuse_before_smooth:
        # experimental order: average the tags raw, then smooth the fused track
        live = [h for h in ts.histories.values() if len(h)]
        depth = max(len(h) for h in live)
        fused_raw = [
            fuse_player([h.positions()[i] for h in live if len(h) > i])[0] for i in range(depth)
        ]
        pos = smooth_tag(fused_raw, weights)
        _, shoulder_axis = fuse_player([h.positions()[0] for h in live])
    else:
        smoothed = [smooth_tag(h, weights) for h in ts.histories.values() if len(h)]
        pos, shoulder_axis = fuse_player(smoothed)

    if cfg.estimator is Estimator.GIVEN_VELOCITY and given_velocity is not None:
        vel = given_velocity
    elif prev is not None:
        vel = estimate_velocity(prev, pos, cfg.sample_dt)
    else:
        vel = (0.0, 0.0)

    orientation = _orientation_from(vel, shoulder_axis, prev.orientation if prev else None)
    state = PlayerState(
        player=ts.player,
        frame=frame,
        t=t,
        pos=pos,
        vel=vel,
        orientation=orientation,
        staleness=0,
    )
    ts.last_state = state
    return state


class PlayerTracker:
    """Frame-synchronous tracker for a whole roster.

    ``advance_frame`` consumes one FrameBatch worth of samples and returns
    the state of every player that has appeared so far, exactly one state
    per player per frame. Distinct players' tracks are independent; the
    frame boundary is the synchronization point.
    """

    def __init__(self, roster, cfg: PredictorConfig, fuse_before_smooth: bool = False):
        self.roster = roster
        self.cfg = cfg
        self.fuse_before_smooth = fuse_before_smooth
        self.tracks: dict[str, TrackState] = {
            pid: TrackState.fresh(player) for pid, player in roster.players.items()
        }
        self.unknown_tag_samples = 0

    def advance_frame(
        self,
        frame: int,
        t: float,
        samples: Sequence[TagSample],
        given_velocities: Mapping[str, Vector] | None = None,
    ) -> dict[str, PlayerState]:
        by_player: dict[str, list[TagSample]] = {}
        for sample in samples:
            pid = self.roster.tag_to_player.get(sample.tag_id)
            if pid is None:
                self.unknown_tag_samples += 1
                continue
            by_player.setdefault(pid, []).append(sample)

        given = given_velocities or {}
        states: dict[str, PlayerState] = {}
        for pid in self.roster.ids():
            state = advance_track(
                self.tracks[pid],
                by_player.get(pid, ()),
                self.cfg,
                frame,
                t,
                given_velocity=given.get(pid),
                fuse_before_smooth=self.fuse_before_smooth,
            )
            if state is not None:
                states[pid] = state
        return states
