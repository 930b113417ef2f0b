"""Synthetic scenario generation: scripted routes -> tracking data files.

A scenario spec is the same flat ``key = value`` dialect as the engine
config. Each player gets a piecewise-linear waypoint route; the generator
samples it on the frame grid, places two tags across the direction of
motion, applies seeded Gaussian noise and dropout, and can serialize the
result as either a recorded-style tracking CSV (per-player rows, 1-based
frame ids) or an NDJSON tag feed (per-tag lines, yard units).

Example spec::

    sample_dt = 0.1
    duration = 4.0
    seed = 7
    noise_sigma = 0.17 yd     # per-tag, per-axis
    dropout = 0.1             # per-tag-sample drop probability
    route.A = 0,0 @ 0 ; 20,0 @ 10
    route.B = 10,0 @ 0 ; -10,0 @ 10
    pager.A = 1
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from .core import Point, TagSample, Vector, parse_distance
from .ingest import TrackingRecord, write_tracking_csv


class BadSpec(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class Waypoint:
    t: float
    pos: Point


@dataclass(frozen=True, slots=True)
class Route:
    player_id: str
    waypoints: tuple[Waypoint, ...]

    def __post_init__(self) -> None:
        if not self.waypoints:
            raise BadSpec(f"route for {self.player_id!r} has no waypoints")
        times = [w.t for w in self.waypoints]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise BadSpec(f"route for {self.player_id!r} has non-increasing waypoint times: {times}")

    def position_at(self, t: float) -> Point:
        """Linear interpolation between waypoints; clamped beyond the ends."""
        wps = self.waypoints
        if t <= wps[0].t:
            return wps[0].pos
        if t >= wps[-1].t:
            return wps[-1].pos
        i = bisect_right([w.t for w in wps], t)
        a, b = wps[i - 1], wps[i]
        frac = (t - a.t) / (b.t - a.t)
        return (
            a.pos[0] + frac * (b.pos[0] - a.pos[0]),
            a.pos[1] + frac * (b.pos[1] - a.pos[1]),
        )

    def velocity_at(self, t: float) -> Vector:
        """Right-continuous segment derivative; zero beyond the route."""
        wps = self.waypoints
        if t < wps[0].t or t >= wps[-1].t:
            return (0.0, 0.0)
        i = bisect_right([w.t for w in wps], t)
        a, b = wps[i - 1], wps[i]
        span = b.t - a.t
        return ((b.pos[0] - a.pos[0]) / span, (b.pos[1] - a.pos[1]) / span)


@dataclass(frozen=True)
class ScenarioSpec:
    routes: tuple[Route, ...]
    sample_dt: float = 0.1
    duration: float | None = None
    seed: int = 0
    noise_sigma: float = 0.0
    dropout: float = 0.0
    tag_separation: float = 0.5
    game_id: str = "1"
    play_id: str = "1"
    pagers: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.routes:
            raise BadSpec("scenario has no routes")
        if self.sample_dt <= 0:
            raise BadSpec(f"sample_dt must be > 0, got {self.sample_dt!r}")
        if self.noise_sigma < 0:
            raise BadSpec(f"noise_sigma must be >= 0, got {self.noise_sigma!r}")
        if not 0.0 <= self.dropout <= 1.0:
            raise BadSpec(f"dropout must lie in [0, 1], got {self.dropout!r}")
        if self.tag_separation < 0:
            raise BadSpec(f"tag_separation must be >= 0, got {self.tag_separation!r}")
        ids = [r.player_id for r in self.routes]
        if len(ids) != len(set(ids)):
            raise BadSpec(f"duplicate route player ids: {ids}")

    def end_time(self) -> float:
        explicit = self.duration
        latest = max(r.waypoints[-1].t for r in self.routes)
        return latest if explicit is None else explicit

    def frame_count(self) -> int:
        return int(self.end_time() / self.sample_dt + 1e-9) + 1


def _parse_waypoints(player_id: str, text: str) -> Route:
    waypoints = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "@" not in chunk:
            raise BadSpec(f"waypoint {chunk!r} for {player_id!r} needs 'x,y @ t'")
        coords, _, when = chunk.partition("@")
        parts = coords.replace(",", " ").split()
        if len(parts) != 2:
            raise BadSpec(f"waypoint {chunk!r} for {player_id!r} needs two coordinates")
        try:
            x, y, t = float(parts[0]), float(parts[1]), float(when.strip())
        except ValueError:
            raise BadSpec(f"bad number in waypoint {chunk!r} for {player_id!r}") from None
        waypoints.append(Waypoint(t=t, pos=(x, y)))
    return Route(player_id=player_id, waypoints=tuple(waypoints))


def parse_scenario(text: str) -> ScenarioSpec:
    from .core import ConfigError, iter_key_values

    routes: list[Route] = []
    pagers: dict[str, int] = {}
    kw: dict = {}
    try:
        pairs = list(iter_key_values(text))
    except ConfigError as exc:
        raise BadSpec(str(exc)) from None
    for key, value in pairs:
        try:
            if key.startswith("route."):
                routes.append(_parse_waypoints(key[len("route.") :], value))
            elif key.startswith("pager."):
                pagers[key[len("pager.") :]] = int(value)
            elif key == "sample_dt":
                kw["sample_dt"] = float(value)
            elif key == "duration":
                kw["duration"] = float(value)
            elif key == "seed":
                kw["seed"] = int(value)
            elif key == "noise_sigma":
                kw["noise_sigma"] = parse_distance(value)
            elif key == "dropout":
                kw["dropout"] = float(value)
            elif key == "tag_separation":
                kw["tag_separation"] = parse_distance(value)
            elif key == "game_id":
                kw["game_id"] = value
            elif key == "play_id":
                kw["play_id"] = value
            else:
                raise BadSpec(f"unknown scenario key {key!r}")
        except (ValueError, ConfigError) as exc:
            if isinstance(exc, BadSpec):
                raise
            raise BadSpec(f"{key}: {exc}") from None
    return ScenarioSpec(routes=tuple(routes), pagers=pagers, **kw)


def load_scenario(path) -> ScenarioSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


@dataclass
class ScenarioData:
    """One generated realization of a scenario."""

    spec: ScenarioSpec
    frames: list[int]
    times: list[float]
    true_positions: dict[str, list[Point]]
    true_velocities: dict[str, list[Vector]]
    #: per frame, the surviving noisy tag samples (tag ids ``<player>:L/R``)
    tag_samples: list[list[TagSample]]

    def player_ids(self) -> list[str]:
        return sorted(self.true_positions)

    def records(self) -> list[TrackingRecord]:
        """Per-player recorded rows: fused surviving tags, 1-based frame ids."""
        out: list[TrackingRecord] = []
        for k, frame in enumerate(self.frames):
            by_player: dict[str, list[Point]] = {}
            for s in self.tag_samples[k]:
                by_player.setdefault(s.tag_id.rsplit(":", 1)[0], []).append(s.pos)
            for pid in self.player_ids():
                pts = by_player.get(pid)
                if not pts:
                    continue  # full dropout shows up as a missing row
                x = sum(p[0] for p in pts) / len(pts)
                y = sum(p[1] for p in pts) / len(pts)
                vx, vy = self.true_velocities[pid][k]
                speed = math.hypot(vx, vy)
                direction = math.degrees(math.atan2(vx, vy)) % 360.0 if speed > 0 else 0.0
                out.append(
                    TrackingRecord(
                        game_id=self.spec.game_id,
                        play_id=self.spec.play_id,
                        frame_id=frame + 1,
                        player_id=pid,
                        pos=(x, y),
                        display_name=pid,
                        speed=speed,
                        direction=direction,
                    )
                )
        return out


def generate(spec: ScenarioSpec) -> ScenarioData:
    """Deterministically realize a scenario (one rng stream, fixed draw order)."""
    rng = np.random.default_rng(spec.seed)
    n = spec.frame_count()
    dt = spec.sample_dt
    ids = sorted(r.player_id for r in spec.routes)
    routes = {r.player_id: r for r in spec.routes}

    frames = list(range(n))
    times = [k * dt for k in frames]
    true_positions = {pid: [routes[pid].position_at(t) for t in times] for pid in ids}
    true_velocities = {pid: [routes[pid].velocity_at(t) for t in times] for pid in ids}

    half = spec.tag_separation / 2.0
    tag_samples: list[list[TagSample]] = []
    for k, t in enumerate(times):
        frame_samples: list[TagSample] = []
        for pid in ids:
            x, y = true_positions[pid][k]
            vx, vy = true_velocities[pid][k]
            speed = math.hypot(vx, vy)
            if speed > 1e-12:
                perp = (-vy / speed, vx / speed)
            else:
                perp = (0.0, 1.0)
            for suffix, side in (("L", -1.0), ("R", 1.0)):
                if spec.dropout > 0.0 and rng.random() < spec.dropout:
                    continue
                px = x + side * half * perp[0]
                py = y + side * half * perp[1]
                if spec.noise_sigma > 0.0:
                    px += spec.noise_sigma * rng.standard_normal()
                    py += spec.noise_sigma * rng.standard_normal()
                frame_samples.append(TagSample(tag_id=f"{pid}:{suffix}", t=t, pos=(px, py)))
        tag_samples.append(frame_samples)
    return ScenarioData(
        spec=spec,
        frames=frames,
        times=times,
        true_positions=true_positions,
        true_velocities=true_velocities,
        tag_samples=tag_samples,
    )


def write_ndjson(data: ScenarioData, stream: TextIO) -> None:
    """One feed line per surviving tag sample, yard units."""
    for frame_samples in data.tag_samples:
        for s in frame_samples:
            obj = {"tag": s.tag_id, "t": s.t, "x": s.pos[0], "y": s.pos[1], "unit": "yd"}
            stream.write(json.dumps(obj, separators=(",", ":")))
            stream.write("\n")


def write_csv(data: ScenarioData, stream: TextIO) -> None:
    write_tracking_csv(data.records(), stream)


def write_scenario_data(data: ScenarioData, path, fmt: str) -> None:
    if fmt not in ("csv", "ndjson"):
        raise BadSpec(f"unknown output format {fmt!r} (expected csv or ndjson)")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if fmt == "csv":
            write_csv(data, fh)
        else:
            write_ndjson(data, fh)
