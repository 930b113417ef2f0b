"""Shared domain types, unit handling, and configuration.

Everything downstream of ingestion works in one canonical distance unit
(yards) and one canonical time unit (seconds). Conversions happen exactly
once, at the ingestion and configuration boundaries; no other module may
carry a unit flag.

All types here are immutable value objects and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator

Point = tuple[float, float]
Vector = tuple[float, float]

FEET_PER_YARD = 3.0
TWO_PI = 2.0 * math.pi

# Pilot profile numbers: a 2 ft contact threshold, 10 Hz sampling, and a
# monotone-decreasing 3-sample smoother.  The game profile widens the
# threshold to 3 ft (= 1 yd) for full-speed play.
DEFAULT_THRESHOLD_YD = 2.0 / FEET_PER_YARD
DEFAULT_WEIGHTS = (0.5, 0.3, 0.2)
DEFAULT_SAMPLE_DT = 0.1
DEFAULT_MAX_STALENESS = 3
DEFAULT_HYSTERESIS = 1.5
DEFAULT_MIN_EVENT_GAP = 5
DEFAULT_MATCH_TOLERANCE = 5


def feet_to_yards(d: float) -> float:
    """Convert feet to yards (exactly ``d / 3``). ``d`` must be finite."""
    return d / FEET_PER_YARD


def yards_to_feet(d: float) -> float:
    return d * FEET_PER_YARD


class ConfigError(ValueError):
    """A configuration invariant was violated.

    ``code`` names the first violated invariant (e.g. ``NonPositiveThreshold``)
    so callers and tests can discriminate without string matching the message.
    """

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class Estimator(Enum):
    """Velocity source for one-step extrapolation.

    CONSTANT_SPEED: finite difference of the smoothed, fused positions
    (velocity assumed constant over one sample interval).
    GIVEN_VELOCITY: the speed/direction columns supplied by the data feed,
    falling back to the finite difference when absent.
    """

    CONSTANT_SPEED = "constant_speed"
    GIVEN_VELOCITY = "given_velocity"


class EventKind(Enum):
    PREDICTED = "predicted"
    ACTUAL = "actual"


def _check_finite_point(name: str, p: Point) -> None:
    if not (math.isfinite(p[0]) and math.isfinite(p[1])):
        raise ValueError(f"{name} must be finite, got {p!r}")


@dataclass(frozen=True, slots=True)
class TagSample:
    """One timestamped 2-D position reading from a single tag (yards)."""

    tag_id: str
    t: float
    pos: Point
    quality: float | None = None

    def __post_init__(self) -> None:
        if not self.tag_id:
            raise ValueError("tag_id must be non-empty")
        if not math.isfinite(self.t) or self.t < 0.0:
            raise ValueError(f"timestamp must be finite and non-negative, got {self.t!r}")
        _check_finite_point("pos", self.pos)
        if self.quality is not None and not (0.0 <= self.quality <= 1.0):
            raise ValueError(f"quality must lie in [0, 1], got {self.quality!r}")


@dataclass(frozen=True, slots=True)
class PlayerId:
    """A player and the one or two tags mapped to them."""

    id: str
    tag_ids: tuple[str, ...]
    display_name: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("player id must be non-empty")
        if not 1 <= len(self.tag_ids) <= 2:
            raise ValueError(f"a player carries 1 or 2 tags, got {len(self.tag_ids)}")


@dataclass(frozen=True, slots=True)
class PlayerState:
    """Fused, smoothed position plus estimated velocity for one frame.

    ``staleness`` counts consecutive frames without a fresh tag sample for
    this player; 0 means the state was refreshed this frame.
    """

    player: PlayerId
    frame: int
    t: float
    pos: Point
    vel: Vector
    orientation: float | None = None
    staleness: int = 0

    def __post_init__(self) -> None:
        _check_finite_point("pos", self.pos)
        _check_finite_point("vel", self.vel)
        if self.staleness < 0:
            raise ValueError("staleness must be non-negative")
        if self.orientation is not None and not (0.0 <= self.orientation < TWO_PI):
            raise ValueError(f"orientation must lie in [0, 2*pi), got {self.orientation!r}")


@dataclass(frozen=True, slots=True)
class PredictorConfig:
    """Tunable parameters shared by the tracking and prediction stages.

    ``smoothing_weights`` are ordered newest-first and must sum to 1.
    ``threshold`` is in yards; ``hysteresis_factor`` scales it for episode
    release; ``min_event_gap`` and ``match_tolerance`` are in frames.
    """

    threshold: float = DEFAULT_THRESHOLD_YD
    smoothing_weights: tuple[float, float, float] = DEFAULT_WEIGHTS
    sample_dt: float = DEFAULT_SAMPLE_DT
    estimator: Estimator = Estimator.CONSTANT_SPEED
    max_staleness: int = DEFAULT_MAX_STALENESS
    hysteresis_factor: float = DEFAULT_HYSTERESIS
    min_event_gap: int = DEFAULT_MIN_EVENT_GAP
    match_tolerance: int = DEFAULT_MATCH_TOLERANCE

    @classmethod
    def pilot(cls, **overrides) -> "PredictorConfig":
        """Walking-pace profile: 2 ft threshold."""
        return cls(**overrides)

    @classmethod
    def game(cls, **overrides) -> "PredictorConfig":
        """Full-speed profile: 3 ft (= 1 yd) threshold."""
        overrides.setdefault("threshold", feet_to_yards(3.0))
        return cls(**overrides)


def validate_config(c: PredictorConfig) -> None:
    """Raise ConfigError naming the first violated invariant; return on ok."""
    if not math.isfinite(c.threshold) or c.threshold <= 0.0:
        raise ConfigError("NonPositiveThreshold", f"threshold must be > 0, got {c.threshold!r}")
    if not math.isfinite(c.sample_dt) or c.sample_dt <= 0.0:
        raise ConfigError("NonPositiveSampleDt", f"sample_dt must be > 0, got {c.sample_dt!r}")
    w = c.smoothing_weights
    if len(w) != 3 or any(not math.isfinite(x) or x < 0.0 for x in w) or abs(sum(w) - 1.0) > 1e-9:
        raise ConfigError(
            "WeightsNotNormalized",
            f"smoothing_weights must be 3 non-negative values summing to 1, got {w!r}",
        )
    if not math.isfinite(c.hysteresis_factor) or c.hysteresis_factor <= 1.0:
        raise ConfigError("BadHysteresis", f"hysteresis_factor must be > 1, got {c.hysteresis_factor!r}")
    if c.match_tolerance < 0:
        raise ConfigError("NegativeTolerance", f"match_tolerance must be >= 0, got {c.match_tolerance!r}")
    if c.max_staleness < 0:
        raise ConfigError("NegativeStaleness", f"max_staleness must be >= 0, got {c.max_staleness!r}")
    if c.min_event_gap < 0:
        raise ConfigError("NegativeEventGap", f"min_event_gap must be >= 0, got {c.min_event_gap!r}")


@dataclass(frozen=True, slots=True)
class CollisionEvent:
    """A predicted or actual contact incident for one unordered player pair.

    ``frame`` is the frame at which the episode opens.
    ``min_predicted_distance`` is set for predicted events only.
    """

    pair: tuple[PlayerId, PlayerId]
    frame: int
    t: float
    kind: EventKind
    min_predicted_distance: float | None = None

    def __post_init__(self) -> None:
        a, b = self.pair
        if a.id == b.id:
            raise ValueError("event pair members must be distinct")
        if self.frame < 0:
            raise ValueError("event frame must be non-negative")
        if a.id > b.id:
            object.__setattr__(self, "pair", (b, a))

    @property
    def pair_key(self) -> tuple[str, str]:
        return (self.pair[0].id, self.pair[1].id)


@dataclass(frozen=True, slots=True)
class MatchReport:
    """Predicted-vs-actual accounting for one event list comparison.

    ``timing_errors`` are signed frame deltas (predicted - actual) for the
    matched pairs. The detail tuples carry (pair_key, frame) rows so a
    side-by-side listing can be rebuilt without the original event lists.
    """

    true_positives: int
    false_positives: int
    false_negatives: int
    false_alarm_rate: float
    timing_errors: tuple[int, ...]
    matches: tuple[tuple[tuple[str, str], int, int], ...] = ()
    unmatched_predicted: tuple[tuple[tuple[str, str], int], ...] = ()
    unmatched_actual: tuple[tuple[tuple[str, str], int], ...] = ()

    def __post_init__(self) -> None:
        alarms = self.true_positives + self.false_positives
        expected = self.false_positives / alarms if alarms > 0 else 0.0
        if abs(self.false_alarm_rate - expected) > 1e-12:
            raise ValueError("false_alarm_rate must equal FP / (TP + FP), or 0 when no alarms")


# --- run-level configuration -------------------------------------------------

#: Field bounding box accepted by ingestion, in yards, permitting sideline
#: overshoot: (min_x, min_y, max_x, max_y).
DEFAULT_FIELD_BOUNDS = (-10.0, -10.0, 130.0, 63.4)


@dataclass(frozen=True, slots=True)
class RunConfig:
    """PredictorConfig plus engine knobs that sit outside the predictor core."""

    predictor: PredictorConfig = field(default_factory=PredictorConfig)
    fuse_before_smooth: bool = False
    refractory_s: float = 1.0
    vibration_ms: int = 500
    page_both: bool = True
    strict_roster: bool = False
    field_bounds: tuple[float, float, float, float] = DEFAULT_FIELD_BOUNDS


# --- config file parsing ------------------------------------------------------
#
# Flat `key = value` lines, `#` comments, UTF-8. Distances accept a unit
# suffix (`ft` / `yd`); bare distances are yards.

_PROFILES = {"pilot": PredictorConfig.pilot, "game": PredictorConfig.game}

_TRUE_WORDS = {"true", "yes", "on", "1"}
_FALSE_WORDS = {"false", "no", "off", "0"}


def parse_distance(text: str) -> float:
    """Parse a distance with optional ``ft``/``yd`` suffix into yards."""
    parts = text.strip().split()
    try:
        if len(parts) == 1:
            word = parts[0]
            for suffix, scale in (("ft", 1.0 / FEET_PER_YARD), ("yd", 1.0)):
                if word.lower().endswith(suffix):
                    return float(word[: -len(suffix)]) * scale
            return float(word)
        if len(parts) == 2:
            value = float(parts[0])
            unit = parts[1].lower()
            if unit == "ft":
                return value / FEET_PER_YARD
            if unit == "yd":
                return value
            raise ValueError(f"unknown distance unit {parts[1]!r}")
    except ValueError as exc:
        raise ConfigError("BadDistance", f"cannot parse distance {text!r}: {exc}") from None
    raise ConfigError("BadDistance", f"cannot parse distance {text!r}")


def _parse_bool(key: str, text: str) -> bool:
    word = text.strip().lower()
    if word in _TRUE_WORDS:
        return True
    if word in _FALSE_WORDS:
        return False
    raise ConfigError("BadValue", f"{key}: expected a boolean, got {text!r}")


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.replace(",", " ").split())


def iter_key_values(text: str) -> Iterator[tuple[str, str]]:
    """Yield (key, value) pairs from the flat key-value dialect."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("BadLine", f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        yield key.strip(), value.strip()


def parse_run_config(text: str) -> RunConfig:
    """Parse config-file text into a validated RunConfig."""
    pairs = dict(iter_key_values(text))

    profile = pairs.pop("profile", "pilot")
    try:
        base = _PROFILES[profile]()
    except KeyError:
        raise ConfigError("BadValue", f"unknown profile {profile!r} (expected pilot or game)") from None

    pred_kw: dict = {}
    run_kw: dict = {}
    try:
        for key, value in pairs.items():
            if key == "threshold":
                pred_kw["threshold"] = parse_distance(value)
            elif key == "smoothing_weights":
                weights = _parse_floats(value)
                if len(weights) != 3:
                    raise ConfigError("WeightsNotNormalized", f"expected 3 weights, got {value!r}")
                pred_kw["smoothing_weights"] = weights
            elif key == "sample_dt":
                pred_kw["sample_dt"] = float(value)
            elif key == "estimator":
                try:
                    pred_kw["estimator"] = Estimator(value.strip().lower())
                except ValueError:
                    raise ConfigError("BadValue", f"unknown estimator {value!r}") from None
            elif key == "max_staleness":
                pred_kw["max_staleness"] = int(value)
            elif key == "hysteresis_factor":
                pred_kw["hysteresis_factor"] = float(value)
            elif key == "min_event_gap":
                pred_kw["min_event_gap"] = int(value)
            elif key == "match_tolerance":
                pred_kw["match_tolerance"] = int(value)
            elif key == "fuse_before_smooth":
                run_kw["fuse_before_smooth"] = _parse_bool(key, value)
            elif key == "refractory":
                run_kw["refractory_s"] = float(value)
            elif key == "vibration_ms":
                run_kw["vibration_ms"] = int(value)
            elif key == "page_both":
                run_kw["page_both"] = _parse_bool(key, value)
            elif key == "strict_roster":
                run_kw["strict_roster"] = _parse_bool(key, value)
            elif key == "field_bounds":
                bounds = _parse_floats(value)
                if len(bounds) != 4:
                    raise ConfigError("BadValue", f"field_bounds needs 4 numbers, got {value!r}")
                run_kw["field_bounds"] = bounds
            else:
                raise ConfigError("UnknownKey", f"unknown config key {key!r}")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("BadValue", f"{key}: {exc}") from None

    predictor = PredictorConfig(
        **{
            "threshold": base.threshold,
            "smoothing_weights": base.smoothing_weights,
            "sample_dt": base.sample_dt,
            "estimator": base.estimator,
            "max_staleness": base.max_staleness,
            "hysteresis_factor": base.hysteresis_factor,
            "min_event_gap": base.min_event_gap,
            "match_tolerance": base.match_tolerance,
            **pred_kw,
        }
    )
    validate_config(predictor)
    return RunConfig(predictor=predictor, **run_kw)


def load_run_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_run_config(fh.read())


def pair_key(a: PlayerId | str, b: PlayerId | str) -> tuple[str, str]:
    """Canonical unordered pair identity: both ids, sorted."""
    ka = a.id if isinstance(a, PlayerId) else a
    kb = b.id if isinstance(b, PlayerId) else b
    return (ka, kb) if ka <= kb else (kb, ka)
