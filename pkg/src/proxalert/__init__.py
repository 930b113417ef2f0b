"""proxalert: streaming collision prediction for dual-tag player tracking.

Reconstructs per-player state from noisy tag position samples, extrapolates
motion one sample ahead under a constant-speed assumption, emits alert
events before predicted player-to-player contact, and scores predictions
against ground-truth incidents.
"""

from .core import (
    CollisionEvent,
    ConfigError,
    Estimator,
    EventKind,
    MatchReport,
    PlayerId,
    PlayerState,
    PredictorConfig,
    RunConfig,
    TagSample,
    feet_to_yards,
    load_run_config,
    pair_key,
    parse_run_config,
    validate_config,
)
from .evaluation import GroundTruthConfig, detect_actual, match_events, summarize
from .harness import Pipeline, ReplayResult, RunStats, live, replay
from .ingest import FrameBatch, Roster, TrackingRecord, parse_feed_line, parse_tracking_csv
from .predictor import CollisionPredictor, PairState, step_pair
from .scenario import ScenarioSpec, generate, load_scenario, parse_scenario
from .tracking import PlayerTracker, advance_track, extrapolate, fuse_player, smooth_tag

__version__ = "0.1.0"

__all__ = [
    "CollisionEvent",
    "CollisionPredictor",
    "ConfigError",
    "Estimator",
    "EventKind",
    "FrameBatch",
    "GroundTruthConfig",
    "MatchReport",
    "PairState",
    "Pipeline",
    "PlayerId",
    "PlayerState",
    "PlayerTracker",
    "PredictorConfig",
    "ReplayResult",
    "Roster",
    "RunConfig",
    "RunStats",
    "ScenarioSpec",
    "TagSample",
    "TrackingRecord",
    "advance_track",
    "detect_actual",
    "extrapolate",
    "feet_to_yards",
    "fuse_player",
    "generate",
    "live",
    "load_run_config",
    "load_scenario",
    "match_events",
    "pair_key",
    "parse_feed_line",
    "parse_run_config",
    "parse_scenario",
    "parse_tracking_csv",
    "replay",
    "smooth_tag",
    "step_pair",
    "summarize",
    "validate_config",
    "__version__",
]
