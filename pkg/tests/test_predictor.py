import io

import pytest

from proxalert.core import EventKind, PlayerId, PlayerState, PredictorConfig
from proxalert.predictor import (
    CollisionPredictor,
    PairPhase,
    PairState,
    StalePlayer,
    pair_distance_next,
    pair_distance_now,
    read_event_log,
    step_pair,
    write_event_log,
)

THRESHOLD = 2.0 / 3.0


def _player(pid):
    return PlayerId(id=pid, tag_ids=(pid,))


def _state(pid, pos, vel=(0.0, 0.0), frame=0, staleness=0):
    return PlayerState(
        player=_player(pid), frame=frame, t=frame * 0.1, pos=pos, vel=vel, staleness=staleness
    )


def test_pair_distance_now():
    assert pair_distance_now(_state("a", (0.0, 0.0)), _state("b", (3.0, 4.0))) == 5.0
    assert pair_distance_now(_state("a", (1.0, 1.0)), _state("b", (1.0, 1.0))) == 0.0
    assert pair_distance_now(_state("a", (0.0, 0.0)), _state("b", (1.0, 0.0))) == 1.0


def test_pair_distance_next():
    a = _state("a", (0.0, 0.0), (2.0, 0.0))
    b = _state("b", (10.0, 0.0), (-2.0, 0.0))
    assert pair_distance_next(a, b, 0.1) == pytest.approx(9.6)
    s1 = _state("a", (0.0, 0.0))
    s2 = _state("b", (7.0, 0.0))
    assert pair_distance_next(s1, s2, 0.1) == 7.0
    p1 = _state("a", (0.0, 0.0), (0.0, 2.0))
    p2 = _state("b", (0.0, 1.0), (0.0, 2.0))
    assert pair_distance_next(p1, p2, 0.5) == pytest.approx(1.0)


def _run_head_on(cfg, n_frames=40):
    """Drive step_pair over exact head-on states; returns (events, states)."""
    ps = PairState(pair=("a", "b"))
    events = []
    for k in range(n_frames):
        t = k * cfg.sample_dt
        a = _state("a", (2.0 * t, 0.0), (2.0, 0.0), frame=k)
        b = _state("b", (10.0 - 2.0 * t, 0.0), (-2.0, 0.0), frame=k)
        ps, event = step_pair(ps, a, b, cfg)
        if event:
            events.append(event)
    return events, ps


def test_head_on_fires_once_at_frame_23():
    # oracle (tests/oracles.py): brute-force distance table over the
    # closed-form trajectories fires once, at frame 23, d_next = 0.4
    events, _ = _run_head_on(PredictorConfig())
    assert len(events) == 1
    assert events[0].frame == 23
    assert events[0].kind is EventKind.PREDICTED
    assert events[0].min_predicted_distance == pytest.approx(0.4, abs=1e-9)
    assert events[0].pair_key == ("a", "b")


def test_stationary_players_never_fire():
    cfg = PredictorConfig()
    ps = PairState(pair=("a", "b"))
    for k in range(50):
        a = _state("a", (0.0, 0.0), frame=k)
        b = _state("b", (10.0, 0.0), frame=k)
        ps, event = step_pair(ps, a, b, cfg)
        assert event is None


def test_parallel_motion_below_threshold_does_not_fire():
    # equal distances are not "decreasing": ties must not fire
    cfg = PredictorConfig()
    ps = PairState(pair=("a", "b"))
    for k in range(30):
        t = k * 0.1
        a = _state("a", (2.0 * t, 0.0), (2.0, 0.0), frame=k)
        b = _state("b", (2.0 * t, 0.5), (2.0, 0.0), frame=k)
        ps, event = step_pair(ps, a, b, cfg)
        assert event is None


# distance profile crossing to ~0.45 yd, separating beyond 1.0 yd
# (threshold * hysteresis 1.5) for 2+ frames, then re-approaching:
# oracle (tests/oracles.py) fires exactly twice, at frames 5 and 14
DOUBLE_EVENT_PROFILE = [
    5.0, 4.0, 3.0, 2.0, 1.2, 0.8, 0.5, 0.45, 0.45, 0.8, 1.2,
    1.5, 1.5, 1.2, 0.8, 0.5, 0.45, 0.8, 1.2, 1.5, 1.5, 1.5,
]


def _profile_states(profile, dt=0.1):
    """Pair states along a scripted 1-D distance profile; velocities are the
    forward differences so next-step extrapolation lands on the profile."""
    frames = []
    for k, d in enumerate(profile):
        vb = ((profile[k + 1] - d) / dt, 0.0) if k + 1 < len(profile) else (0.0, 0.0)
        frames.append(
            (
                _state("a", (0.0, 0.0), (0.0, 0.0), frame=k),
                _state("b", (d, 0.0), vb, frame=k),
            )
        )
    return frames


def test_hysteresis_allows_second_event_after_release():
    cfg = PredictorConfig()
    ps = PairState(pair=("a", "b"))
    fires = []
    for a, b in _profile_states(DOUBLE_EVENT_PROFILE):
        ps, event = step_pair(ps, a, b, cfg)
        if event:
            fires.append(event.frame)
    assert fires == [5, 14]


def test_no_second_event_without_release():
    # stay below the release radius after the fire: still exactly one event
    profile = [5.0, 4.0, 3.0, 2.0, 1.2, 0.8, 0.5, 0.45, 0.6, 0.9, 0.6, 0.45, 0.6, 0.9, 0.9]
    cfg = PredictorConfig()
    ps = PairState(pair=("a", "b"))
    fires = []
    for a, b in _profile_states(profile):
        ps, event = step_pair(ps, a, b, cfg)
        if event:
            fires.append(event.frame)
    assert fires == [5]


def test_release_requires_min_event_gap():
    # separation right after the fire: release may not happen before
    # min_event_gap frames, so the re-approach fires only once unblocked
    cfg = PredictorConfig(min_event_gap=8)
    ps = PairState(pair=("a", "b"))
    fires = []
    for a, b in _profile_states(DOUBLE_EVENT_PROFILE):
        ps, event = step_pair(ps, a, b, cfg)
        if event:
            fires.append(event.frame)
    assert fires == [5, 14]  # release at 11/12 still satisfies gap >= 8 by frame 13
    cfg_wide = PredictorConfig(min_event_gap=12)
    ps = PairState(pair=("a", "b"))
    fires_wide = []
    for a, b in _profile_states(DOUBLE_EVENT_PROFILE):
        ps, event = step_pair(ps, a, b, cfg_wide)
        if event:
            fires_wide.append(event.frame)
    assert fires_wide == [5]


def test_step_pair_requires_same_frame_and_fresh_players():
    cfg = PredictorConfig()
    ps = PairState(pair=("a", "b"))
    with pytest.raises(ValueError):
        step_pair(ps, _state("a", (0, 0), frame=1), _state("b", (1, 0), frame=2), cfg)
    stale = _state("a", (0, 0), staleness=cfg.max_staleness + 1)
    with pytest.raises(StalePlayer):
        step_pair(ps, stale, _state("b", (1, 0)), cfg)


def test_fire_implies_threat():
    events, _ = _run_head_on(PredictorConfig())
    for e in events:
        assert e.min_predicted_distance < PredictorConfig().threshold


def test_phase_transitions_only_clear_alerted():
    cfg = PredictorConfig()
    ps = PairState(pair=("a", "b"))
    assert ps.phase is PairPhase.CLEAR
    _, ps_after = _run_head_on(cfg, n_frames=24)
    assert ps_after.phase is PairPhase.ALERTED
    _, ps_released = _run_head_on(cfg, n_frames=40)
    assert ps_released.phase is PairPhase.CLEAR


def _frame_states(positions, k):
    return {
        pid: _state(pid, pos, vel, frame=k) for pid, (pos, vel) in positions.items()
    }


def test_step_frame_counts_pairs_and_stays_quiet():
    cfg = PredictorConfig()
    predictor = CollisionPredictor(cfg)
    # 22 players on a wide grid, all > 10 yd apart
    positions = {f"p{i:02d}": ((10.0 * (i % 5), 12.0 * (i // 5)), (0.0, 0.0)) for i in range(22)}
    events = predictor.step_frame(_frame_states(positions, 0))
    assert events == []
    assert len(predictor.pairs) == 231


def test_step_frame_single_converging_pair():
    cfg = PredictorConfig()
    predictor = CollisionPredictor(cfg)
    all_events = []
    for k in range(40):
        t = k * 0.1
        positions = {
            "a": ((2.0 * t, 0.0), (2.0, 0.0)),
            "b": ((10.0 - 2.0 * t, 0.0), (-2.0, 0.0)),
            "c": ((30.0, 30.0), (0.0, 0.0)),
        }
        all_events.extend(predictor.step_frame(_frame_states(positions, k)))
    assert len(all_events) == 1
    assert all_events[0].frame == 23
    assert all_events[0].pair_key == ("a", "b")


def test_step_frame_empty():
    assert CollisionPredictor(PredictorConfig()).step_frame({}) == []


def test_step_frame_excludes_stale_players():
    cfg = PredictorConfig(max_staleness=1)
    predictor = CollisionPredictor(cfg)
    states = {
        "a": _state("a", (0.0, 0.0), (2.0, 0.0)),
        "b": _state("b", (0.5, 0.0), (-2.0, 0.0), staleness=2),
    }
    assert predictor.step_frame(states) == []


def test_step_frame_matches_step_pair():
    # engine fast path and the single-pair op must agree frame by frame
    cfg = PredictorConfig()
    predictor = CollisionPredictor(cfg)
    ps = PairState(pair=("a", "b"))
    for k in range(40):
        t = k * 0.1
        a = _state("a", (2.0 * t, 0.0), (2.0, 0.0), frame=k)
        b = _state("b", (10.0 - 2.0 * t, 0.0), (-2.0, 0.0), frame=k)
        frame_events = predictor.step_frame({"a": a, "b": b})
        ps, event = step_pair(ps, a, b, cfg)
        assert [e.frame for e in frame_events] == ([event.frame] if event else [])
        assert predictor.pairs[("a", "b")] == ps


def test_event_log_round_trip():
    events, _ = _run_head_on(PredictorConfig())
    out = io.StringIO()
    write_event_log(events, out)
    text = out.getvalue()
    assert text.splitlines()[0] == "frame,t,kind,player_a,player_b,min_predicted_distance"
    parsed = read_event_log(io.StringIO(text))
    assert [(e.frame, e.pair_key, e.kind) for e in parsed] == [
        (e.frame, e.pair_key, e.kind) for e in events
    ]
    out2 = io.StringIO()
    write_event_log(parsed, out2)
    assert out2.getvalue() == text
