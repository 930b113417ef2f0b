"""Ground-truth incident detection, event matching, and metric reports.

Ground truth comes from the raw (unsmoothed) recorded positions: an actual
incident opens at the first frame of an episode where the measured
inter-player distance is below the threshold. Episode semantics mirror the
predictor's hysteresis so predicted and actual episode counts are
comparable.

Matching is same-pair greedy nearest-frame: candidate (actual, predicted)
pairs within the frame tolerance are taken globally closest-first, ties
broken toward the earlier actual event, then the earlier predicted one.
Event lists here are tiny, so determinism and explainability outrank
optimal assignment.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping, Sequence, TextIO

from .core import (
    CollisionEvent,
    EventKind,
    MatchReport,
    PlayerId,
    Point,
    pair_key,
)
from .predictor import RELEASE_FRAMES

DEFAULT_MATCH_TOLERANCE = 5


@dataclass(frozen=True, slots=True)
class GroundTruthConfig:
    """Incident definition for ground-truth detection (distances in yards)."""

    threshold: float
    hysteresis_factor: float = 1.5

    def __post_init__(self) -> None:
        if not self.threshold > 0.0:
            raise ValueError(f"threshold must be > 0, got {self.threshold!r}")


def below_threshold_episodes(
    distances: Sequence[float],
    threshold: float,
    hysteresis_factor: float,
    release_frames: int = RELEASE_FRAMES,
) -> list[int]:
    """Onset indices of below-threshold episodes in a distance series.

    An episode opens at the first index with distance < threshold and
    closes once the distance exceeds threshold * hysteresis_factor for
    ``release_frames`` consecutive indices.
    """
    onsets: list[int] = []
    in_episode = False
    above = 0
    release_at = threshold * hysteresis_factor
    for i, d in enumerate(distances):
        if not in_episode:
            if d < threshold:
                onsets.append(i)
                in_episode = True
                above = 0
        else:
            above = above + 1 if d > release_at else 0
            if above >= release_frames:
                in_episode = False
    return onsets


def detect_actual(
    frames: Sequence[tuple[int, float, Mapping[str, Point]]],
    cfg: GroundTruthConfig,
    players: Mapping[str, PlayerId] | None = None,
) -> list[CollisionEvent]:
    """Actual incidents from per-frame raw positions.

    ``frames`` is a sequence of (frame, t, {player_id: position}) in frame
    order. A player missing from a frame holds their last known position.
    """
    if not frames:
        return []
    ids = sorted({pid for _, _, positions in frames for pid in positions})
    last: dict[str, Point] = {}
    series: dict[tuple[str, str], list[tuple[int, float, float]]] = {}
    for frame, t, positions in frames:
        last.update(positions)
        present = [pid for pid in ids if pid in last]
        for i, pa in enumerate(present):
            xa, ya = last[pa]
            for pb in present[i + 1 :]:
                xb, yb = last[pb]
                series.setdefault((pa, pb), []).append((frame, t, math.hypot(xa - xb, ya - yb)))

    def player(pid: str) -> PlayerId:
        if players is not None and pid in players:
            return players[pid]
        return PlayerId(id=pid, tag_ids=(pid,))

    events: list[CollisionEvent] = []
    for (pa, pb), rows in series.items():
        onsets = below_threshold_episodes(
            [d for _, _, d in rows], cfg.threshold, cfg.hysteresis_factor
        )
        for idx in onsets:
            frame, t, _ = rows[idx]
            events.append(
                CollisionEvent(pair=(player(pa), player(pb)), frame=frame, t=t, kind=EventKind.ACTUAL)
            )
    events.sort(key=lambda e: (e.frame, e.pair_key))
    return events


def match_events(
    predicted: Sequence[CollisionEvent],
    actual: Sequence[CollisionEvent],
    tolerance: int = DEFAULT_MATCH_TOLERANCE,
) -> MatchReport:
    """Greedy nearest-frame matching of same-pair events within a tolerance.

    Each actual event matches at most one predicted event and vice versa;
    unmatched predicted events are false positives, unmatched actual events
    are false negatives. Timing errors are predicted - actual frames.
    """
    if tolerance < 0:
        raise ValueError(f"tolerance must be >= 0, got {tolerance}")

    by_pair_pred: dict[tuple[str, str], list[int]] = {}
    for i, e in enumerate(predicted):
        by_pair_pred.setdefault(e.pair_key, []).append(i)

    candidates: list[tuple[int, int, int, int, int]] = []
    for j, a in enumerate(actual):
        for i in by_pair_pred.get(a.pair_key, ()):
            delta = abs(predicted[i].frame - a.frame)
            if delta <= tolerance:
                candidates.append((delta, a.frame, predicted[i].frame, j, i))
    candidates.sort()

    matched_pred: dict[int, int] = {}
    matched_act: set[int] = set()
    for _, _, _, j, i in candidates:
        if j in matched_act or i in matched_pred:
            continue
        matched_act.add(j)
        matched_pred[i] = j

    matches = tuple(
        (predicted[i].pair_key, predicted[i].frame, actual[j].frame)
        for i, j in sorted(matched_pred.items(), key=lambda kv: (actual[kv[1]].frame, predicted[kv[0]].frame))
    )
    timing_errors = tuple(pf - af for _, pf, af in matches)
    unmatched_predicted = tuple(
        (e.pair_key, e.frame) for i, e in enumerate(predicted) if i not in matched_pred
    )
    unmatched_actual = tuple((e.pair_key, e.frame) for j, e in enumerate(actual) if j not in matched_act)

    tp = len(matches)
    fp = len(unmatched_predicted)
    fn = len(unmatched_actual)
    rate = fp / (tp + fp) if tp + fp > 0 else 0.0
    return MatchReport(
        true_positives=tp,
        false_positives=fp,
        false_negatives=fn,
        false_alarm_rate=rate,
        timing_errors=timing_errors,
        matches=matches,
        unmatched_predicted=unmatched_predicted,
        unmatched_actual=unmatched_actual,
    )


# --- reports ---------------------------------------------------------------------


def aggregate_line(report: MatchReport) -> str:
    return (
        f"TP={report.true_positives} FP={report.false_positives} "
        f"FN={report.false_negatives} FAR={report.false_alarm_rate:.3f}"
    )


def summarize(report: MatchReport, title: str | None = None) -> str:
    """Human-readable text summary of one match report."""
    lines: list[str] = []
    if title:
        lines.append(title)
    lines.append("pair | predicted_frame | actual_frame | timing_error")
    for pair, pf, af in report.matches:
        lines.append(f"{pair[0]} vs {pair[1]} | {pf} | {af} | {pf - af:+d}")
    for pair, pf in report.unmatched_predicted:
        lines.append(f"{pair[0]} vs {pair[1]} | {pf} |  | false alarm")
    for pair, af in report.unmatched_actual:
        lines.append(f"{pair[0]} vs {pair[1]} |  | {af} | missed")
    lines.append(aggregate_line(report))
    if report.timing_errors:
        lines.append("timing_errors=" + ",".join(f"{e:+d}" for e in report.timing_errors))
    return "\n".join(lines) + "\n"


def report_csv_rows(report: MatchReport) -> list[list[str]]:
    """Machine-readable rows mirroring summarize()."""
    rows = [["player_a", "player_b", "predicted_frame", "actual_frame", "outcome"]]
    for pair, pf, af in report.matches:
        rows.append([pair[0], pair[1], str(pf), str(af), "match"])
    for pair, pf in report.unmatched_predicted:
        rows.append([pair[0], pair[1], str(pf), "", "false_alarm"])
    for pair, af in report.unmatched_actual:
        rows.append([pair[0], pair[1], "", str(af), "miss"])
    return rows


def side_by_side_summary(
    actual: Sequence[CollisionEvent],
    variants: Mapping[str, tuple[Sequence[CollisionEvent], MatchReport]],
) -> str:
    """Listing of every incident with the actual frame and each estimator
    variant's predicted frame side by side, plus per-variant aggregates."""
    names = list(variants)
    rows: dict[tuple[tuple[str, str], int | None, str], dict[str, int]] = {}

    def slot(pair: tuple[str, str], actual_frame: int | None, anchor: str) -> dict[str, int]:
        return rows.setdefault((pair, actual_frame, anchor), {})

    for e in actual:
        slot(e.pair_key, e.frame, f"a{e.frame}")
    for name in names:
        _, report = variants[name]
        for pair, pf, af in report.matches:
            slot(pair, af, f"a{af}")[name] = pf
        for pair, pf in report.unmatched_predicted:
            slot(pair, None, f"p{name}{pf}")[name] = pf

    ordered = sorted(
        rows.items(),
        key=lambda kv: (
            min([kv[0][1]] if kv[0][1] is not None else list(kv[1].values())),
            kv[0][0],
        ),
    )
    lines = ["index | player_a | player_b | actual | " + " | ".join(names)]
    for idx, ((pair, actual_frame, _), per_variant) in enumerate(ordered, start=1):
        cells = [str(per_variant[name]) if name in per_variant else "" for name in names]
        lines.append(
            f"{idx} | {pair[0]} | {pair[1]} | "
            + (str(actual_frame) if actual_frame is not None else "")
            + " | "
            + " | ".join(cells)
        )
    for name in names:
        _, report = variants[name]
        lines.append(f"{name}: {aggregate_line(report)}")
    return "\n".join(lines) + "\n"


# --- incident fixture -------------------------------------------------------------

FIXTURE_HEADER = ["index", "player_a", "player_b", "actual_frame", "constant_speed_frame", "nfl_speed_frame"]


@dataclass(frozen=True)
class IncidentFixture:
    """Side-by-side incident table: actual frames and per-variant predictions."""

    actual: tuple[CollisionEvent, ...]
    predicted: Mapping[str, tuple[CollisionEvent, ...]]


def _fixture_event(pa: str, pb: str, frame: int, kind: EventKind, sample_dt: float) -> CollisionEvent:
    return CollisionEvent(
        pair=(PlayerId(id=pa, tag_ids=(pa,)), PlayerId(id=pb, tag_ids=(pb,))),
        frame=frame,
        t=frame * sample_dt,
        kind=kind,
    )


def parse_incident_fixture(stream: TextIO | Iterable[str], sample_dt: float = 0.1) -> IncidentFixture:
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        raise ValueError("empty incident fixture")
    if [h.strip() for h in header] != FIXTURE_HEADER:
        raise ValueError(f"unrecognized incident fixture header: {header!r}")
    actual: list[CollisionEvent] = []
    predicted: dict[str, list[CollisionEvent]] = {"constant_speed": [], "nfl_speed": []}
    for row in reader:
        if not row or not any(cell.strip() for cell in row):
            continue
        _, pa, pb, actual_frame, cs_frame, nfl_frame = (cell.strip() for cell in row)
        if actual_frame:
            actual.append(_fixture_event(pa, pb, int(actual_frame), EventKind.ACTUAL, sample_dt))
        if cs_frame:
            predicted["constant_speed"].append(
                _fixture_event(pa, pb, int(cs_frame), EventKind.PREDICTED, sample_dt)
            )
        if nfl_frame:
            predicted["nfl_speed"].append(
                _fixture_event(pa, pb, int(nfl_frame), EventKind.PREDICTED, sample_dt)
            )
    for events in predicted.values():
        events.sort(key=lambda e: (e.frame, e.pair_key))
    actual.sort(key=lambda e: (e.frame, e.pair_key))
    return IncidentFixture(
        actual=tuple(actual),
        predicted={name: tuple(events) for name, events in predicted.items()},
    )


def load_incident_fixture(path) -> IncidentFixture:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return parse_incident_fixture(fh)


def is_incident_fixture(path) -> bool:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            header = next(csv.reader(fh), None)
    except OSError:
        return False
    return header is not None and [h.strip() for h in header] == FIXTURE_HEADER


def reference_fixture_text() -> str:
    """The packaged reference incident table (2017 Chiefs at Patriots play)."""
    return resources.files("proxalert").joinpath("data/reference_incidents.csv").read_text(encoding="utf-8")


def load_reference_fixture() -> IncidentFixture:
    return parse_incident_fixture(io.StringIO(reference_fixture_text()))


def evaluate_fixture(fixture: IncidentFixture, tolerance: int = DEFAULT_MATCH_TOLERANCE) -> dict[str, MatchReport]:
    """Match every predicted variant in a fixture against its actual events."""
    return {
        name: match_events(events, fixture.actual, tolerance=tolerance)
        for name, events in fixture.predicted.items()
    }
