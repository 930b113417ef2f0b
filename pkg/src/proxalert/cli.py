"""Command-line entry points.

Subcommands::

    proxalert replay <data> [--config F] [--speed max|1x|2x] [--report PATH]
    proxalert live --feed URI --sink URI [--config F]
    proxalert synth <spec> -o PATH [--format csv|ndjson]
    proxalert evaluate --predicted F --actual F [--tolerance N]
    proxalert evaluate --fixture F [--tolerance N]

Exit codes: 0 success, 2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import sys

from . import __version__
from .alerts import load_pager_map
from .core import ConfigError, RunConfig, load_run_config
from .evaluation import (
    evaluate_fixture,
    load_incident_fixture,
    match_events,
    report_csv_rows,
    side_by_side_summary,
    summarize,
)
from .harness import FeedConnectionError, live, replay
from .predictor import read_event_log
from .scenario import BadSpec, generate, load_scenario, write_scenario_data

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="proxalert", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"proxalert {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_replay = sub.add_parser("replay", help="replay a recorded data file through the pipeline")
    p_replay.add_argument("data", help="tracking CSV, NDJSON feed capture, or incident fixture")
    p_replay.add_argument("--config", help="engine config file")
    p_replay.add_argument("--speed", default="max", help="max (default) or a realtime multiplier like 1x, 2x")
    p_replay.add_argument("--report", help="write the run summary (stats + match report) to this path")
    p_replay.add_argument("--play", help="restrict a CSV to one play: GAME_ID:PLAY_ID")

    p_live = sub.add_parser("live", help="run the live feed -> pager path until EOF/interrupt")
    p_live.add_argument("--feed", required=True, help="feed URI: -, file:PATH, or tcp:host:port")
    p_live.add_argument("--sink", required=True, help="sink URI: -, file:PATH, serial:/dev/..., tcp:host:port")
    p_live.add_argument("--config", help="engine config file")
    p_live.add_argument("--pagers", help="pager map CSV: player_id,pager_id")
    p_live.add_argument("--retry-limit", type=int, default=5, help="feed reconnect attempts")

    p_synth = sub.add_parser("synth", help="generate a synthetic tracking data file from a scenario spec")
    p_synth.add_argument("spec", help="scenario spec file")
    p_synth.add_argument("-o", "--output", required=True, help="output path")
    p_synth.add_argument("--format", choices=("csv", "ndjson"), default="ndjson")

    p_eval = sub.add_parser("evaluate", help="match predicted against actual events and report metrics")
    p_eval.add_argument("--predicted", help="predicted event log CSV")
    p_eval.add_argument("--actual", help="actual event log CSV")
    p_eval.add_argument("--fixture", help="side-by-side incident fixture CSV (alternative to --predicted/--actual)")
    p_eval.add_argument("--tolerance", type=int, default=5, help="matching tolerance in frames")
    p_eval.add_argument("--csv", dest="csv_out", help="also write machine-readable report rows to this path")
    return parser


def _load_config(path: str | None) -> RunConfig:
    return load_run_config(path) if path else RunConfig()


def _cmd_replay(args) -> int:
    run_cfg = _load_config(args.config)
    play_filter = None
    if args.play:
        game, _, play = args.play.partition(":")
        play_filter = (game, play)
    result = replay(args.data, run_cfg, speed=args.speed, play_filter=play_filter, event_stream=sys.stdout)
    summary = result.summary_text
    if result.fixture_reports is None and result.report is None:
        summary = summary or "no ground truth computed\n"
    body = result.stats.render() + summary
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(body)
    else:
        sys.stderr.write(body)
    return EXIT_OK


def _cmd_live(args) -> int:
    run_cfg = _load_config(args.config)
    pagers = load_pager_map(args.pagers) if args.pagers else None
    stats = live(
        args.feed,
        args.sink,
        run_cfg,
        pagers=pagers,
        event_stream=sys.stdout,
        retry_limit=args.retry_limit,
    )
    sys.stderr.write(stats.render())
    return EXIT_OK


def _cmd_synth(args) -> int:
    spec = load_scenario(args.spec)
    data = generate(spec)
    write_scenario_data(data, args.output, args.format)
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    if args.fixture:
        fixture = load_incident_fixture(args.fixture)
        reports = evaluate_fixture(fixture, tolerance=args.tolerance)
        text = side_by_side_summary(
            list(fixture.actual),
            {name: (list(fixture.predicted[name]), reports[name]) for name in sorted(reports)},
        )
        sys.stdout.write(text)
        rows = []
        for name in sorted(reports):
            for row in report_csv_rows(reports[name]):
                rows.append([name] + row)
    elif args.predicted and args.actual:
        with open(args.predicted, "r", encoding="utf-8", newline="") as fh:
            predicted = read_event_log(fh)
        with open(args.actual, "r", encoding="utf-8", newline="") as fh:
            actual = read_event_log(fh)
        report = match_events(predicted, actual, tolerance=args.tolerance)
        sys.stdout.write(summarize(report))
        rows = report_csv_rows(report)
    else:
        raise ConfigError("BadValue", "evaluate needs either --fixture or both --predicted and --actual")
    if args.csv_out:
        with open(args.csv_out, "w", encoding="utf-8", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(rows)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "replay": _cmd_replay,
        "live": _cmd_live,
        "synth": _cmd_synth,
        "evaluate": _cmd_evaluate,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, BadSpec) as exc:
        print(f"proxalert: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FeedConnectionError as exc:
        print(f"proxalert: feed error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (OSError, ValueError) as exc:
        # unreadable or malformed input data
        print(f"proxalert: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except KeyboardInterrupt:
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
