"""Score the checked-in reference incident table.

The packaged fixture records, for one 2017 Chiefs at Patriots play, the six
actual sub-2-ft incidents and what each estimator variant predicted. The
constant-speed estimator catches all six with one false alarm (false-alarm
rate 1/7) and a single 4-frame-early timing error; the feed-speed variant
misses two and raises four false alarms, which is why the constant-speed
assumption is the default. Run:

    python demos/04_reference_incidents.py
"""

from proxalert.evaluation import (
    evaluate_fixture,
    load_reference_fixture,
    side_by_side_summary,
    summarize,
)

fixture = load_reference_fixture()
reports = evaluate_fixture(fixture, tolerance=5)

print(
    side_by_side_summary(
        list(fixture.actual),
        {name: (list(fixture.predicted[name]), reports[name]) for name in sorted(reports)},
    )
)

print("constant-speed detail:")
print(summarize(reports["constant_speed"]))
