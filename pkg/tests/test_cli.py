import subprocess
import sys

import pytest

from proxalert.cli import main
from proxalert.evaluation import reference_fixture_text

HEAD_ON = """
sample_dt = 0.1
duration = 3.9
seed = 42
noise_sigma = 0
dropout = 0
route.A = 0,0 @ 0 ; 20,0 @ 10
route.B = 10,0 @ 0 ; -10,0 @ 10
"""


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "head_on.scenario"
    path.write_text(HEAD_ON)
    return path


def test_synth_then_replay_then_evaluate(tmp_path, scenario_file, capsys):
    data = tmp_path / "head_on.ndjson"
    assert main(["synth", str(scenario_file), "-o", str(data), "--format", "ndjson"]) == 0
    capsys.readouterr()

    report_path = tmp_path / "report.txt"
    assert main(["replay", str(data), "--report", str(report_path)]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "frame,t,kind,player_a,player_b,min_predicted_distance"
    assert len(out.splitlines()) == 2  # header + one event
    report = report_path.read_text()
    assert "TP=1 FP=0 FN=0 FAR=0.000" in report
    assert "frames_processed=40" in report

    predicted = tmp_path / "predicted.csv"
    predicted.write_text(out)
    actual = tmp_path / "actual.csv"
    lines = out.splitlines()
    actual.write_text(lines[0] + "\n" + lines[1].replace("predicted", "actual") + "\n")
    assert main(["evaluate", "--predicted", str(predicted), "--actual", str(actual)]) == 0
    assert "TP=1 FP=0 FN=0" in capsys.readouterr().out


def test_synth_csv_format(tmp_path, scenario_file):
    data = tmp_path / "head_on.csv"
    assert main(["synth", str(scenario_file), "-o", str(data), "--format", "csv"]) == 0
    header = data.read_text().splitlines()[0]
    assert header.startswith("time,x,y,s,dis,dir,event,nflId")


def test_replay_speed_flag(tmp_path, scenario_file, capsys):
    data = tmp_path / "h.ndjson"
    main(["synth", str(scenario_file), "-o", str(data)])
    capsys.readouterr()
    assert main(["replay", str(data), "--speed", "16x"]) == 0
    fast = capsys.readouterr().out
    assert main(["replay", str(data), "--speed", "max"]) == 0
    assert capsys.readouterr().out == fast


def test_evaluate_fixture_accounting(tmp_path, capsys):
    fixture = tmp_path / "incidents.csv"
    fixture.write_text(reference_fixture_text())
    assert main(["evaluate", "--fixture", str(fixture)]) == 0
    out = capsys.readouterr().out
    assert "constant_speed: TP=6 FP=1 FN=0 FAR=0.143" in out
    assert "nfl_speed: TP=4 FP=4 FN=2" in out


def test_evaluate_fixture_csv_output(tmp_path, capsys):
    fixture = tmp_path / "incidents.csv"
    fixture.write_text(reference_fixture_text())
    csv_out = tmp_path / "report.csv"
    assert main(["evaluate", "--fixture", str(fixture), "--csv", str(csv_out)]) == 0
    rows = csv_out.read_text().splitlines()
    assert rows[0].startswith("constant_speed,player_a,player_b")
    assert any(row.endswith("false_alarm") for row in rows)


def test_evaluate_requires_inputs(capsys):
    assert main(["evaluate", "--tolerance", "5"]) == 2
    assert "config error" in capsys.readouterr().err


def test_replay_missing_file_exit_3(tmp_path, capsys):
    assert main(["replay", str(tmp_path / "nope.csv")]) == 3
    assert "i/o error" in capsys.readouterr().err


def test_replay_bad_config_exit_2(tmp_path, scenario_file, capsys):
    data = tmp_path / "h.ndjson"
    main(["synth", str(scenario_file), "-o", str(data)])
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("threshold = -2 ft\n")
    assert main(["replay", str(data), "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "config error" in err and "threshold" in err


def test_synth_bad_spec_exit_2(tmp_path, capsys):
    spec = tmp_path / "bad.scenario"
    spec.write_text("route.A = 0,0 @ 1 ; 1,1 @ 1\n")
    assert main(["synth", str(spec), "-o", str(tmp_path / "x.ndjson")]) == 2


def test_live_piped_stdin_subprocess(tmp_path, scenario_file):
    data = tmp_path / "h.ndjson"
    main(["synth", str(scenario_file), "-o", str(data)])
    sink = tmp_path / "pager.bin"
    proc = subprocess.run(
        [sys.executable, "-m", "proxalert", "live", "--feed", "-", "--sink", f"file:{sink}"],
        stdin=data.open("rb"),
        capture_output=True,
        timeout=60,
    )
    assert proc.returncode == 0
    stdout = proc.stdout.decode()
    assert stdout.splitlines()[0] == "frame,t,kind,player_a,player_b,min_predicted_distance"
    assert len(stdout.splitlines()) == 2
    pages = sink.read_bytes().split(b"\r\n")[:-1]
    assert len(pages) == 2 and all(p.startswith(b"PAGE ") for p in pages)


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0


def test_evaluate_malformed_event_log_exit_3(tmp_path, capsys):
    bad = tmp_path / "not_a_log.csv"
    bad.write_text("a,b,c\n1,2,3\n")
    assert main(["evaluate", "--predicted", str(bad), "--actual", str(bad)]) == 3
    assert "i/o error" in capsys.readouterr().err
