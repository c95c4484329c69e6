import csv
import subprocess
import sys
from pathlib import Path

import pytest

from scsf.cli import (EXIT_CONFIG, EXIT_OK, EXIT_VIOLATION, main, non_decreasing, read_trace_csv,
                      trace_columns)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL = """\
[curve]
n = 128
x = 1 cos 1
y = 1 sin 1

[flow]
record_every = 100
length_floor = 0.5

[output]
snapshot_every = 5
views = xy
"""


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("small")
    cfg = root / "small.ini"
    cfg.write_text(SMALL)
    out = root / "out"
    code = main(["--quiet", "--out", str(out), "run", str(cfg)])
    return code, out


def test_small_run_exit_ok(small_run):
    code, out = small_run
    assert code == EXIT_OK
    for name in ("trace.csv", "report.txt", "singularity.csv", "config.echo.ini"):
        assert (out / name).is_file()


def test_trace_rows_match_records(small_run):
    _, out = small_run
    with open(out / "trace.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == trace_columns(["y0"])
    report = (out / "report.txt").read_text()
    records = int(next(l for l in report.splitlines() if l.startswith("records =")).split("=")[1])
    assert len(rows) - 1 == records
    t = read_trace_csv(out / "trace.csv")["t"]
    assert all(a < b for a, b in zip(t, t[1:]))


def test_report_lists_monitors(small_run):
    report = (small_run[1] / "report.txt").read_text()
    assert "violations = none" in report
    assert "classification = Type I" in report


def test_snapshots_written(small_run):
    _, out = small_run
    rows = len(read_trace_csv(out / "trace.csv")["t"])
    snaps = sorted((out / "snapshots").glob("*.svg"))
    expected = len(range(0, rows, 5)) + (0 if (rows - 1) % 5 == 0 else 1)
    assert len(snaps) == expected
    assert snaps[0].name == "rec00000_xy.svg"


def test_echo_matches_check_output(small_run, tmp_path, capsys):
    cfg = tmp_path / "small.ini"
    cfg.write_text(SMALL)
    assert main(["check", str(cfg)]) == EXIT_OK
    assert capsys.readouterr().out == (small_run[1] / "config.echo.ini").read_text()


def test_replay_reproduces_classification(small_run, tmp_path, capsys):
    _, out = small_run
    assert main(["--out", str(tmp_path), "replay", str(out / "trace.csv")]) == EXIT_OK
    text = capsys.readouterr().out
    assert "classification = Type I" in text
    assert (tmp_path / "replay.txt").read_text() == text


def test_asymmetric_refused(tmp_path):
    code = main(["--quiet", "--out", str(tmp_path), "run", str(CONFIGS / "asymmetric.ini")])
    assert code == EXIT_VIOLATION
    report = (tmp_path / "report.txt").read_text()
    assert "not symmetric two-crossing" in report
    assert not (tmp_path / "trace.csv").exists()


def test_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text(SMALL.replace("record_every = 100", "sigma = 0.9"))
    assert main(["--quiet", "check", str(bad)]) == EXIT_CONFIG
    assert main(["--quiet", "run", str(bad)]) == EXIT_CONFIG


def test_replay_of_missing_trace(tmp_path):
    assert main(["--quiet", "replay", str(tmp_path / "none.csv")]) == EXIT_CONFIG


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "scsf", "check", str(CONFIGS / "figure1.ini")],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "z = 0.5 cos 2 + 0.5 cos 4 + 0.5 cos 6" in proc.stdout


def test_non_decreasing_slack():
    assert non_decreasing([1.0, 1.0 - 5e-5, 1.1])[0]
    ok, worst = non_decreasing([1.0, 0.99])
    assert not ok and worst < -1e-4
