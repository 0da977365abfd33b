import pytest

from dimsim import harmony
from dimsim.cli import main


def test_run_prints_metrics(capsys):
    assert main(["run", "--density", "200", "--horizon", "400", "--seed", "3"]) == 0
    out = capsys.readouterr().out
    assert "controller    DIM" in out
    assert "mean wait" in out and "lane waits" in out


def test_run_marks_simplified_controllers_and_writes_trace(tmp_path, capsys):
    trace = tmp_path / "trace.tsv"
    assert main(["run", "--controller", "v2ic", "--density", "150", "--horizon", "320",
                 "--trace", str(trace), "--trace-every", "5"]) == 0
    assert "simplified" in capsys.readouterr().out
    assert trace.read_text().splitlines()[0] == "time\tid\tarm\tposition\tspeed\tzone"


def test_sweep_then_report(tmp_path, capsys):
    out = tmp_path / "res"
    assert main(["sweep", "--density", "150,250", "--controller", "DIM,FTS", "--seed", "1",
                 "--horizon", "400", "--out", str(out)]) == 0
    cells = capsys.readouterr().out
    assert cells.startswith("controller\t")
    assert len(cells.splitlines()) == 1 + 4
    assert {p.name for p in out.iterdir()} == {"runs.tsv", "cells.tsv", "summary.txt", "deadlock.txt"}
    assert main(["report", str(out / "runs.tsv")]) == 0
    assert "Simulation summary" in capsys.readouterr().out


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "s.ini"
    cfg.write_text("[scenario]\ncontroller = FTS\ndensity = 150\nhorizon = 400\n")
    assert main(["run", "--config", str(cfg), "--controller", "ATS"]) == 0
    out = capsys.readouterr().out
    assert "controller    ATS" in out
    assert "density       150 PCU/hr/lane" in out


def test_verify_deadlock(capsys):
    assert main(["verify-deadlock", "--n", "3"]) == 0
    assert "26" in capsys.readouterr().out


def test_gen_harmony_round_trip(tmp_path):
    path = tmp_path / "h.txt"
    assert main(["gen-harmony", "--n", "5", "--out", str(path)]) == 0
    assert harmony.load(path) == harmony.generate_harmony(5)


@pytest.mark.parametrize("argv", [
    ["run", "--controller", "nope", "--horizon", "10"],
    ["run", "--ratio", "4:x", "--horizon", "10"],
    ["run", "--config", "/nonexistent/file.ini"],
    ["report", "/nonexistent/runs.tsv"],
])
def test_bad_input_exits_with_code_2(argv, capsys):
    assert main(argv) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_unknown_command_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["fly"])
    assert exc.value.code == 2
