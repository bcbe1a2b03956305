import json
from dataclasses import replace

import pytest

from pale import cli, engine, scenario_io, scenarios
from pale.trace import Trace


def _forged(tmp_path):
    """A static run with a second, fake leader appended."""
    tr = engine.run(scenarios.static(3))
    events = list(tr.events)
    lead = next(e for e in events if e.kind == "became_leader")
    other = next(e for e in events if e.kind == "up" and e.node != lead.node)
    events.append(replace(lead, seq=len(events), node=other.node, time=events[-1].time))
    path = tmp_path / "bad.jsonl"
    Trace(tr.config, events).write(path)
    return path, other.node


def test_parse_seeds():
    assert cli.parse_seeds("7") == [7]
    assert cli.parse_seeds("1..3") == [1, 2, 3]
    with pytest.raises(Exception):
        cli.parse_seeds("5..2")
    with pytest.raises(Exception):
        cli.parse_seeds("x")


def test_run_single_seed(tmp_path, capsys):
    path = tmp_path / "static.toml"
    scenario_io.dump(scenarios.static(4, seed=2), path)
    assert cli.main(["run", "--scenario", str(path), "--seed", "2", "--out", str(tmp_path / "o")]) == 0
    out = tmp_path / "o"
    assert sorted(p.name for p in out.iterdir()) == ["static-seed2.jsonl", "summary.txt",
                                                    "verdicts.jsonl"]
    verdicts = [json.loads(line) for line in (out / "verdicts.jsonl").read_text().splitlines()]
    assert verdicts and all(v["passed"] for v in verdicts)
    assert "1/1 runs passed" in capsys.readouterr().out


def test_run_is_reproducible(tmp_path):
    for d in ("a", "b"):
        assert cli.main(["run", "--scenario", "builtin:random:4", "--seed", "0..2",
                         "--out", str(tmp_path / d), "--quiet"]) == 0
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_seed_sweep_in_parallel(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["run", "--scenario", "builtin:adversarial", "--seed", "1..4", "--jobs", "2",
                     "--out", str(out), "--check", "uniqueness,agreement,termination"]) == 0
    assert len(list(out.glob("adversarial-seed*.jsonl"))) == 4
    summary = (out / "summary.txt").read_text().splitlines()
    assert summary[-1].startswith("4/4 runs passed")


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("PALE_OUT", str(tmp_path / "env"))
    assert cli.main(["run", "--scenario", "builtin:static:3", "--quiet"]) == 0
    assert (tmp_path / "env" / "summary.txt").exists()


def test_assumption_violation_is_reported(tmp_path, capsys):
    cfg = scenarios.static(3)
    path = tmp_path / "slow.toml"
    path.write_text(scenario_io.dumps(cfg).replace("msg_delay = 1000", "msg_delay = 3000"))
    assert cli.main(["run", "--scenario", str(path), "--out", str(tmp_path)]) != 0
    err = capsys.readouterr().err
    assert "round-length" in err and "D*msg_delay" in err


def test_parse_error_names_the_line(tmp_path, capsys):
    path = tmp_path / "broken.toml"
    path.write_text("seed = 1\nmax_ratio = [\n")
    assert cli.main(["run", "--scenario", str(path), "--out", str(tmp_path)]) == 2
    assert "line" in capsys.readouterr().err


def test_failing_check_sets_exit_status(tmp_path):
    path, _ = _forged(tmp_path)
    assert cli.main(["check", "--trace", str(path), "--check", "uniqueness"]) == 1


def test_table2_artifacts(tmp_path, capsys):
    assert cli.main(["table2", "--sizes", "4,8", "--out", str(tmp_path)]) == 0
    assert {p.name for p in tmp_path.iterdir()} == {"table2.csv", "table2.txt", "table2.png"}
    csv_lines = (tmp_path / "table2.csv").read_text().splitlines()
    assert csv_lines[0].startswith("n,max_round,mild_total")
    assert len(csv_lines) == 3
    assert "ok  mild constant in n" in capsys.readouterr().out
    assert (tmp_path / "table2.png").read_bytes()[:4] == b"\x89PNG"


def test_replay_windows(tmp_path, capsys):
    tr = engine.run(scenarios.static(3, seed=5))
    path = tmp_path / "t.jsonl"
    tr.write(path)
    assert cli.main(["replay", "--trace", str(path)]) == 0
    assert len(capsys.readouterr().out.splitlines()) == len(tr)
    assert cli.main(["replay", "--trace", str(path), "--from", "10", "--to", "5"]) == 0
    assert capsys.readouterr().out == ""
    lead = tr.of_kind("became_leader")[0]
    cli.main(["replay", "--trace", str(path), "--from", str(lead.time), "--to", str(lead.time)])
    assert "became_leader" in capsys.readouterr().out


def test_replay_missing_or_corrupt(tmp_path, capsys):
    assert cli.main(["replay", "--trace", str(tmp_path / "none.jsonl")]) == 2
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{not json\n")
    assert cli.main(["replay", "--trace", str(bad)]) == 2
    assert "line 1" in capsys.readouterr().err


def test_witness_window_narrates_the_violation(tmp_path, capsys):
    path, fake = _forged(tmp_path)
    cli.main(["check", "--trace", str(path), "--check", "uniqueness"])
    line = capsys.readouterr().out
    start, end = line.split("witness=[")[1].split("]")[0].split(", ")
    cli.main(["replay", "--trace", str(path), "--from", start, "--to", end])
    narration = capsys.readouterr().out
    assert f"node {fake} became_leader" in narration


def test_scenario_export(tmp_path):
    path = tmp_path / "m.toml"
    assert cli.main(["scenario", "mild", "--n", "5", "--out", str(path)]) == 0
    assert scenario_io.load(path) == scenarios.mild(5)
