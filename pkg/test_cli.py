"""
Tests for the qnetcode command line
"""

import json

import pytest

from main import main
from models.code import LinearCode
from models.program import Transcript


@pytest.fixture
def net(fixtures_dir):
    def _path(name: str) -> str:
        return str(fixtures_dir / f"{name}.json")
    return _path


def test_check_feasible(net, capsys):
    assert main(["check", net("butterfly")]) == 0
    assert capsys.readouterr().out.strip() == "feasible: max-flow 2 to t1, 2 to t2"


def test_check_infeasible(net, capsys):
    assert main(["--json", "check", net("butterfly_cut")]) == 1
    payload = json.loads(capsys.readouterr().out)
    assert payload["feasible"] is False
    assert payload["flow"] == 1
    assert payload["target"] == "t1"


def test_check_malformed_network(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{ not json")
    assert main(["check", str(path)]) == 2


def test_check_cycle(tmp_path):
    path = tmp_path / "loop.json"
    path.write_text(json.dumps({
        "nodes": ["a", "b"],
        "edges": [{"from": "a", "to": "b"}, {"from": "b", "to": "a"}],
        "sources": ["a"],
        "targets": ["b"],
    }))
    assert main(["check", str(path)]) == 2


def test_run_acceptance_example(net, tmp_path, capsys):
    transcript = tmp_path / "butterfly.jsonl"
    code = main(["run", net("butterfly"), "--select", "t2,t1", "--perm", "1,2",
                 "--input", "random:7", "--transcript", str(transcript)])
    assert code == 0
    assert capsys.readouterr().out.strip() == "fidelity: 1.000000000, transmissions: 7"
    entries = Transcript.from_jsonl(transcript.read_text()).entries
    assert entries[0].step == "prepare"
    assert entries[-1].step == "relabel"


def test_run_writes_default_transcript(net, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["run", net("single_edge"), "--input", "plus"]) == 0
    assert (tmp_path / "single_edge.transcript.jsonl").exists()


def test_run_transcripts_are_reproducible(net, tmp_path):
    paths = [tmp_path / "first.jsonl", tmp_path / "second.jsonl"]
    for path in paths:
        assert main(["run", net("butterfly"), "--input", "random:3", "--seed", "9",
                     "--transcript", str(path)]) == 0
    assert paths[0].read_text() == paths[1].read_text()


def test_run_json_output(net, tmp_path, capsys):
    assert main(["--json", "run", net("combination_3_2"), "--select", "t13,t23", "--perm", "2,1",
                 "--input", "random:1", "--transcript", str(tmp_path / "c.jsonl")]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["p"] == 3
    assert payload["fidelity"] == pytest.approx(1.0, abs=1e-9)
    assert payload["permutation"] == [2, 1]


@pytest.mark.parametrize("extra", [
    ["--select", "t1,t1"],
    ["--select", "t1,t2", "--perm", "1,1"],
    ["--select", "t1"],
    ["--input", "1,2,3"],
    ["--field", "1"],
    ["--field", "4"],
])
def test_run_usage_errors(net, tmp_path, extra):
    assert main(["run", net("butterfly"), "--transcript", str(tmp_path / "x.jsonl"), *extra]) == 2


def test_run_infeasible(net, tmp_path):
    assert main(["run", net("butterfly_cut"), "--transcript", str(tmp_path / "x.jsonl")]) == 1


def test_code_written_to_file(net, tmp_path):
    out = tmp_path / "code.json"
    assert main(["code", net("butterfly"), "--seed", "2", "--out", str(out)]) == 0
    code = LinearCode.from_json(out.read_text())
    assert code.p == 2
    assert code.rate == 2


def test_code_printed(net, capsys):
    assert main(["code", net("single_edge")]) == 0
    assert LinearCode.from_json(capsys.readouterr().out).network == "single_edge"


def test_code_field_too_small(net):
    assert main(["code", net("combination_4_2"), "--field", "2"]) == 1


@pytest.mark.parametrize("field", ["4", "1", "0"])
def test_code_field_not_prime(net, capsys, field):
    assert main(["code", net("single_edge"), "--field", field]) == 2
    assert "not prime" in capsys.readouterr().err


def test_demo_butterfly_text(capsys):
    assert main(["demo-butterfly"]) == 0
    out = capsys.readouterr().out
    assert out.count("golden: match") == 3
    assert "MISMATCH" not in out
    assert "== teleport" in out


def test_demo_butterfly_json(capsys):
    assert main(["--json", "demo-butterfly", "--select", "t1,t2"]) == 0
    stages = json.loads(capsys.readouterr().out)
    assert [stage["stage"] for stage in stages] == ["fanout", "cat", "epr", "teleport"]
    assert all(stage["matches_golden"] for stage in stages[:3])
    assert stages[1]["registers"] == ["S'1", "T1,1", "T2,1", "S'2", "T1,2", "T2,2"]
    assert stages[3]["fidelity"] == pytest.approx(1.0, abs=1e-9)


def test_verify_quick(capsys):
    assert main(["--json", "verify", "--quick", "--workers", "2"]) == 0
    reports = json.loads(capsys.readouterr().out)
    assert len(reports) == 10
    assert all(not report["failures"] for report in reports)


def test_run_record_and_history(net, tmp_path, database_url, capsys):
    for seed in ("1", "2"):
        assert main(["--database", database_url, "run", net("butterfly"), "--seed", seed, "--record",
                     "--transcript", str(tmp_path / f"{seed}.jsonl")]) == 0
    capsys.readouterr()
    assert main(["--database", database_url, "--json", "history"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert [run["seed"] for run in payload["runs"]] == [2, 1]
    assert payload["statistics"]["total_runs"] == 2
    assert payload["statistics"]["runs_per_network"] == {"butterfly": 2}


@pytest.mark.parametrize("argv, expected", [
    ([], 2),
    (["bogus"], 2),
    (["run"], 2),
    (["--help"], 0),
])
def test_argument_errors(argv, expected):
    assert main(argv) == expected
