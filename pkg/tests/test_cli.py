import csv
import json

import pytest

from pidcausal.cli import main


@pytest.fixture
def model(tmp_path):
    def make(what, *extra):
        path = tmp_path / f"{what}{'-'.join(extra)}.json"
        assert main(["gen", what, "--out", str(path), *extra]) == 0
        return path
    return make


def load(path):
    return json.loads(path.read_text())


def test_pid_on_xor(model, tmp_path):
    out = tmp_path / "pid.json"
    assert main(["pid", str(model("xor", "--joint")), "--out", str(out)]) == 0
    rep = load(out)
    assert rep["target"] == "X3"
    assert rep["atoms"]["synergistic"] == pytest.approx(1.0, abs=1e-9)
    assert rep["atoms"]["redundant"] == pytest.approx(0.0, abs=1e-9)


def test_pid_on_network_input_with_groups(model, tmp_path):
    out = tmp_path / "pid.json"
    assert main(["pid", str(model("fig1a")), "--sources", "X1,X2+X3+X4", "--target", "X5",
                 "--out", str(out)]) == 0
    assert load(out)["sources"] == [["X1"], ["X2", "X3", "X4"]]


def test_pid_three_sources(model, tmp_path):
    out = tmp_path / "pid.json"
    assert main(["pid", str(model("fig1a")), "--sources", "X1,X2,X3", "--target", "X5", "--out", str(out)]) == 0
    assert len(load(out)["atoms"]) == 18
    assert main(["pid", str(model("fig1a")), "--sources", "X1,X2,X3", "--target", "X5",
                 "--measure", "opt", "--out", str(out)]) == 2


def test_discover_commands(model, tmp_path):
    out = tmp_path / "bn.json"
    assert main(["discover-bn", str(model("fig1a")), "--out", str(out)]) == 0
    assert sorted(map(tuple, load(out)["directed"])) == [(f"X{i}", "X5") for i in range(1, 5)]
    out = tmp_path / "hg.json"
    assert main(["discover-hg", str(model("fig2")), "--out", str(out)]) == 0
    (edge,) = load(out)["hyperedges"]
    assert (edge["tail"], edge["head"]) == (["X1", "X2"], ["X3", "X4"])


def test_strict_assumptions_quarantine(model, capsys):
    assert main(["discover-bn", str(model("xor")), "--strict-assumptions"]) == 6
    assert "faithfulness" in capsys.readouterr().err


@pytest.mark.parametrize("argv,code", [
    ([], 2),
    (["pid"], 2),
    (["verify", "--theorem", "T9"], 2),
    (["gen", "nothing"], 2),
    (["pid", "/nonexistent/table.json"], 3),
    (["discover-hg", "/nonexistent.json", "--max-edge-size", "1"], 3),
])
def test_exit_codes(argv, code):
    assert main(argv) == code


def test_malformed_input(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["pid", str(bad)]) == 3
    bad.write_text(json.dumps({"variables": [{"name": "A", "cardinality": 2}], "probabilities": [0.5, 0.6]}))
    assert main(["pid", str(bad)]) == 3


def test_budget_exit(model):
    assert main(["discover-hg", str(model("fig2")), "--budget", "3"]) == 5


def test_verify_writes_three_files(tmp_path):
    out = tmp_path / "run"
    assert main(["verify", "--theorem", "T1,T4", "--no-desiderata", "--out", str(out)]) == 0
    assert {p.name for p in out.iterdir()} == {"manifest.json", "verdicts.jsonl", "summary.csv"}
    rows = list(csv.DictReader((out / "summary.csv").open()))
    assert {r["check"] for r in rows} == {"T1", "T4"}
    assert all(r["fail"] == "0" for r in rows)


def test_verify_failure_exit(tmp_path, capsys):
    man = tmp_path / "m.json"
    man.write_text(json.dumps({"seed": 0, "batteries": {"T2": [{"source": "fixture", "name": "chain"}]},
                               "desiderata": {}}))
    assert main(["verify", str(man), "--theorem", "T2", "--threshold", "10"]) == 9
    assert "T2" in capsys.readouterr().out


def test_gen_random_is_seeded(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["gen", "random-bn", "--seed", "4", "--out", str(a)])
    main(["gen", "random-bn", "--seed", "4", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()
    main(["gen", "random-bn", "--seed", "5", "--out", str(b)])
    assert a.read_bytes() != b.read_bytes()


def test_no_temp_files_left(model, tmp_path):
    out = tmp_path / "o.json"
    main(["discover-bn", str(model("chain")), "--out", str(out)])
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".") or p.suffix == ".tmp"]
