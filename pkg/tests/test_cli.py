import csv
import json

import pytest

from dphaser.cli import main


def test_simulate_is_deterministic(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for p in (a, b):
        assert main(["simulate", "--n", "4", "--phases", "2", "--seed", "1", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_simulate_single_task(tmp_path):
    out = tmp_path / "t.jsonl"
    assert main(["simulate", "--n", "1", "--phases", "1", "--out", str(out)]) == 0
    kinds = [json.loads(line)["kind"] for line in out.read_text().splitlines()]
    # the lone task signals the head, which is a separate node here
    assert kinds.count("SIGNAL") == 1


@pytest.mark.parametrize("argv", [
    ["simulate", "--phases", "0"],
    ["simulate", "--n", "0"],
    ["simulate", "--p", "1.0"],
    ["simulate", "--modes", "2q"],
    ["simulate", "--policy", "lifo"],
    ["verify", "--scenario", "nope"],
    ["verify", "--scenario", "one-phase", "--decompose", "BOGUS"],
    ["bench", "--n", "x"],
    ["frobnicate"],
])
def test_usage_errors_exit_one(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    with pytest.raises(SystemExit) as exc:
        raise SystemExit(main(argv))
    assert exc.value.code == 1


def test_simulate_mixed_modes(tmp_path):
    out = tmp_path / "m.jsonl"
    assert main(["simulate", "--modes", "4sw,2s,2w", "--phases", "2", "--policy", "random",
                 "--seed", "3", "--out", str(out)]) == 0


def test_verify_clean(tmp_path):
    out = tmp_path / "r.json"
    assert main(["verify", "--scenario", "one-phase", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["reports"][0]["violations"] == []


def test_verify_mutation_writes_counterexample(tmp_path):
    out = tmp_path / "r.json"
    code = main(["verify", "--scenario", "one-phase", "--mutation", "early-forward", "--out", str(out)])
    assert code == 2
    cx = tmp_path / "r.json.counterexample.json"
    assert cx.exists()
    assert main(["replay", str(cx), "--out", str(tmp_path / "replay.jsonl")]) == 0


def test_replay_detects_tampering(tmp_path):
    out = tmp_path / "r.json"
    main(["verify", "--scenario", "one-phase", "--mutation", "early-forward", "--out", str(out)])
    cx = tmp_path / "r.json.counterexample.json"
    doc = json.loads(cx.read_text())
    doc["digest"] = "0" * 16
    cx.write_text(json.dumps(doc))
    assert main(["replay", str(cx)]) == 2


def test_verify_depth_bound_incomplete(tmp_path):
    assert main(["verify", "--scenario", "one-phase", "--depth", "3",
                 "--out", str(tmp_path / "r.json")]) == 3


def test_verify_decomposed(tmp_path):
    out = tmp_path / "r.json"
    assert main(["verify", "--scenario", "spawn-during-phase", "--decompose", "SIGNAL,INSERT_LINK",
                 "--out", str(out)]) == 0
    assert [r["kind"] for r in json.loads(out.read_text())["reports"]] == ["SIGNAL", "INSERT_LINK"]


def test_bench_csv(tmp_path):
    out = tmp_path / "b.csv"
    assert main(["bench", "--n", "1,16", "--C", "4,16", "--seeds", "5", "--out", str(out)]) == 0
    head, promo = out.read_text().split("\n\n")
    rows = list(csv.DictReader(head.splitlines()))
    assert [r["n"] for r in rows] == ["1", "16"]
    assert float(rows[0]["mean_hops"]) == 1.0 and rows[0]["bootstrap_rounds"] == "0"
    assert "# fit a=" in promo
