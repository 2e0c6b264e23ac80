from __future__ import annotations

import json
import subprocess
import sys

import pytest

from conley_transit.cli import main
from conley_transit.conley import SCHEMA, load_model
from conley_transit.transition import enumerate_transitions


def run_cli(capsys, *argv) -> tuple[int, str, str]:
    try:
        code = main([str(a) for a in argv])
    except SystemExit as exc:
        code = exc.code
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def run_json(capsys, *argv) -> tuple[int, dict]:
    code, out, _ = run_cli(capsys, *argv, "--json")
    return code, json.loads(out)


# ------------------------------------------------------------------ verify


def test_verify_ok(capsys, data_dir):
    code, out, _ = run_cli(capsys, "verify-connection-matrix", data_dir / "pitchfork.json")
    assert code == 0 and "PASS" in out
    code, obj = run_json(capsys, "verify-connection-matrix", data_dir / "eightset.json")
    assert code == 0 and obj["passed"] and obj["schema"] == SCHEMA


def test_verify_failure_exit_1(capsys, tmp_path):
    bad = {
        "slice0": {
            "order": [["1@0", "2@0"]],
            "conley_index": {"1@0": {"0": 1}, "2@0": {"1": 1}},
            "connection": {"2@0|1@0|1": ["1"]},
        },
        "slice1": {"conley_index": {"1@1": {"0": 1}}},
    }
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(bad), encoding="utf-8")
    code, out, _ = run_cli(capsys, "verify-connection-matrix", p)
    assert code == 1 and "FAIL" in out


# ------------------------------------------------------------ decomposition


def test_finest_json(capsys, data_dir):
    code, obj = run_json(capsys, "finest-decomposition", data_dir / "fivepoint.json")
    assert code == 0
    assert obj["pairs"] == [
        [["1@0"], ["1@1"]],
        [["2@0"], ["2@1"]],
        [["3@0", "4@0"], []],
        [["5@0"], ["3@1", "4@1", "5@1"]],
    ]


# -------------------------------------------------------------- enumeration


def test_enumerate_pitchfork_json(capsys, data_dir):
    code, obj = run_json(capsys, "enumerate-transitions", data_dir / "pitchfork.json")
    assert code == 0
    assert obj["count"] == 1 and not obj["truncated"]
    assert obj["matrices"][0]["tables"] == {"0": ["110"]}
    assert obj["matrices"][0]["blocks"] == {"1@0|1@1|0": ["1"], "1@0|2@1|0": ["1"]}


def test_enumerate_pretty(capsys, data_dir):
    code, out, _ = run_cli(capsys, "enumerate-transitions", data_dir / "pitchfork.json")
    assert code == 0
    assert "1 transition matrix" in out
    assert "1@0  11-" in out


def test_enumerate_truncation_exit_2(capsys, data_dir):
    code, obj = run_json(capsys, "enumerate-transitions", data_dir / "eightset.json", "--cap", "2")
    assert code == 2 and obj["truncated"] and obj["count"] == 2


def test_enumerate_resource_exit_2(capsys, data_dir):
    code, _, err = run_cli(capsys, "enumerate-transitions", data_dir / "huge.json")
    assert code == 2 and "60" in err


def test_forced_and_scenarios(capsys, data_dir):
    code, obj = run_json(capsys, "forced-connections", data_dir / "eightset.json", "--scenarios")
    assert code == 0 and obj["candidates"] == 4
    pairs = {(f["p"], f["q"], f["degree"]) for f in obj["forced"]}
    assert ("2@0", "5@1", 1) in pairs
    entry = next(f for f in obj["forced"] if f["p"] == "2@0")
    assert len(entry["scenarios"]) == 4


def test_forced_truncated_refuses(capsys, data_dir):
    code, _, err = run_cli(capsys, "forced-connections", data_dir / "eightset.json", "--cap", "1")
    assert code == 2 and "truncated" in err


# ---------------------------------------------------------------- errors


def test_input_errors_exit_3(capsys, tmp_path, data_dir):
    assert run_cli(capsys, "verify-connection-matrix", tmp_path / "missing.json")[0] == 3
    bad = tmp_path / "bad.json"
    bad.write_text("{", encoding="utf-8")
    code, _, err = run_cli(capsys, "finest-decomposition", bad)
    assert code == 3 and "line 1" in err
    assert run_cli(capsys, "bogus-command", bad)[0] == 3
    assert run_cli(capsys, "enumerate-transitions", data_dir / "pitchfork.json", "--cap", "x")[0] == 3
    assert run_cli(capsys, "simulate", data_dir / "pitchfork_family.json", "--eps", "1e-2,1e-3")[0] == 0
    assert run_cli(capsys, "simulate", data_dir / "pitchfork_family.json", "--start", "9@1", "--eps", "1e-2")[0] == 3


def test_module_entry_point(data_dir):
    proc = subprocess.run(
        [sys.executable, "-m", "conley_transit", "finest-decomposition", str(data_dir / "pitchfork.json")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["pairs"] == [[["1@0"], ["1@1", "2@1", "3@1"]]]


# ----------------------------------------------------------- determinism


@pytest.mark.parametrize("cmd, name", [
    ("enumerate-transitions", "fivepoint.json"),
    ("forced-connections", "eightset.json"),
    ("finest-decomposition", "eightset.json"),
])
def test_identical_bytes(capsys, data_dir, cmd, name):
    first = run_cli(capsys, cmd, data_dir / name, "--json")[1]
    second = run_cli(capsys, cmd, data_dir / name, "--json")[1]
    assert first == second


# ------------------------------------------------------------- dynamics


def test_simulate_csv(capsys, data_dir, tmp_path):
    out = tmp_path / "trace.csv"
    code, obj = run_json(capsys, "simulate", data_dir / "pitchfork_family.json",
                         "--eps", "1e-2,5e-3,2.5e-3", "--out", out)
    assert code == 0 and obj["ok"]
    labels = [s["label"] for s in obj["itinerary"]["runs"][-1]["itinerary"]]
    assert labels == ["3@1", "2@1", "1@0"]
    assert out.read_text().startswith("t,x,lambda\n")
    assert (tmp_path / "trace.eps0.01.csv").exists()
    assert set(obj["csv"]) == {"0.01", "0.005", "0.0025"}


def test_indices_emit_model_roundtrip(capsys, data_dir, tmp_path):
    emitted = tmp_path / "model.json"
    code, obj = run_json(capsys, "indices-1d", data_dir / "pitchfork_family.json", "--emit-model", emitted)
    assert code == 0
    ids = [p["id"] for p in obj["slices"][1]["fixed_points"]]
    assert sorted(ids) == ["1@1", "2@1", "3@1"]
    model = load_model(emitted)
    res = enumerate_transitions(model)
    assert len(res) == 1 and res[0].table(model, 0) == ["110"]
    code, out, _ = run_cli(capsys, "enumerate-transitions", emitted)
    assert code == 0 and "1 transition matrix" in out
