import csv
import io
import json
import pathlib
import subprocess
import sys

import pytest

from cics.amort import mdp_curve
from cics.cli import main
from cics.instance_io import dumps_instance, load_instance, parse_instance

INST = pathlib.Path(__file__).resolve().parent.parent / "instances"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_opt_commit_trap(capsys):
    code, out, _ = run(capsys, "opt", INST / "commit_trap.json")
    assert code == 0
    assert json.loads(out)["value"] == pytest.approx(4.5)


def test_gap_peek_gap_instance(capsys):
    code, out, _ = run(capsys, "gap", INST / "peek_gap.json")
    res = json.loads(out)
    assert code == 0
    assert res["gap"] == pytest.approx(16 / 15, abs=1e-9)
    assert res["opt"] == pytest.approx(1.875)


def test_surrogate_two_action(capsys):
    code, out, _ = run(capsys, "surrogate", INST / "two_action_mdp.json", "--alt", 0)
    assert code == 0
    assert json.loads(out) == [[1, 0.25], [2.5, 0.5], [4, 0.25]]


def test_index_fields(capsys):
    _, out, _ = run(capsys, "index", INST / "ws_uniform.json")
    row = json.loads(out)["alternatives"][0]
    assert (row["g"], row["h"], row["mu"], row["M"]) == (2, 8, 5, 4.95)
    _, out, _ = run(capsys, "index", INST / "peek_gap.json")
    rows = json.loads(out)["alternatives"]
    assert rows[0]["g_open"] == 2 and rows[0]["g_peek"] == 1.5
    _, out, _ = run(capsys, "index", INST / "b2_pboi.json")
    row = json.loads(out)["alternatives"][0]
    assert row["mu"] == 2.75 and row["g"] == 4


def test_eval_defaults_and_commit(capsys):
    _, out, _ = run(capsys, "eval", INST / "two_boxes.json")
    assert json.loads(out)["value"] == pytest.approx(1.9375)
    _, out, _ = run(capsys, "eval", INST / "commit_trap.json", "--commit", "[null, 1]")
    assert json.loads(out)["value"] == pytest.approx(4.5)
    _, a, _ = run(capsys, "eval", INST / "two_boxes.json", "--mc", "5,500")
    _, b, _ = run(capsys, "eval", INST / "two_boxes.json", "--mc", "5,500")
    assert a == b


def test_curve_csv_round_trip(capsys, tmp_path):
    target = tmp_path / "c.csv"
    assert run(capsys, "curve", INST / "commit_trap.json", "--alt", 1, "--out", target)[0] == 0
    text = target.read_text()
    assert text.startswith("y,f,slope\n") and text.endswith("\n")
    f = mdp_curve(load_instance(str(INST / "commit_trap.json")).alternatives[1].mdp)
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == len(f.xs)
    for r in rows:
        assert f(float(r["y"])) == float(r["f"])


def test_verify_modes(capsys):
    _, out, _ = run(capsys, "verify", INST / "two_action_mdp.json", "--alt", 0, "--alpha", 2)
    assert json.loads(out) == {"pass": True, "witness_y": None}
    _, out, _ = run(capsys, "verify", INST / "two_action_mdp.json", "--alt", 0, "--alpha", 1, "--pointwise")
    assert json.loads(out)["pass"] is False
    _, out, _ = run(capsys, "verify", INST / "b2_pboi.json", "--alt", 0, "--alpha", 0.5, "--semilocal", "0.1,0.25")
    assert json.loads(out)["pass"] is True


def test_compose(capsys):
    _, out, _ = run(capsys, "compose-semilocal", INST / "b2_pboi.json", "--beta", 0.1)
    res = json.loads(out)
    assert res["probs"] == [pytest.approx(0.27833, abs=1e-5)] * 2
    assert res["value"] > 0


@pytest.mark.parametrize("name", sorted(p.name for p in INST.glob("*.json")))
def test_instance_files_are_canonical(name):
    text = (INST / name).read_text()
    assert dumps_instance(parse_instance(json.loads(text))) == text


def test_error_codes(capsys, tmp_path):
    code, _, err = run(capsys, "opt", tmp_path / "missing.json")
    assert code == 2 and json.loads(err)["error"] == "parse"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": 99, "mode": "min"}))
    assert run(capsys, "opt", bad)[0] == 2
    code, _, err = run(capsys, "surrogate", INST / "two_action_mdp.json", "--alt", 3)
    assert code == 4 and json.loads(err)["error"] == "domain"
    neg = tmp_path / "neg.json"
    neg.write_text(json.dumps({
        "schema_version": 1, "mode": "min", "matroid": {"type": "uniform", "params": {"k": 1}},
        "alternatives": [{"type": "pb", "dist": [[-1, 1]], "cost": 1}],
    }))
    assert run(capsys, "opt", neg)[0] == 4


def test_cap_exit_code(capsys, tmp_path):
    big = tmp_path / "big.json"
    comps = [{"dist": [[0, 0.5], [1, 0.5]], "cost": 0.1}] * 6
    big.write_text(json.dumps({
        "schema_version": 1, "mode": "min", "matroid": {"type": "uniform", "params": {"k": 1}},
        "alternatives": [{"type": "additive", "components": comps}],
    }))
    code, _, err = run(capsys, "index", big)
    assert code == 3 and json.loads(err)["error"] == "cap"


def test_module_entry_point():
    out = subprocess.run(
        [sys.executable, "-m", "cics", "opt", str(INST / "commit_trap.json")],
        capture_output=True, text=True, check=True,
    )
    assert json.loads(out.stdout)["value"] == 4.5
