import csv
import io
import json
import subprocess
import sys

import pytest

from stablelab import theory
from stablelab.cli import build_parser, dispatch


def run(capsys, *argv):
    code = dispatch(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_predict(capsys):
    code, out, _ = run(capsys, "predict", "--n1", "1000", "--n2", "1001")
    assert code == 0
    obj = json.loads(out)
    assert obj["s"] == pytest.approx(6.9088, abs=1e-4)
    assert obj["ES"] == pytest.approx(theory.expected_stable_matchings((1000, 1001)))


def test_predict_balanced_is_rejected(capsys):
    code, _, err = run(capsys, "predict", "--n1", "5", "--n2", "5")
    assert code == 2 and "error" in err


@pytest.mark.parametrize("argv", [
    ["predict", "--n1", "3", "--n2", "4", "--bogus"],
    ["match", "--n1", "4", "--n2", "3"],
    ["integrate", "--n1", "2"],
    ["simulate", "--n1", "2", "--n2", "3", "--trials", "0"],
    ["generate", "--n1", "2", "--n2", "3", "--seed", "-1"],
    ["sweep", "--out", "x.jsonl", "--grid", "100by101"],
    ["oracle-check", "--min-n1", "4", "--max-n1", "3"],
    ["nonsense"],
])
def test_validation_errors_exit_2(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_integrate_single_man(capsys):
    code, out, _ = run(capsys, "integrate", "--formula", "P", "--n1", "1", "--n2", "5",
                       "--samples", "100000")
    obj = json.loads(out)
    assert code == 0 and obj["formula_id"] == "P"
    assert abs(obj["value"] - 0.2) <= 3 * obj["std_error"]


def test_integrate_pkl(capsys):
    code, out, _ = run(capsys, "integrate", "--formula", "PKL", "--n1", "2", "--n2", "2",
                       "--samples", "20000")
    obj = json.loads(out)
    assert code == 0
    assert len(obj["p_kl"]) == 3 and sum(map(sum, obj["p_kl"])) == pytest.approx(obj["value"])


def test_oracle_check(capsys):
    code, out, _ = run(capsys, "oracle-check", "--max-n1", "5", "--instances", "100", "--seed", "7")
    obj = json.loads(out)
    assert code == 0 and obj["passed"] and obj["mismatches"] == []


def test_oracle_refusal_exits_2(capsys):
    assert run(capsys, "oracle-check", "--instances", "5", "--bound", "3")[0] == 2


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit):
        build_parser().parse_args(["simulate", "--help"])
    text = capsys.readouterr().out
    for flag in ("--n1", "--trials", "--mode", "--cap", "--threads", "--q-tol", "--check", "--seed"):
        assert flag in text
    assert "(default: 100)" in text


def test_generate_match_enumerate_round_trip(capsys, tmp_path):
    path = tmp_path / "inst.json"
    assert run(capsys, "generate", "--n1", "4", "--n2", "5", "--seed", "3", "--out", str(path))[0] == 0
    inst = json.loads(path.read_text())
    assert (inst["n1"], inst["n2"]) == (4, 5)
    code, out, _ = run(capsys, "match", "--instance", str(path), "--side", "women")
    m = json.loads(out)
    assert code == 0 and m["stable"]
    code, out, _ = run(capsys, "enumerate", "--instance", str(path))
    e = json.loads(out)
    assert code == 0
    assert m["matching"]["wife_of"] in [x["wife_of"] for x in e["matchings"]]
    # same seed, same instance, whether drawn directly or read back
    code, out, _ = run(capsys, "match", "--n1", "4", "--n2", "5", "--seed", "3", "--side", "women")
    assert json.loads(out)["matching"] == m["matching"]


def test_latent_generation_is_valid(capsys):
    code, out, _ = run(capsys, "generate", "--n1", "3", "--n2", "4", "--latent")
    obj = json.loads(out)
    assert code == 0 and all(sorted(row) == [0, 1, 2, 3] for row in obj["men_pref"])


def test_env_seed_fallback(capsys, monkeypatch):
    monkeypatch.setenv("STABLELAB_SEED", "12345")
    a = run(capsys, "generate", "--n1", "3", "--n2", "4")[1]
    b = run(capsys, "generate", "--n1", "3", "--n2", "4", "--seed", "12345")[1]
    assert a == b
    monkeypatch.setenv("STABLELAB_SEED", "banana")
    assert run(capsys, "generate", "--n1", "3", "--n2", "4")[0] == 2


def test_simulate_outputs_and_check(capsys, tmp_path):
    log_path, csv_path = tmp_path / "t.jsonl", tmp_path / "s.csv"
    code, out, err = run(capsys, "simulate", "--n1", "1", "--n2", "5", "--trials", "20",
                         "--trial-log", str(log_path), "--csv", str(csv_path), "--check")
    assert code == 0
    rep = json.loads(out)
    assert len(rep["trials"]) == 20 and "PASS COUPON" in err
    assert len(log_path.read_text().splitlines()) == 20
    assert next(csv.reader(io.StringIO(csv_path.read_text())))[0] == "n1"
    # an impossible tolerance makes the gating Q check fail
    code, _, _ = run(capsys, "simulate", "--n1", "10", "--n2", "12", "--trials", "10",
                     "--q-tol", "0", "--check")
    assert code == 1


def test_simulate_thread_count_does_not_change_output(capsys):
    outs = []
    for threads in ("1", "2"):
        rep = json.loads(run(capsys, "simulate", "--n1", "5", "--n2", "6", "--trials", "12",
                             "--threads", threads)[1])
        outs.append([{k: v for k, v in t.items() if k != "wall_time"} for t in rep["trials"]])
    assert outs[0] == outs[1]


def test_sweep(capsys, tmp_path):
    out = tmp_path / "s.jsonl"
    code, text, _ = run(capsys, "sweep", "--out", str(out))
    assert code == 0 and text.strip().split(",")[0] == "n1"
    code, text, _ = run(capsys, "sweep", "--grid", "6x7", "6x9", "--trials", "10", "--out", str(out))
    rows = list(csv.DictReader(io.StringIO(text)))
    assert code == 0 and [(r["n1"], r["n2"]) for r in rows] == [("6", "7"), ("6", "9")]
    run(capsys, "sweep", "--grid", "6x7", "--trials", "10", "--out", str(out))
    assert len(out.read_text().splitlines()) == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "stablelab", "predict", "--n1", "2", "--n2", "3"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["coupon_mean"] == pytest.approx(2.5)
