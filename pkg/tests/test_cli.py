import csv
import io
import json
import math

import numpy as np
import pytest

from nonlocal_cast import __version__
from nonlocal_cast.bloch import load_state, save_state, state_to_json
from nonlocal_cast.cli import main
from nonlocal_cast.cloning import maximally_mixed, singlet, werner


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, s in [("singlet", singlet()), ("mixed", maximally_mixed()), ("w09", werner(0.9))]:
        paths[name] = tmp_path / f"{name}.json"
        save_state(s, paths[name])
    paths["malformed"] = tmp_path / "malformed.json"
    paths["malformed"].write_text('{"bloch": {"x": [0, 0, 0], ')
    paths["badfield"] = tmp_path / "badfield.json"
    paths["badfield"].write_text(json.dumps({"bloch": {"x": [0, 0, 0], "y": [0, 0], "T": np.zeros((3, 3)).tolist()}}))
    paths["unphysical"] = tmp_path / "unphysical.json"
    paths["unphysical"].write_text(json.dumps({"bloch": {"x": [0, 0, 0], "y": [0, 0, 0], "T": np.eye(3).tolist()}}))
    return paths


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(text):
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_eval_singlet(capsys, files):
    code, out, _ = run(capsys, "eval", "--state", files["singlet"])
    assert code == 0
    doc = json.loads(out)
    assert doc["chsh_s"] == pytest.approx(2 * math.sqrt(2), abs=1e-12)
    assert doc["bell_nonlocal"] is True


def test_eval_table_and_csv(capsys, files):
    code, out, _ = run(capsys, "eval", "--state", files["singlet"], "--format", "table")
    assert code == 0 and "bell_nonlocal" in out and "true" in out
    code, out, _ = run(capsys, "eval", "--state", files["singlet"], "--format", "csv")
    assert code == 0 and out.startswith(f"# nonlocal_cast {__version__}")
    assert float(read_csv(out)[0]["m_value"]) == pytest.approx(2.0, abs=1e-12)


def test_eval_maximally_mixed_is_zero(capsys, files):
    code, out, _ = run(capsys, "eval", "--state", files["mixed"])
    doc = json.loads(out)
    assert code == 0
    assert all(doc[k] == 0.0 for k in ("m_value", "chsh_s", "f2", "f3", "negativity"))


@pytest.mark.parametrize("name, code, needle", [
    ("malformed", 2, "malformed JSON"),
    ("badfield", 2, "bloch.y"),
    ("unphysical", 3, "unphysical"),
])
def test_eval_errors(capsys, files, name, code, needle):
    got, out, err = run(capsys, "eval", "--state", files[name])
    assert got == code
    assert needle in err
    assert out == ""


def test_eval_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "eval", "--state", tmp_path / "absent.json")
    assert code == 2 and "cannot read" in err


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as info:
        main(["eval"])
    assert info.value.code == 2


def test_clone_werner_at_cap(capsys, files, tmp_path):
    target = tmp_path / "out.json"
    code, out, _ = run(capsys, "clone", "--state", files["w09"], "--family", "local_sd", "--lambda", "0.14645",
                       "--write-state", target)
    assert code == 0
    doc = json.loads(out)
    assert doc["after"]["m_value"] == pytest.approx(0.405, abs=1e-4)
    assert doc["before"]["bell_nonlocal"] and not doc["after"]["bell_nonlocal"]
    assert state_to_json(load_state(target))["bloch"] == doc["state"]


def test_clone_rejects_restricted_lambda(capsys, files):
    code, out, err = run(capsys, "clone", "--state", files["w09"], "--family", "local_sd", "--lambda",
                         "0.1666666666667")
    assert code == 2
    assert "λ=1/6 restricted" in err


def test_clone_identity_point(capsys, files):
    code, out, _ = run(capsys, "clone", "--state", files["w09"], "--family", "nonlocal_sd", "--lambda", "0",
                       "--mu-cap", "1")
    assert code == 0
    doc = json.loads(out)
    assert doc["state"] == state_to_json(werner(0.9))["bloch"]
    assert doc["broadcast_achieved"] is True


def test_clone_with_oracle(capsys, files):
    code, out, _ = run(capsys, "clone", "--state", files["singlet"], "--family", "local_si", "--criterion",
                       "entanglement", "--oracle")
    doc = json.loads(out)
    assert code == 0
    assert doc["optimal_broadcast_achieved"] is True
    assert {"14", "23"} <= set(doc["oracle_matching_pairs"])


def test_verify_theorems_passes_and_lists_worst_cases(capsys):
    code, out, err = run(capsys, "verify-theorems", "--count", 200, "--seed", 5)
    assert code == 0
    header = [line for line in out.splitlines() if line.startswith("#")]
    assert header[0] == f"# nonlocal_cast {__version__}"
    assert "# seed: 5" in header
    assert sum(line.startswith("# cloner: theorem") for line in header) == 6
    rows = read_csv(out)
    for th in range(1, 7):
        assert sum(r["theorem"] == str(th) for r in rows) == 10
    assert all(r["passed"] == "true" for r in rows)
    assert err.count("PASS") == 6


def test_verify_theorems_reports_failure(capsys):
    code, _, err = run(capsys, "verify-theorems", "--count", 5, "--theorem", 2, "--grid", "1", "--mu-cap", 1)
    assert code == 1
    assert "FAIL" in err


def test_verify_theorems_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(capsys, "verify-theorems", "--count", 100, "--seed", 9, "--criterion", "chsh", "--out", a)[0] == 0
    assert run(capsys, "verify-theorems", "--count", 100, "--seed", 9, "--criterion", "chsh", "--out", b)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def _flip(rows, key):
    flags = [(float(r["p"]), r[key] == "true") for r in rows]
    return min(p for p, f in flags if f)


def test_scan_werner_thresholds(capsys):
    code, out, _ = run(capsys, "scan", "--states", "werner", "--grid", "0:1:0.01")
    rows = read_csv(out)
    assert code == 0 and len(rows) == 101
    assert abs(_flip(rows, "pre_bell_nonlocal") - 1 / math.sqrt(2)) <= 0.01
    assert abs(_flip(rows, "pre_steerable3") - 1 / math.sqrt(3)) <= 0.01
    assert abs(_flip(rows, "pre_entangled") - 1 / 3) <= 0.01


def test_scan_werner_through_universal_cloner(capsys):
    code, out, _ = run(capsys, "scan", "--states", "werner", "--family", "local_si")
    rows = read_csv(out)
    assert code == 0
    assert '"family": "local_state_independent"' in out
    # output T = (4/9) p diag(1,-1,1); entangled once (4/9) p > 1/3
    assert abs(_flip(rows, "post_entangled") - 0.75) <= 0.01 + 1e-9
    assert not any(r["post_bell_nonlocal"] == "true" for r in rows)


def test_scan_bell_diagonal_reports_skipped(capsys):
    code, out, err = run(capsys, "scan", "--states", "bell_diagonal", "--grid=-1:1:0.1")
    assert code == 0
    assert "# unphysical skipped: 6160" in out
    assert len(read_csv(out)) == 21**3 - 6160
    assert "6160" in err


def test_scan_random_deterministic(capsys):
    a = run(capsys, "scan", "--states", "random", "--count", 20, "--seed", 4)[1]
    b = run(capsys, "scan", "--states", "random", "--count", 20, "--seed", 4)[1]
    assert a == b
    assert "# seed: 4" in a


def test_scan_unwritable_output(capsys, tmp_path):
    code, _, err = run(capsys, "scan", "--out", tmp_path / "missing" / "x.csv")
    assert code == 2 and "cannot write" in err


def test_oracle_check_summary(capsys):
    code, out, err = run(capsys, "oracle-check", "--count", 5, "--seed", 1)
    assert code == 0
    doc = json.loads(out)
    assert doc["si_passed"]
    local_si = doc["state_independent"][0]
    assert local_si["max_deviation"]["14"] < 1e-9
    assert local_si["clone_fidelity_max_error"] < 1e-9
    statuses = {(r["family"], round(r["lambda"], 6)): r["status"] for r in doc["state_dependent"]}
    assert statuses[("local_state_dependent", 0.2)] == "ok"
    assert statuses[("local_state_dependent", round(1 / 6 - 1e-3, 6))] == "unrealizable"
    assert statuses[("nonlocal_state_dependent", 0.2)] == "unrealizable"
    assert "unrealizable" in err


def test_oracle_check_invalid_lambda_row(capsys):
    code, out, _ = run(capsys, "oracle-check", "--count", 2, "--family", "local_sd", "--grid", "0.1666666666667,0.3",
                       "--convention", "bh_standard")
    doc = json.loads(out)
    assert code == 0
    assert [r["status"] for r in doc["state_dependent"]] == ["invalid", "ok"]
