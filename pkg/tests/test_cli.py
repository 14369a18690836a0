import json
import subprocess
import sys

import pytest

from hiercontact.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    lines = [json.loads(l) for l in out.splitlines() if l.strip()]
    return code, lines, err


def check_shape(lines):
    assert lines, "no output"
    assert all(l["schema_version"] == "1" for l in lines)
    assert lines[-1]["summary"] is True
    assert all(not l.get("summary") for l in lines[:-1])


def test_simulate_summary_and_reproducible(capsys):
    args = ["simulate", "--N", "2", "--n", "3", "--delta", "0.1", "--alpha", "geometric:0.5",
            "--t", "5", "--replicas", "300", "--seed", "7"]
    code, lines, _ = run(capsys, *args)
    assert code == 0
    check_shape(lines)
    s = lines[-1]
    assert s["p_hat"] >= s["finite_survival_bound"] - 3 * s["stderr"]
    main(args)
    first = capsys.readouterr().out
    main(args)
    assert capsys.readouterr().out == first


def test_simulate_usage_errors(capsys):
    base = ["simulate", "--n", "3", "--delta", "0.1", "--t", "5"]
    assert main(base + ["--alpha", "geometric:0.5", "--replicas", "0"]) == 2
    assert main(base + ["--alpha", "bogus:1"]) == 2
    assert main(base) == 2
    assert main(["simulate", "--n", "3"]) == 2
    assert main(["nonsense"]) == 2
    err = capsys.readouterr().err
    assert "error" in err


def test_simulate_out_file_and_csv(tmp_path, capsys):
    out, traj = tmp_path / "o.jsonl", tmp_path / "t.csv"
    code = main(["simulate", "--n", "2", "--delta", "0.5", "--family", "geometric:0.5", "--t", "1",
                 "--replicas", "3", "--out", str(out), "--trajectory-csv", str(traj)])
    assert code == 0 and capsys.readouterr().out == ""
    lines = [json.loads(l) for l in out.read_text().splitlines()]
    check_shape(lines)
    assert traj.read_text().startswith("t,event_type,site_index,infected_count")


def test_verify_default_and_corrupted(capsys):
    code, lines, _ = run(capsys, "verify", "--grid", "2")
    assert code == 0
    check_shape(lines)
    code, lines, err = run(capsys, "verify", "--check", "intertwine", "--n", "2", "--delta", "1",
                           "--alpha-values", "2,1", "--xi-override", "0.4")
    assert code == 1 and "intertwine" in err
    assert lines[-1]["failed_checks"] == ["intertwine"]


def test_verify_two_level(capsys):
    code, lines, _ = run(capsys, "verify", "--check", "two-level", "--xi", "0.25")
    assert code == 0
    assert all(l["max_residual"] < 1e-12 for l in lines[:-1])
    assert main(["verify", "--check", "two-level", "--xi", "0.9"]) == 2


def test_bounds_positive(capsys):
    code, lines, _ = run(capsys, "bounds", "--family", "double_exp:1.5", "--N", "2", "--delta", "0.001")
    assert code == 0
    check_shape(lines)
    assert lines[-1]["verdict"] == "positive"
    assert lines[-1]["smallness_constants"]["c9"] == "inf"


def test_bracket_extinction_regime(capsys, tmp_path):
    csv_path = tmp_path / "b.csv"
    code, lines, _ = run(capsys, "bracket", "--family", "double_exp:3", "--N", "2", "--csv", str(csv_path))
    assert code == 0
    check_shape(lines)
    row = lines[-1]["table"][0]
    assert row["lower"] == 0 and row["upper"] < 1e-6
    assert csv_path.read_text().splitlines()[0].startswith("family,lower,upper,mc_estimate")


def test_compare(capsys):
    code, lines, _ = run(capsys, "compare", "--N", "3", "--Nprime", "2.5")
    assert code == 0
    check_shape(lines)
    s = lines[-1]
    assert 2.5 ** s["m"] <= 2 ** s["n"] <= 3 ** s["m"]
    assert main(["compare", "--N", "3", "--Nprime", "3.5"]) == 2


def test_couple_small(capsys):
    code, lines, _ = run(capsys, "couple", "--test", "cascade-init", "--n", "3", "--delta", "1",
                         "--alpha", "geometric:0.5", "--replicas", "2000")
    assert code == 0
    check_shape(lines)
    assert main(["couple", "--test", "conditional", "--n", "5", "--delta", "1",
                 "--alpha", "geometric:0.5"]) == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hiercontact", "compare", "--N", "4"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout.splitlines()[-1])["m"] == 1
