import csv
import io
import subprocess
import sys

from sdmm.cli import EXIT_BUDGET, EXIT_INVALID, EXIT_OK, run


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_capacity_b_a():
    code, out, _ = call("capacity", "--version", "B_A", "--n", "4", "--x", "1")
    assert code == EXIT_OK
    (r,) = rows(out)
    assert (r["status"], r["value"], r["case"]) == ("exact", "3/4", "B_A:n-above-x")
    assert r["value_decimal"] == "0.750000"


def test_capacity_zero_and_b_b():
    _, out, _ = call("capacity", "--version", "AB_phi", "--n", "2", "--x", "3")
    assert rows(out)[0]["status"] == "zero"
    _, out, _ = call("capacity", "--version", "B_B", "--k", "2", "--m", "4")
    assert (rows(out)[0]["status"], rows(out)[0]["value"]) == ("exact", "1")


def test_capacity_open_and_flags():
    code, out, _ = call("capacity", "--version", "B_phi", "--l", "3", "--k", "1", "--m", "2", "--n", "4")
    assert code == EXIT_OK
    code, out, _ = call("capacity", "--version", "AB_phi", "--l", "1", "--k", "3", "--m", "1", "--n", "5",
                        "--flags", "k_over_min_lm")
    assert rows(out)[0]["value"] == "3/5"
    code, _, err = call("capacity", "--flags", "k_over_min_lm")
    assert code == EXIT_INVALID and "contradicts" in err


def test_simulate_csa():
    code, out, _ = call("simulate", "--scheme", "csa", "--n", "4", "--x", "1", "--l", "2", "--k", "2", "--m", "2",
                        "--seed", "7")
    assert code == EXIT_OK
    r = rows(out)[0]
    assert (r["correctness"], r["download"], r["rate"]) == ("OK", "16", "1/2")


def test_simulate_scalar_exhaustive():
    code, out, _ = call("simulate", "--scheme", "scalar", "--q", "5", "--n", "3", "--x", "1", "--exhaustive")
    assert code == EXIT_OK
    assert (rows(out)[0]["correct"], rows(out)[0]["pairs"]) == ("25", "25")


def test_simulate_invalid_s():
    code, _, err = call("simulate", "--scheme", "general", "--n", "3", "--x", "1", "--s", "1")
    assert code == EXIT_INVALID and "S" in err
    assert call("simulate", "--scheme", "nope")[0] == EXIT_INVALID


def test_simulate_transcript():
    code, out, _ = call("simulate", "--scheme", "general", "--n", "3", "--x", "1", "--transcript")
    assert code == EXIT_OK and "payload" in out


def test_audit_csa():
    code, out, _ = call("audit", "--scheme", "csa", "--n", "3", "--x", "1", "--q", "5")
    assert code == EXIT_OK
    last = rows(out)[-1]
    assert (last["servers"], last["mi_A"], last["mi_joint"]) == ("max", "0", "pass")


def test_audit_budget_exit_code():
    code, _, err = call("audit", "--scheme", "general", "--n", "3", "--x", "1", "--q", "5",
                        "--l", "2", "--k", "2", "--m", "2")
    assert code == EXIT_BUDGET and "refused" in err


def test_entropy_gap_column():
    code, out, _ = call("entropy", "--l", "2", "--k", "1", "--m", "2", "--q", "16")
    assert code == EXIT_OK
    first = rows(out)[0]
    assert first["metric"] == "H(AB)" and float(first["gap"]) < 0.05


def test_entropy_budget_exit_code():
    assert call("entropy", "--l", "3", "--k", "3", "--m", "3", "--q", "11")[0] == EXIT_BUDGET


def test_pir_demo():
    code, out, _ = call("pir-demo", "--k", "3", "--want", "2")
    assert code == EXIT_OK
    for r in rows(out):
        assert r["retrieved"] == r["source"] and r["equal"] == "True"
        assert r["download"] == r["generic_download"]
    assert call("pir-demo", "--k", "3", "--want", "4")[0] == EXIT_INVALID


def test_sweep_small():
    code, out, _ = call("sweep", "--versions", "B_A", "--schemes", "csa", "--dims", "1,2", "--servers", "4",
                        "--collusion", "1")
    assert code == EXIT_OK
    data = rows(out)
    assert data[0].keys() >= {"version", "metric", "value"}
    assert not [r for r in data if r["metric"] == "exceeds" and r["value"] == "True"]


def test_deterministic_output(monkeypatch):
    monkeypatch.setenv("SDMM_SEED", "11")
    a = call("simulate", "--scheme", "csa", "--n", "4", "--x", "1", "--transcript")[1]
    b = call("simulate", "--scheme", "csa", "--n", "4", "--x", "1", "--transcript")[1]
    assert a == b
    c = call("simulate", "--scheme", "csa", "--n", "4", "--x", "1", "--transcript", "--seed", "12")[1]
    assert c != a
    assert ",11," in a


def test_config_file_overridden_by_flags(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# session\nversion = B_A\nn=4\nx=1\n")
    code, out, _ = call("capacity", "--config", str(cfg))
    assert rows(out)[0]["value"] == "3/4"
    code, out, _ = call("capacity", "--config", str(cfg), "--n", "5")
    assert rows(out)[0]["value"] == "4/5"
    cfg.write_text("bogus=1\n")
    assert call("capacity", "--config", str(cfg))[0] == EXIT_INVALID


def test_out_file_and_table(tmp_path):
    path = tmp_path / "cap.csv"
    code, out, _ = call("capacity", "--version", "B_A", "--n", "4", "--out", str(path))
    assert code == EXIT_OK and out == ""
    assert "3/4" in path.read_text()
    _, table, _ = call("capacity", "--version", "B_A", "--n", "4", "--format", "table")
    assert "," not in table.splitlines()[1]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sdmm", "capacity", "--version", "B_A", "--n", "4"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "3/4" in proc.stdout
