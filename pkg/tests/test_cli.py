import csv
import io
import subprocess
import sys

import numpy as np
import pytest

from privatebhq.cli import main
from privatebhq.pvalues import Dataset, write_dataset


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def pfile(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("p,is_null\n0.01,0\n0.02,1\n0.5,1\n")
    return path


@pytest.fixture
def binary_file(tmp_path):
    rng = np.random.default_rng(0)
    values = (rng.random((200, 30)) < 0.5).astype(float)
    values[:, :3] = rng.random((200, 3)) < 0.9
    path = tmp_path / "data.csv"
    write_dataset(Dataset(values), path)
    return path


def test_bhq_example(pfile, capsys):
    code, out, _ = run(["bhq", "--input", str(pfile), "--q", "0.1", "--mode", "step-up"], capsys)
    assert code == 0
    assert rows(out) == [{"R": "2", "V": "1", "rejected": "1 2"}]


def test_bhq_step_down_without_labels(tmp_path, capsys):
    path = tmp_path / "p.csv"
    path.write_text("p\n0.05\n0.055\n0.06\n")
    code, out, _ = run(["bhq", "--input", str(path), "--q", "0.1", "--mode", "step-down"], capsys)
    assert code == 0 and rows(out) == [{"R": "0", "V": "", "rejected": ""}]


def test_bhq_writes_out_file(pfile, tmp_path, capsys):
    out_path = tmp_path / "o.csv"
    assert run(["bhq", "--input", str(pfile), "--q", "0.1", "--out", str(out_path)], capsys)[0] == 0
    assert rows(out_path.read_text())[0]["R"] == "2"


@pytest.mark.parametrize("argv", [
    ["bhq", "--input", "/nonexistent/p.csv", "--q", "0.1"],
    ["bhq", "--q", "0.1"],
    ["bhq", "--input", "x", "--q", "abc"],
    ["frobnicate"],
    ["budget", "--epsilon", "0.5", "--delta", "0", "--mprime", "10", "--eta", "0.01"],
    ["--threads", "0", "budget", "--epsilon", "0.5", "--delta", "0.1", "--mprime", "10", "--eta", "0.01"],
])
def test_bad_input_exits_2(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 2
    assert err.strip().startswith("privatebhq: error:")
    assert len(err.strip().splitlines()) == 1


def test_bhq_bad_level_exits_2(pfile, capsys):
    code, _, err = run(["bhq", "--input", str(pfile), "--q", "1.5"], capsys)
    assert code == 2 and "q must lie in (0, 1)" in err


def test_bhq_bad_column(tmp_path, capsys):
    path = tmp_path / "p.csv"
    path.write_text("pval\n0.1\n")
    assert run(["bhq", "--input", str(path), "--q", "0.1"], capsys)[0] == 2


def test_budget_example(capsys):
    code, out, _ = run(["budget", "--epsilon", "0.5", "--delta", "0.1", "--mprime", "10", "--eta", "0.01"], capsys)
    assert code == 0
    table = rows(out)
    assert len(table) == 10
    assert float(table[0]["lambda"]) == pytest.approx(0.303485, abs=1e-6)
    assert float(table[0]["gamma"]) == pytest.approx(-8.8492, abs=1e-4)
    assert table[0]["regime"] == "theorem-regime"


def test_budget_outside_regime_is_tagged(capsys):
    _, out, _ = run(["budget", "--epsilon", "2", "--delta", "0.1", "--mprime", "10", "--eta", "0.01"], capsys)
    assert rows(out)[0]["regime"] == "outside-theorem-regime"


def test_private_bhq_runs_and_echoes_seed(binary_file, capsys):
    argv = ["private-bhq", "--input", str(binary_file), "--test", "binomial", "--epsilon", "0.5",
            "--delta", "0.1", "--mprime", "10", "--q", "0.1", "--seed", "77"]
    code, out, err = run(argv, capsys)
    assert code == 0 and "seed=77" in err
    row = rows(out)[0]
    assert int(row["R"]) <= 10
    assert float(row["nu"]) == pytest.approx(30**-1.5)
    # Same seed, same bytes.
    assert run(argv, capsys)[1] == out


def test_private_bhq_fresh_seed_is_echoed(binary_file, capsys):
    argv = ["private-bhq", "--input", str(binary_file), "--test", "binomial", "--epsilon", "0.5",
            "--delta", "0.1", "--mprime", "10", "--q", "0.1"]
    code, out, err = run(argv, capsys)
    seed = int(err.split("seed=")[1].split()[0])
    again = run(argv + ["--seed", str(seed)], capsys)[1]
    assert code == 0 and again == out


def test_private_bhq_noise_off_warns(binary_file):
    argv = ["private-bhq", "--input", str(binary_file), "--test", "binomial", "--epsilon", "0.5",
            "--delta", "0.1", "--mprime", "10", "--q", "0.1", "--seed", "1", "--noise-off"]
    proc = subprocess.run([sys.executable, "-m", "privatebhq", *argv], capture_output=True, text=True)
    assert proc.returncode == 0 and "NOT differentially private" in proc.stderr


@pytest.mark.parametrize("extra", [["--mprime", "31"], ["--eta", "1e-6"], ["--q", "1.2"]])
def test_private_bhq_precondition_failures(binary_file, capsys, extra):
    base = {"--input": str(binary_file), "--test": "binomial", "--epsilon": "0.5", "--delta": "0.1",
            "--mprime": "10", "--q": "0.1", "--seed": "1"}
    base[extra[0]] = extra[1]
    argv = ["private-bhq"] + [x for kv in base.items() for x in kv]
    assert run(argv, capsys)[0] == 2


def test_ck_estimate_thread_independent(capsys):
    argv = ["ck-estimate", "--k", "2,5", "--reps", "400", "--jmax", "1000", "--seed", "3"]
    code, out1, err = run(argv, capsys)
    _, out4, _ = run(["--threads", "4"] + argv, capsys)
    assert code == 0 and out1 == out4 and "seed=3" in err
    table = rows(out1)
    assert [r["k"] for r in table] == ["2", "5"]
    assert list(table[0]) == ["k", "mean", "stderr", "reps", "jmax"]


def test_ck_estimate_rejects_k1(capsys):
    assert run(["ck-estimate", "--k", "1", "--reps", "10", "--jmax", "10", "--seed", "0"], capsys)[0] == 2


def test_simulate_thread_independent(capsys):
    argv = ["simulate", "--example", "normal", "--m", "200", "--m1", "20,50", "--reps", "10", "--seed", "5"]
    code, out1, _ = run(argv, capsys)
    _, out3, _ = run(["--threads", "3"] + argv, capsys)
    assert code == 0 and out1 == out3
    table = rows(out1)
    assert list(table[0]) == ["example", "m", "m1_or_rho", "alternative", "k", "fdr_hat", "stderr", "bound"]
    assert len(table) == 2 * 2 * 3


def test_simulate_block_and_alternative_alias(capsys):
    argv = ["simulate", "--example", "block", "--m", "300", "--rho", "-1,-0.4", "--reps", "5",
            "--alternative", "one", "--seed", "2"]
    code, out, _ = run(argv, capsys)
    table = rows(out)
    assert code == 0 and {r["alternative"] for r in table} == {"one-sided"}
    assert sorted({float(r["m1_or_rho"]) for r in table}) == [-1.0, -0.4]


def test_simulate_adversarial_reports_infeasible(capsys):
    argv = ["simulate", "--example", "adversarial", "--m", "1000", "--m1", "10", "--reps", "20", "--seed", "1"]
    code, out, err = run(argv, capsys)
    assert code == 0 and "infeasible" in err
    assert {r["k"] for r in rows(out)} == {"2", "5"}


def test_module_entry_point(pfile):
    proc = subprocess.run([sys.executable, "-m", "privatebhq", "bhq", "--input", str(pfile), "--q", "0.1"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.splitlines()[1] == "2,1,1 2"
    proc = subprocess.run([sys.executable, "-m", "privatebhq", "bhq", "--input", "missing.csv", "--q", "0.1"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
