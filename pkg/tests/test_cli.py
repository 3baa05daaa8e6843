import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from driftkit.cli import main
from driftkit.oracle import build_onemax_chain, exact_expectation, onemax_binomial_start
from driftkit.processes import leadingones_expected

GOLDEN = Path(__file__).parent / "golden"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    return code, (json.loads(out) if out.strip() else None), err


TWO_STATE = "0 target\n1 0:0.25 1:0.75\n"


# bound

def test_bound_multiplicative(capsys):
    code, out, _ = run_json(capsys, "bound", "multiplicative", "--delta", 0.1, "--xmin", 1, "--x0", 2.718281828)
    assert code == 0
    assert out["bound"] == pytest.approx(20.0, abs=1e-7)
    assert out["manifest"]["command"][:3] == ["driftkit", "bound", "multiplicative"]


def test_bound_fitness_levels(capsys):
    code, out, _ = run_json(capsys, "bound", "fitness-levels", "--p", "0.5,0.25")
    assert code == 0
    assert out["bound"] == 6.0


def test_bound_variable_against_trapezoid(capsys):
    text = "exp(-1+x/100)*x/100*(1-1/100)"
    code, out, _ = run_json(capsys, "bound", "variable", "--h", text, "--xmin", 1, "--x0", 50, "--n", 100)
    assert code == 0
    xs = np.linspace(1.0, 50.0, 200001)
    vals = 1.0 / (np.exp(-1 + xs / 100) * xs / 100 * (1 - 1 / 100))
    trap = float(np.sum((vals[1:] + vals[:-1]) * np.diff(xs)) / 2)
    assert out["bound"] == pytest.approx(vals[0] + trap, rel=1e-7)


def test_bound_precondition_rejection_has_witness(capsys, tmp_path):
    chain = tmp_path / "walk.chain"
    chain.write_text(TWO_STATE)
    code, out, err = run_json(capsys, "bound", "additive", "--delta", 0.5, "--x0", 1, "--chain", chain)
    assert code == 2
    assert out["error"] == "precondition"
    assert out["witness"] is not None
    assert "precondition" in err


def test_bound_verified_on_chain(capsys, tmp_path):
    chain = tmp_path / "walk.chain"
    chain.write_text(TWO_STATE)
    code, out, _ = run_json(capsys, "bound", "additive", "--delta", 0.25, "--x0", 1, "--chain", chain)
    assert code == 0
    assert out["bound"] == pytest.approx(4.0)
    assert out["precondition_status"] == "verified-by-oracle"


def test_bound_tail_outputs_are_json_safe(capsys):
    code, out, _ = run_json(capsys, "bound", "tail-multiplicative", "--delta", 0.1, "--xmin", 1, "--x0", 5, "--t", 0)
    assert code == 0
    assert out["bound"] == 1.0
    assert out["vacuous"] is True


@pytest.mark.parametrize("argv", [
    ["bound"],
    ["bound", "nonsense"],
    ["bound", "multiplicative", "--delta", "0.1"],
    ["frobnicate"],
    ["oracle", "--process", "onemax"],
    ["bound", "variable", "--h", "2*", "--xmin", "1", "--x0", "5"],
])
def test_usage_errors_exit_1(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 1
    assert err


def test_spec_file_fills_options(capsys, tmp_path):
    spec = tmp_path / "run.yaml"
    spec.write_text("theorem: multiplicative\ndrift:\n  delta: 0.1\nparams:\n  xmin: 1\n  x0: 2.718281828\n")
    code, out, _ = run_json(capsys, "bound", "multiplicative", "--spec", spec)
    assert code == 0
    assert out["bound"] == pytest.approx(20.0, abs=1e-7)
    assert list(out["manifest"]["inputs"]) == [str(spec)]
    # flags given on the command line win over the file
    code, out, _ = run_json(capsys, "bound", "multiplicative", "--spec", spec, "--delta", 0.2)
    assert out["bound"] == pytest.approx(10.0, abs=1e-7)


def test_spec_file_errors(capsys, tmp_path):
    spec = tmp_path / "run.yaml"
    spec.write_text("theorem: additive\nparams:\n  delta: 1\n")
    assert run(capsys, "bound", "multiplicative", "--spec", spec)[0] == 1
    spec.write_text("colour: blue\n")
    assert run(capsys, "bound", "multiplicative", "--spec", spec)[0] == 1


# oracle

def test_oracle_onemax_two_bits(capsys):
    code, out, _ = run_json(capsys, "oracle", "--process", "onemax", "--n", 2, "--start", 2)
    assert code == 0
    assert out["expectation"] == pytest.approx(4.0, rel=1e-14)


def test_oracle_leadingones_closed_form(capsys):
    code, out, _ = run_json(capsys, "oracle", "--process", "leadingones", "--n", 8)
    assert code == 0
    assert out["expectation"] == pytest.approx(leadingones_expected(8, 8), rel=1e-9)


def test_oracle_chain_file_and_tail_csv(capsys, tmp_path):
    chain = tmp_path / "two_state.chain"
    chain.write_text(TWO_STATE)
    csv = tmp_path / "tail.csv"
    code, out, _ = run_json(capsys, "oracle", "--process", "chain", "--file", chain, "--start", 1,
                            "--tail", 5, "--csv", csv)
    assert code == 0
    assert out["expectation"] == pytest.approx(4.0)
    assert len(out["manifest"]["inputs"][str(chain)]) == 64
    rows = csv.read_text().splitlines()
    assert rows[0] == "t,P(T>=t)"
    # row k holds t = k - 1 and P(T >= t) = 0.75^(t-1)
    assert float(rows[4].split(",")[1]) == pytest.approx(0.75 ** 2)
    side = json.loads(Path(str(csv) + ".manifest.json").read_text())
    assert "timestamp" in side and side["output"] == str(csv)


def test_oracle_binomial_start(capsys):
    code, out, _ = run_json(capsys, "oracle", "--process", "onemax", "--n", 50)
    assert out["start"] == "binomial"
    assert out["expectation"] == pytest.approx(exact_expectation(build_onemax_chain(50), onemax_binomial_start(50)))


def test_oracle_state_space_guard(capsys):
    code, out, _ = run_json(capsys, "oracle", "--process", "leadingones", "--n", 20)
    assert code == 2
    assert out["error"] == "StateSpaceError"


# simulate

def test_simulate_deterministic_chain(capsys, tmp_path):
    chain = tmp_path / "line.chain"
    chain.write_text("0 target\n" + "".join(f"{i} {i - 1}:1\n" for i in range(1, 11)))
    code, out, _ = run_json(capsys, "simulate", "--process", "chain", "--file", chain, "--start", 10,
                            "--trials", 200)
    assert code == 0
    assert out["summary"]["mean"] == 10.0 and out["summary"]["variance"] == 0.0
    assert out["manifest"]["master_seed"] == 0


def test_simulate_geometric_mean(capsys, tmp_path):
    chain = tmp_path / "coin.chain"
    chain.write_text("0 target\n1 0:0.5 1:0.5\n")
    code, out, _ = run_json(capsys, "simulate", "--process", "chain", "--file", chain, "--start", 1,
                            "--trials", 1_000_000, "--seed", 4)
    s = out["summary"]
    assert abs(s["mean"] - 2.0) <= 4 * s["std_error"]


def test_simulate_onemax_matches_oracle(capsys):
    code, out, _ = run_json(capsys, "simulate", "--process", "onemax", "--n", 100, "--trials", 20000, "--seed", 2)
    s = out["summary"]
    exact = exact_expectation(build_onemax_chain(100), onemax_binomial_start(100))
    assert abs(s["mean"] - exact) <= 4 * s["std_error"]


def test_simulate_all_capped_exits_2(capsys):
    code, out, _ = run_json(capsys, "simulate", "--process", "onemax", "--n", 50, "--trials", 10, "--cap", 1,
                            "--start-zeros", 50)
    assert code == 2
    assert out["error"] == "EstimationError"


def test_simulate_linear_needs_weights(capsys):
    assert run(capsys, "simulate", "--process", "linear", "--n", 5)[0] == 1


def test_simulate_output_independent_of_workers(capsys, tmp_path, monkeypatch):
    texts, csvs = [], []
    for w in (1, 4, 16):
        d = tmp_path / f"w{w}"
        d.mkdir()
        monkeypatch.chdir(d)
        code, out, _ = run(capsys, "simulate", "--process", "leadingones", "--n", 30, "--trials", 6000,
                           "--seed", 9, "--workers", w, "--csv", "times.csv")
        assert code == 0
        texts.append(out)
        csvs.append((d / "times.csv").read_bytes())
        assert json.loads((d / "times.csv.manifest.json").read_text())["workers"] == w
    assert texts[0] == texts[1] == texts[2]
    assert csvs[0] == csvs[1] == csvs[2]


# verify

def test_verify_leadingones_expectation(capsys):
    code, out, _ = run_json(capsys, "verify", "--suite", "leadingones-expectation", "--n", 8)
    assert code == 0
    assert out["passed"] is True


def test_verify_exit_3_on_violation(capsys):
    # the stated LeadingOnes constant is contradicted by simulation at these sizes
    code, out, _ = run_json(capsys, "verify", "--suite", "leadingones-tails", "--n", 100, "--a", 90,
                            "--trials", 20000, "--seed", 1)
    assert code == (0 if out["passed"] else 3)
    assert code == 3


def test_verify_unknown_suite(capsys):
    assert run(capsys, "verify", "--suite", "everything")[0] == 1


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "driftkit", "bound", "fitness-levels", "--p", "0.5,0.25"],
                          capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["bound"] == 6.0
    proc = subprocess.run([sys.executable, "-m", "driftkit", "bound"], capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 1


# golden files for structured output

GOLDEN_CASES = {
    "bound_multiplicative.json": ["bound", "multiplicative", "--delta", "0.1", "--xmin", "1", "--x0", "2.718281828"],
    "bound_fitness_levels.json": ["bound", "fitness-levels", "--p", "0.5,0.25"],
    "oracle_onemax_n2.json": ["oracle", "--process", "onemax", "--n", "2", "--start", "2"],
    "bound_tail_corollary.json": ["bound", "tail-corollary", "--h", "2*x", "--xmin", "1", "--xmax", "10",
                                  "--lam", "1", "--x0", "1", "--t", "10"],
}


@pytest.mark.parametrize("name", sorted(GOLDEN_CASES))
def test_golden_outputs(capsys, name):
    code, out, _ = run(capsys, *GOLDEN_CASES[name])
    assert code == 0
    data = json.loads(out)
    data["manifest"].pop("version")
    expected = json.loads((GOLDEN / name).read_text())
    assert data == expected


def test_golden_values_are_independent():
    # the key numbers in the golden files, checked against hand values
    load = lambda name: json.loads((GOLDEN / name).read_text())  # noqa: E731
    assert load("bound_multiplicative.json")["bound"] == pytest.approx(20.0, abs=1e-7)
    assert load("bound_fitness_levels.json")["bound"] == 6.0
    assert load("oracle_onemax_n2.json")["expectation"] == pytest.approx(4.0)
    assert load("bound_tail_corollary.json")["bound"] == pytest.approx(math.exp(-9.5), rel=1e-12)
