import json
import textwrap

import pytest

from qrm import cli, io

STUDY = """
[problem]
case = "elliptic-exp"
[grid]
n1 = 21
n2 = 41
[study]
deltas = [1e-1, 1e-2]
seed = 3
"""

SOLVE = """
[problem]
kind = "elliptic"
[[grid.axes]]
name = "x1"
min = 0.0
max = 0.5
n = 21
[[grid.axes]]
name = "x2"
min = -0.5
max = 0.5
n = 41
[data]
accessible = ["x1=min"]
g0 = "exp(x1) * cos(x2)"
g1 = "-exp(x1) * cos(x2)"
exact = "exp(x1) * cos(x2)"
[solve]
gamma = 1e-8
"""


@pytest.fixture
def write(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "out"))

    def _write(text, name="run.toml"):
        p = tmp_path / name
        p.write_text(textwrap.dedent(text))
        return str(p)

    return _write


def test_study_writes_reports(write, tmp_path):
    assert cli.run(["study", "--config", write(STUDY)]) == 0
    cols, arr = io.read_csv(tmp_path / "out" / "study.csv")
    assert cols[:6] == ["delta", "gamma", "error_h1_subdomain", "error_l2_final", "cg_iters", "seed"]
    assert arr.shape[0] == 2 and list(arr[:, 5]) == [3, 4]
    rep = json.loads((tmp_path / "out" / "study.json").read_text())
    assert rep["config"]["study"]["seed"] == 3 and rep["case"] == "elliptic-exp"
    assert (tmp_path / "out" / "study.csv").read_text().startswith("# ")


def test_study_byte_identical(write, tmp_path):
    cfg = write(STUDY)
    out = tmp_path / "out"
    cli.run(["study", "--config", cfg])
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    cli.run(["study", "--config", cfg])
    assert first == {p.name: p.read_bytes() for p in out.iterdir()}


def test_missing_config(capsys):
    assert cli.run(["study", "--config", "/nonexistent/run.toml"]) == 2
    assert "/nonexistent/run.toml" in capsys.readouterr().err


def test_eps_interval_reported(write, capsys):
    assert cli.run(["study", "--config", write(STUDY + "[weight]\neps = 0.2\n")]) == 2
    err = capsys.readouterr().err
    assert "[weight] eps" in err and "(0, (c - a)/3)" in err


@pytest.mark.parametrize(
    "extra,where",
    [
        ("[solver]\ntol = 0.1\n", "[solver] tol"),
        ("[solver]\npreconditioner = 'amg'\n", "[solver] preconditioner"),
        ("[weight]\nbogus = 1\n", "[weight] bogus"),
    ],
)
def test_field_errors_name_location(write, capsys, extra, where):
    assert cli.run(["study", "--config", write(STUDY + extra)]) == 2
    assert where in capsys.readouterr().err


@pytest.mark.parametrize(
    "text,where",
    [
        ("[problem]\ncase = 'nope'\n[study]\ndeltas=[0.1]\n", "[problem] case"),
        ("[problem]\ncase = 'elliptic-exp'\n[study]\ndeltas=[0.1, 0.2]\n", "[study] deltas"),
        ("[problem]\ncase = 'elliptic-exp'\n[grid]\nnx = 3\n[study]\ndeltas=[0.1]\n", "[grid] nx"),
        ("[problem]\ncase = 'elliptic-exp'\n[grid]\nn1 = 3\n[study]\ndeltas=[0.1]\n", "[grid]"),
        ("[problem\n", "run.toml"),
    ],
)
def test_config_errors(write, capsys, text, where):
    assert cli.run(["study", "--config", write(text)]) == 2
    assert where in capsys.readouterr().err


def test_validation_before_compute(write, monkeypatch):
    def boom(*a, **k):
        raise AssertionError("solver allocated before validation finished")

    monkeypatch.setattr(cli, "solve", boom)
    monkeypatch.setattr(cli, "assemble", boom)
    monkeypatch.setattr("qrm.experiments.study.assemble", boom)
    assert cli.run(["study", "--config", write(STUDY + "[weight]\neps = 0.5\n")]) == 2
    assert cli.run(["solve", "--config", write(SOLVE.replace('"x1=min"', '"x3=min"'))]) == 2


def test_runtime_error_exit_one(write, monkeypatch, capsys):
    def fail(*a, **k):
        raise RuntimeError("diverged")

    monkeypatch.setattr("qrm.experiments.study.convergence_study", fail)
    assert cli.run(["study", "--config", write(STUDY)]) == 1
    assert "diverged" in capsys.readouterr().err


def test_solve_from_expressions(write, tmp_path):
    assert cli.run(["solve", "--config", write(SOLVE)]) == 0
    rep = json.loads((tmp_path / "out" / "solve.json").read_text())
    assert rep["diagnostics"]["error_h1_subdomain"] < 5e-3
    u = io.read_qrm1(tmp_path / "out" / "solution.qrm1")
    assert u.grid.shape == (21, 41)


def test_solve_from_csv(write, tmp_path):
    import numpy as np

    x2 = np.linspace(-0.5, 0.5, 41)
    rows = [(0.0, y, np.cos(y), -np.cos(y)) for y in x2]
    io.write_csv(tmp_path / "traces.csv", ["x1", "x2", "g0", "g1"], rows)
    text = SOLVE.split("[data]")[0] + f"""
[data]
accessible = ["x1=min"]
source = "csv"
csv = "{tmp_path / 'traces.csv'}"
[solve]
gamma = 1e-8
"""
    assert cli.run(["solve", "--config", write(text)]) == 0
    ref = io.read_qrm1(tmp_path / "out" / "solution.qrm1")
    assert cli.run(["solve", "--config", write(SOLVE, "expr.toml")]) == 0
    expr = io.read_qrm1(tmp_path / "out" / "solution.qrm1")
    assert np.abs(ref.values - expr.values).max() < 1e-10


def test_solve_named_case(write, tmp_path):
    text = "[problem]\ncase = 'parabolic-lateral'\n[grid]\nnx = 21\nnt = 31\n[solve]\ndelta = 0.01\ngamma = 1e-4\n"
    assert cli.run(["solve", "--config", write(text)]) == 0
    rep = json.loads((tmp_path / "out" / "solve.json").read_text())
    assert rep["diagnostics"]["converged"]


def test_small_subcommands(write, tmp_path):
    assert cli.run(["instability-demo", "--config", write("[instability]\nmodes = [1, 2]\n")]) == 0
    cols, arr = io.read_csv(tmp_path / "out" / "instability.csv")
    assert cols[0] == "n" and arr.shape == (2, 4)
    text = "[carleman]\nboxes = [[0.1, 0.3, -0.1, 0.15]]\nlambdas = [10.0, 20.0]\nh1 = 2e-4\n"
    assert cli.run(["carleman-check", "--config", write(text)]) == 0
    assert (tmp_path / "out" / "carleman.json").exists()
    text = "[tat]\nnx = 81\nnt = 61\ndelta = 0.0\ngamma = 1e-6\ngamma_sweep = [1e-4]\n"
    assert cli.run(["tat", "--config", write(text)]) == 0
    rep = json.loads((tmp_path / "out" / "tat.json").read_text())
    assert len(rep["sweep"]) == 1


def test_bad_subcommand(write):
    assert cli.run(["frobnicate", "--config", write(STUDY)]) == 2
