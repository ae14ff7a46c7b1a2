import csv

import pytest
from click.testing import CliRunner

from pymoyodft.cli import (
    EPS_SWEEP_HEADER,
    EXIT_ERROR,
    EXIT_NOT_CONVERGED,
    EXIT_OK,
    LAMBDA_SWEEP_HEADER,
    TRACE_HEADER,
    main,
)

TRIMER = [
    "model.sites = 3",
    "model.electrons = 2",
    "run.v_ext = [0.5, -0.3, 0.1]",
]


@pytest.fixture
def invoke():
    runner = CliRunner()

    def _invoke(*args):
        return runner.invoke(main, ["--no-verbose", *map(str, args)])

    return _invoke


def _rows(path):
    with path.open(encoding="utf-8", newline="") as f:
        return list(csv.reader(f))


def test_solve_default_dimer(invoke, tmp_path):
    out = tmp_path / "trace.csv"
    result = invoke("solve", "--out", out)
    assert result.exit_code == EXIT_OK, result.output
    rows = _rows(out)
    assert tuple(rows[0]) == TRACE_HEADER
    summary = rows.index(["E1", "rho_eps_1", "rho_eps_2"])
    assert len(rows) == summary + 2
    density = [float(x) for x in rows[summary + 1][1:]]
    assert sum(density) == pytest.approx(1.0)


def test_solve_trimer_converges(invoke, write_config, tmp_path):
    out = tmp_path / "trace.csv"
    result = invoke("solve", "--config", write_config(TRIMER), "--out", out)
    assert result.exit_code == EXIT_OK, result.output
    rows = _rows(out)
    trace = rows[1 : rows.index(["E1", "rho_eps_1", "rho_eps_2", "rho_eps_3"])]
    energies = [float(r[1]) for r in trace]
    assert all(b <= a + 1e-12 for a, b in zip(energies, energies[1:]))
    assert trace[-1][2] == ""


def test_solve_reports_missing_convergence(invoke, write_config, tmp_path):
    path = write_config(TRIMER + ["solver.max_outer = 1"])
    result = invoke("solve", "--config", path, "--out", tmp_path / "trace.csv")
    assert result.exit_code == EXIT_NOT_CONVERGED


def test_solve_is_deterministic(invoke, write_config, tmp_path):
    path = write_config(TRIMER)
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert invoke("solve", "--config", path, "--out", first).exit_code == EXIT_OK
    assert invoke("solve", "--config", path, "--out", second).exit_code == EXIT_OK
    assert first.read_bytes() == second.read_bytes()


def test_output_path_from_config(invoke, write_config, tmp_path):
    target = tmp_path / "sorties" / "trace.csv"
    path = write_config([f'run.output_path = "{target.as_posix()}"'])
    assert invoke("solve", "--config", path).exit_code == EXIT_OK
    assert tuple(_rows(target)[0]) == TRACE_HEADER


@pytest.mark.parametrize(
    "lines, key",
    [
        (["model.sitez = 3"], "model.sitez"),
        (["solver.eps = -0.1"], "solver.eps"),
        (["run.v_ext = [1.0]"], "run.v_ext"),
    ],
)
def test_invalid_config_exits_with_error(invoke, write_config, lines, key):
    result = invoke("solve", "--config", write_config(lines))
    assert result.exit_code == EXIT_ERROR
    assert key in result.output


def test_prox(invoke, tmp_path):
    out = tmp_path / "prox.csv"
    result = invoke("prox", "--rho", "0.8,0.25", "--out", out)
    assert result.exit_code == EXIT_OK, result.output
    header, row = _rows(out)
    assert header == [
        "rho_eps_1",
        "rho_eps_2",
        "v_eps_1",
        "v_eps_2",
        "envelope",
        "residual",
    ]
    values = [float(x) for x in row]
    assert values[0] + values[1] == pytest.approx(1.0, abs=1e-9)
    # ρ_ε = ρ + εv*
    assert values[0] == pytest.approx(0.8 + 0.1 * values[2], abs=1e-15)


@pytest.mark.parametrize("rho", [None, "0.5", "0.5,x"])
def test_prox_rejects_missing_or_bad_density(invoke, rho):
    args = ["prox"] if rho is None else ["prox", "--rho", rho]
    result = invoke(*args)
    assert result.exit_code == EXIT_ERROR
    assert ("run.rho" if rho is None else "--rho") in result.output


def test_sweep_eps(invoke, tmp_path):
    out = tmp_path / "sweep.csv"
    args = ["sweep", "--rho", "0.8,0.25", "--eps-list", "0.4,0.2,0.1", "--out", out]
    result = invoke(*args)
    assert result.exit_code == EXIT_OK, result.output
    rows = _rows(out)
    assert tuple(rows[0]) == EPS_SWEEP_HEADER
    assert [float(r[0]) for r in rows[1:]] == [0.4, 0.2, 0.1]
    assert rows[1][-1] == ""
    assert [r[-1] for r in rows[2:]] == ["true", "true"]


def test_sweep_lambda(invoke, write_config, tmp_path):
    out = tmp_path / "sweep.csv"
    path = write_config(TRIMER)
    args = ["sweep", "--config", path, "--lambda-list", "0,0.5,1", "--out", out]
    result = invoke(*args)
    assert result.exit_code == EXIT_OK, result.output
    rows = _rows(out)
    assert tuple(rows[0]) == LAMBDA_SWEEP_HEADER
    assert len(rows) == 4
    assert rows[2][-1] == "true"
    assert rows[1][-1] == rows[3][-1] == ""


@pytest.mark.parametrize(
    "args",
    [
        ["sweep", "--rho", "0.5,0.5"],
        ["sweep", "--eps-list", "0.1", "--lambda-list", "0.5"],
        ["sweep", "--rho", "0.5,0.5", "--eps-list", ","],
    ],
)
def test_sweep_rejects_bad_lists(invoke, args):
    result = invoke(*args)
    assert result.exit_code == EXIT_ERROR
    assert "list" in result.output


@pytest.mark.slow
def test_verify_passes_and_writes_report(invoke, write_config, tmp_path):
    out = tmp_path / "verify.csv"
    path = write_config(["verify.samples = 4", "verify.moreau_probes = 40"])
    result = invoke("verify", "--config", path, "--out", out)
    assert result.exit_code == EXIT_OK, result.output
    rows = _rows(out)
    assert rows[0][0] == "quantity"
    assert all(r[-1] == "true" for r in rows[1:])


@pytest.mark.slow
def test_verify_fails_with_tampered_tolerance(invoke, write_config):
    path = write_config(["verify.samples = 4", "verify.tolerance = 1e-15"])
    result = invoke("verify", "--config", path)
    assert result.exit_code != EXIT_OK


def test_custom_basis_cap_applies_before_the_computation(
    invoke, write_config, custom_dir
):
    # L = 3, N = 2 : 15 états
    (custom_dir / "config.toml").write_text(
        "[limits]\nmax_basis = 10\n", encoding="utf-8"
    )
    path = write_config(TRIMER)
    assert invoke("solve", "--config", path).exit_code == EXIT_ERROR
    assert invoke("prox", "--config", path, "--rho", "0.6,0.8,0.6").exit_code == (
        EXIT_ERROR
    )
