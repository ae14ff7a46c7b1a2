import csv
import math

import numpy as np
import pytest

from pymoyodft.config import load_run_config
from pymoyodft.convex_core import DEFAULT_INNER, ExtendedReal
from pymoyodft.exceptions import DomainError
from pymoyodft.lattice_model import LatticeSpec
from pymoyodft.oracles import (
    REPORT_HEADER,
    OracleReport,
    _moreau_battery,
    acceptance_battery,
    dimer_energy_closed_form,
    dimer_F_closed_form,
    dimer_oracle,
    fd_gradient,
    grid_prox,
    has_spectral_gap,
    indicator_oracle,
    quadratic_oracle,
    write_reports_csv,
    zero_oracle,
)


def test_report_compare():
    report = OracleReport.compare("E", 1.0, 1.0 + 1e-9, 1e-8)
    assert report.passed
    assert report.abs_error == pytest.approx(1e-9)
    assert OracleReport.compare("F", math.inf, math.inf, 0.0).passed
    outside = OracleReport.compare("F", math.inf, 3.0, 0.0)
    assert not outside.passed and outside.abs_error == math.inf
    assert OracleReport.compare("x", 0.0, math.nan, 1.0).abs_error == math.inf
    assert OracleReport.compare("x", 0.0, 2.0, 1.0).row()[-1] is False


def test_dimer_closed_forms():
    assert dimer_F_closed_form(0.5, 0.5) == pytest.approx(-0.5)
    assert dimer_F_closed_form(0.5, 0.0) == 0.0
    value = dimer_energy_closed_form(0.5, [1.0, -1.0])
    assert value == pytest.approx(-math.sqrt(5) / 2)
    with pytest.raises(DomainError):
        dimer_F_closed_form(0.5, 1.5)


def test_dimer_oracle_domain():
    f = dimer_oracle(0.5)
    assert f.evaluate(np.array([0.5, 0.6])).infinity == 1
    assert f.evaluate(np.array([-0.1, 1.1])).infinity == 1
    assert f.value(np.array([0.5, 0.5])) == pytest.approx(-0.5)
    assert f.subgradient_hint(np.array([0.0, 1.0])) is None


def test_synthetic_oracles():
    quad = quadratic_oracle([1.0, 2.0], curvature=2.0)
    assert quad.value(np.array([1.0, 2.0])) == 0.0
    np.testing.assert_allclose(quad.prox_hint(0.5, np.array([3.0, 2.0])), [2.0, 2.0])
    with pytest.raises(DomainError):
        quadratic_oracle([0.0], curvature=0.0)

    atom = indicator_oracle([1.0, -1.0])
    assert atom.value(np.array([1.0, -1.0])) == 0.0
    assert atom.evaluate(np.array([1.0, -0.9])).infinity == 1
    assert atom.conjugate_hint(np.array([2.0, 1.0])).value == pytest.approx(1.0)

    zero = zero_oracle(2)
    assert zero.conjugate_hint(np.zeros(2)).value == 0.0
    assert zero.conjugate_hint(np.array([0.0, 1e-3])).infinity == -1


def test_grid_prox_requires_a_segment():
    with pytest.raises(DomainError):
        grid_prox(quadratic_oracle([0.0, 0.0]), 0.1, [1.0, 1.0])
    p = grid_prox(dimer_oracle(0.5), 0.1, [0.5, 0.5])
    np.testing.assert_allclose(p, [0.5, 0.5], atol=1e-6)


def test_fd_gradient():
    g = fd_gradient(lambda x: float(x @ x) + x[0], [1.0, -2.0])
    np.testing.assert_allclose(g, [3.0, -4.0], atol=1e-8)
    with pytest.raises(DomainError):
        fd_gradient(lambda x: ExtendedReal.plus_infinity(), [0.0])


def test_has_spectral_gap(dimer):
    assert has_spectral_gap(dimer, [0.0, 0.0])
    # sites 1 et 3 presque découplés par une barrière au centre
    chain = LatticeSpec(sites=3, electrons=2, hopping=0.5)
    assert not has_spectral_gap(chain, [0.0, 1e6, 0.0])


def test_write_reports_csv(tmp_path):
    reports = [
        OracleReport.compare("E", 1.0, 1.0, 1e-8),
        OracleReport.compare("F", math.inf, math.inf, 0.0),
    ]
    path = tmp_path / "verify.csv"
    messages = write_reports_csv(reports, path)
    assert messages[0][1] == "success"
    with path.open(encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    assert tuple(rows[0]) == REPORT_HEADER
    assert rows[1] == ["E", "1", "1", "0", "1e-08", "true"]
    assert rows[2][1:3] == ["inf", "inf"]


@pytest.mark.slow
def test_acceptance_battery_passes_on_default_run(write_config):
    path = write_config(["verify.samples = 4"])
    run = load_run_config(path)
    reports = acceptance_battery(run, np.random.default_rng(run.seed))
    failed = [r.quantity for r in reports if not r.passed]
    assert failed == []
    assert len({r.quantity for r in reports}) == len(reports)
    assert sum("‖x − prox‖²/ε borné" in r.quantity for r in reports) == 3


@pytest.mark.slow
def test_acceptance_battery_global_tolerance(write_config):
    path = write_config(["verify.samples = 4", "verify.tolerance = 1e-15"])
    run = load_run_config(path)
    reports = acceptance_battery(run, np.random.default_rng(run.seed))
    assert all(r.tolerance == 1e-15 for r in reports)
    assert not all(r.passed for r in reports)


def test_moreau_battery_bounds_the_prox_ratio(rng):
    oracle = quadratic_oracle([0.5, -1.0], curvature=2.0)
    points = rng.normal(0.0, 2.0, (12, 2))
    reports = _moreau_battery(oracle, points, rng, DEFAULT_INNER, fd=False)
    ratio = [r for r in reports if r.quantity.endswith("‖x − prox‖²/ε borné")]
    assert len(ratio) == 1
    assert all(r.passed for r in reports)
