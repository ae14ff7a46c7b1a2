from dataclasses import replace

import numpy as np
import pytest

from pymoyodft.exceptions import (
    DimensionMismatch,
    DomainError,
    StalledLineSearch,
    ZeroDirection,
)
from pymoyodft.lattice_model import LatticeSpec, energy, ground_state
from pymoyodft.lattice_model import noninteracting_solve
from pymoyodft.lieb_dual import regularized_energy
from pymoyodft.scf_solvers import (
    ScfConfig,
    feasible_step,
    initial_quasidensity,
    myks_scf,
    myksoda,
    optimal_step,
    run_scf,
)

V_EXT = np.array([0.5, -0.3, 0.1])


@pytest.mark.parametrize(
    "options",
    [
        {"eps": 0.0},
        {"step_policy": "newton"},
        {"residual_tol": 0.0},
        {"max_outer": 0},
    ],
)
def test_scf_config_validation(options):
    with pytest.raises(DomainError):
        ScfConfig(**options)


def test_optimal_step_projects_vertex_on_line():
    # sommet p* = p − εv_ext = (1, 1), droite ρ + tΔ = (t, 0)
    assert optimal_step([0, 0], [1, 0], [2, 1], 0.5, [2, 0]) == pytest.approx(1.0)
    assert optimal_step([0, 0], [2, 0], [2, 1], 0.5, [2, 0]) == pytest.approx(0.5)
    assert optimal_step([0, 0], [-1, 0], [2, 1], 0.5, [2, 0]) == pytest.approx(-1.0)
    with pytest.raises(ZeroDirection):
        optimal_step([0, 0], [0, 0], [2, 1], 0.5, [2, 0])


def test_feasible_step_halves_until_slope_is_nonpositive():
    t = feasible_step(np.zeros(1), np.ones(1), lambda x: x - 0.3)
    assert t == 0.25
    assert feasible_step(np.zeros(1), np.ones(1), lambda x: x - 2.0) == 1.0
    with pytest.raises(StalledLineSearch) as info:
        feasible_step(np.zeros(1), np.ones(1), lambda x: np.ones(1), max_halvings=5)
    assert info.value.halvings == 5


def test_initial_quasidensity(trimer):
    rho0 = initial_quasidensity(trimer, 0.1, V_EXT)
    free = noninteracting_solve(trimer.with_coupling(0.0), V_EXT)
    np.testing.assert_allclose(rho0 + 0.1 * V_EXT, free.ensemble_density, atol=1e-14)
    with pytest.raises(DimensionMismatch):
        initial_quasidensity(trimer, 0.1, [0.0, 0.0])


def test_myksoda_parabola_optimal(trimer, dual):
    cfg = ScfConfig(eps=0.1)
    result = myksoda(trimer, V_EXT, cfg, dual=dual)
    rows = result.trace.iterations

    assert result.converged
    assert result.residual <= cfg.residual_tol
    assert rows[-1].step is None
    assert all(b.energy <= a.energy + 1e-12 for a, b in zip(rows, rows[1:]))
    for it in rows[:-1]:
        assert it.parabola_gap == pytest.approx(
            it.step_norm_sq / (2 * cfg.eps), abs=1e-8
        )
        assert it.slope <= -cfg.eps * it.residual**2 + 1e-8

    reference = regularized_energy(trimer, cfg.eps, V_EXT)
    assert result.energy_estimate == pytest.approx(reference, abs=1e-6)
    assert result.ground_energy == pytest.approx(energy(trimer, V_EXT), abs=1e-6)
    exact = ground_state(trimer, V_EXT).ensemble_density
    np.testing.assert_allclose(result.physical_density, exact, atol=1e-5)


def test_myksoda_damped_feasible(trimer, dual):
    cfg = ScfConfig(eps=0.1, step_policy="damped_feasible")
    result = myksoda(trimer, V_EXT, replace(cfg, max_outer=50), dual=dual)
    assert all(0.0 < t <= 1.0 for t in result.trace.steps[:-1])
    assert np.all(np.diff(result.trace.energies) <= 1e-12)
    # la convergence du résidu n'est pas garantie pour cette politique
    reference = regularized_energy(trimer, cfg.eps, V_EXT)
    assert result.energy_estimate >= reference - 1e-9
    assert len(result.trace.residuals) == len(result.trace)


def test_myksoda_refuses_full_steps(trimer):
    with pytest.raises(DomainError):
        myksoda(trimer, V_EXT, ScfConfig(step_policy="full"))


def test_noninteracting_model_stops_immediately(trimer, dual):
    free = replace(trimer, interaction_strength=0.0)
    for policy in ("full", "parabola_optimal"):
        result = run_scf(free, V_EXT, ScfConfig(step_policy=policy), dual=dual)
        assert result.converged
        assert len(result.trace) <= 2
        np.testing.assert_allclose(result.effective_potential, V_EXT, atol=2e-9)


def test_constant_potential_gives_reversal_symmetric_density(trimer, dual):
    cfg = ScfConfig(eps=0.1, step_policy="full", max_outer=50)
    result = myks_scf(trimer, np.full(3, 0.3), cfg, dual=dual)
    density = result.physical_density
    np.testing.assert_allclose(density, density[::-1], atol=1e-6)


def test_run_scf_dispatches_on_policy(trimer, dual):
    cfg = ScfConfig(step_policy="full", max_outer=5)
    direct = myks_scf(trimer, V_EXT, cfg, dual=dual)
    dispatched = run_scf(trimer, V_EXT, cfg, dual=dual)
    np.testing.assert_array_equal(direct.trace.energies, dispatched.trace.energies)
    assert all(t == 1.0 for t in dispatched.trace.steps[:-1])
    assert dispatched.trace.steps[-1] is None


def test_outer_budget_exhaustion_is_not_an_error(trimer, dual):
    result = myksoda(trimer, V_EXT, ScfConfig(max_outer=1), dual=dual)
    assert not result.converged
    assert len(result.trace) == 2
    assert result.residual > 1e-6


def test_restart_from_given_quasidensity(trimer, dual):
    cfg = ScfConfig(eps=0.1)
    first = myksoda(trimer, V_EXT, replace(cfg, max_outer=3), dual=dual)
    resumed = myksoda(trimer, V_EXT, cfg, rho0=first.quasidensity, dual=dual)
    assert resumed.converged
    assert resumed.trace[0].energy == pytest.approx(first.energy_estimate, abs=1e-10)


@pytest.mark.parametrize(
    "sites, electrons",
    [(2, 1), (3, 2), pytest.param(4, 2, marks=pytest.mark.slow)],
)
@pytest.mark.parametrize("eps", [0.1, 0.5])
def test_myksoda_descends_to_regularized_energy(dual, sites, electrons, eps):
    spec = LatticeSpec(sites, electrons, hopping=0.5, interaction_strength=1.0)
    v_ext = np.resize([1.0, -1.0], sites)
    result = myksoda(spec, v_ext, ScfConfig(eps=eps), dual=dual)
    energies = result.trace.energies

    assert result.converged
    assert np.all(np.diff(energies) <= 1e-12)
    reference = regularized_energy(spec, eps, v_ext)
    assert result.energy_estimate == pytest.approx(reference, abs=1e-6)


@pytest.mark.slow
def test_myksoda_half_filled_four_sites(dual):
    spec = LatticeSpec(sites=4, electrons=4, hopping=0.5, interaction_strength=1.0)
    v_ext = np.array([0.4, -0.2, 0.3, -0.5])
    result = myksoda(spec, v_ext, ScfConfig(eps=0.1), dual=dual)
    assert result.converged
    assert result.ground_energy == pytest.approx(energy(spec, v_ext), abs=1e-6)
