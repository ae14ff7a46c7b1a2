"""Références indépendantes : formes closes, recherche sur grille, différences finies.

Le module fournit aussi la batterie de contrôles lancée par `pymoyodft verify`
(`acceptance_battery`) ; chaque contrôle produit un `OracleReport`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from .convex_core import (
    DEFAULT_INNER,
    ExtendedReal,
    FunctionOracle,
    InnerSolverConfig,
    SegmentDomain,
    envelope_ladder,
    moreau_envelope,
    verify_lossless,
)
from .exceptions import DomainError
from .file_helpers import write_csv
from .lattice_model import (
    LatticeSpec,
    adiabatic_curve,
    energy,
    ground_state,
    noninteracting_gap,
    superdiff_E,
)
from .lieb_dual import lieb_F, regularize, regularized_energy
from .logger import NoOpMessageHandler
from .scf_solvers import ScfConfig, myks_scf, myksoda

__all__ = [
    "OracleReport",
    "REPORT_HEADER",
    "dimer_F_closed_form",
    "dimer_energy_closed_form",
    "dimer_oracle",
    "quadratic_oracle",
    "indicator_oracle",
    "zero_oracle",
    "grid_prox",
    "fd_gradient",
    "has_spectral_gap",
    "acceptance_battery",
    "write_reports_csv",
]

REPORT_HEADER = ("quantity", "reference", "computed", "abs_error", "tolerance", "pass")


@dataclass(frozen=True)
class OracleReport:
    quantity: str
    reference: float
    computed: float
    abs_error: float
    tolerance: float
    passed: bool

    @classmethod
    def compare(
        cls, quantity: str, reference: float, computed: float, tolerance: float
    ) -> "OracleReport":
        """Rapport de comparaison ; deux infinis de même signe sont égaux."""
        if math.isinf(reference) and reference == computed:
            error = 0.0
        else:
            error = abs(float(reference) - float(computed))
            if math.isnan(error):
                error = math.inf
        return cls(
            quantity,
            float(reference),
            float(computed),
            error,
            float(tolerance),
            error <= tolerance,
        )

    def row(self):
        return (
            self.quantity,
            self.reference,
            self.computed,
            self.abs_error,
            self.tolerance,
            self.passed,
        )


# =============================================================================
# FORMES CLOSES ET ORACLES SYNTHÉTIQUES
# =============================================================================
def dimer_F_closed_form(t: float, rho1: float) -> float:
    """F(ρ₁, 1 − ρ₁) = −2t√(ρ₁(1 − ρ₁)) pour un électron sur deux sites."""
    if not 0.0 <= rho1 <= 1.0:
        raise DomainError(f"ρ₁ = {rho1} hors de [0, 1]")
    return -2.0 * t * math.sqrt(rho1 * (1.0 - rho1))


def dimer_energy_closed_form(t: float, v: Sequence[float]) -> float:
    """Énergie fondamentale d'un électron sur deux sites : v̄ − √(δ² + t²)."""
    v1, v2 = float(v[0]), float(v[1])
    return 0.5 * (v1 + v2) - math.sqrt((0.5 * (v1 - v2)) ** 2 + t * t)


def dimer_oracle(t: float = 0.5) -> FunctionOracle:
    """Fonctionnelle du dimère sur R², +∞ hors du segment {ρ >= 0, ρ₁ + ρ₂ = 1}."""

    def evaluate(x: np.ndarray) -> ExtendedReal:
        if abs(x[0] + x[1] - 1.0) > 1e-12 or x[0] < 0.0 or x[1] < 0.0:
            return ExtendedReal.plus_infinity()
        return ExtendedReal.finite(-2.0 * t * math.sqrt(max(x[0] * x[1], 0.0)))

    def subgradient(x: np.ndarray) -> Optional[np.ndarray]:
        if x[0] <= 0.0 or x[1] <= 0.0:
            return None
        return np.array([-t * math.sqrt(x[1] / x[0]), -t * math.sqrt(x[0] / x[1])])

    return FunctionOracle(
        evaluate=evaluate,
        subgradient_hint=subgradient,
        domain_radius=1.0,
        segment=SegmentDomain(np.array([0.0, 1.0]), np.array([1.0, -1.0]), 0.0, 1.0),
        name="dimère",
    )


def quadratic_oracle(center: Sequence[float], curvature: float = 1.0) -> FunctionOracle:
    """f(x) = (c/2)‖x − a‖², avec prox et conjuguée en forme close."""
    a = np.asarray(center, dtype=float)
    c = float(curvature)
    if c <= 0:
        raise DomainError("curvature doit être > 0")

    return FunctionOracle(
        evaluate=lambda x: ExtendedReal.finite(0.5 * c * float((x - a) @ (x - a))),
        subgradient_hint=lambda x: c * (x - a),
        prox_hint=lambda eps, x: (x + eps * c * a) / (1.0 + eps * c),
        conjugate_hint=lambda y: ExtendedReal.finite(float(y @ a - y @ y / (2 * c))),
        name="quadratique",
    )


def indicator_oracle(atom: Sequence[float]) -> FunctionOracle:
    """Indicatrice du point {a} : 0 en a, +∞ ailleurs."""
    a = np.asarray(atom, dtype=float)

    def evaluate(x: np.ndarray) -> ExtendedReal:
        if np.allclose(x, a, rtol=0.0, atol=1e-12):
            return ExtendedReal.finite(0.0)
        return ExtendedReal.plus_infinity()

    direction = np.zeros_like(a)
    direction[0] = 1.0
    return FunctionOracle(
        evaluate=evaluate,
        subgradient_hint=lambda x: np.zeros_like(a) if evaluate(x).is_finite else None,
        domain_radius=float(np.linalg.norm(a)),
        segment=SegmentDomain(a, direction, 0.0, 0.0),
        prox_hint=lambda eps, x: a.copy(),
        conjugate_hint=lambda y: ExtendedReal.finite(float(y @ a)),
        name="indicatrice",
    )


def zero_oracle(dim: int) -> FunctionOracle:
    def conjugate(y: np.ndarray) -> ExtendedReal:
        if np.any(y):
            return ExtendedReal.minus_infinity()
        return ExtendedReal.finite(0.0)

    return FunctionOracle(
        evaluate=lambda x: ExtendedReal.finite(0.0),
        subgradient_hint=lambda x: np.zeros(dim),
        prox_hint=lambda eps, x: np.asarray(x, float).copy(),
        conjugate_hint=conjugate,
        name="nulle",
    )


# =============================================================================
# RÉFÉRENCES NUMÉRIQUES
# =============================================================================
def grid_prox(
    f: FunctionOracle,
    eps: float,
    x: Sequence[float],
    grid_points: int = 201,
    segment: Optional[SegmentDomain] = None,
    refinements: int = 4,
) -> np.ndarray:
    """Argmin de f(z) + ‖x − z‖²/(2ε) sur une grille du segment du domaine.

    Grille uniforme, puis `refinements` passes à pas dix fois plus fin autour
    de la meilleure maille.
    """
    seg = segment or f.segment
    if seg is None:
        raise DomainError(f"{f.name} : grid_prox exige un domaine paramétré en 1-D")
    x = np.asarray(x, dtype=float)

    def objective(s: float) -> float:
        z = seg.point(s)
        return f.value(z) + float((x - z) @ (x - z)) / (2.0 * eps)

    grid = np.linspace(seg.lower, seg.upper, grid_points)
    s = grid[int(np.argmin([objective(u) for u in grid]))]
    if grid_points < 2 or seg.upper <= seg.lower:
        return seg.point(s)
    h = grid[1] - grid[0]
    for _ in range(refinements):
        lo, hi = max(seg.lower, s - h), min(seg.upper, s + h)
        fine = np.linspace(lo, hi, int(round((hi - lo) / (h / 10))) + 1)
        s = fine[int(np.argmin([objective(u) for u in fine]))]
        h /= 10
    return seg.point(s)


def fd_gradient(
    field: Callable[[np.ndarray], float], x: Sequence[float], step: float = 1e-4
) -> np.ndarray:
    """Gradient par différences centrées, coordonnée par coordonnée.

    Raises
    ------
    DomainError
        Si le champ n'est pas fini en un des points sondés.
    """
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = step
        plus, minus = field(x + e), field(x - e)
        if isinstance(plus, ExtendedReal):
            plus, minus = plus.as_float(), minus.as_float()
        if not (math.isfinite(plus) and math.isfinite(minus)):
            raise DomainError(f"champ non fini au voisinage de {x.tolist()}")
        grad[i] = (plus - minus) / (2.0 * step)
    return grad


def has_spectral_gap(
    spec: LatticeSpec, v: Sequence[float], threshold: float = 1e-6
) -> bool:
    """Pré-test des contrôles par différences finies (spectre sans interaction)."""
    return noninteracting_gap(spec.with_coupling(0.0), v) > threshold


# =============================================================================
# BATTERIE DE CONTRÔLES
# =============================================================================
_report = OracleReport.compare

EPS_LADDER = (0.4, 0.2, 0.1, 0.05)


def _moreau_battery(
    f: FunctionOracle,
    probes: np.ndarray,
    rng: np.random.Generator,
    cfg: InnerSolverConfig,
    fd: bool,
    eps: float = 0.1,
    domain_points: Optional[np.ndarray] = None,
) -> List[OracleReport]:
    """Propriétés de Moreau de `f` sur les points `probes`.

    L'échelle en ε est parcourue sur `domain_points` (par défaut un quart des
    points) ; la borne du rapport ne porte que sur les points où f est finie.
    """
    results = [moreau_envelope(f, eps, x, cfg) for x in probes]
    firm = lipschitz = under = 0.0
    for _ in range(len(probes)):
        i, j = rng.choice(len(probes), size=2, replace=False)
        dx = probes[i] - probes[j]
        dp = results[i].prox_point - results[j].prox_point
        dg = results[i].yosida_gradient - results[j].yosida_gradient
        # ⟨Δp, Δx⟩ >= ‖Δp‖² et ‖Δ∇ᵋf‖ <= ‖Δx‖/ε
        firm = max(firm, float(dp @ dp - dp @ dx))
        lipschitz = max(lipschitz, np.linalg.norm(dg) - np.linalg.norm(dx) / eps)
    for x, r in zip(probes, results):
        fx = f.value(x)
        if math.isfinite(fx):
            under = max(under, r.envelope_value - fx)
    if domain_points is None:
        domain_points = probes[: max(1, len(probes) // 4)]
    ladder_failures = 0
    ratio_excess = 0.0
    for x in domain_points:
        ladder = envelope_ladder(f, x, EPS_LADDER, cfg)
        ladder_failures += not ladder.is_monotone
        fx = ladder.target.as_float()
        if math.isfinite(fx):
            # ‖x − prox‖²/ε <= 2(f[x] − ᵋf[x])
            bound = 2.0 * (fx - ladder.values)
            ratio_excess = max(ratio_excess, float(np.max(ladder.prox_ratios - bound)))

    name = f.name
    reports = [
        _report(f"{name}: non-expansivité ferme", 0.0, firm, 1e-8),
        _report(f"{name}: gradient 1/ε-lipschitzien", 0.0, float(lipschitz), 1e-8),
        _report(f"{name}: enveloppe <= f", 0.0, under, 1e-10),
        _report(f"{name}: monotonie en ε", 0.0, float(ladder_failures), 0.0),
        _report(f"{name}: ‖x − prox‖²/ε borné", 0.0, ratio_excess, 1e-6),
    ]
    if fd:
        worst = 0.0
        for x, r in zip(probes, results):
            g = fd_gradient(lambda z: moreau_envelope(f, eps, z, cfg).envelope_value, x)
            scale = max(1.0, float(np.linalg.norm(r.yosida_gradient)))
            worst = max(worst, float(np.linalg.norm(g - r.yosida_gradient)) / scale)
        reports.append(_report(f"{name}: gradient DF vs Yosida", 0.0, worst, 1e-5))
    if f.segment is not None and f.prox_hint is None:
        worst = max(
            float(np.linalg.norm(grid_prox(f, eps, x) - r.prox_point))
            for x, r in zip(probes, results)
        )
        reports.append(_report(f"{name}: prox vs grille", 0.0, worst, 1e-4))
    return reports


def _dimer_reports(
    rng: np.random.Generator,
    samples: int,
    moreau_probes: int,
    cfg: InnerSolverConfig,
    dual,
) -> List[OracleReport]:
    t, eps = 0.5, 0.1
    dimer = LatticeSpec(sites=2, electrons=1, hopping=t, lambda_=0.0)
    reports = [
        _report("dimère: E[(1,-1)]", -math.sqrt(5) / 2, energy(dimer, [1, -1]), 1e-10),
        _report("dimère: E[0]", -0.5, energy(dimer, [0.0, 0.0]), 1e-10),
        _report(
            "dimère: ᵋE[(1,-1)]",
            -math.sqrt(5) / 2 - eps,
            regularized_energy(dimer, eps, [1.0, -1.0]),
            1e-12,
        ),
    ]
    worst = max(
        abs(lieb_F(dimer, [r1, 1.0 - r1], dual).value - dimer_F_closed_form(t, r1))
        for r1 in np.linspace(0.1, 0.9, 9)
    )
    outside = lieb_F(dimer, [1.2, -0.2], dual).as_float()
    reports += [
        _report("dimère: F vs forme close", 0.0, worst, 1e-6),
        _report("dimère: F hors domaine", math.inf, outside, 0.0),
    ]

    oracle = dimer_oracle(t)
    on_line = rng.uniform(0.2, 0.8, size=moreau_probes)
    line_points = np.column_stack([on_line, 1.0 - on_line])
    probes = line_points + rng.normal(0.0, 0.05, (moreau_probes, 2))
    reports += _moreau_battery(
        oracle,
        probes,
        rng,
        cfg,
        fd=True,
        eps=eps,
        domain_points=line_points[: max(1, moreau_probes // 4)],
    )

    cross = 0.0
    for x in probes[: max(1, samples // 4)]:
        dual_value = regularize(dimer, eps, x, dual).envelope_value
        primal_value = moreau_envelope(oracle, eps, x, cfg).envelope_value
        cross = max(cross, abs(dual_value - primal_value))
    lossless = verify_lossless(
        oracle, eps, [[u, 1.0 - u] for u in (0.2, 0.35, 0.5, 0.65, 0.8)], cfg
    )
    reports += [
        _report("dimère: ᵋF dual vs primal", 0.0, cross, 1e-5),
        _report("dimère: reconstruction sans perte", 0.0, lossless.max_deviation, 1e-5),
    ]
    return reports


def _synthetic_reports(rng, moreau_probes, cfg) -> List[OracleReport]:
    dim = 3
    quad = quadratic_oracle(rng.normal(size=dim), curvature=2.0)
    atom = indicator_oracle(rng.normal(size=dim))
    probes = rng.normal(0.0, 2.0, (moreau_probes, dim))
    return _moreau_battery(quad, probes, rng, cfg, fd=True) + _moreau_battery(
        atom, probes, rng, cfg, fd=False
    )


def _duality_reports(run, rng: np.random.Generator, samples: int):
    spec, dual, eps = run.model, run.dual, run.solver.eps
    L, N = spec.sites, spec.electrons
    duality = onto = round_trip = 0.0
    for _ in range(samples):
        rho = rng.dirichlet(np.ones(L)) * N + rng.normal(0.0, 0.1, L)
        rp = regularize(spec, eps, rho, dual)
        dens, v_star = rp.proximal_density, rp.maximizer
        F = lieb_F(spec, dens, dual).as_float()
        duality = max(duality, abs(energy(spec, v_star) - F - float(v_star @ dens)))
        onto = max(onto, -dens.min(), dens.max() - 2.0, abs(dens.sum() - N))

        v = rng.normal(0.0, 1.0, L)
        gs = ground_state(spec, v)
        # Aller-retour défini seulement si la densité fondamentale est unique
        if np.ptp(np.asarray(gs.ground_densities), axis=0).max() < 1e-12:
            back = regularize(spec, eps, gs.ensemble_density - eps * v, dual, v0=v)
            error = np.max(np.abs(back.proximal_density - gs.ensemble_density))
            round_trip = max(round_trip, float(error))
    return [
        _report("modèle: cohérence de Fenchel", 0.0, duality, 1e-6),
        _report("modèle: ρ_ε dans le simplexe", 0.0, max(onto, 0.0), 1e-8),
        _report("modèle: aller-retour ρ_gs − εv", 0.0, round_trip, 1e-6),
    ]


def _concavity_reports(run, rng: np.random.Generator, samples: int):
    spec, L = run.model, run.model.sites
    concave = monotone = 0.0
    for _ in range(samples):
        v1, v2 = rng.normal(0.0, 1.0, (2, L))
        chord = 0.5 * (energy(spec, v1) + energy(spec, v2))
        concave = max(concave, chord - energy(spec, 0.5 * (v1 + v2)))
        r1, r2 = superdiff_E(spec, v1)[-1], superdiff_E(spec, v2)[-1]
        monotone = max(monotone, float((r1 - r2) @ (v1 - v2)))
    curve = adiabatic_curve(spec, run.v_ext, np.linspace(0.0, 1.0, 5))
    worst_slack = -float(curve.midpoint_slacks.min(initial=0.0))
    return [
        _report("modèle: E concave en v", 0.0, concave, 1e-10),
        _report("modèle: sur-différentiel monotone", 0.0, max(monotone, 0.0), 1e-10),
        _report("modèle: E concave en λ", 0.0, max(worst_slack, 0.0), 1e-10),
    ]


def _scf_reports(run) -> List[OracleReport]:
    spec, dual, eps = run.model, run.dual, run.solver.eps
    v_ext = np.asarray(run.v_ext, float)
    result = myksoda(
        spec, v_ext, replace(run.solver, step_policy="parabola_optimal"), dual=dual
    )
    reference = regularized_energy(spec.with_coupling(1.0), eps, v_ext)
    rows = result.trace.iterations
    descent = max((b.energy - a.energy for a, b in zip(rows, rows[1:])), default=0.0)
    gap = max(
        (
            abs(it.parabola_gap - it.step_norm_sq / (2 * eps))
            for it in rows
            if it.parabola_gap is not None
        ),
        default=0.0,
    )
    slope = max(
        (it.slope + eps * it.residual**2 for it in rows if it.slope is not None),
        default=0.0,
    )

    free = replace(spec, interaction_strength=0.0)
    plain = myks_scf(free, v_ext, ScfConfig(eps=eps, step_policy="full"), dual=dual)
    damped = myksoda(free, v_ext, ScfConfig(eps=eps), dual=dual)
    extra_rows = max(len(plain.trace), len(damped.trace)) - 2
    hxc = max(np.linalg.norm(r.effective_potential - v_ext) for r in (plain, damped))

    tol = run.solver.residual_tol
    return [
        _report("SCF: énergie vs ᵋE¹[v_ext]", reference, result.energy_estimate, 1e-6),
        _report("SCF: résidu final", 0.0, result.residual, tol),
        _report("SCF: décroissance des eᵢ", 0.0, max(descent, 0.0), 1e-12),
        _report("SCF: écart parabolique", 0.0, gap, 1e-8),
        _report("SCF: borne de pente", 0.0, max(slope, 0.0), 1e-8),
        _report("sans interaction: lignes au-delà de 2", 0.0, max(extra_rows, 0), 0.0),
        _report("sans interaction: ‖v_Hxc‖", 0.0, float(hxc), 2.0 * dual.tolerance),
    ]


def acceptance_battery(
    run, rng: np.random.Generator, msg=NoOpMessageHandler()
) -> List[OracleReport]:
    """Tous les contrôles oracle / production, dans un ordre fixe.

    Paramètres
    ----------
    run : RunConfig
        Modèle, solveurs, nombres de tirages (`verify_samples`,
        `verify_moreau_probes`) et tolérance globale éventuelle (`verify_tolerance`).
    rng : numpy.random.Generator
        Unique source d'aléa, issue de la graine de la configuration.
    msg : MessageHandler, optional
        Reçoit un titre par groupe de contrôles.

    Retourne
    --------
    List[OracleReport]
        Avec `verify_tolerance`, chaque rapport est réévalué à cette tolérance.
    """
    cfg = DEFAULT_INNER
    samples = run.verify_samples
    msg.titre3("Dimère : formes closes et enveloppe")
    probes = run.verify_moreau_probes
    reports = _dimer_reports(rng, samples, probes, cfg, run.dual)
    msg.titre3("Oracles synthétiques")
    reports += _synthetic_reports(rng, probes, cfg)
    msg.titre3("Modèle configuré : dualité et concavité")
    reports += _duality_reports(run, rng, samples)
    reports += _concavity_reports(run, rng, samples)
    msg.titre3("Modèle configuré : itérations SCF")
    reports += _scf_reports(run)
    if run.verify_tolerance is not None:
        tol = run.verify_tolerance
        reports = [
            replace(r, tolerance=tol, passed=r.abs_error <= tol) for r in reports
        ]
    return reports


def write_reports_csv(
    reports: Sequence[OracleReport], path: Union[str, Path]
) -> List[List[str]]:
    return write_csv(path, REPORT_HEADER, [r.row() for r in reports])
