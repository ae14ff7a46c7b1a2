"""Itérations de Kohn–Sham régularisées.

Le problème résolu est min_ρ G(ρ) = ᵋF¹[ρ] + ⟨v_ext, ρ⟩ sur les
quasi-densités. À chaque itéré :

- v*¹, v*⁰ : maximiseurs duaux aux couplages 1 et 0 (lieb_dual) ;
- ∇G(ρ) = v_ext − v*¹, dont la norme est le résidu ;
- v_eff = v_ext + v*⁰ − v*¹ ;
- ρ' = ρ̃(v_eff) − εv_eff, avec ρ̃ la densité d'ensemble sans interaction.

`myks_scf` prend ρ' comme itéré suivant ; `myksoda` amortit le pas le long
de Δ = ρ' − ρ, soit par recherche dyadique (`damped_feasible`), soit au
sommet de la parabole de régularisation (`parabola_optimal`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Sequence

import numpy as np

from .exceptions import DimensionMismatch, DomainError, StalledLineSearch, ZeroDirection
from .lattice_model import LatticeSpec, noninteracting_solve
from .lieb_dual import DEFAULT_DUAL, DualAscentConfig, HxcSplit, hxc_split, regularize
from .logger import NoOpMessageHandler

__all__ = [
    "STEP_POLICIES",
    "ScfConfig",
    "ScfIteration",
    "ScfTrace",
    "ScfResult",
    "initial_quasidensity",
    "myks_scf",
    "myksoda",
    "optimal_step",
    "feasible_step",
    "run_scf",
]

STEP_POLICIES = ("full", "damped_feasible", "parabola_optimal")

MAX_HALVINGS = 60


@dataclass(frozen=True)
class ScfConfig:
    eps: float = 0.1
    step_policy: str = "parabola_optimal"
    residual_tol: float = 1e-6
    max_outer: int = 500

    def __post_init__(self):
        if not self.eps > 0:
            raise DomainError(f"eps = {self.eps} : doit être > 0")
        if self.step_policy not in STEP_POLICIES:
            raise DomainError(f"step_policy inconnue : {self.step_policy}")
        if not self.residual_tol > 0:
            raise DomainError("residual_tol doit être > 0")
        if self.max_outer < 1:
            raise DomainError("max_outer doit être >= 1")


@dataclass(frozen=True, eq=False)
class ScfIteration:
    """Une ligne de trace. `step` vaut None sur la ligne finale."""

    index: int
    quasidensity: np.ndarray
    effective_potential: np.ndarray
    energy: float
    step: Optional[float]
    residual: float
    parabola_min: Optional[float] = None
    parabola_gap: Optional[float] = None
    slope: Optional[float] = None
    step_norm_sq: Optional[float] = None


@dataclass(eq=False)
class ScfTrace:
    iterations: List[ScfIteration] = field(default_factory=list)

    def append(self, it: ScfIteration):
        self.iterations.append(it)

    def __len__(self) -> int:
        return len(self.iterations)

    def __iter__(self) -> Iterator[ScfIteration]:
        return iter(self.iterations)

    def __getitem__(self, k: int) -> ScfIteration:
        return self.iterations[k]

    @property
    def energies(self) -> np.ndarray:
        return np.array([it.energy for it in self.iterations])

    @property
    def residuals(self) -> np.ndarray:
        return np.array([it.residual for it in self.iterations])

    @property
    def steps(self) -> List[Optional[float]]:
        return [it.step for it in self.iterations]


@dataclass(frozen=True, eq=False)
class ScfResult:
    physical_density: np.ndarray
    ground_energy: float
    converged: bool
    trace: ScfTrace
    quasidensity: np.ndarray
    residual: float
    effective_potential: np.ndarray

    @property
    def energy_estimate(self) -> float:
        return self.trace[-1].energy


# =============================================================================
# ÉVALUATION D'UN ITÉRÉ
# =============================================================================
@dataclass(frozen=True, eq=False)
class _ScfPoint:
    rho: np.ndarray
    split: HxcSplit
    energy: float
    gradient: np.ndarray
    residual: float
    v_eff: np.ndarray
    prox_point: np.ndarray

    @property
    def warm(self):
        return self.split.interacting.maximizer, self.split.noninteracting.maximizer


def _evaluate(
    spec: LatticeSpec,
    eps: float,
    v_ext: np.ndarray,
    rho: np.ndarray,
    dual: DualAscentConfig,
    warm,
    msg,
) -> _ScfPoint:
    split = hxc_split(spec, eps, rho, dual, warm=warm, msg=msg)
    v1 = split.interacting.maximizer
    gradient = v_ext - v1
    return _ScfPoint(
        rho=rho,
        split=split,
        energy=split.interacting.envelope_value + float(v_ext @ rho),
        gradient=gradient,
        residual=float(np.linalg.norm(gradient)),
        v_eff=v_ext + split.gradient,
        prox_point=rho + eps * v1,
    )


def _trial_density(spec: LatticeSpec, eps: float, v_eff: np.ndarray) -> np.ndarray:
    """ρ' = ρ̃(v_eff) − εv_eff, élément de ∂̄ᵋE⁰[v_eff]."""
    gs = noninteracting_solve(spec.with_coupling(0.0), v_eff)
    return gs.ensemble_density - eps * v_eff


def _as_external(spec: LatticeSpec, v_ext: Sequence[float]) -> np.ndarray:
    v_ext = np.asarray(v_ext, dtype=float)
    if v_ext.shape != (spec.sites,):
        raise DimensionMismatch(
            f"v_ext de forme {v_ext.shape}, {spec.sites} composantes attendues"
        )
    return v_ext


def initial_quasidensity(
    spec: LatticeSpec, eps: float, v_ext: Sequence[float]
) -> np.ndarray:
    """Point de départ ρ₀ = ρ̃(v_ext) − εv_ext (densité sans interaction)."""
    v_ext = _as_external(spec, v_ext)
    return _trial_density(spec, eps, v_ext)


def _result(point: _ScfPoint, eps: float, v_ext, converged: bool, trace) -> ScfResult:
    return ScfResult(
        physical_density=point.rho + eps * v_ext,
        ground_energy=point.energy + 0.5 * eps * float(v_ext @ v_ext),
        converged=converged,
        trace=trace,
        quasidensity=point.rho,
        residual=point.residual,
        effective_potential=point.v_eff,
    )


def _log_iteration(msg, it: ScfIteration):
    step = "-" if it.step is None else f"{it.step:.6f}"
    msg.iteration(
        f"{it.index:>4}  e = {it.energy:+.12f}  t = {step:>9}  "
        f"résidu = {it.residual:.3e}"
    )


# =============================================================================
# PAS
# =============================================================================
def optimal_step(
    rho: Sequence[float],
    delta: Sequence[float],
    prox_point: Sequence[float],
    eps: float,
    v_ext: Sequence[float],
) -> float:
    """Pas qui minimise la parabole de régularisation le long de Δ.

    t = −⟨ρ − p*, Δ⟩/‖Δ‖² avec p* = p − εv_ext : ρ + tΔ est le projeté
    orthogonal de p* sur la droite de recherche. t n'est pas borné.

    Raises
    ------
    ZeroDirection
        Si ‖Δ‖ = 0.
    """
    rho, delta = np.asarray(rho, float), np.asarray(delta, float)
    norm_sq = float(delta @ delta)
    if norm_sq == 0.0:
        raise ZeroDirection("direction de recherche nulle")
    vertex = np.asarray(prox_point, float) - eps * np.asarray(v_ext, float)
    return -float((rho - vertex) @ delta) / norm_sq


def feasible_step(
    rho: Sequence[float],
    delta: Sequence[float],
    gradient: Callable[[np.ndarray], np.ndarray],
    max_halvings: int = MAX_HALVINGS,
) -> float:
    """Plus grand t ∈ {1, ½, ¼, …} tel que ⟨∇G(ρ + tΔ), Δ⟩ <= 0.

    Raises
    ------
    StalledLineSearch
        Si aucune valeur ne convient après `max_halvings` divisions.
    """
    rho, delta = np.asarray(rho, float), np.asarray(delta, float)
    t = 1.0
    for _ in range(max_halvings + 1):
        if float(gradient(rho + t * delta) @ delta) <= 0.0:
            return t
        t *= 0.5
    raise StalledLineSearch(max_halvings)


def _gradient_of_G(
    spec, eps, v_ext, dual, warm, msg
) -> Callable[[np.ndarray], np.ndarray]:
    interacting = spec.with_coupling(1.0)
    state = {"v": warm}

    def gradient(rho: np.ndarray) -> np.ndarray:
        point = regularize(interacting, eps, rho, dual, v0=state["v"], msg=msg)
        state["v"] = point.maximizer
        return v_ext - point.maximizer

    return gradient


# =============================================================================
# ALGORITHMES
# =============================================================================
def myks_scf(
    spec: LatticeSpec,
    v_ext: Sequence[float],
    cfg: ScfConfig,
    rho0: Optional[Sequence[float]] = None,
    dual: DualAscentConfig = DEFAULT_DUAL,
    msg=NoOpMessageHandler(),
) -> ScfResult:
    """Itération de point fixe non amortie ρᵢ₊₁ = ρ̃(v_eff,ᵢ₊₁) − εv_eff,ᵢ₊₁.

    La convergence n'est pas garantie : une oscillation se traduit par
    `converged=False` après `max_outer` itérations, pas par une exception.
    """
    v_ext = _as_external(spec, v_ext)
    eps = cfg.eps
    rho = (
        initial_quasidensity(spec, eps, v_ext)
        if rho0 is None
        else np.asarray(rho0, dtype=float)
    )
    point = _evaluate(spec, eps, v_ext, rho, dual, (v_ext, v_ext), msg)
    trace = ScfTrace()
    for i in range(cfg.max_outer):
        if point.residual <= cfg.residual_tol:
            break
        new_rho = _trial_density(spec, eps, point.v_eff)
        delta = new_rho - point.rho
        trace.append(
            ScfIteration(
                index=i,
                quasidensity=point.rho,
                effective_potential=point.v_eff,
                energy=point.energy,
                step=1.0,
                residual=point.residual,
                slope=float(point.gradient @ delta),
                step_norm_sq=float(delta @ delta),
            )
        )
        _log_iteration(msg, trace[-1])
        point = _evaluate(spec, eps, v_ext, new_rho, dual, point.warm, msg)

    converged = point.residual <= cfg.residual_tol
    trace.append(
        ScfIteration(
            index=len(trace),
            quasidensity=point.rho,
            effective_potential=point.v_eff,
            energy=point.energy,
            step=None,
            residual=point.residual,
        )
    )
    _log_iteration(msg, trace[-1])
    return _result(point, eps, v_ext, converged, trace)


def myksoda(
    spec: LatticeSpec,
    v_ext: Sequence[float],
    cfg: ScfConfig,
    rho0: Optional[Sequence[float]] = None,
    dual: DualAscentConfig = DEFAULT_DUAL,
    msg=NoOpMessageHandler(),
) -> ScfResult:
    """Itération amortie à énergie décroissante.

    Paramètres
    ----------
    spec : LatticeSpec
        Modèle en interaction (couplage 1).
    v_ext : array_like
        Potentiel extérieur.
    cfg : ScfConfig
        `step_policy` doit valoir 'damped_feasible' ou 'parabola_optimal'.
    rho0 : array_like, optional
        Quasi-densité de départ. Défaut : `initial_quasidensity`.
    dual : DualAscentConfig, optional
        Réglages des montées duales internes.
    msg : MessageHandler, optional
        Reçoit une ligne `iteration` par itération.

    Retourne
    --------
    ScfResult
        La trace contient eᵢ, tᵢ, le résidu et, sous 'parabola_optimal', le
        minimum mᵢ de la parabole et l'écart eᵢ − mᵢ.

    Raises
    ------
    StalledLineSearch
        Si la recherche dyadique échoue (politique 'damped_feasible').
    """
    if cfg.step_policy == "full":
        raise DomainError("myksoda exige une politique de pas amortie")
    v_ext = _as_external(spec, v_ext)
    eps = cfg.eps
    rho = (
        initial_quasidensity(spec, eps, v_ext)
        if rho0 is None
        else np.asarray(rho0, dtype=float)
    )
    point = _evaluate(spec, eps, v_ext, rho, dual, (v_ext, v_ext), msg)
    trace = ScfTrace()

    for i in range(cfg.max_outer):
        if point.residual <= cfg.residual_tol:
            break
        delta = _trial_density(spec, eps, point.v_eff) - point.rho
        if not np.any(delta):
            # ρ' = ρ : point stationnaire
            break
        slope = float(point.gradient @ delta)
        parabola_min = gap = None
        if cfg.step_policy == "parabola_optimal":
            t = optimal_step(point.rho, delta, point.prox_point, eps, v_ext)
        else:
            gradient = _gradient_of_G(spec, eps, v_ext, dual, point.warm[0], msg)
            t = feasible_step(point.rho, delta, gradient)
        new_rho = point.rho + t * delta
        moved = new_rho - point.rho
        if cfg.step_policy == "parabola_optimal":
            vertex = point.prox_point - eps * v_ext
            to_prox = point.rho - point.prox_point
            envelope = point.split.interacting.envelope_value
            f_prox = envelope - float(to_prox @ to_prox) / (2.0 * eps)
            parabola_min = (
                f_prox
                + float(v_ext @ point.prox_point)
                - 0.5 * eps * float(v_ext @ v_ext)
                + float((new_rho - vertex) @ (new_rho - vertex)) / (2.0 * eps)
            )
            gap = point.energy - parabola_min
        trace.append(
            ScfIteration(
                index=i,
                quasidensity=point.rho,
                effective_potential=point.v_eff,
                energy=point.energy,
                step=t,
                residual=point.residual,
                parabola_min=parabola_min,
                parabola_gap=gap,
                slope=slope,
                step_norm_sq=float(moved @ moved),
            )
        )
        _log_iteration(msg, trace[-1])
        point = _evaluate(spec, eps, v_ext, new_rho, dual, point.warm, msg)

    converged = point.residual <= cfg.residual_tol
    trace.append(
        ScfIteration(
            index=len(trace),
            quasidensity=point.rho,
            effective_potential=point.v_eff,
            energy=point.energy,
            step=None,
            residual=point.residual,
        )
    )
    _log_iteration(msg, trace[-1])
    return _result(point, eps, v_ext, converged, trace)


def run_scf(
    spec: LatticeSpec,
    v_ext: Sequence[float],
    cfg: ScfConfig,
    dual: DualAscentConfig = DEFAULT_DUAL,
    rho0: Optional[Sequence[float]] = None,
    msg=NoOpMessageHandler(),
) -> ScfResult:
    """'full' → myks_scf, politiques amorties → myksoda."""
    if cfg.step_policy == "full":
        return myks_scf(spec, v_ext, cfg, rho0=rho0, dual=dual, msg=msg)
    return myksoda(spec, v_ext, cfg, rho0=rho0, dual=dual, msg=msg)
