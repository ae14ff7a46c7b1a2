"""Fonctionnelle de Lieb, régularisation de Moreau–Yosida et potentiel Hxc.

Toutes les quantités sont obtenues par maximisation duale sur le potentiel v :

    F[ρ]  = sup_v E[v] − ⟨v, ρ⟩
    ᵋF[ρ] = max_v E[v] − (ε/2)‖v‖² − ⟨v, ρ⟩

Le second problème est ε-fortement concave : son maximiseur v* est unique,
et donne ∇ᵋF[ρ] = −v*, la densité proximale ρ_ε = ρ + εv* et le potentiel
proximal v_ε = v*.

L'optimalité est certifiée par la norme de l'élément minimal du
sur-différentiel {conv(densités fondamentales) − εv − ρ} ; par forte
concavité, ‖v − v*‖ <= résidu/ε.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .convex_core import ExtendedReal, min_norm_element, proj_simplex
from .exceptions import DimensionMismatch, DomainError, NonConvergence
from .lattice_model import (
    GroundStateResult,
    LatticeSpec,
    density_response,
    energy,
    ground_density_blocks,
    ground_state,
)
from .logger import NoOpMessageHandler

__all__ = [
    "STEP_RULES",
    "DualAscentConfig",
    "RegularizedPoint",
    "HxcSplit",
    "lieb_F",
    "regularize",
    "regularized_energy",
    "hxc_split",
    "hxc_gradient",
    "hxc_energy",
    "preimage_shift",
]

STEP_RULES = ("newton", "polyak", "diminishing")

# Gardes de divergence de la conjugaison non régularisée
OBJECTIVE_CEILING = 1e10
POTENTIAL_CAP = 1e6
POLYTOPE_TOL = 1e-7

_ARMIJO = 1e-4
_MAX_HALVINGS = 60


@dataclass(frozen=True)
class DualAscentConfig:
    """Réglages de la montée duale.

    Paramètres
    ----------
    tolerance : float
        Seuil sur le résidu de norme minimale. Défaut : 1e-8.
    max_iterations : int
        Budget total d'itérations, redémarrages compris. Défaut : 200000.
    step_rule : str
        'newton' (défaut), 'polyak' ou 'diminishing'.
    restart_count : int
        Nombre de redémarrages depuis le meilleur itéré. Défaut : 3.
    """

    tolerance: float = 1e-8
    max_iterations: int = 200000
    step_rule: str = "newton"
    restart_count: int = 3

    def __post_init__(self):
        if not self.tolerance > 0:
            raise DomainError("tolerance doit être > 0")
        if self.max_iterations < 1:
            raise DomainError("max_iterations doit être >= 1")
        if self.step_rule not in STEP_RULES:
            raise DomainError(f"step_rule inconnue : {self.step_rule}")
        if self.restart_count < 0:
            raise DomainError("restart_count doit être >= 0")


DEFAULT_DUAL = DualAscentConfig()


@dataclass(frozen=True, eq=False)
class RegularizedPoint:
    """Résultat de `regularize` en une quasi-densité ρ."""

    eps: float
    quasidensity: np.ndarray
    proximal_density: np.ndarray
    proximal_potential: np.ndarray
    envelope_value: float
    maximizer: np.ndarray
    residual: float
    iterations: int
    ground_densities: Tuple[np.ndarray, ...]
    electrons: int

    @property
    def gradient(self) -> np.ndarray:
        """∇ᵋF[ρ] = −v*."""
        return -self.maximizer

    def is_onto_simplex(self, tol: float = 1e-8) -> bool:
        """ρ_ε dans {0 <= ρᵢ <= 2, Σρᵢ = N} à tol + ε·résidu près."""
        slack = tol + self.eps * self.residual
        rho = self.proximal_density
        return bool(
            np.all(rho >= -slack)
            and np.all(rho <= 2.0 + slack)
            and abs(rho.sum() - self.electrons) <= slack
        )


# =============================================================================
# ÉVALUATION ET CERTIFICATION
# =============================================================================
@dataclass(frozen=True, eq=False)
class _Probe:
    v: np.ndarray
    value: float
    gs: GroundStateResult
    chi: Optional[np.ndarray]


def _probe(
    spec: LatticeSpec, eps: float, rho: np.ndarray, v: np.ndarray, newton: bool
) -> _Probe:
    if newton:
        gs, chi = density_response(spec, v)
    else:
        gs, chi = ground_state(spec, v), None
    value = gs.energy - 0.5 * eps * float(v @ v) - float(v @ rho)
    return _Probe(v, value, gs, chi)


def _proj_spectraplex(gamma: np.ndarray) -> np.ndarray:
    """Projection sur {Γ symétrique, Γ ⪰ 0, tr Γ = 1}."""
    w, U = np.linalg.eigh(0.5 * (gamma + gamma.T))
    return (U * proj_simplex(w)) @ U.T


def _density_matrix_refinement(
    spec: LatticeSpec, v: np.ndarray, shift: np.ndarray, weights: np.ndarray, tol: float
) -> np.ndarray:
    """Élément minimal sur toutes les matrices densité du niveau fondamental."""
    gs, blocks = ground_density_blocks(spec, v)
    if blocks.shape[1] != len(weights):
        return gs.ensemble_density - shift
    step = 1.0 / max(float(np.sum(blocks**2)), 1e-300)
    gamma = np.diag(weights)
    element = np.einsum("imn,mn->i", blocks, gamma) - shift
    for _ in range(500):
        descent = np.einsum("i,imn->mn", element, blocks)
        gamma = _proj_spectraplex(gamma - step * descent)
        element = np.einsum("imn,mn->i", blocks, gamma) - shift
        if np.linalg.norm(element) <= tol:
            break
    return element


def _certify(
    spec: LatticeSpec,
    probe: _Probe,
    eps: float,
    rho: np.ndarray,
    tol: float,
    gauge: bool,
) -> Tuple[float, np.ndarray]:
    """Résidu et élément de norme minimale du sur-différentiel en v."""
    shift = eps * probe.v + rho
    densities = probe.gs.ground_densities
    weights, element = min_norm_element([d - shift for d in densities])
    if gauge:
        element = element - element.mean()
    residual = float(np.linalg.norm(element))
    spread = float(np.ptp(np.asarray(densities), axis=0).max())
    if tol < residual < 1e-2 and len(densities) > 1 and spread > 1e-12:
        refined = _density_matrix_refinement(spec, probe.v, shift, weights, tol)
        if gauge:
            refined = refined - refined.mean()
        if np.linalg.norm(refined) < residual:
            element, residual = refined, float(np.linalg.norm(refined))
    return residual, element


# =============================================================================
# MONTÉE DUALE
# =============================================================================
@dataclass(frozen=True, eq=False)
class _AscentOutcome:
    probe: _Probe
    residual: float
    iterations: int
    boundary: bool
    diverged: bool
    messages: List[List[str]]


def _newton_direction(probe: _Probe, element: np.ndarray, eps: float, gauge: bool):
    L = len(element)
    chi = probe.chi
    if gauge:
        damping = 1e-10 * (1.0 + float(np.max(np.abs(chi))))
        P = np.eye(L) - 1.0 / L
        A = P @ (damping * np.eye(L) - chi) @ P
        step = np.linalg.lstsq(A, element, rcond=None)[0]
        return step - step.mean()
    return np.linalg.solve(eps * np.eye(L) - chi, element)


def _ascend(
    spec: LatticeSpec,
    eps: float,
    rho: np.ndarray,
    cfg: DualAscentConfig,
    v0: Optional[np.ndarray],
    gauge: bool,
    msg,
) -> _AscentOutcome:
    """Montée sur v ↦ E[v] − (ε/2)‖v‖² − ⟨v, ρ⟩ avec suivi du meilleur itéré.

    En mode `gauge` (ε = 0), v reste orthogonal au mode constant.
    """
    L = spec.sites
    messages: List[List[str]] = []
    rule = cfg.step_rule
    v = np.zeros(L) if v0 is None else np.asarray(v0, dtype=float).copy()
    if gauge:
        v = v - v.mean()
    probe = _probe(spec, eps, rho, v, rule == "newton")
    residual, element = _certify(spec, probe, eps, rho, cfg.tolerance, gauge)
    best, best_residual = probe, residual
    restarts, phase_start = 0, 0

    k = 0
    while k < cfg.max_iterations:
        if residual <= cfg.tolerance:
            return _AscentOutcome(probe, residual, k, False, False, messages)
        if gauge and probe.value > OBJECTIVE_CEILING:
            return _AscentOutcome(probe, residual, k, False, True, messages)
        if gauge and np.linalg.norm(probe.v) > POTENTIAL_CAP:
            return _AscentOutcome(best, best_residual, k, True, False, messages)
        k += 1

        failed = False
        newton = rule == "newton"
        if newton:
            direction = _newton_direction(probe, element, eps, gauge)
            alpha = 1.0
        elif rule == "polyak":
            # Cible issue de la forte concavité : Φ* <= Φ(v) + ‖g‖²/(2ε)
            direction = element
            alpha = 1.0 / (2.0 * eps) if eps > 0 else 1.0
        else:
            direction = element
            j = k - phase_start
            alpha = 2.0 / (eps * (j + 1)) if eps > 0 else 1.0 / (j + 1)

        slope = float(element @ direction)
        if rule == "diminishing":
            trial = _probe(spec, eps, rho, probe.v + alpha * direction, False)
        else:
            slack = 1e-13 * max(1.0, abs(probe.value))
            for _ in range(_MAX_HALVINGS):
                trial = _probe(spec, eps, rho, probe.v + alpha * direction, newton)
                if trial.value >= probe.value + _ARMIJO * alpha * slope - slack:
                    break
                alpha *= 0.5
            else:
                failed = True
            if not failed and np.linalg.norm(alpha * direction) <= 1e-15 * max(
                1.0, float(np.linalg.norm(probe.v))
            ):
                failed = True

        if failed:
            if restarts >= cfg.restart_count:
                raise NonConvergence(
                    "montée duale bloquée",
                    best_residual,
                    k,
                    messages,
                )
            restarts += 1
            rule = "polyak" if rule == "newton" else "diminishing"
            messages.append(
                [f"montée duale : redémarrage {restarts} (règle {rule})", "warning"]
            )
            msg.warning(messages[-1][0])
            probe = _probe(spec, eps, rho, best.v, False)
            residual, element = _certify(spec, probe, eps, rho, cfg.tolerance, gauge)
            phase_start = k
            continue

        probe = trial
        residual, element = _certify(spec, probe, eps, rho, cfg.tolerance, gauge)
        if residual < best_residual or (
            residual == best_residual and probe.value > best.value
        ):
            best, best_residual = probe, residual

    if gauge and np.linalg.norm(best.v) > 0.5 * POTENTIAL_CAP:
        return _AscentOutcome(best, best_residual, k, True, False, messages)
    raise NonConvergence("montée duale", best_residual, k, messages)


# =============================================================================
# OPÉRATIONS PUBLIQUES
# =============================================================================
def _as_density(spec: LatticeSpec, rho: Sequence[float]) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (spec.sites,):
        raise DimensionMismatch(
            f"densité de forme {rho.shape}, {spec.sites} composantes attendues"
        )
    if not np.all(np.isfinite(rho)):
        raise DomainError("densité non finie")
    return rho


def _in_polytope(spec: LatticeSpec, rho: np.ndarray) -> bool:
    N = spec.electrons
    upper = min(2.0, float(N))
    scale = POLYTOPE_TOL * max(1.0, float(N))
    return bool(
        np.all(rho >= -scale)
        and np.all(rho <= upper + scale)
        and abs(rho.sum() - N) <= scale
    )


def _on_face(spec: LatticeSpec, rho: np.ndarray) -> bool:
    """ρ touche une face ρᵢ = 0 ou ρᵢ = min(2, N) du polytope."""
    N = spec.electrons
    upper = min(2.0, float(N))
    scale = POLYTOPE_TOL * max(1.0, float(N))
    return bool(np.any(rho <= scale) or np.any(rho >= upper - scale))


def _ray_limit(spec: LatticeSpec, rho: np.ndarray, v: np.ndarray) -> float:
    """Limite de Φ(sv) quand s → ∞, extrapolée depuis s = 1 et s = 2.

    Le long du rayon, Φ(sv) = F − c/s + O(s⁻²) : la combinaison 2Φ(2v) − Φ(v)
    élimine le terme en 1/s.
    """
    near = _probe(spec, 0.0, rho, v, False).value
    far = _probe(spec, 0.0, rho, 2.0 * v, False).value
    if far < near:
        return near
    return 2.0 * far - near


def lieb_F(
    spec: LatticeSpec,
    rho: Sequence[float],
    cfg: DualAscentConfig = DEFAULT_DUAL,
    msg=NoOpMessageHandler(),
) -> ExtendedReal:
    """F[ρ] = sup_v E[v] − ⟨v, ρ⟩, ou +∞ hors du domaine.

    Paramètres
    ----------
    spec : LatticeSpec
        Modèle (le λ du modèle est utilisé tel quel).
    rho : array_like
        Densité de longueur L.
    cfg : DualAscentConfig, optional
        Réglages de la montée.
    msg : MessageHandler, optional
        Reçoit un avertissement quand ρ est au bord du domaine.

    Retourne
    --------
    ExtendedReal
        +∞ hors du polytope {0 <= ρᵢ <= min(2, N), Σρᵢ = N}.

    Raises
    ------
    NonConvergence
        Valeur finie mais résidu au-dessus de la tolérance.

    Notes
    -----
    Sur une face du polytope, le supremum n'est atteint qu'à l'infini et
    Φ(v) = E[v] − ⟨v, ρ⟩ s'en approche comme F − c/‖v‖ (dimère : c ≈ t²/√2).
    La montée s'arrête dès que la pente passe sous la tolérance, ou quand ‖v‖
    dépasse 1e6 ; la valeur est alors extrapolée le long du rayon de v, avec une
    erreur en O(‖v‖⁻²) au lieu de c/‖v‖.
    """
    rho = _as_density(spec, rho)
    if not _in_polytope(spec, rho):
        return ExtendedReal.plus_infinity()
    outcome = _ascend(spec, 0.0, rho, cfg, None, True, msg)
    if outcome.diverged:
        return ExtendedReal.plus_infinity()
    if outcome.boundary or _on_face(spec, rho):
        msg.warning(
            f"F[ρ] : densité au bord du domaine, potentiel non borné "
            f"(‖v‖ = {np.linalg.norm(outcome.probe.v):.1e}) ; valeur extrapolée"
        )
        return ExtendedReal.finite(_ray_limit(spec, rho, outcome.probe.v))
    return ExtendedReal.finite(outcome.probe.value)


def regularize(
    spec: LatticeSpec,
    eps: float,
    rho: Sequence[float],
    cfg: DualAscentConfig = DEFAULT_DUAL,
    v0: Optional[Sequence[float]] = None,
    msg=NoOpMessageHandler(),
) -> RegularizedPoint:
    """Enveloppe ᵋF[ρ], densité et potentiel proximaux en une quasi-densité ρ.

    `v0` permet un démarrage à chaud (maximiseur d'un appel voisin).

    Raises
    ------
    DomainError
        Si eps <= 0.
    NonConvergence
        Si la montée ne certifie pas l'optimalité.
    """
    if not eps > 0:
        raise DomainError(f"eps = {eps} : regularize exige eps > 0")
    rho = _as_density(spec, rho)
    outcome = _ascend(spec, float(eps), rho, cfg, v0, False, msg)
    v_star = outcome.probe.v
    return RegularizedPoint(
        eps=float(eps),
        quasidensity=rho,
        proximal_density=rho + eps * v_star,
        proximal_potential=v_star.copy(),
        envelope_value=outcome.probe.value,
        maximizer=v_star,
        residual=outcome.residual,
        iterations=outcome.iterations,
        ground_densities=outcome.probe.gs.ground_densities,
        electrons=spec.electrons,
    )


def regularized_energy(spec: LatticeSpec, eps: float, v: Sequence[float]) -> float:
    """ᵋE[v] = E[v] − (ε/2)‖v‖². ε = 0 est accepté et donne E[v]."""
    if eps < 0:
        raise DomainError(f"eps = {eps} : doit être >= 0")
    v = np.asarray(v, dtype=float)
    return energy(spec, v) - 0.5 * eps * float(v @ v)


@dataclass(frozen=True, eq=False)
class HxcSplit:
    interacting: RegularizedPoint
    noninteracting: RegularizedPoint

    @property
    def energy(self) -> float:
        """ᵋE_Hxc[ρ] = ᵋF¹[ρ] − ᵋF⁰[ρ]."""
        return self.interacting.envelope_value - self.noninteracting.envelope_value

    @property
    def gradient(self) -> np.ndarray:
        """∇ᵋF¹[ρ] − ∇ᵋF⁰[ρ] = v*⁰ − v*¹."""
        return self.noninteracting.maximizer - self.interacting.maximizer


def hxc_split(
    spec: LatticeSpec,
    eps: float,
    rho: Sequence[float],
    cfg: DualAscentConfig = DEFAULT_DUAL,
    warm: Tuple[Optional[np.ndarray], Optional[np.ndarray]] = (None, None),
    parallel: bool = False,
    msg=NoOpMessageHandler(),
) -> HxcSplit:
    """Régularise ρ aux couplages λ = 1 et λ = 0.

    `warm` donne les démarrages à chaud (v*¹, v*⁰). Avec `parallel`, les
    deux montées s'exécutent dans un pool de deux threads.
    """
    interacting, free = spec.with_coupling(1.0), spec.with_coupling(0.0)
    if parallel:
        with concurrent.futures.ThreadPoolExecutor(max_workers=2) as executor:
            f1 = executor.submit(regularize, interacting, eps, rho, cfg, warm[0], msg)
            f0 = executor.submit(regularize, free, eps, rho, cfg, warm[1], msg)
            return HxcSplit(f1.result(), f0.result())
    return HxcSplit(
        regularize(interacting, eps, rho, cfg, warm[0], msg),
        regularize(free, eps, rho, cfg, warm[1], msg),
    )


def hxc_gradient(
    spec: LatticeSpec,
    eps: float,
    rho: Sequence[float],
    cfg: DualAscentConfig = DEFAULT_DUAL,
) -> np.ndarray:
    """ᵋv_Hxc[ρ] = ∇ᵋF¹[ρ] − ∇ᵋF⁰[ρ]."""
    return hxc_split(spec, eps, rho, cfg).gradient


def hxc_energy(
    spec: LatticeSpec,
    eps: float,
    rho: Sequence[float],
    cfg: DualAscentConfig = DEFAULT_DUAL,
) -> float:
    return hxc_split(spec, eps, rho, cfg).energy


def preimage_shift(
    spec: LatticeSpec,
    eps: float,
    rho: Sequence[float],
    c: float,
    cfg: DualAscentConfig = DEFAULT_DUAL,
) -> float:
    """Écart à l'invariance ρ + cε·1 ↦ (ρ_ε inchangée, v* − c·1).

    Une translation constante du potentiel ne change pas l'état fondamental ;
    les quasi-densités qui diffèrent de cε·1 ont donc la même densité
    proximale. Retourne le plus grand écart observé (≈ 0).
    """
    base = regularize(spec, eps, rho, cfg)
    shifted = regularize(
        spec, eps, np.asarray(rho, float) + c * eps, cfg, v0=base.maximizer - c
    )
    return max(
        float(np.max(np.abs(shifted.proximal_density - base.proximal_density))),
        float(np.max(np.abs(shifted.maximizer - (base.maximizer - c)))),
    )
