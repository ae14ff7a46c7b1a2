"""Modèle de fermions de spin 1/2 sur une chaîne ouverte, par diagonalisation exacte.

Le hamiltonien est H = T + λW + V dans la base de Fock des 2L spin-orbitales,
ordonnées site par site puis par spin (ordre de Jordan–Wigner) :

- T : saut −t entre sites voisins, à spin fixé, avec le signe fermionique
  donné par la parité des orbitales occupées entre création et annihilation ;
- W : Σ noyau(i, j) n_p n_q sur toutes les paires de spin-orbitales distinctes ;
- V : Σ vᵢ nᵢ sur la diagonale.

Les parties T et λW ne dépendent que du modèle : elles sont construites une
seule fois par LatticeSpec (cache) et seul V est ajouté à chaque appel.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from functools import lru_cache
from math import comb
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .config import max_basis_cap
from .exceptions import (
    BasisTooLarge,
    DimensionMismatch,
    DomainError,
    EigensolverFailure,
)
from .kernel_registry import get_kernel

__all__ = [
    "LatticeSpec",
    "FockBasis",
    "GroundStateResult",
    "AdiabaticCurve",
    "build_hamiltonian",
    "ground_state",
    "energy",
    "noninteracting_solve",
    "superdiff_E",
    "density_response",
    "ground_density_blocks",
    "coupling_derivatives",
    "adiabatic_curve",
    "noninteracting_gap",
]


# =============================================================================
# TYPES
# =============================================================================
@dataclass(frozen=True)
class LatticeSpec:
    """Modèle physique : chaîne ouverte de `sites` sites et `electrons` électrons.

    Paramètres
    ----------
    sites : int
        Nombre de sites L.
    electrons : int
        Nombre d'électrons N, avec 1 <= N <= 2L.
    hopping : float
        Amplitude de saut t > 0.
    interaction_strength : float
        Intensité U >= 0 de l'interaction.
    lambda_ : float
        Paramètre de connexion adiabatique λ dans [0, 1].
    kernel : str
        Nom du noyau d'interaction (voir kernel_registry).
    degeneracy_tol : float
        Tolérance relative de dégénérescence des valeurs propres.
    """

    sites: int
    electrons: int
    hopping: float = 0.5
    interaction_strength: float = 1.0
    lambda_: float = 1.0
    kernel: str = "soft_coulomb"
    degeneracy_tol: float = 1e-10

    def __post_init__(self):
        if self.sites < 1:
            raise DomainError(f"sites = {self.sites} : au moins un site est requis")
        if not 1 <= self.electrons <= 2 * self.sites:
            raise DomainError(
                f"electrons = {self.electrons} hors de [1, {2 * self.sites}]"
            )
        if self.hopping <= 0:
            raise DomainError(f"hopping = {self.hopping} : doit être > 0")
        if self.interaction_strength < 0:
            raise DomainError(
                f"interaction_strength = {self.interaction_strength} : doit être >= 0"
            )
        if not 0.0 <= self.lambda_ <= 1.0:
            raise DomainError(f"lambda = {self.lambda_} hors de [0, 1]")
        if self.degeneracy_tol <= 0:
            raise DomainError("degeneracy_tol doit être > 0")
        try:
            get_kernel(self.kernel)
        except KeyError:
            raise DomainError(f"noyau d'interaction inconnu : {self.kernel}") from None

    @property
    def spin_orbitals(self) -> int:
        return 2 * self.sites

    @property
    def is_noninteracting(self) -> bool:
        return self.lambda_ == 0.0 or self.interaction_strength == 0.0

    def with_coupling(self, lambda_: float) -> "LatticeSpec":
        """Variante du modèle le long de la connexion adiabatique."""
        return replace(self, lambda_=float(lambda_))

    def interaction_matrix(self) -> np.ndarray:
        """Matrice L×L des valeurs du noyau (symétrie vérifiée)."""
        kernel = get_kernel(self.kernel)
        L = self.sites
        K = np.array(
            [
                [kernel(i, j, self.interaction_strength) for j in range(L)]
                for i in range(L)
            ],
            dtype=float,
        )
        if not np.allclose(K, K.T, rtol=0.0, atol=1e-14):
            raise DomainError(f"le noyau {self.kernel} n'est pas symétrique")
        return K


@dataclass(frozen=True)
class FockBasis:
    """Chaînes de 2L bits comptant exactement N bits à 1, ordre lexicographique."""

    sites: int
    electrons: int
    states: Tuple[int, ...]

    @classmethod
    def build(cls, sites: int, electrons: int) -> "FockBasis":
        states = tuple(
            sum(1 << p for p in combo)
            for combo in itertools.combinations(range(2 * sites), electrons)
        )
        return cls(sites, electrons, states)

    @property
    def dimension(self) -> int:
        return len(self.states)

    def occupations(self) -> np.ndarray:
        """Tableau D×2L des occupations (0/1) des spin-orbitales."""
        bits = np.arange(2 * self.sites)
        states = np.array(self.states, dtype=np.int64)
        return ((states[:, None] >> bits[None, :]) & 1).astype(float)

    def site_occupations(self) -> np.ndarray:
        """Tableau D×L des occupations de site (0, 1 ou 2)."""
        occ = self.occupations()
        return occ[:, 0::2] + occ[:, 1::2]


@dataclass(frozen=True, eq=False)
class GroundStateResult:
    energy: float
    degeneracy: int
    ground_densities: Tuple[np.ndarray, ...]
    ensemble_density: np.ndarray
    orbital_energies: Optional[np.ndarray] = None


class _Operators(NamedTuple):
    basis: FockBasis
    site_occ: np.ndarray
    h0: np.ndarray
    w_diag: np.ndarray


# =============================================================================
# CONSTRUCTION DU HAMILTONIEN
# =============================================================================
def _hopping_sign(state: int, p: int, q: int) -> int:
    """Signe de c†_p c_q (p < q) : parité des occupations strictement entre p et q."""
    between = ((1 << q) - 1) ^ ((1 << (p + 1)) - 1)
    return -1 if bin(state & between).count("1") % 2 else 1


@lru_cache(maxsize=32)
def _static_operators(spec: LatticeSpec, cap: int) -> _Operators:
    dimension = comb(2 * spec.sites, spec.electrons)
    if dimension > cap:
        raise BasisTooLarge(dimension, cap)
    basis = FockBasis.build(spec.sites, spec.electrons)
    index = {state: k for k, state in enumerate(basis.states)}
    D = basis.dimension

    h0 = np.zeros((D, D))
    for k, state in enumerate(basis.states):
        for site in range(spec.sites - 1):
            for spin in (0, 1):
                p, q = 2 * site + spin, 2 * (site + 1) + spin
                # c†_p c_q puis son conjugué c†_q c_p : même signe
                for src, dst in ((q, p), (p, q)):
                    if state >> src & 1 and not state >> dst & 1:
                        target = state ^ (1 << src) ^ (1 << dst)
                        sign = _hopping_sign(state, min(p, q), max(p, q))
                        h0[index[target], k] += -spec.hopping * sign

    occ = basis.occupations()
    site_of = np.repeat(np.arange(spec.sites), 2)
    K2 = spec.interaction_matrix()[np.ix_(site_of, site_of)]
    np.fill_diagonal(K2, 0.0)
    w_diag = 0.5 * np.einsum("dp,pq,dq->d", occ, K2, occ)
    h0 += np.diag(spec.lambda_ * w_diag)
    return _Operators(basis, basis.site_occupations(), h0, w_diag)


def _operators(spec: LatticeSpec) -> _Operators:
    return _static_operators(spec, max_basis_cap())


def _as_potential(spec: LatticeSpec, v: Sequence[float]) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (spec.sites,):
        raise DimensionMismatch(
            f"potentiel de forme {v.shape}, {spec.sites} composantes attendues"
        )
    if not np.all(np.isfinite(v)):
        raise DomainError("potentiel non fini")
    return v


def build_hamiltonian(spec: LatticeSpec, v: Sequence[float]) -> np.ndarray:
    """Matrice D×D réelle symétrique de H = T + λW + V dans l'ordre de FockBasis.

    Raises
    ------
    DimensionMismatch
        Si len(v) != L.
    BasisTooLarge
        Si C(2L, N) dépasse la limite configurée.
    """
    v = _as_potential(spec, v)
    ops = _operators(spec)
    return ops.h0 + np.diag(ops.site_occ @ v)


# =============================================================================
# ÉTAT FONDAMENTAL
# =============================================================================
def _diagonalize(spec: LatticeSpec, v: Sequence[float]):
    H = build_hamiltonian(spec, v)
    try:
        w, U = scipy.linalg.eigh(H)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverFailure(f"échec de la diagonalisation : {exc}") from exc
    scale = max(1.0, float(np.max(np.abs(w))))
    d = int(np.count_nonzero(w - w[0] <= spec.degeneracy_tol * scale))
    return w, U, d


def _ground_from_spectrum(w, U, d, site_occ) -> GroundStateResult:
    densities = (U[:, :d] ** 2).T @ site_occ
    return GroundStateResult(
        energy=float(w[0]),
        degeneracy=d,
        ground_densities=tuple(densities),
        ensemble_density=densities.mean(axis=0),
    )


def ground_state(spec: LatticeSpec, v: Sequence[float]) -> GroundStateResult:
    """Plus petite valeur propre et toutes les densités du niveau fondamental.

    Les vecteurs propres dont la valeur propre est à moins de
    degeneracy_tol·max(1, |E|max) de la plus basse forment le niveau
    fondamental ; chacun fournit une densité ρᵢ = Σ_σ ⟨n_iσ⟩.
    """
    w, U, d = _diagonalize(spec, v)
    return _ground_from_spectrum(w, U, d, _operators(spec).site_occ)


def energy(spec: LatticeSpec, v: Sequence[float]) -> float:
    return ground_state(spec, v).energy


def superdiff_E(spec: LatticeSpec, v: Sequence[float]) -> List[np.ndarray]:
    """Densités fondamentales pures et densité d'ensemble, sans doublons.

    Chaque densité ρ renvoyée est un sur-gradient de la fonction concave E :
    E[v'] <= E[v] + ⟨ρ, v' − v⟩ pour tout v'.
    """
    gs = ground_state(spec, v)
    unique: List[np.ndarray] = []
    for rho in (*gs.ground_densities, gs.ensemble_density):
        if not any(np.allclose(rho, other, rtol=0.0, atol=1e-10) for other in unique):
            unique.append(rho)
    return unique


def density_response(
    spec: LatticeSpec, v: Sequence[float]
) -> Tuple[GroundStateResult, np.ndarray]:
    """État fondamental et réponse statique χ = ∂²E/∂v∂v (semi-définie négative).

    χ est obtenue au second ordre de perturbation, moyennée sur le niveau
    fondamental de dimension d :

        χ_ij = −(2/d) Σ_{m ≤ d} Σ_{n > d} ⟨m|n_i|n⟩⟨n|n_j|m⟩ / (E_n − E_0)

    Notes
    -----
    La formule est exacte lorsque E est différentiable en v (densités
    fondamentales toutes égales, par exemple une simple dégénérescence de
    spin). Aux croisements de niveaux, E n'est pas dérivable et χ ne sert
    que de modèle local pour la montée de Newton.
    """
    w, U, d = _diagonalize(spec, v)
    site_occ = _operators(spec).site_occ
    gs = _ground_from_spectrum(w, U, d, site_occ)
    if d == len(w):
        return gs, np.zeros((spec.sites, spec.sites))
    ground, excited = U[:, :d], U[:, d:]
    # A[i, m, n] = ⟨m| n_i |n⟩, n_i diagonal dans la base de Fock
    A = np.stack(
        [ground.T @ (site_occ[:, [i]] * excited) for i in range(spec.sites)]
    )
    B = (A * np.sqrt(1.0 / (w[d:] - w[0]))).reshape(spec.sites, -1)
    chi = -(2.0 / d) * (B @ B.T)
    return gs, 0.5 * (chi + chi.T)


def ground_density_blocks(
    spec: LatticeSpec, v: Sequence[float]
) -> Tuple[GroundStateResult, np.ndarray]:
    """Blocs Aᵢ = P nᵢ P restreints au niveau fondamental (tableau L×d×d).

    Toute matrice densité Γ du niveau fondamental donne la densité
    ρᵢ = tr(Γ Aᵢ) ; les densités pures de la base propre en sont les
    diagonales.
    """
    w, U, d = _diagonalize(spec, v)
    site_occ = _operators(spec).site_occ
    ground = U[:, :d]
    blocks = np.stack(
        [ground.T @ (site_occ[:, [i]] * ground) for i in range(spec.sites)]
    )
    return _ground_from_spectrum(w, U, d, site_occ), blocks


def coupling_derivatives(spec: LatticeSpec, v: Sequence[float]) -> Tuple[float, float]:
    """Dérivées à gauche et à droite de λ ↦ E^λ[v] au λ du modèle.

    Par Hellmann–Feynman dégénéré, ce sont la plus grande et la plus petite
    valeur propre de W restreinte au niveau fondamental (gauche >= droite).
    """
    w, U, d = _diagonalize(spec, v)
    ground = U[:, :d]
    W_ground = ground.T @ (_operators(spec).w_diag[:, None] * ground)
    values = np.linalg.eigvalsh(0.5 * (W_ground + W_ground.T))
    return float(values[-1]), float(values[0])


@dataclass(frozen=True, eq=False)
class AdiabaticCurve:
    lambdas: np.ndarray
    energies: np.ndarray
    midpoint_slacks: np.ndarray
    left_slopes: np.ndarray
    right_slopes: np.ndarray

    def is_concave(self, tol: float = 1e-10) -> bool:
        return bool(np.all(self.midpoint_slacks >= -tol))


def adiabatic_curve(
    spec: LatticeSpec,
    v: Sequence[float],
    lambdas: Sequence[float],
    mapper: Callable = map,
) -> AdiabaticCurve:
    """E^λ[v] sur une grille croissante de λ, avec écarts de concavité.

    L'écart au point intérieur λᵢ est E(λᵢ) moins l'interpolation linéaire
    entre ses voisins ; il est positif ou nul pour une courbe concave.
    `mapper` (par défaut `map`) peut être le `map` d'un pool de threads :
    les points de la grille sont indépendants.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.ndim != 1 or np.any(np.diff(lambdas) <= 0):
        raise DomainError("la grille de λ doit être strictement croissante")
    couplings = [spec.with_coupling(lam) for lam in lambdas]
    energies = np.array(list(mapper(lambda s: energy(s, v), couplings)))
    slacks = np.full(len(lambdas), np.nan)
    for i in range(1, len(lambdas) - 1):
        a, b, c = lambdas[i - 1], lambdas[i], lambdas[i + 1]
        chord = ((c - b) * energies[i - 1] + (b - a) * energies[i + 1]) / (c - a)
        slacks[i] = energies[i] - chord
    slopes = list(mapper(lambda s: coupling_derivatives(s, v), couplings))
    return AdiabaticCurve(
        lambdas=lambdas,
        energies=energies,
        midpoint_slacks=slacks[1:-1] if len(lambdas) > 2 else np.array([]),
        left_slopes=np.array([s[0] for s in slopes]),
        right_slopes=np.array([s[1] for s in slopes]),
    )


# =============================================================================
# SOLVEUR SANS INTERACTION (REMPLISSAGE D'ORBITALES)
# =============================================================================
def _one_particle(spec: LatticeSpec, v: np.ndarray):
    h = np.diag(v) - spec.hopping * (np.eye(spec.sites, k=1) + np.eye(spec.sites, k=-1))
    try:
        return scipy.linalg.eigh(h)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverFailure(f"échec de la diagonalisation : {exc}") from exc


def noninteracting_solve(spec: LatticeSpec, v: Sequence[float]) -> GroundStateResult:
    """Remplit les N spin-orbitales les plus basses de la matrice −t·sauts + diag(v).

    Si le niveau de Fermi est dégénéré, `ground_densities` contient chaque
    remplissage pur de la couche dégénérée et `ensemble_density` leur
    moyenne à poids égaux.

    Raises
    ------
    DomainError
        Si le modèle est en interaction (λ > 0 et U > 0).
    """
    if not spec.is_noninteracting:
        raise DomainError("noninteracting_solve exige λ = 0 (ou U = 0)")
    v = _as_potential(spec, v)
    e, phi = _one_particle(spec, v)
    weights = phi**2  # weights[:, k] = |φ_k|² par site

    N = spec.electrons
    fermi = (N - 1) // 2
    scale = max(1.0, float(np.max(np.abs(e))))
    shell = np.flatnonzero(np.abs(e - e[fermi]) <= spec.degeneracy_tol * scale)
    core = np.arange(shell[0])
    n_core = 2 * len(core)
    r = N - n_core
    s = len(shell)

    core_density = 2.0 * weights[:, core].sum(axis=1)
    pure = []
    for choice in itertools.combinations(range(2 * s), r):
        rho = core_density.copy()
        for slot in choice:
            rho += weights[:, shell[slot // 2]]
        pure.append(rho)
    ensemble = core_density + (r / s) * weights[:, shell].sum(axis=1)
    total = 2.0 * float(e[core].sum()) + r * float(e[shell].mean())
    return GroundStateResult(
        energy=total,
        degeneracy=len(pure),
        ground_densities=tuple(pure),
        ensemble_density=ensemble,
        orbital_energies=e,
    )


def noninteracting_gap(spec: LatticeSpec, v: Sequence[float]) -> float:
    """Écart entre le niveau de Fermi et le niveau spatial distinct le plus proche.

    Un niveau de Fermi à moitié rempli (N impair) n'est dégénéré que par le
    spin, ce qui ne crée pas de croisement de densités : on mesure alors
    l'écart aux orbitales voisines. Retourne +inf s'il n'y a pas de voisin.
    """
    v = _as_potential(spec, v)
    e, _ = _one_particle(spec, v)
    N, L = spec.electrons, spec.sites
    fermi = (N - 1) // 2
    if N % 2:
        neighbours = [e[k] for k in (fermi - 1, fermi + 1) if 0 <= k < L]
        return min((abs(x - e[fermi]) for x in neighbours), default=float("inf"))
    if N // 2 >= L:
        return float("inf")
    return float(e[N // 2] - e[fermi])
