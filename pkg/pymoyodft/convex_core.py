"""Enveloppes de Moreau, opérateurs proximaux et conjugaisons « skew ».

Ce module travaille sur des oracles convexes en boîte noire (`FunctionOracle`)
dans un espace euclidien de dimension finie. Conventions :

- enveloppe : ᵋf[x] = min_z f(z) + ‖x − z‖²/(2ε), atteinte au point proximal ;
- gradient de Yosida : ∇ᵋf[x] = (x − Prox_{εf} x)/ε ;
- conjuguées : f^∧[y] = inf_x f(x) + ⟨y, x⟩ (f convexe → concave) et
  g^∨[x] = sup_y g(y) − ⟨y, x⟩ (g concave → convexe).

Les valeurs infinies ne sont jamais codées par un flottant sentinelle : elles
passent par `ExtendedReal`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.optimize

from .exceptions import DomainError, EmptyDomain, NonConvergence

__all__ = [
    "ExtendedReal",
    "SegmentDomain",
    "FunctionOracle",
    "InnerSolverConfig",
    "ProxResult",
    "LosslessEntry",
    "LosslessReport",
    "EnvelopeLadder",
    "proj_simplex",
    "min_norm_element",
    "moreau_envelope",
    "prox",
    "yosida_gradient",
    "skew_concave_conjugate",
    "skew_convex_conjugate",
    "verify_lossless",
    "spot_check_convexity",
    "envelope_ladder",
]


# =============================================================================
# TYPES
# =============================================================================
@dataclass(frozen=True)
class ExtendedReal:
    """Réel étendu : valeur finie, ou infini signé (`infinity` = +1 ou −1)."""

    value: float = 0.0
    infinity: int = 0

    @classmethod
    def finite(cls, value: float) -> "ExtendedReal":
        value = float(value)
        if not math.isfinite(value):
            raise DomainError(
                f"valeur non finie {value!r} : utiliser un drapeau infini"
            )
        return cls(value, 0)

    @classmethod
    def plus_infinity(cls) -> "ExtendedReal":
        return cls(0.0, 1)

    @classmethod
    def minus_infinity(cls) -> "ExtendedReal":
        return cls(0.0, -1)

    @property
    def is_finite(self) -> bool:
        return self.infinity == 0

    def as_float(self) -> float:
        """Conversion pour l'affichage et les CSV (±inf IEEE)."""
        if self.infinity:
            return math.inf if self.infinity > 0 else -math.inf
        return self.value

    def __str__(self) -> str:
        if self.infinity:
            return "+inf" if self.infinity > 0 else "-inf"
        return repr(self.value)


@dataclass(frozen=True, eq=False)
class SegmentDomain:
    """Domaine effectif z(s) = origin + s·direction, s ∈ [lower, upper]."""

    origin: np.ndarray
    direction: np.ndarray
    lower: float = 0.0
    upper: float = 1.0

    def point(self, s: float) -> np.ndarray:
        return np.asarray(self.origin, float) + s * np.asarray(self.direction, float)

    def parameter(self, z: np.ndarray) -> float:
        """Paramètre du projeté orthogonal de z sur la droite porteuse."""
        d = np.asarray(self.direction, float)
        return float(np.dot(np.asarray(z, float) - self.origin, d) / np.dot(d, d))


@dataclass(frozen=True, eq=False)
class FunctionOracle:
    """Fonction convexe propre vue en boîte noire.

    Paramètres
    ----------
    evaluate : Callable[[ndarray], ExtendedReal]
        Valeur, ou +∞ hors du domaine effectif.
    subgradient_hint : Callable[[ndarray], Optional[ndarray]], optional
        Un sous-gradient en x, ou None s'il n'est pas disponible en ce point.
    domain_radius : float
        Borne sur ‖x‖ dans le domaine effectif (+inf si inconnue).
    segment : SegmentDomain, optional
        Paramétrage 1-D du domaine effectif, quand il existe.
    prox_hint : Callable[[float, ndarray], ndarray], optional
        Prox_{εf} en forme close : prox_hint(eps, x).
    conjugate_hint : Callable[[ndarray], ExtendedReal], optional
        f^∧ en forme close.
    name : str
        Nom affiché dans les rapports.
    """

    evaluate: Callable[[np.ndarray], ExtendedReal]
    subgradient_hint: Optional[Callable[[np.ndarray], Optional[np.ndarray]]] = None
    domain_radius: float = math.inf
    segment: Optional[SegmentDomain] = None
    prox_hint: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    conjugate_hint: Optional[Callable[[np.ndarray], ExtendedReal]] = None
    name: str = "oracle"

    def value(self, x: np.ndarray) -> float:
        """Valeur en flottant, +inf hors domaine (usage interne aux solveurs)."""
        return self.evaluate(np.asarray(x, dtype=float)).as_float()


@dataclass(frozen=True)
class InnerSolverConfig:
    """Réglages des solveurs internes (prox, conjuguées, contrôle d'exactitude)."""

    tolerance: float = 1e-8
    max_iterations: int = 10000
    conjugate_floor: float = -1e12
    conjugate_ceiling: float = 1e10
    radius_factor: float = 10.0
    grid_points: int = 65
    dual_cap: float = 1e4

    def __post_init__(self):
        if self.tolerance <= 0:
            raise DomainError("tolerance doit être > 0")
        if self.max_iterations < 1:
            raise DomainError("max_iterations doit être >= 1")
        if self.grid_points < 3:
            raise DomainError("grid_points doit être >= 3")


DEFAULT_INNER = InnerSolverConfig()


@dataclass(frozen=True, eq=False)
class ProxResult:
    prox_point: np.ndarray
    envelope_value: float
    yosida_gradient: np.ndarray
    residual: float
    iterations: int


# =============================================================================
# OUTILS
# =============================================================================
def proj_simplex(x: np.ndarray, r: float = 1.0) -> np.ndarray:
    """Projection euclidienne sur le simplexe {w >= 0, Σw = r} (tri de Duchi)."""
    x = np.asarray(x, dtype=float)
    x_decr = np.sort(x)[::-1]
    theta = (np.cumsum(x_decr) - r) / (1 + np.arange(len(x)))
    idx = np.flatnonzero(x_decr - theta > 0)[-1]
    return np.maximum(x - theta[idx], 0.0)


def min_norm_element(
    vectors: Sequence[np.ndarray], max_iterations: int = 5000, tol: float = 1e-15
) -> Tuple[np.ndarray, np.ndarray]:
    """Élément de norme minimale de l'enveloppe convexe de quelques vecteurs.

    Gradient projeté sur le simplexe des poids pour min ½‖Gᵀw‖².

    Retourne
    --------
    (weights, element) : Tuple[ndarray, ndarray]
    """
    G = np.atleast_2d(np.asarray(vectors, dtype=float))
    k = G.shape[0]
    if k == 1:
        return np.ones(1), G[0].copy()
    Q = G @ G.T
    step = 1.0 / max(np.linalg.eigvalsh(Q)[-1], 1e-300)
    w = np.full(k, 1.0 / k)
    for _ in range(max_iterations):
        w_new = proj_simplex(w - step * (Q @ w))
        if np.max(np.abs(w_new - w)) <= tol:
            w = w_new
            break
        w = w_new
    return w, w @ G


def _as_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DomainError(f"vecteur attendu, reçu un tableau de forme {x.shape}")
    return x


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not eps > 0:
        raise DomainError(f"eps = {eps} : doit être > 0")
    return eps


def _result(
    f: FunctionOracle, eps: float, x: np.ndarray, p: np.ndarray, residual, iterations
) -> ProxResult:
    fp = f.evaluate(p)
    if not fp.is_finite:
        raise EmptyDomain(f"{f.name} : point proximal hors du domaine effectif")
    return ProxResult(
        prox_point=p,
        envelope_value=fp.value + float(np.dot(x - p, x - p)) / (2.0 * eps),
        yosida_gradient=(x - p) / eps,
        residual=float(residual),
        iterations=int(iterations),
    )


# =============================================================================
# PROX : CHEMIN SEGMENT (DOMAINE 1-D)
# =============================================================================
def _minimize_on_segment(
    seg: SegmentDomain,
    phi: Callable[[float], float],
    dphi: Optional[Callable[[float], Optional[float]]],
    cfg: InnerSolverConfig,
    name: str,
) -> Tuple[float, float, int]:
    """Minimise une fonction convexe de s sur [lower, upper].

    Grille uniforme, puis recherche bornée (section dorée / Brent) sur les deux
    mailles voisines du meilleur point, puis racine de la dérivée quand elle
    est fournie. Retourne (s*, résidu, évaluations).
    """
    lo, hi = float(seg.lower), float(seg.upper)
    if hi <= lo:
        if not math.isfinite(phi(lo)):
            raise EmptyDomain(f"{name} : +inf sur le domaine réduit à un point")
        return lo, 0.0, 1
    grid = np.linspace(lo, hi, cfg.grid_points)
    values = np.array([phi(s) for s in grid])
    if not np.any(np.isfinite(values)):
        raise EmptyDomain(f"{name} : +inf en tous les points de la grille")
    k = int(np.argmin(values))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    evaluations = len(grid)

    res = scipy.optimize.minimize_scalar(
        phi,
        bounds=(a, b),
        method="bounded",
        options={"xatol": 1e-14 * max(1.0, hi - lo), "maxiter": cfg.max_iterations},
    )
    evaluations += int(res.nfev)
    candidates = [(phi(a), a), (phi(b), b), (float(res.fun), float(res.x))]
    s = min(candidates)[1]

    width = hi - lo
    h = 1e-7 * width

    def slope(t: float) -> Optional[float]:
        if dphi is not None:
            d = dphi(t)
            if d is not None and math.isfinite(d):
                return d
        left, right = max(lo, t - h), min(hi, t + h)
        if right <= left:
            return 0.0
        scale = (right - left) * np.linalg.norm(seg.direction)
        return (phi(right) - phi(left)) / scale

    # Polissage sur la dérivée : quasi-exact quand elle est analytique
    if dphi is not None and lo < s < hi:
        left, right = max(lo, s - 1e-6 * width), min(hi, s + 1e-6 * width)
        d_left, d_right = dphi(left), dphi(right)
        if (
            d_left is not None
            and d_right is not None
            and math.isfinite(d_left)
            and math.isfinite(d_right)
            and d_left < 0 < d_right
        ):
            s = scipy.optimize.brentq(lambda t: dphi(t), left, right, xtol=1e-16)
            evaluations += 1

    d = slope(s)
    if s <= lo:
        residual = max(0.0, -d)
    elif s >= hi:
        residual = max(0.0, d)
    else:
        residual = abs(d)
    return float(s), float(residual), evaluations


def _segment_prox(
    f: FunctionOracle, eps: float, x: np.ndarray, cfg: InnerSolverConfig
) -> ProxResult:
    seg = f.segment
    d_unit = np.asarray(seg.direction, float) / np.linalg.norm(seg.direction)

    def phi(s: float) -> float:
        z = seg.point(s)
        return f.value(z) + float(np.dot(x - z, x - z)) / (2.0 * eps)

    dphi = None
    if f.subgradient_hint is not None:

        def dphi(s: float) -> Optional[float]:
            z = seg.point(s)
            g = f.subgradient_hint(z)
            if g is None:
                return None
            return float(np.dot(np.asarray(g) + (z - x) / eps, d_unit))

    s, residual, evaluations = _minimize_on_segment(seg, phi, dphi, cfg, f.name)
    if residual > cfg.tolerance:
        raise NonConvergence(f"{f.name} : prox sur segment", residual, evaluations)
    return _result(f, eps, x, seg.point(s), residual, evaluations)


# =============================================================================
# PROX : CHEMIN GÉNÉRIQUE
# =============================================================================
def _project_ball(z: np.ndarray, radius: float) -> np.ndarray:
    if not math.isfinite(radius):
        return z
    norm = np.linalg.norm(z)
    return z if norm <= radius else z * (radius / norm)


def _generic_prox(
    f: FunctionOracle, eps: float, x: np.ndarray, cfg: InnerSolverConfig
) -> ProxResult:
    if f.subgradient_hint is None:
        raise DomainError(
            f"{f.name} : le prox générique exige un sous-gradient, "
            "un paramétrage 1-D ou une forme close"
        )
    radius = f.domain_radius

    def psi(z: np.ndarray) -> float:
        return f.value(z) + float(np.dot(x - z, x - z)) / (2.0 * eps)

    def subgradient(z: np.ndarray) -> Optional[np.ndarray]:
        g = f.subgradient_hint(z)
        return None if g is None else np.asarray(g, float) + (z - x) / eps

    z0 = _project_ball(x.copy(), radius)
    if not math.isfinite(psi(z0)):
        z0 = np.zeros_like(x)
        if not math.isfinite(psi(z0)):
            raise EmptyDomain(f"{f.name} : +inf en x et à l'origine")

    def fun(z):
        g = subgradient(z)
        return psi(z), (np.zeros_like(z) if g is None else g)

    bounds = None
    if math.isfinite(radius):
        bounds = [(-radius, radius)] * len(x)
    res = scipy.optimize.minimize(
        fun,
        z0,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={"maxiter": cfg.max_iterations, "ftol": 1e-16, "gtol": 1e-12},
    )
    z = _project_ball(np.asarray(res.x, float), radius)
    iterations = int(res.nit)

    def residual_at(z):
        g = subgradient(z)
        return math.inf if g is None else float(np.linalg.norm(g))

    best_z, best_r = z, residual_at(z)
    # Polissage par sous-gradient projeté, pas 2ε/(k+1) (ψ est 1/ε-fortement convexe)
    k = 0
    while best_r > cfg.tolerance and iterations < cfg.max_iterations:
        k += 1
        iterations += 1
        g = subgradient(z)
        if g is None:
            break
        z = _project_ball(z - (2.0 * eps / (k + 1)) * g, radius)
        r = residual_at(z)
        if r < best_r:
            best_z, best_r = z, r
    if best_r > cfg.tolerance:
        raise NonConvergence(f"{f.name} : prox générique", best_r, iterations)
    return _result(f, eps, x, best_z, best_r, iterations)


# =============================================================================
# OPÉRATIONS PUBLIQUES
# =============================================================================
def moreau_envelope(
    f: FunctionOracle,
    eps: float,
    x: Sequence[float],
    cfg: InnerSolverConfig = DEFAULT_INNER,
) -> ProxResult:
    """Minimiseur et valeur de z ↦ f(z) + ‖x − z‖²/(2ε).

    Paramètres
    ----------
    f : FunctionOracle
        Fonction convexe propre.
    eps : float
        Paramètre de régularisation, strictement positif.
    x : array_like
        Point où évaluer l'enveloppe.
    cfg : InnerSolverConfig, optional
        Réglages du solveur interne.

    Retourne
    --------
    ProxResult
        Point proximal, valeur de l'enveloppe, gradient de Yosida et résidu.

    Raises
    ------
    NonConvergence
        Résidu au-dessus de la tolérance après épuisement du budget.
    EmptyDomain
        Si f vaut +∞ en tous les points sondés.

    Notes
    -----
    Stratégie : forme close si disponible, sinon recherche 1-D sur le segment
    du domaine, sinon quasi-Newton borné suivi d'un polissage par
    sous-gradient projeté.
    """
    eps = _check_eps(eps)
    x = _as_vector(x)
    if f.prox_hint is not None:
        return _result(f, eps, x, np.asarray(f.prox_hint(eps, x), float), 0.0, 0)
    if f.segment is not None:
        return _segment_prox(f, eps, x, cfg)
    return _generic_prox(f, eps, x, cfg)


def prox(
    f: FunctionOracle,
    eps: float,
    x: Sequence[float],
    cfg: InnerSolverConfig = DEFAULT_INNER,
) -> np.ndarray:
    """Prox_{εf} x : l'unique p tel que (x − p)/ε ∈ ∂f(p)."""
    return moreau_envelope(f, eps, x, cfg).prox_point


def yosida_gradient(
    f: FunctionOracle,
    eps: float,
    x: Sequence[float],
    cfg: InnerSolverConfig = DEFAULT_INNER,
) -> np.ndarray:
    """∇ᵋf[x] = (x − Prox_{εf} x)/ε, sous-gradient de f au point proximal."""
    return moreau_envelope(f, eps, x, cfg).yosida_gradient


def skew_concave_conjugate(
    f: FunctionOracle,
    y: Sequence[float],
    cfg: InnerSolverConfig = DEFAULT_INNER,
) -> ExtendedReal:
    """f^∧[y] = inf_x f(x) + ⟨y, x⟩.

    Sur un domaine non borné, la recherche est limitée à ‖x‖ <= radius_factor·
    domain_radius ; une valeur sous `conjugate_floor` est déclarée −∞.

    Raises
    ------
    NonConvergence
        Si le minimiseur ne satisfait pas la condition d'optimalité.
    """
    y = _as_vector(y)
    if f.conjugate_hint is not None:
        return f.conjugate_hint(y)

    if f.segment is not None:
        seg = f.segment
        d_unit = np.asarray(seg.direction, float) / np.linalg.norm(seg.direction)

        def phi(s):
            z = seg.point(s)
            return f.value(z) + float(np.dot(y, z))

        dphi = None
        if f.subgradient_hint is not None:

            def dphi(s):
                g = f.subgradient_hint(seg.point(s))
                return None if g is None else float(np.dot(np.asarray(g) + y, d_unit))

        s, residual, evaluations = _minimize_on_segment(seg, phi, dphi, cfg, f.name)
        if residual > math.sqrt(cfg.tolerance) * (1.0 + np.linalg.norm(y)):
            raise NonConvergence(
                f"{f.name} : conjuguée sur segment", residual, evaluations
            )
        return ExtendedReal.finite(phi(s))

    if f.subgradient_hint is None:
        raise DomainError(f"{f.name} : conjuguée générique sans sous-gradient")
    radius = cfg.radius_factor * f.domain_radius
    bounds = [(-radius, radius)] * len(y) if math.isfinite(radius) else None

    def fun(x):
        value = f.value(x)
        if not math.isfinite(value):
            return math.inf, np.zeros_like(x)
        g = f.subgradient_hint(x)
        g = np.zeros_like(x) if g is None else np.asarray(g, float)
        return value + float(np.dot(y, x)), g + y

    x0 = np.zeros_like(y)
    if not math.isfinite(f.value(x0)) and f.segment is None:
        raise EmptyDomain(f"{f.name} : point de départ hors domaine")
    res = scipy.optimize.minimize(
        fun,
        x0,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={"maxiter": cfg.max_iterations, "ftol": 1e-16, "gtol": 1e-12},
    )
    if res.fun < cfg.conjugate_floor:
        return ExtendedReal.minus_infinity()
    _, grad = fun(res.x)
    if bounds is not None:
        # Composantes bloquées sur la boîte : seule la partie admissible compte
        at_lower = res.x <= -radius * (1 - 1e-12)
        at_upper = res.x >= radius * (1 - 1e-12)
        grad = np.where((at_lower & (grad > 0)) | (at_upper & (grad < 0)), 0.0, grad)
    residual = float(np.linalg.norm(grad))
    if residual > math.sqrt(cfg.tolerance) * (1.0 + np.linalg.norm(y)):
        raise NonConvergence(f"{f.name} : conjuguée générique", residual, int(res.nit))
    return ExtendedReal.finite(res.fun)


def skew_convex_conjugate(
    g: Callable[[np.ndarray], Tuple[float, np.ndarray]],
    x: Sequence[float],
    cfg: InnerSolverConfig = DEFAULT_INNER,
    y0: Optional[Sequence[float]] = None,
) -> Tuple[ExtendedReal, np.ndarray]:
    """g^∨[x] = sup_y g(y) − ⟨y, x⟩ pour une fonction concave g.

    `g(y)` renvoie sa valeur et un sur-gradient. La montée est bornée à
    |yᵢ| <= dual_cap : atteindre la borne, ou dépasser `conjugate_ceiling`,
    déclare +∞.

    Retourne
    --------
    (valeur, y*) : Tuple[ExtendedReal, ndarray]
    """
    x = _as_vector(x)
    cap = cfg.dual_cap
    y_start = (
        np.zeros_like(x) if y0 is None else np.clip(np.asarray(y0, float), -cap, cap)
    )

    def fun(y):
        value, grad = g(y)
        return -(value - float(np.dot(y, x))), -(np.asarray(grad, float) - x)

    res = scipy.optimize.minimize(
        fun,
        y_start,
        jac=True,
        method="L-BFGS-B",
        bounds=[(-cap, cap)] * len(x),
        options={"maxiter": 500, "ftol": 1e-16, "gtol": 1e-11},
    )
    y = np.asarray(res.x, float)
    value = -float(res.fun)
    if value > cfg.conjugate_ceiling or np.any(np.abs(y) >= cap * (1 - 1e-9)):
        return ExtendedReal.plus_infinity(), y
    return ExtendedReal.finite(value), y


# =============================================================================
# CONTRÔLES
# =============================================================================
@dataclass(frozen=True, eq=False)
class LosslessEntry:
    probe: np.ndarray
    original: ExtendedReal
    recovered: ExtendedReal
    deviation: float


@dataclass(frozen=True, eq=False)
class LosslessReport:
    eps: float
    entries: Tuple[LosslessEntry, ...]
    messages: List[List[str]] = field(default_factory=list)

    @property
    def max_deviation(self) -> float:
        return max((e.deviation for e in self.entries), default=0.0)

    def passed(self, tolerance: float) -> bool:
        return self.max_deviation <= tolerance


def verify_lossless(
    f: FunctionOracle,
    eps: float,
    probes: Sequence[Sequence[float]],
    cfg: InnerSolverConfig = DEFAULT_INNER,
) -> LosslessReport:
    """Vérifie f = ((ᵋf)^∧ + (ε/2)‖·‖²)^∨ en chaque point sondé.

    Chaque étage est calculé numériquement : enveloppe (prox), conjuguée
    concave de l'enveloppe par BFGS (gradient de Yosida exact), puis
    conjuguée convexe par montée bornée. Un +∞ original doit être retrouvé
    comme +∞ (écart nul), sinon l'écart est infini.
    """
    eps = _check_eps(eps)
    warm = {"x": None}

    def envelope_conjugate(y: np.ndarray) -> Tuple[float, np.ndarray]:
        def fun(z):
            r = moreau_envelope(f, eps, z, cfg)
            return r.envelope_value + float(np.dot(y, z)), r.yosida_gradient + y

        x0 = warm["x"] if warm["x"] is not None else np.zeros_like(y)
        res = scipy.optimize.minimize(
            fun, x0, jac=True, method="BFGS", options={"gtol": 1e-11, "maxiter": 500}
        )
        warm["x"] = np.asarray(res.x, float)
        return float(res.fun), warm["x"]

    def g(y: np.ndarray) -> Tuple[float, np.ndarray]:
        value, argmin = envelope_conjugate(y)
        return value + 0.5 * eps * float(np.dot(y, y)), argmin + eps * y

    entries = []
    messages: List[List[str]] = []
    for probe in probes:
        probe = _as_vector(probe)
        original = f.evaluate(probe)
        warm["x"] = probe.copy()
        y0 = -yosida_gradient(f, eps, probe, cfg)
        recovered, _ = skew_convex_conjugate(g, probe, cfg, y0)
        if original.is_finite and recovered.is_finite:
            deviation = abs(original.value - recovered.value)
        elif original.infinity == recovered.infinity:
            deviation = 0.0
        else:
            deviation = math.inf
        entries.append(LosslessEntry(probe, original, recovered, deviation))
        flag = "success" if deviation <= math.sqrt(cfg.tolerance) else "warning"
        messages.append(
            [f"{f.name} en {np.round(probe, 6).tolist()} : écart {deviation:.3e}", flag]
        )
    return LosslessReport(eps=eps, entries=tuple(entries), messages=messages)


def spot_check_convexity(
    f: FunctionOracle,
    points: Sequence[Sequence[float]],
    rng: np.random.Generator,
    trials: int = 100,
    tol: float = 1e-10,
) -> Tuple[bool, List[List[str]]]:
    """Test du point milieu pondéré sur des paires tirées parmi `points`."""
    pts = [np.asarray(p, float) for p in points]
    messages: List[List[str]] = []
    if len(pts) < 2:
        return True, messages
    worst = 0.0
    for _ in range(trials):
        i, j = rng.choice(len(pts), size=2, replace=False)
        theta = rng.uniform()
        fx, fy = f.value(pts[i]), f.value(pts[j])
        if not (math.isfinite(fx) and math.isfinite(fy)):
            continue
        mid = f.value(theta * pts[i] + (1 - theta) * pts[j])
        worst = max(worst, mid - (theta * fx + (1 - theta) * fy))
    ok = worst <= tol
    if not ok:
        messages.append([f"{f.name} : violation de convexité {worst:.3e}", "warning"])
    return ok, messages


@dataclass(frozen=True, eq=False)
class EnvelopeLadder:
    eps: np.ndarray
    values: np.ndarray
    prox_ratios: np.ndarray
    target: ExtendedReal

    @property
    def is_monotone(self) -> bool:
        """ᵋf[x] croît quand ε décroît (à 1e-12 près)."""
        return bool(np.all(np.diff(self.values) >= -1e-12))


def envelope_ladder(
    f: FunctionOracle,
    x: Sequence[float],
    eps_list: Sequence[float] = (0.4, 0.2, 0.1, 0.05),
    cfg: InnerSolverConfig = DEFAULT_INNER,
) -> EnvelopeLadder:
    """ᵋf[x] et ‖x − prox‖²/ε sur une échelle décroissante de ε."""
    x = _as_vector(x)
    eps_arr = np.asarray(eps_list, float)
    if np.any(np.diff(eps_arr) >= 0):
        raise DomainError("l'échelle de ε doit être strictement décroissante")
    values, ratios = [], []
    for eps in eps_arr:
        r = moreau_envelope(f, eps, x, cfg)
        values.append(r.envelope_value)
        ratios.append(float(np.dot(x - r.prox_point, x - r.prox_point)) / eps)
    return EnvelopeLadder(eps_arr, np.array(values), np.array(ratios), f.evaluate(x))
