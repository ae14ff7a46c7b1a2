"""Configuration management from TOML files and environment variables.

Two layers are handled here.

Package settings (limits, output format) follow a three-step loading order:
custom/.env, then the versioned pymoyodft/config/config.default.toml, then
custom/config.toml. The merged TOML is flattened into MOYODFT_* environment
variables and read back into frozen dataclasses.

Primary Usage (recommended):
    from pymoyodft.config import load_config

    cfg = load_config()
    print(cfg.limits.max_basis)           # Taille maximale de la base de Fock
    print(cfg.output.digits)              # Chiffres significatifs des CSV

Direct Access (for custom needs):
    from pymoyodft.config import get_int, max_basis_cap

    cap = max_basis_cap()                 # MOYODFT_MAX_BASIS prioritaire

Run configuration files (--config) are TOML documents written with dotted
keys, i.e. a flat key = value list:

    model.sites = 2
    solver.eps = 0.1
    run.v_ext = [1.0, -1.0]

load_run_config() validates every key against RUN_KEYS (unknown keys are
errors naming the key), fills the missing ones from the package defaults and
returns a frozen RunConfig.

Notes:
- Values are read from os.environ at call time (no persistent cache).
- For booleans, accepted values: 1, true, yes, y, on; falsy: 0, false, no, n, off.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, Iterable, Optional, Tuple

from .exceptions import ConfigError

# Support TOML pour Python 3.11+ (tomllib) et versions antérieures (tomli)
if sys.version_info >= (3, 11):
    import tomllib
else:
    try:
        import tomli as tomllib
    except ImportError:
        tomllib = None  # type: ignore

if TYPE_CHECKING:
    from .lattice_model import LatticeSpec
    from .lieb_dual import DualAscentConfig
    from .scf_solvers import ScfConfig

__all__ = [
    "get_str",
    "get_int",
    "get_float",
    "get_bool",
    "get_list",
    "max_basis_cap",
    "LimitsConfig",
    "OutputConfig",
    "AppConfig",
    "load_config",
    "RunConfig",
    "RUN_KEYS",
    "load_run_config",
    "parse_run_config",
]

ENV_PREFIX = "MOYODFT"
DEFAULT_MAX_BASIS = 4096

PACKAGE_DIR = Path(__file__).resolve().parent
DEFAULT_CONFIG_PATH = PACKAGE_DIR / "config" / "config.default.toml"
CUSTOM_DIR = PACKAGE_DIR.parent / "custom"


def get_str(key: str, default: Optional[str] = None) -> Optional[str]:
    """Return an environment variable as string, or default if missing."""
    return os.environ.get(key, default)


def get_int(key: str, default: Optional[int] = None) -> Optional[int]:
    """Return an environment variable parsed as int, or default if invalid/missing."""
    val = os.environ.get(key)
    if val is None:
        return default
    try:
        return int(str(val).strip())
    except (TypeError, ValueError):
        return default


def get_float(key: str, default: Optional[float] = None) -> Optional[float]:
    """Return an environment variable parsed as float, or default if invalid/missing."""
    val = os.environ.get(key)
    if val is None:
        return default
    try:
        return float(str(val).strip())
    except (TypeError, ValueError):
        return default


_TRUTHY = {"1", "true", "yes", "y", "on"}
_FALSY = {"0", "false", "no", "n", "off"}


def get_bool(key: str, default: bool = False) -> bool:
    """Return an environment variable parsed as bool, or default if invalid/missing."""
    val = os.environ.get(key)
    if val is None:
        return default
    s = str(val).strip().lower()
    if s in _TRUTHY:
        return True
    if s in _FALSY:
        return False
    return default


def get_list(
    key: str, default: Optional[Iterable[str]] = None, sep: str = ","
) -> list[str]:
    """Return an environment variable as a list of strings, split by `sep`."""
    val = os.environ.get(key)
    if val is None:
        return list(default) if default is not None else []
    parts = [p.strip() for p in val.split(sep)]
    return [p for p in parts if p]


def max_basis_cap() -> int:
    """Taille maximale de la base de Fock.

    MOYODFT_MAX_BASIS (variable d'environnement posée par l'utilisateur) est
    prioritaire sur la valeur [limits] max_basis des fichiers TOML.
    """
    cap = get_int(f"{ENV_PREFIX}_MAX_BASIS")
    if cap is None:
        cap = get_int(f"{ENV_PREFIX}_LIMITS_MAX_BASIS", DEFAULT_MAX_BASIS)
    return int(cap)


# =========================
# TOML Configuration Loading
# =========================


def _deep_merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    """Merge override dict into base dict recursively (lists are replaced)."""
    result = base.copy()
    for key, value in override.items():
        if key in result and isinstance(result[key], dict) and isinstance(value, dict):
            result[key] = _deep_merge(result[key], value)
        else:
            result[key] = value
    return result


def _flatten_toml_to_env(data: dict[str, Any], prefix: str = "") -> dict[str, str]:
    """Convert nested TOML dict to flat ENV-style dict.

    Example:
        {"limits": {"max_basis": 4096}} with prefix "MOYODFT"
        → {"MOYODFT_LIMITS_MAX_BASIS": "4096"}
    """
    result = {}
    for key, value in data.items():
        env_key = f"{prefix}_{key}".upper() if prefix else key.upper()
        if isinstance(value, dict):
            result.update(_flatten_toml_to_env(value, env_key))
        elif isinstance(value, list):
            result[env_key] = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            result[env_key] = "true" if value else "false"
        else:
            result[env_key] = str(value)
    return result


def _flatten_dotted(data: dict[str, Any], prefix: str = "") -> dict[str, Any]:
    """Aplatit un dictionnaire TOML en clés pointées ('model.sites')."""
    result: dict[str, Any] = {}
    for key, value in data.items():
        dotted = f"{prefix}.{key}" if prefix else key
        if isinstance(value, dict):
            result.update(_flatten_dotted(value, dotted))
        else:
            result[dotted] = value
    return result


def _load_toml_file(path: Path, strict: bool = False) -> dict[str, Any]:
    """Load a TOML file and return its content as dict.

    Les fichiers de paquet manquants ou invalides sont ignorés ; en mode
    `strict` (fichier fourni par l'utilisateur), toute erreur est levée.
    """
    if tomllib is None:
        if strict:
            raise ConfigError(str(path), "lecture TOML indisponible (installer tomli)")
        return {}
    if not path.exists():
        if strict:
            raise ConfigError(str(path), "fichier introuvable")
        return {}
    try:
        with open(path, "rb") as f:
            return tomllib.load(f)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        if strict:
            raise ConfigError(str(path), f"fichier illisible ({exc})") from exc
        return {}


def _package_toml() -> dict[str, Any]:
    """Valeurs par défaut versionnées fusionnées avec custom/config.toml."""
    default_config = _load_toml_file(DEFAULT_CONFIG_PATH)
    custom_config = _load_toml_file(CUSTOM_DIR / "config.toml")
    return _deep_merge(default_config, custom_config)


def _load_config_from_toml() -> None:
    """Load custom/.env then the TOML files, and inject them into os.environ.

    Les variables posées dans custom/.env ou par l'utilisateur sous la forme
    MOYODFT_MAX_BASIS restent hors de l'espace de noms TOML et ne sont donc
    jamais écrasées.
    """
    custom_env_path = CUSTOM_DIR / ".env"
    if custom_env_path.exists():
        from dotenv import load_dotenv

        load_dotenv(custom_env_path, override=False)

    for key, value in _flatten_toml_to_env(_package_toml(), ENV_PREFIX).items():
        os.environ[key] = value


# =========================
# Section-based dataclasses
# =========================
@dataclass(frozen=True)
class LimitsConfig:
    """Garde-fous numériques."""

    max_basis: int
    degeneracy_tol: float

    @classmethod
    def from_env(cls) -> "LimitsConfig":
        return cls(
            max_basis=max_basis_cap(),
            degeneracy_tol=get_float(f"{ENV_PREFIX}_LIMITS_DEGENERACY_TOL", 1e-10),
        )


@dataclass(frozen=True)
class OutputConfig:
    """Format des sorties CSV."""

    digits: int
    delimiter: str

    @classmethod
    def from_env(cls) -> "OutputConfig":
        return cls(
            digits=get_int(f"{ENV_PREFIX}_OUTPUT_DIGITS", 17),
            delimiter=get_str(f"{ENV_PREFIX}_OUTPUT_DELIMITER", ","),
        )


@dataclass(frozen=True)
class AppConfig:
    limits: LimitsConfig
    output: OutputConfig

    @classmethod
    def from_env(cls) -> "AppConfig":
        return cls(limits=LimitsConfig.from_env(), output=OutputConfig.from_env())


def load_config() -> AppConfig:
    """Load configuration from TOML files and environment variables.

    Loading order (later overrides earlier):
    1. custom/.env (si le fichier existe)
    2. pymoyodft/config/config.default.toml (versioned defaults)
    3. custom/config.toml (local overrides, not versioned)
    """
    _load_config_from_toml()
    return AppConfig.from_env()


# =========================
# Run configuration (--config)
# =========================

# Clé pointée -> type attendu ("int", "float", "str", "floats" = liste de réels)
RUN_KEYS: Dict[str, str] = {
    "model.sites": "int",
    "model.electrons": "int",
    "model.hopping": "float",
    "model.interaction_strength": "float",
    "model.lambda": "float",
    "model.kernel": "str",
    "solver.eps": "float",
    "solver.step_policy": "str",
    "solver.residual_tol": "float",
    "solver.max_outer": "int",
    "dual.tolerance": "float",
    "dual.max_iterations": "int",
    "dual.step_rule": "str",
    "dual.restart_count": "int",
    "run.v_ext": "floats",
    "run.rho": "floats",
    "run.output_path": "str",
    "run.seed": "int",
    "verify.tolerance": "float",
    "verify.samples": "int",
    "verify.moreau_probes": "int",
}


@dataclass(frozen=True)
class RunConfig:
    """Configuration complète d'une expérience lancée depuis la CLI."""

    model: "LatticeSpec"
    solver: "ScfConfig"
    dual: "DualAscentConfig"
    v_ext: Tuple[float, ...]
    rho: Optional[Tuple[float, ...]]
    output_path: str
    seed: int
    verify_tolerance: Optional[float]
    verify_samples: int
    verify_moreau_probes: int

    def with_seed(self, seed: Optional[int]) -> "RunConfig":
        if seed is None:
            return self
        from dataclasses import replace

        return replace(self, seed=int(seed))


def _coerce(key: str, value: Any) -> Any:
    """Vérifie le type d'une valeur et la convertit."""
    kind = RUN_KEYS[key]
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"entier attendu, reçu {value!r}")
        return int(value)
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"réel attendu, reçu {value!r}")
        return float(value)
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(key, f"chaîne attendue, reçu {value!r}")
        return value
    if not isinstance(value, list) or any(
        isinstance(v, bool) or not isinstance(v, (int, float)) for v in value
    ):
        raise ConfigError(key, f"liste de réels attendue, reçu {value!r}")
    return tuple(float(v) for v in value)


def _default_run_values() -> dict[str, Any]:
    data = _flatten_dotted(_package_toml())
    return {k: v for k, v in data.items() if k in RUN_KEYS}


def parse_run_config(
    data: dict[str, Any], limits: Optional[LimitsConfig] = None
) -> RunConfig:
    """Construit un RunConfig à partir d'un dictionnaire TOML déjà chargé.

    `limits` fournit la tolérance de dégénérescence du modèle (lue dans
    l'environnement si absent).

    Raises
    ------
    ConfigError
        Clé inconnue, valeur mal typée ou hors domaine (le message nomme la clé).
    """
    from .lattice_model import LatticeSpec
    from .lieb_dual import STEP_RULES, DualAscentConfig
    from .scf_solvers import STEP_POLICIES, ScfConfig

    user = _flatten_dotted(data)
    for key in user:
        if key not in RUN_KEYS:
            raise ConfigError(key, "clé inconnue")

    values = _default_run_values()
    values.update(user)
    v = {key: _coerce(key, values[key]) for key in values}

    def need(key: str) -> Any:
        if key not in v:
            raise ConfigError(key, "valeur manquante")
        return v[key]

    sites = need("model.sites")
    if sites < 1:
        raise ConfigError("model.sites", "au moins un site est requis")
    electrons = need("model.electrons")
    if not 1 <= electrons <= 2 * sites:
        raise ConfigError("model.electrons", f"doit être dans [1, {2 * sites}]")
    checks = [
        ("model.hopping", lambda x: x > 0, "doit être > 0"),
        ("model.interaction_strength", lambda x: x >= 0, "doit être >= 0"),
        ("model.lambda", lambda x: 0.0 <= x <= 1.0, "doit être dans [0, 1]"),
        ("solver.eps", lambda x: x > 0, "doit être > 0"),
        ("solver.residual_tol", lambda x: x > 0, "doit être > 0"),
        ("solver.max_outer", lambda x: x >= 1, "doit être >= 1"),
        ("dual.tolerance", lambda x: x > 0, "doit être > 0"),
        ("dual.max_iterations", lambda x: x >= 1, "doit être >= 1"),
        ("dual.restart_count", lambda x: x >= 0, "doit être >= 0"),
        ("verify.samples", lambda x: x >= 1, "doit être >= 1"),
        ("verify.moreau_probes", lambda x: x >= 2, "doit être >= 2"),
        ("verify.tolerance", lambda x: x >= 0, "doit être >= 0"),
    ]
    for key, ok, text in checks:
        if not ok(need(key)):
            raise ConfigError(key, text)
    if need("solver.step_policy") not in STEP_POLICIES:
        raise ConfigError(
            "solver.step_policy", f"valeurs possibles : {', '.join(STEP_POLICIES)}"
        )
    if need("dual.step_rule") not in STEP_RULES:
        raise ConfigError(
            "dual.step_rule", f"valeurs possibles : {', '.join(STEP_RULES)}"
        )

    from .kernel_registry import available_kernels

    if need("model.kernel") not in available_kernels():
        raise ConfigError(
            "model.kernel", f"noyaux disponibles : {', '.join(available_kernels())}"
        )

    v_ext = v.get("run.v_ext") or tuple(0.0 for _ in range(sites))
    if len(v_ext) != sites:
        raise ConfigError(
            "run.v_ext", f"{sites} valeurs attendues, {len(v_ext)} reçues"
        )
    rho = v.get("run.rho") or None
    if rho is not None and len(rho) != sites:
        raise ConfigError("run.rho", f"{sites} valeurs attendues, {len(rho)} reçues")

    model = LatticeSpec(
        sites=sites,
        electrons=electrons,
        hopping=v["model.hopping"],
        interaction_strength=v["model.interaction_strength"],
        lambda_=v["model.lambda"],
        kernel=v["model.kernel"],
        degeneracy_tol=(limits or LimitsConfig.from_env()).degeneracy_tol,
    )
    solver = ScfConfig(
        eps=v["solver.eps"],
        step_policy=v["solver.step_policy"],
        residual_tol=v["solver.residual_tol"],
        max_outer=v["solver.max_outer"],
    )
    dual = DualAscentConfig(
        tolerance=v["dual.tolerance"],
        max_iterations=v["dual.max_iterations"],
        step_rule=v["dual.step_rule"],
        restart_count=v["dual.restart_count"],
    )
    verify_tolerance = need("verify.tolerance")
    return RunConfig(
        model=model,
        solver=solver,
        dual=dual,
        v_ext=tuple(v_ext),
        rho=tuple(rho) if rho is not None else None,
        output_path=v.get("run.output_path", ""),
        seed=need("run.seed"),
        # 0 signifie « tolérances propres à chaque contrôle »
        verify_tolerance=verify_tolerance if verify_tolerance > 0 else None,
        verify_samples=need("verify.samples"),
        verify_moreau_probes=need("verify.moreau_probes"),
    )


def load_run_config(path: Optional[str | Path] = None) -> RunConfig:
    """Charge un fichier de configuration d'expérience (ou les seuls défauts).

    custom/.env et custom/config.toml sont chargés avant la lecture, de sorte que
    [limits] s'applique aux calculs qui suivent.
    """
    app = load_config()
    data = _load_toml_file(Path(path), strict=True) if path else {}
    return parse_run_config(data, app.limits)
