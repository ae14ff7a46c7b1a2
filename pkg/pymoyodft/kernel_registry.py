"""Registre des noyaux d'interaction du modèle sur réseau.

Les noyaux fournis sont `soft_coulomb` (défaut) et `hubbard`. Un noyau
personnalisé peut être découvert dynamiquement dans custom/kernel.py, sans
modifier le code source du paquet : il est alors disponible sous le nom
`custom`.
"""

import importlib.util
import sys
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, List, Optional

# noyau(i, j, U) -> énergie d'interaction entre deux spin-orbitales des sites i et j
Kernel = Callable[[int, int, float], float]

CUSTOM_KERNEL_PATH = Path(__file__).resolve().parents[1] / "custom" / "kernel.py"


def soft_coulomb(i: int, j: int, strength: float) -> float:
    """Coulomb adouci U/(|i−j|+1), borné et positif."""
    return strength / (abs(i - j) + 1)


def hubbard(i: int, j: int, strength: float) -> float:
    """Interaction purement locale (U sur un même site, 0 sinon)."""
    return strength if i == j else 0.0


BUILTIN_KERNELS: Dict[str, Kernel] = {
    "soft_coulomb": soft_coulomb,
    "hubbard": hubbard,
}


def discover_custom_kernel(path: Optional[Path] = None) -> Optional[Kernel]:
    """Découvre une fonction `custom_kernel(i, j, U)` dans custom/kernel.py.

    Paramètres
    ----------
    path : Path, optional
        Fichier à charger. Défaut : custom/kernel.py à la racine du dépôt.

    Retourne
    --------
    Callable | None
        La fonction si elle existe et est appelable, None sinon.

    Notes
    -----
    Les erreurs d'import sont silencieuses : le noyau `custom` est alors
    simplement indisponible. Le module n'est exécuté qu'une fois par version
    (date de modification) du fichier.
    """
    module_path = path or CUSTOM_KERNEL_PATH
    try:
        stamp = module_path.stat().st_mtime_ns
    except OSError:
        return None
    return _load_kernel(module_path, stamp)


@lru_cache(maxsize=8)
def _load_kernel(module_path: Path, stamp: int) -> Optional[Kernel]:
    try:
        spec = importlib.util.spec_from_file_location("custom_kernel", module_path)
        if spec is None or spec.loader is None:
            return None
        module = importlib.util.module_from_spec(spec)
        sys.modules["custom_kernel"] = module
        spec.loader.exec_module(module)
        kernel = getattr(module, "custom_kernel", None)
        return kernel if callable(kernel) else None
    except Exception:
        return None


def available_kernels() -> List[str]:
    names = list(BUILTIN_KERNELS)
    if discover_custom_kernel() is not None:
        names.append("custom")
    return names


def get_kernel(name: str) -> Kernel:
    """Retourne le noyau nommé.

    Raises
    ------
    KeyError
        Si le nom est inconnu (ou `custom` sans custom/kernel.py valide).
    """
    if name in BUILTIN_KERNELS:
        return BUILTIN_KERNELS[name]
    if name == "custom":
        kernel = discover_custom_kernel()
        if kernel is not None:
            return kernel
    raise KeyError(name)
