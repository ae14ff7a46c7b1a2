"""pyMoyoDFT package

Les surcharges locales (MOYODFT_MAX_BASIS...) sont chargées depuis custom/.env
via config.py lors de l'appel à load_config().
Toute autre configuration provient des fichiers TOML.
"""

from __future__ import annotations

from .convex_core import (
    ExtendedReal,
    FunctionOracle,
    moreau_envelope,
    prox,
    skew_concave_conjugate,
    yosida_gradient,
)
from .lattice_model import LatticeSpec, energy, ground_state
from .lieb_dual import hxc_gradient, lieb_F, regularize, regularized_energy
from .scf_solvers import ScfConfig, myks_scf, myksoda, run_scf

__all__ = [
    "ExtendedReal",
    "FunctionOracle",
    "moreau_envelope",
    "prox",
    "yosida_gradient",
    "skew_concave_conjugate",
    "LatticeSpec",
    "energy",
    "ground_state",
    "lieb_F",
    "regularize",
    "regularized_energy",
    "hxc_gradient",
    "ScfConfig",
    "myks_scf",
    "myksoda",
    "run_scf",
]
