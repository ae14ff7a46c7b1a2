from pathlib import Path

import numpy as np
import pytest

from pymoyodft.lattice_model import LatticeSpec
from pymoyodft.lieb_dual import DualAscentConfig


@pytest.fixture
def dimer() -> LatticeSpec:
    """Un électron sur deux sites, t = 1/2."""
    return LatticeSpec(sites=2, electrons=1, hopping=0.5, interaction_strength=1.0)


@pytest.fixture
def trimer() -> LatticeSpec:
    """Deux électrons sur trois sites, U = 1 (singulet non dégénéré)."""
    return LatticeSpec(sites=3, electrons=2, hopping=0.5, interaction_strength=1.0)


@pytest.fixture
def dual() -> DualAscentConfig:
    return DualAscentConfig(tolerance=1e-9)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def write_config(tmp_path):
    """Écrit un fichier de configuration d'expérience (clés pointées)."""

    def _write(lines, name: str = "run.toml") -> Path:
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return _write


@pytest.fixture
def custom_dir(tmp_path, monkeypatch):
    """Répertoire custom/ temporaire ; l'environnement injecté est restauré."""
    folder = tmp_path / "custom"
    folder.mkdir()
    monkeypatch.setattr("pymoyodft.config.CUSTOM_DIR", folder)
    for key in (
        "MOYODFT_MAX_BASIS",
        "MOYODFT_LIMITS_MAX_BASIS",
        "MOYODFT_LIMITS_DEGENERACY_TOL",
        "MOYODFT_OUTPUT_DIGITS",
        "MOYODFT_OUTPUT_DELIMITER",
    ):
        # setenv first so monkeypatch records the original (possibly absent)
        # value and restores it even if load_dotenv / TOML injection sets it.
        monkeypatch.setenv(key, "")
        monkeypatch.delenv(key)
    return folder
