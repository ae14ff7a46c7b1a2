from typing import List, Optional


class MoyoError(Exception):
    """Exception de base pour pyMoyoDFT.

    L'attribut `messages` contient éventuellement la liste des messages
    générés avant l'échec (paires `[message, flag]`), à afficher par la CLI.
    """

    def __init__(self, text: str = "", messages: Optional[List[List[str]]] = None):
        self.messages = messages or []
        super().__init__(text)


class NonConvergence(MoyoError):
    """Levée quand un solveur interne épuise son budget d'itérations.

    Paramètres
    ----------
    residual : float
        Dernier résidu d'optimalité obtenu (au-dessus de la tolérance).
    iterations : int
        Nombre d'itérations effectuées.
    """

    def __init__(
        self,
        text: str,
        residual: float,
        iterations: int,
        messages: Optional[List[List[str]]] = None,
    ):
        self.residual = float(residual)
        self.iterations = int(iterations)
        super().__init__(
            f"{text} (résidu {self.residual:.3e} après {self.iterations} itérations)",
            messages,
        )


class EmptyDomain(MoyoError):
    """La fonction vaut +∞ en tous les points sondés."""


class DimensionMismatch(MoyoError, ValueError):
    """Un vecteur n'a pas la longueur attendue (nombre de sites)."""


class BasisTooLarge(MoyoError):
    """La base de Fock dépasse la taille maximale autorisée."""

    def __init__(self, dimension: int, cap: int):
        self.dimension = int(dimension)
        self.cap = int(cap)
        super().__init__(
            f"Base de dimension {self.dimension} > {self.cap} "
            "(ajuster MOYODFT_MAX_BASIS pour relever la limite)"
        )


class EigensolverFailure(MoyoError):
    """La diagonalisation dense a échoué."""


class StalledLineSearch(MoyoError):
    """Le rebroussement dyadique n'a trouvé aucun pas admissible."""

    def __init__(self, halvings: int):
        self.halvings = int(halvings)
        super().__init__(f"Aucun pas admissible après {self.halvings} divisions par 2")


class ZeroDirection(MoyoError):
    """Direction de recherche nulle : aucun pas n'est défini."""


class DomainError(MoyoError, ValueError):
    """Argument hors du domaine de définition d'un oracle."""


class ConfigError(MoyoError):
    """Erreur dans un fichier de configuration.

    Paramètres
    ----------
    key : str
        Clé fautive (ex: 'model.sites'), reprise dans le message.
    """

    def __init__(self, key: str, text: str):
        self.key = key
        super().__init__(f"{key} : {text}")
