import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

# Séparateurs
SEPARATORS = {
    "separateur1": 88 * "═",
    "separateur2": 88 * "─",
}

# Codes couleurs ANSI
COLOR_GREEN = "\033[92m"
COLOR_ORANGE = "\033[38;5;214m"
COLOR_RED = "\033[91m"
COLOR_LIGHT_BLUE = "\033[94m"
COLOR_DARK_GRAY = "\033[90m"
COLOR_RESET = "\033[0m"

LOGGER_NAME = "pyMoyoDFT"


@dataclass
class FormattedMessage:
    text: str
    level: int


Formatter = Callable[[str, Optional[str]], FormattedMessage]


# -----------------------------
# Utilitaires
# -----------------------------
def _annotated_text(text: str, flag: Optional[str], compact: bool = False) -> str:
    """Préfixe un texte d'un symbole coloré selon le flag.

    Paramètres
    ----------
    text : str
        Le texte à annoter.
    flag : str, optional
        'success', 'warning', 'error', 'fatal_error' ou 'info'.
    compact : bool, optional
        Symboles courts (✓, !, ✗, i) au lieu des libellés. Défaut : False.

    Retourne
    --------
    str
        Le texte annoté (inchangé si le flag est inconnu).
    """
    labels = {
        "success": ("✓" if compact else "OK", COLOR_GREEN),
        "warning": ("!" if compact else "WARNING", COLOR_ORANGE),
        "error": ("✗" if compact else "ERREUR", COLOR_RED),
        "fatal_error": ("✗" if compact else "ERREUR", COLOR_RED),
        "info": ("i" if compact else "INFO", COLOR_LIGHT_BLUE),
    }
    if flag not in labels:
        return text
    label, color = labels[flag]
    return f"{color}{label}{COLOR_RESET} : {text}"


def _level_from_flag(flag: Optional[str]) -> int:
    """Convertit un flag en niveau de logging."""
    if flag == "warning":
        return logging.WARNING
    if flag in ("error", "fatal_error"):
        return logging.ERROR
    return logging.INFO


def fmt_generic(
    t: str,
    flag: Optional[str] = None,
    prefix: str = "",
    suffix: str = "",
    compact: bool = False,
) -> FormattedMessage:
    return FormattedMessage(
        f"{prefix}{_annotated_text(t, flag, compact)}{suffix}", _level_from_flag(flag)
    )


def fmt_separator(key: str, flag: Optional[str] = None) -> FormattedMessage:
    return FormattedMessage(
        f"{COLOR_DARK_GRAY}{SEPARATORS[key]}{COLOR_RESET}", _level_from_flag(flag)
    )


def fmt_iteration(t: str, flag: Optional[str] = None) -> FormattedMessage:
    """Ligne de trace SCF, grisée sauf si un flag la signale."""
    if flag:
        return fmt_generic(t, flag, prefix="    ", compact=True)
    return FormattedMessage(f"    {COLOR_DARK_GRAY}{t}{COLOR_RESET}", logging.INFO)


# -----------------------------
# Formatters centralisés
# -----------------------------
DEFAULT_FORMATTERS: Dict[str, Formatter] = {
    "titre1": lambda t, f=None: fmt_generic(
        t,
        f,
        prefix=f"{fmt_separator('separateur1').text}\n",
        suffix=f"\n{fmt_separator('separateur1').text}",
    ),
    "titre2": lambda t, f=None: fmt_generic(
        t, f, suffix=f"\n{fmt_separator('separateur2').text}"
    ),
    "titre3": lambda t, f=None: fmt_generic(t, f),
    "text": lambda t, f=None: fmt_generic(t, f),
    "info": lambda t, f=None: fmt_generic(t, f, prefix="  "),
    "resultat": lambda t, f=None: fmt_generic(t, f, prefix="    └─> "),
    "iteration": fmt_iteration,
    "separateur1": lambda t, f=None: fmt_separator("separateur1", f),
}

# Types de messages masqués en mode non verbeux
_VERBOSE_ONLY = ("info", "resultat", "resultat_item", "iteration")


# -----------------------------
# Classe principale
# -----------------------------
class MessageHandler:
    """Gestionnaire de messages console/fichier construit sur `logging`.

    Paramètres
    ----------
    log_file : str, optional
        Chemin du fichier de log. Si None, pas de logging fichier.
    verbose : bool, optional
        Affiche les messages d'information et les traces d'itération. Défaut : True.
    logger_name : str, optional
        Nom du logger. Défaut : "pyMoyoDFT".
    console_level : int, optional
        Niveau de logging console. Défaut : logging.INFO.
    file_level : int, optional
        Niveau de logging fichier. Défaut : logging.DEBUG.
    formatters : Dict[str, Formatter], optional
        Formatters personnalisés. Si None, utilise DEFAULT_FORMATTERS.
    """

    def __init__(
        self,
        log_file: Optional[str] = None,
        verbose: bool = True,
        logger_name: str = LOGGER_NAME,
        console_level: int = logging.INFO,
        file_level: int = logging.DEBUG,
        formatters: Optional[Dict[str, Formatter]] = None,
    ):
        self.verbose = bool(verbose)
        self._logger = logging.getLogger(logger_name)
        self._formatters = formatters or DEFAULT_FORMATTERS
        self._configure_logger(log_file, console_level, file_level)

    def _configure_logger(self, log_file, console_level, file_level):
        # Les handlers sont reconstruits à chaque instanciation : la CLI peut être
        # invoquée plusieurs fois dans le même processus (tests).
        for handler in list(self._logger.handlers):
            self._logger.removeHandler(handler)
            handler.close()
        self._logger.setLevel(logging.DEBUG)
        self._logger.propagate = False
        console = logging.StreamHandler()
        console.setLevel(console_level if self.verbose else logging.WARNING)
        console.setFormatter(logging.Formatter("%(message)s"))
        self._logger.addHandler(console)
        if log_file:
            fh = logging.FileHandler(log_file, encoding="utf-8")
            fh.setLevel(file_level)
            fh.setFormatter(
                logging.Formatter(
                    "%(asctime)s %(levelname)s: %(message)s", "%Y-%m-%d %H:%M:%S"
                )
            )
            self._logger.addHandler(fh)

    def format_message(
        self, typ: str, texte: str, flag: Optional[str] = None, last: bool = False
    ) -> FormattedMessage:
        """Formate un message selon son type ('titre1', 'info', 'resultat_item'...)."""
        if typ == "resultat_item":
            char = "└" if last else "├"
            return fmt_generic(
                texte,
                flag,
                prefix=f"    {COLOR_DARK_GRAY}{char}─{COLOR_RESET} ",
                compact=True,
            )
        fmt = self._formatters.get(typ)
        if fmt is None:
            return FormattedMessage(texte or "", _level_from_flag(flag))
        return fmt(texte or "", flag)

    def emit(self, message: dict):
        """Émet un message décrit par un dictionnaire.

        Clés reconnues : 'type', 'texte', 'flag', 'verbose' (False pour ignorer)
        et 'last' (dernier élément d'une liste).
        """
        if not message or message.get("verbose") is False:
            return
        typ = message.get("type", "info")
        flag = message.get("flag")
        # Les avertissements et erreurs passent même en mode silencieux
        if not self.verbose and typ in _VERBOSE_ONLY and flag not in (
            "warning",
            "error",
            "fatal_error",
        ):
            return
        formatted = self.format_message(
            typ, message.get("texte", ""), flag, message.get("last", False)
        )
        self._logger.log(formatted.level, formatted.text)

    # Helpers
    def msg(
        self,
        typ: str,
        texte: str,
        verbose: Optional[bool] = None,
        flag: Optional[str] = None,
    ):
        m = {"type": typ, "texte": texte}
        if verbose is not None:
            m["verbose"] = verbose
        if flag is not None:
            m["flag"] = flag
        self.emit(m)

    # Méthodes pratiques
    def titre1(self, texte, verbose=None):
        self.msg("titre1", texte, verbose)

    def titre2(self, texte, verbose=None):
        self.msg("titre2", texte, verbose)

    def titre3(self, texte, verbose=None):
        self.msg("titre3", texte, verbose)

    def text(self, texte, verbose=None, flag=None):
        self.msg("text", texte, verbose, flag)

    def info(self, texte, verbose=None, flag=None):
        self.msg("info", texte, verbose, flag)

    def warning(self, texte, verbose=None):
        self.msg("info", texte, verbose, flag="warning")

    def success(self, texte, verbose=None):
        self.msg("info", texte, verbose, flag="success")

    def resultat(self, texte, verbose=None, flag=None):
        self.msg("resultat", texte, verbose, flag)

    def resultat_item(self, texte, verbose=None, flag=None, last: bool = False):
        m = {"type": "resultat_item", "texte": texte, "last": last}
        if verbose is not None:
            m["verbose"] = verbose
        if flag is not None:
            m["flag"] = flag
        self.emit(m)

    def iteration(self, texte, flag=None):
        self.msg("iteration", texte, flag=flag)

    def separateur1(self):
        self.msg("separateur1", "")

    def affiche_messages(
        self, messages: List[object], type: str = "info", format_last: bool = True
    ):
        """Affiche une liste de messages `[texte, flag]` (ou de chaînes)."""
        if not messages:
            return
        for idx, entry in enumerate(messages):
            texte, flag = (
                (entry[0], entry[1])
                if isinstance(entry, (list, tuple))
                else (str(entry), None)
            )
            if type == "resultat_item":
                is_last = format_last and idx == len(messages) - 1
                self.resultat_item(texte, flag=flag, last=is_last)
            elif type == "resultat":
                self.resultat(texte, flag=flag)
            else:
                self.info(texte, flag=flag)

    def affiche_tableau(self, headers: Sequence[str], rows: Sequence[Sequence[str]]):
        """Affiche un tableau aligné (colonnes séparées par deux espaces)."""
        widths = [len(h) for h in headers]
        for row in rows:
            widths = [max(w, len(str(c))) for w, c in zip(widths, row)]
        line = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
        self.info(line)
        self.info("  ".join("-" * w for w in widths))
        for row in rows:
            self.info("  ".join(str(c).ljust(w) for c, w in zip(row, widths)))


class NoOpMessageHandler:
    """Handler silencieux qui implémente l'interface MessageHandler sans rien faire."""

    verbose = False

    def emit(self, message: dict):
        pass

    def msg(self, typ, texte, verbose=None, flag=None):
        pass

    def titre1(self, texte, verbose=None):
        pass

    def titre2(self, texte, verbose=None):
        pass

    def titre3(self, texte, verbose=None):
        pass

    def text(self, texte, verbose=None, flag=None):
        pass

    def info(self, texte, verbose=None, flag=None):
        pass

    def warning(self, texte, verbose=None):
        pass

    def success(self, texte, verbose=None):
        pass

    def resultat(self, texte, verbose=None, flag=None):
        pass

    def resultat_item(self, texte, verbose=None, flag=None, last: bool = False):
        pass

    def iteration(self, texte, flag=None):
        pass

    def separateur1(self):
        pass

    def affiche_messages(self, messages, type="info", format_last=True):
        pass

    def affiche_tableau(self, headers, rows):
        pass
