import csv
import io
import math
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

from .exceptions import MoyoError

Cell = Union[float, int, str, bool, None]


def format_number(x: Cell, digits: int = 17) -> str:
    """Représentation décimale aller-retour d'un nombre pour les CSV.

    Paramètres
    ----------
    x : float | int | str | bool | None
        Valeur à formater. None donne une cellule vide, un booléen donne
        `true`/`false`, une chaîne est laissée telle quelle.
    digits : int, optional
        Chiffres significatifs. Défaut : 17 (aller-retour exact en double).

    Retourne
    --------
    str
        `inf`, `-inf` et `nan` pour les valeurs non finies.
    """
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, str):
        return x
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, f".{digits}g")


def csv_text(
    header: Sequence[str],
    rows: Iterable[Sequence[Cell]],
    digits: int = 17,
    delimiter: str = ",",
) -> str:
    """Contenu CSV (fins de ligne `\\n`, en-tête obligatoire)."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, delimiter=delimiter, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(c, digits) for c in row])
    return buffer.getvalue()


def write_csv(
    path: Union[str, Path],
    header: Sequence[str],
    rows: Iterable[Sequence[Cell]],
    digits: int = 17,
    delimiter: str = ",",
    extra: Optional[str] = None,
) -> List[List[str]]:
    """Écrit un fichier CSV, suivi éventuellement d'un bloc déjà formaté.

    Retourne
    --------
    List[List[str]]
        Messages `[texte, flag]` à afficher.

    Raises
    ------
    MoyoError
        Si le fichier ne peut pas être écrit.
    """
    content = csv_text(header, rows, digits, delimiter) + (extra or "")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as f:
            f.write(content)
    except OSError as exc:
        raise MoyoError(
            f"Écriture impossible : {path}",
            [[f"Écriture de {path.name} impossible : {exc}", "error"]],
        ) from exc
    return [[f"Fichier écrit : {path}", "success"]]
