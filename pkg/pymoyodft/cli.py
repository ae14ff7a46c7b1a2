from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence

import click
import numpy as np

from .config import RunConfig, load_config, load_run_config
from .exceptions import ConfigError, MoyoError
from .file_helpers import csv_text, write_csv
from .lattice_model import adiabatic_curve
from .lieb_dual import regularize
from .logger import (
    COLOR_GREEN,
    COLOR_LIGHT_BLUE,
    COLOR_RED,
    COLOR_RESET,
    MessageHandler,
)
from .oracles import REPORT_HEADER, acceptance_battery, write_reports_csv
from .scf_solvers import run_scf

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2

TRACE_HEADER = ("iter", "e_i", "t_i", "residual", "parabola_gap")
EPS_SWEEP_HEADER = ("eps", "envelope", "residual", "delta", "monotone")
LAMBDA_SWEEP_HEADER = ("lambda", "energy", "delta", "midpoint_slack", "concave")

# Tolérance des colonnes de contrôle des balayages
SWEEP_TOL = 1e-10


@click.group()
@click.option(
    "--log-file", "-L", type=click.Path(), default=None, help="Chemin du fichier de log"
)
@click.option(
    "--no-verbose",
    is_flag=True,
    default=False,
    help="Désactive les messages d'information",
)
@click.pass_context
def main(ctx, log_file, no_verbose):
    """pyMoyoDFT CLI"""
    handler = MessageHandler(log_file=log_file, verbose=not no_verbose)
    # custom/.env et custom/config.toml avant toute commande
    ctx.obj = {"msg": handler, "config": load_config()}


config_option = click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="Fichier TOML de l'expérience (clés model.*, solver.*, dual.*, run.*)",
)
out_option = click.option(
    "--out",
    type=click.Path(dir_okay=False),
    default=None,
    help="Fichier CSV de sortie (prioritaire sur run.output_path)",
)
seed_option = click.option(
    "--seed", type=int, default=None, help="Graine (prioritaire sur run.seed)"
)


@main.command()
@config_option
@out_option
@seed_option
@click.pass_context
def solve(ctx, config_path, out, seed):
    """Lance la boucle SCF régularisée et écrit sa trace."""
    msg: MessageHandler = ctx.obj["msg"]
    msg.titre1("SOLVE : minimisation SCF régularisée")

    try:
        run = _load_run(config_path, seed)
        _describe_run(msg, run)
        result = run_scf(
            run.model, run.v_ext, run.solver, dual=run.dual, rho0=run.rho, msg=msg
        )
    except MoyoError as exc:
        return _exit_with_error(ctx, msg, exc)

    rows = [
        (it.index, it.energy, it.step, it.residual, it.parabola_gap)
        for it in result.trace
    ]
    sites = run.model.sites
    summary_header = ["E1"] + [f"rho_eps_{i + 1}" for i in range(sites)]
    summary_row = [result.energy_estimate] + list(result.physical_density)

    try:
        extra = (summary_header, [summary_row])
        _emit_csv(ctx, run, out, TRACE_HEADER, rows, extra=extra)
    except MoyoError as exc:
        return _exit_with_error(ctx, msg, exc)

    density = ", ".join(f"{x:.8f}" for x in result.physical_density)
    msg.affiche_messages(
        [
            [f"Itérations : {len(result.trace)}", "info"],
            [f"ᵋE¹[v_ext] : {result.energy_estimate:.12f}", "info"],
            [f"Énergie fondamentale : {result.ground_energy:.12f}", "info"],
            [f"Densité physique : ({density})", "info"],
            [f"Résidu final : {result.residual:.3e}", "info"],
        ],
        "resultat_item",
    )
    if result.converged:
        msg.success("Convergence atteinte")
        return _exit_with_separator(ctx, msg, EXIT_OK)
    msg.warning(
        f"Pas de convergence après {run.solver.max_outer} itérations "
        f"(résidu {result.residual:.3e})"
    )
    return _exit_with_separator(ctx, msg, EXIT_NOT_CONVERGED)


@main.command()
@config_option
@out_option
@seed_option
@click.option(
    "--rho", default=None, help="Quasi-densité, liste séparée par des virgules"
)
@click.pass_context
def prox(ctx, config_path, out, seed, rho):
    """Densité et potentiel proximaux d'une quasi-densité."""
    msg: MessageHandler = ctx.obj["msg"]
    msg.titre1("PROX : point proximal de la fonctionnelle de Lieb")

    try:
        run = _load_run(config_path, seed)
        quasidensity = _quasidensity(run, rho)
        _describe_run(msg, run)
        point = regularize(
            run.model, run.solver.eps, quasidensity, cfg=run.dual, msg=msg
        )
        sites = run.model.sites
        header = (
            [f"rho_eps_{i + 1}" for i in range(sites)]
            + [f"v_eps_{i + 1}" for i in range(sites)]
            + ["envelope", "residual"]
        )
        row = (
            list(point.proximal_density)
            + list(point.proximal_potential)
            + [point.envelope_value, point.residual]
        )
        _emit_csv(ctx, run, out, header, [row])
    except MoyoError as exc:
        return _exit_with_error(ctx, msg, exc)

    density = ", ".join(f"{x:.8f}" for x in point.proximal_density)
    msg.resultat(f"Densité proximale : ({density})")
    msg.affiche_messages(
        [
            [f"ᵋF[ρ] : {point.envelope_value:.12f}", "info"],
            [f"Montée duale : {point.iterations} itérations", "info"],
            [f"Résidu : {point.residual:.3e}", "info"],
        ],
        "resultat_item",
    )
    return _exit_with_separator(ctx, msg, EXIT_OK)


@main.command()
@config_option
@out_option
@seed_option
@click.option("--rho", default=None, help="Quasi-densité (balayage en ε)")
@click.option(
    "--eps-list", default=None, help="Valeurs de ε, séparées par des virgules"
)
@click.option(
    "--lambda-list", default=None, help="Valeurs de λ, séparées par des virgules"
)
@click.pass_context
def sweep(ctx, config_path, out, seed, rho, eps_list, lambda_list):
    """Balayage en ε (enveloppe) ou en λ (connexion adiabatique)."""
    msg: MessageHandler = ctx.obj["msg"]

    try:
        if (eps_list is None) == (lambda_list is None):
            raise ConfigError(
                "--eps-list/--lambda-list", "fournir exactement une des deux listes"
            )
        run = _load_run(config_path, seed)
        if eps_list is not None:
            msg.titre1("SWEEP : enveloppe le long d'une échelle de ε")
            values = _parse_floats(eps_list, "--eps-list")
            header, rows = _eps_rows(run, _quasidensity(run, rho), values, msg)
        else:
            msg.titre1("SWEEP : connexion adiabatique E^λ[v_ext]")
            values = _parse_floats(lambda_list, "--lambda-list")
            header, rows = _lambda_rows(run, values)
        _emit_csv(ctx, run, out, header, rows)
    except MoyoError as exc:
        return _exit_with_error(ctx, msg, exc)

    flags = [r[-1] for r in rows if r[-1] is not None]
    if all(flags):
        msg.success(f"{len(rows)} valeurs, colonne de contrôle vérifiée")
    else:
        failed = flags.count(False)
        msg.warning(f"{failed} ligne(s) en défaut dans la colonne de contrôle")
    return _exit_with_separator(ctx, msg, EXIT_OK)


@main.command()
@config_option
@out_option
@seed_option
@click.pass_context
def verify(ctx, config_path, out, seed):
    """Lance la batterie de contrôles oracle."""
    msg: MessageHandler = ctx.obj["msg"]
    msg.titre1("VERIFY : batterie de contrôles")

    try:
        run = _load_run(config_path, seed)
        _describe_run(msg, run)
        rng = np.random.default_rng(run.seed)
        reports = acceptance_battery(run, rng, msg=msg)
        target = out or run.output_path
        if target:
            msg.affiche_messages(write_reports_csv(reports, target), "info")
    except MoyoError as exc:
        return _exit_with_error(ctx, msg, exc)

    msg.titre2("Rapports")
    msg.affiche_tableau(
        REPORT_HEADER,
        [
            (
                r.quantity,
                f"{r.reference:.6g}",
                f"{r.computed:.6g}",
                f"{r.abs_error:.2e}",
                f"{r.tolerance:.1e}",
                "ok" if r.passed else "ÉCHEC",
            )
            for r in reports
        ],
    )
    failed = [r for r in reports if not r.passed]
    if not failed:
        msg.success(f"{len(reports)} contrôles réussis")
        return _exit_with_separator(ctx, msg, EXIT_OK)
    msg.warning(f"{len(failed)} contrôle(s) sur {len(reports)} en échec")
    msg.affiche_messages(
        [[f"{COLOR_RED}{r.quantity}{COLOR_RESET}", "warning"] for r in failed],
        "resultat_item",
    )
    return _exit_with_separator(ctx, msg, EXIT_ERROR)


# =========================
# Balayages
# =========================
def _eps_rows(run: RunConfig, rho: Sequence[float], values: List[float], msg):
    def point(eps: float):
        return regularize(run.model, eps, rho, cfg=run.dual)

    with ThreadPoolExecutor() as pool:
        points = list(pool.map(point, values))

    rows = []
    for k, (eps, p) in enumerate(zip(values, points)):
        delta = monotone = None
        if k > 0:
            delta = p.envelope_value - points[k - 1].envelope_value
            # L'enveloppe croît quand ε décroît
            monotone = bool(delta * (values[k - 1] - eps) >= -SWEEP_TOL)
        rows.append((eps, p.envelope_value, p.residual, delta, monotone))
        msg.iteration(f"ε = {eps:g} : ᵋF[ρ] = {p.envelope_value:.12f}")
    return EPS_SWEEP_HEADER, rows


def _lambda_rows(run: RunConfig, values: List[float]):
    with ThreadPoolExecutor() as pool:
        curve = adiabatic_curve(run.model, run.v_ext, values, mapper=pool.map)

    rows = []
    for k, (lam, e) in enumerate(zip(curve.lambdas, curve.energies)):
        delta = e - curve.energies[k - 1] if k > 0 else None
        slack = concave = None
        if 0 < k < len(values) - 1:
            slack = curve.midpoint_slacks[k - 1]
            concave = bool(slack >= -SWEEP_TOL)
        rows.append((lam, e, delta, slack, concave))
    return LAMBDA_SWEEP_HEADER, rows


# =========================
# Helpers
# =========================
def _load_run(config_path: Optional[str], seed: Optional[int]) -> RunConfig:
    return load_run_config(config_path).with_seed(seed)


def _parse_floats(text: str, option: str) -> List[float]:
    """Liste de réels séparés par des virgules (vide interdit)."""
    items = [s.strip() for s in text.split(",") if s.strip()]
    if not items:
        raise ConfigError(option, "liste vide")
    try:
        return [float(s) for s in items]
    except ValueError as exc:
        raise ConfigError(option, f"réel invalide ({exc})") from exc


def _quasidensity(run: RunConfig, rho: Optional[str]) -> List[float]:
    if rho is not None:
        values = _parse_floats(rho, "--rho")
    elif run.rho is not None:
        values = list(run.rho)
    else:
        raise ConfigError("run.rho", "quasi-densité requise (--rho ou run.rho)")
    if len(values) != run.model.sites:
        raise ConfigError(
            "--rho" if rho is not None else "run.rho",
            f"{run.model.sites} valeurs attendues, {len(values)} reçues",
        )
    return values


def _describe_run(msg: MessageHandler, run: RunConfig):
    m = run.model
    msg.info(
        f"L = {m.sites}, N = {m.electrons}, t = {m.hopping:g}, "
        f"U = {m.interaction_strength:g}, λ = {m.lambda_:g}, "
        f"noyau {COLOR_LIGHT_BLUE}{m.kernel}{COLOR_RESET}"
    )
    msg.info(
        f"ε = {run.solver.eps:g}, pas {run.solver.step_policy}, "
        f"montée {run.dual.step_rule}, graine {run.seed}"
    )


def _emit_csv(ctx, run: RunConfig, out, header, rows, extra=None):
    """Écrit le CSV dans `out`, sinon run.output_path, sinon sur la sortie standard.

    `extra` est un second bloc (en-tête, lignes) ajouté après le premier.
    """
    msg: MessageHandler = ctx.obj["msg"]
    app = ctx.obj["config"]
    digits, delimiter = app.output.digits, app.output.delimiter
    tail = csv_text(*extra, digits, delimiter) if extra else None
    target = out or run.output_path
    if not target:
        click.echo(csv_text(header, rows, digits, delimiter) + (tail or ""), nl=False)
        return
    messages = write_csv(target, header, rows, digits, delimiter, extra=tail)
    msg.affiche_messages(
        [[f"{COLOR_GREEN}{text}{COLOR_RESET}", flag] for text, flag in messages], "info"
    )


def _exit_with_separator(ctx, msg, code: int = EXIT_ERROR):
    msg.separateur1()
    ctx.exit(code)


def _exit_with_error(ctx, msg, exc: MoyoError):
    msg.affiche_messages(exc.messages, "info")
    msg.text(str(exc), flag="error")
    return _exit_with_separator(ctx, msg, EXIT_ERROR)


if __name__ == "__main__":
    main()
