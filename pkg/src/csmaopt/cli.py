"""Command-line front end.

Commands reproduce the reference table and figures as machine-readable CSV
or JSON, with a rendered PNG alongside whenever an output path is given:

    tau-table   analytic vs simulated access probability over a cell grid
    ase-sweep   ASE as a function of the carrier-sense threshold
    optimize    optimal threshold per target SIR, with certificates
    mac-sim     one slotted contention run
    geo-sim     one snapshot Monte Carlo estimate

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
dBm and dB inputs are converted to linear units once, at parse time.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .errors import CsmaOptError
from .geometry import SimRegion, estimate_busy_prob, estimate_success_and_ase
from .macsim import run_mac_sim, tau_table
from .model import BackoffParams, LinkBudget, busy_prob, evaluate_threshold, solve_tau
from .optimizer import (
    grid_search_threshold,
    no_beb_optimal_range,
    no_beb_optimal_threshold,
    optimize_threshold,
)
from .units import db_to_linear, dbm_to_watts, watts_to_dbm

_TABLE_LAMBDAS = "0.0001,0.001,0.01"
_TABLE_IS_DBM = "-40,-10"
_TABLE_BETA_C_DB = "3,10"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(header: Sequence[str], rows: Sequence[Sequence], out: Optional[str]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    text = "\n".join(lines) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _write_json(obj, out: Optional[str]) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _figure_path(out: Optional[str]) -> Optional[str]:
    return str(Path(out).with_suffix(".png")) if out else None


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    seed = int(np.random.SeedSequence().entropy % 2**32)
    print(f"seed: {seed}", file=sys.stderr)
    return seed


def _float_list(text: str) -> List[float]:
    items = [part.strip() for part in text.split(",") if part.strip()]
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated list of numbers")
    return [float(v) for v in items]


def _link_from(args, beta_c_linear: Optional[float] = None) -> LinkBudget:
    return LinkBudget(
        tx_power_watts=dbm_to_watts(args.p_dbm),
        link_distance_m=args.rt_m,
        path_loss_exp=args.alpha,
        target_sir=db_to_linear(args.beta_db),
        control_target_sir=(
            beta_c_linear if beta_c_linear is not None else db_to_linear(args.beta_c_db)
        ),
    )


def _require_alpha4(args) -> None:
    if args.alpha != 4.0:
        raise ConfigError(
            f"alpha={args.alpha} unsupported: the busy-probability and "
            "closed-form success models hold only for path-loss exponent 4"
        )


class ConfigError(Exception):
    pass


def _add_common(parser: argparse.ArgumentParser, *, w0: int, m: int,
                density: Optional[float], beta_db: float = 0.0) -> None:
    parser.add_argument("--lambda", dest="density", type=float, default=density,
                        help="node density, nodes/m^2")
    parser.add_argument("--p-dbm", type=float, default=30.0, help="transmit power, dBm")
    parser.add_argument("--beta-db", type=float, default=beta_db, help="target SIR, dB")
    parser.add_argument("--beta-c-db", type=float, default=3.0,
                        help="control-message target SIR, dB")
    parser.add_argument("--rt-m", type=float, default=50.0, help="link distance, m")
    parser.add_argument("--alpha", type=float, default=4.0, help="path-loss exponent")
    parser.add_argument("--w0", type=int, default=w0, help="initial backoff window, slots")
    parser.add_argument("--m", type=int, default=m, help="maximum backoff stage")
    parser.add_argument("--seed", type=int, default=None,
                        help="RNG seed; drawn and printed when omitted")
    parser.add_argument("--jobs", type=int, default=1, help="worker pool size")
    parser.add_argument("--out", type=str, default=None,
                        help="output file; stdout when omitted")
    parser.add_argument("--config", type=str, default=None,
                        help="key=value file supplying flag defaults")
    parser.add_argument("--no-plot", action="store_true",
                        help="skip the PNG rendered alongside --out")
    parser.add_argument("--region-m", type=float, default=2000.0,
                        help="simulation square side, m")
    parser.add_argument("--bounded", action="store_true",
                        help="bounded square instead of the default torus")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csmaopt",
        description="Optimal carrier-sensing threshold for random CSMA/CA "
                    "networks with binary exponential backoff.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_tab = sub.add_parser("tau-table", help="access-probability validation table")
    _add_common(p_tab, w0=32, m=5, density=None)
    p_tab.add_argument("--lambdas", type=_float_list, default=None,
                       help=f"cell densities (default {_TABLE_LAMBDAS})")
    p_tab.add_argument("--is-dbms", type=_float_list, default=None,
                       help=f"cell thresholds in dBm (default {_TABLE_IS_DBM})")
    p_tab.add_argument("--beta-c-dbs", type=_float_list, default=None,
                       help=f"cell control SIRs in dB (default {_TABLE_BETA_C_DB})")
    p_tab.add_argument("--skip-sim", action="store_true",
                       help="analytic column only")
    p_tab.add_argument("--slots", type=int, default=12500, help="slots per run")
    p_tab.add_argument("--seeds", type=int, default=10, help="seeds per cell")

    p_sweep = sub.add_parser("ase-sweep", help="ASE vs carrier-sense threshold")
    _add_common(p_sweep, w0=16, m=32, density=0.2)
    p_sweep.add_argument("--is-min-dbm", type=float, default=-60.0)
    p_sweep.add_argument("--is-max-dbm", type=float, default=-10.0)
    p_sweep.add_argument("--step-db", type=float, default=1.0)
    p_sweep.add_argument("--with-sim", action="store_true",
                         help="add snapshot Monte Carlo estimates per point")
    p_sweep.add_argument("--replications", type=int, default=200)

    p_opt = sub.add_parser("optimize", help="optimal threshold per target SIR")
    _add_common(p_opt, w0=16, m=32, density=0.2)
    p_opt.add_argument("--beta-list-db", type=_float_list,
                       default=[float(b) for b in range(0, 21, 2)],
                       help="target SIR values, dB (comma-separated)")
    p_opt.add_argument("--method", choices=("newton", "grid"), default="newton")
    p_opt.add_argument("--grid-db", type=float, default=0.1,
                       help="certification grid step, dB")

    p_mac = sub.add_parser("mac-sim", help="one slotted contention run")
    _add_common(p_mac, w0=32, m=5, density=0.0001)
    p_mac.add_argument("--is-dbm", type=float, default=-40.0)
    p_mac.add_argument("--slots", type=int, default=12500)

    p_geo = sub.add_parser("geo-sim", help="one snapshot Monte Carlo estimate")
    _add_common(p_geo, w0=16, m=32, density=0.2)
    p_geo.add_argument("--is-dbm", type=float, default=-50.0)
    p_geo.add_argument("--replications", type=int, default=200)
    p_geo.add_argument("--busy-replications", type=int, default=0,
                       help="also estimate the busy probability with this many "
                            "replications (0 skips it)")
    return parser


def _region_from(args) -> SimRegion:
    return SimRegion(args.region_m, wraparound=not args.bounded)


def cmd_tau_table(args) -> int:
    _require_alpha4(args)
    lambdas = args.lambdas or ([args.density] if args.density is not None
                               else _float_list(_TABLE_LAMBDAS))
    is_dbms = args.is_dbms or _float_list(_TABLE_IS_DBM)
    beta_c_dbs = args.beta_c_dbs or _float_list(_TABLE_BETA_C_DB)
    cells = [
        (lam, dbm_to_watts(is_dbm), db_to_linear(bc_db))
        for lam in lambdas for is_dbm in is_dbms for bc_db in beta_c_dbs
    ]
    cell_labels = [
        (lam, is_dbm, bc_db)
        for lam in lambdas for is_dbm in is_dbms for bc_db in beta_c_dbs
    ]
    seed = _resolve_seed(args)
    link = _link_from(args, beta_c_linear=1.0)
    backoff = BackoffParams(args.w0, args.m)
    rows = tau_table(
        cells,
        link,
        backoff,
        _region_from(args),
        slots=args.slots,
        seeds=[seed + k for k in range(args.seeds)],
        jobs=args.jobs,
        skip_sim=args.skip_sim,
    )
    header = ["lambda", "is_dbm", "beta_c_db", "tau_analytic", "tau_sim", "tau_sim_ci95"]
    csv_rows = []
    plot_rows = []
    for (lam, is_dbm, bc_db), row in zip(cell_labels, rows):
        csv_rows.append([lam, is_dbm, bc_db, row.tau_analytic, row.tau_sim, row.tau_sim_ci95])
        plot_rows.append({
            "lambda": lam, "is_dbm": is_dbm, "beta_c_db": bc_db,
            "tau_analytic": row.tau_analytic, "tau_sim": row.tau_sim,
            "tau_sim_ci95": row.tau_sim_ci95,
        })
    _write_csv(header, csv_rows, args.out)
    fig = _figure_path(args.out)
    if fig and not args.no_plot:
        from .plots import render_tau_table

        render_tau_table(plot_rows, fig)
    return 0


def cmd_ase_sweep(args) -> int:
    _require_alpha4(args)
    if args.step_db <= 0.0:
        raise ConfigError(f"--step-db must be positive, got {args.step_db}")
    if args.is_max_dbm < args.is_min_dbm:
        raise ConfigError("--is-max-dbm below --is-min-dbm")
    seed = _resolve_seed(args)
    link = _link_from(args)
    backoff = BackoffParams(args.w0, args.m)
    region = _region_from(args)
    n_steps = int(math.floor((args.is_max_dbm - args.is_min_dbm) / args.step_db + 1e-9))
    points = [args.is_min_dbm + i * args.step_db for i in range(n_steps + 1)]
    header = ["is_dbm", "tau", "r_s_m", "lambda_t", "p_s", "eta_analytic"]
    if args.with_sim:
        header += ["eta_sim", "eta_sim_ci95"]
    csv_rows = []
    plot_rows = []
    for idx, is_dbm in enumerate(points):
        threshold = dbm_to_watts(is_dbm)
        contention, state = evaluate_threshold(args.density, link, backoff, threshold)
        row = [is_dbm, contention.tau, state.sense_range_m, state.active_density,
               state.success_prob, state.ase]
        plot_row = {"is_dbm": is_dbm, "eta_analytic": state.ase}
        if args.with_sim:
            _, _, eta = estimate_success_and_ase(
                args.density, link, backoff, threshold, region,
                args.replications, seed + idx, jobs=args.jobs,
            )
            row += [eta.estimate, eta.half_width_95]
            plot_row.update(eta_sim=eta.estimate, eta_sim_ci95=eta.half_width_95)
        csv_rows.append(row)
        plot_rows.append(plot_row)
    _write_csv(header, csv_rows, args.out)
    fig = _figure_path(args.out)
    if fig and not args.no_plot:
        from .plots import render_ase_sweep

        render_ase_sweep(plot_rows, fig)
    return 0


def cmd_optimize(args) -> int:
    _require_alpha4(args)
    if not args.beta_list_db:
        raise ConfigError("empty --beta-list-db")
    _resolve_seed(args)  # optimize is deterministic; keeps the seed contract uniform
    backoff = BackoffParams(args.w0, args.m)
    entries = []
    certified = True
    for beta_db in args.beta_list_db:
        link = LinkBudget(
            tx_power_watts=dbm_to_watts(args.p_dbm),
            link_distance_m=args.rt_m,
            path_loss_exp=args.alpha,
            target_sir=db_to_linear(beta_db),
            control_target_sir=db_to_linear(args.beta_c_db),
        )
        grid = grid_search_threshold(args.density, link, backoff, grid_db=args.grid_db)
        if args.method == "newton":
            report = optimize_threshold(args.density, link, backoff)
        else:
            report = grid
        agrees = abs(report.optimal_threshold_dbm - grid.optimal_threshold_dbm) <= args.grid_db
        certified &= agrees
        r_star = no_beb_optimal_range(link)
        nb_threshold = no_beb_optimal_threshold(args.density, link)
        try:
            _, nb_state = evaluate_threshold(args.density, link, backoff, nb_threshold)
            nb_eta = nb_state.ase
        except CsmaOptError:
            nb_eta = None
        entries.append({
            "beta_db": beta_db,
            "is_star_dbm": report.optimal_threshold_dbm,
            "is_star_watts": report.optimal_threshold_watts,
            "eta_max": report.converged_state.ase,
            "tau": report.converged_contention.tau,
            "r_s_m": report.converged_state.sense_range_m,
            "lambda_t": report.converged_state.active_density,
            "p_s": report.converged_state.success_prob,
            "outer_iterations": report.outer_iterations,
            "method": report.method,
            "boundary": report.boundary,
            "grid": {
                "is_dbm": grid.optimal_threshold_dbm,
                "eta": grid.converged_state.ase,
                "agrees_within_cell": agrees,
            },
            "no_beb": {
                "r_s_star_m": r_star,
                "is_dbm": watts_to_dbm(nb_threshold),
                "eta_at_threshold": nb_eta,
            },
            "trace": [[w, t, e] for (w, t, e) in report.trace],
        })
    _write_json(entries, args.out)
    fig = _figure_path(args.out)
    if fig and not args.no_plot:
        from .plots import render_optimize

        render_optimize(entries, fig)
    if not certified:
        print("optimum not certified by the grid oracle; trace follows", file=sys.stderr)
        json.dump(entries, sys.stderr, indent=2)
        print(file=sys.stderr)
        return 3
    return 0


def cmd_mac_sim(args) -> int:
    _require_alpha4(args)
    seed = _resolve_seed(args)
    link = _link_from(args)
    backoff = BackoffParams(args.w0, args.m)
    threshold = dbm_to_watts(args.is_dbm)
    analytic = solve_tau(args.density, link, backoff, threshold)
    stats = run_mac_sim(
        args.density, link, backoff, threshold, _region_from(args),
        slots=args.slots, seed=seed,
    )
    _write_json({
        "lambda": args.density,
        "is_dbm": args.is_dbm,
        "beta_c_db": args.beta_c_db,
        "w0": args.w0,
        "m": args.m,
        "tau_hat": stats.tau_hat,
        "p_c_hat": stats.p_c_hat,
        "tau_analytic": analytic.tau,
        "p_c_analytic": analytic.collision_prob,
        "slots_run": stats.slots_run,
        "warmup_slots": stats.warmup_slots,
        "n_nodes": stats.n_nodes,
        "seed": seed,
    }, args.out)
    return 0


def cmd_geo_sim(args) -> int:
    _require_alpha4(args)
    seed = _resolve_seed(args)
    link = _link_from(args)
    backoff = BackoffParams(args.w0, args.m)
    threshold = dbm_to_watts(args.is_dbm)
    region = _region_from(args)
    contention, state = evaluate_threshold(args.density, link, backoff, threshold)
    ps, lt, eta = estimate_success_and_ase(
        args.density, link, backoff, threshold, region,
        args.replications, seed, jobs=args.jobs,
    )
    payload = {
        "lambda": args.density,
        "is_dbm": args.is_dbm,
        "beta_db": args.beta_db,
        "tau": contention.tau,
        "r_s_m": state.sense_range_m,
        "p_s_sim": ps.estimate, "p_s_ci95": ps.half_width_95,
        "p_s_analytic": state.success_prob,
        "lambda_t_sim": lt.estimate, "lambda_t_ci95": lt.half_width_95,
        "lambda_t_analytic": state.active_density,
        "eta_sim": eta.estimate, "eta_sim_ci95": eta.half_width_95,
        "eta_analytic": state.ase,
        "replications": args.replications,
        "seed": seed,
    }
    if args.busy_replications > 0:
        busy = estimate_busy_prob(
            args.density, contention.tau, link, threshold, region,
            args.busy_replications, seed + 1, jobs=args.jobs,
        )
        payload["p_b_sim"] = busy.estimate
        payload["p_b_ci95"] = busy.half_width_95
        payload["p_b_analytic"] = busy_prob(
            args.density, contention.tau, link.tx_power_watts, threshold, args.alpha
        )
    _write_json(payload, args.out)
    return 0


_COMMANDS = {
    "tau-table": cmd_tau_table,
    "ase-sweep": cmd_ase_sweep,
    "optimize": cmd_optimize,
    "mac-sim": cmd_mac_sim,
    "geo-sim": cmd_geo_sim,
}


# flags taking comma-separated number lists; values like "-40,-10" would
# otherwise be mistaken for option strings by argparse
_LIST_FLAGS = ("--lambdas", "--is-dbms", "--beta-c-dbs", "--beta-list-db")


def _merge_negative_lists(argv: List[str]) -> List[str]:
    out: List[str] = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in _LIST_FLAGS and i + 1 < len(argv) and re.match(r"^-\d", argv[i + 1]):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def _inject_config(argv: List[str]) -> List[str]:
    """Expand --config key=value pairs into flags ahead of the explicit ones,
    so command-line values win."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise ConfigError("--config requires a file path")
    path = Path(argv[idx + 1])
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    flags: List[str] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "config":
            raise ConfigError(f"{path}:{lineno}: config files cannot nest")
        flags.extend([f"--{key.replace('_', '-')}", value])
    return argv[:1] + flags + argv[1:]


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        if argv and not argv[0].startswith("-"):
            argv = _inject_config(argv)
        args = parser.parse_args(_merge_negative_lists(argv))
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CsmaOptError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
