"""
Command-line surface

Subcommands:
    curves        renewal curves f, g, h, S, S/g, q, mu, k
    solve         reduced dynamics by one route (tcl, nz, series, redfield, mc)
    divisibility  minimal Choi eigenvalues of intermediate maps
    figure1       hazard rates and their bounds for several Erlang orders
    figure2       coherence decay of the diagonalizing and dephasing maps
    validate      cross-route consistency suite

Exit codes: 0 success, 2 configuration error, 3 numerical error,
4 invariant violation, 1 anything else.
"""

import argparse
import dataclasses
import logging
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np
from colorama import Fore, Style
from colorama import init as colorama_init

from .config import RunConfig, get_config
from .csv_output import column_table, write_csv
from .errors import ConfigError, InvariantViolationError, SemiMarkovError
from .logging_setup import setup_logging
from .montecarlo import estimate_counts_parallel, estimate_state
from .scenarios import HazardModel, coherence_factor, deph_model, diag_model
from .solvers import (Trajectory, divisibility, dynamical_map, exact_maps, solve_nz,
                      solve_series, solve_tcl)
from .superop import state_diagnostics
from .timegrid import TimeGrid
from .validation import run_suite
from .waiting_time import Erlang, Exponential, build, hazard, jump_statistics, mu, mu_poles

logger = logging.getLogger(__name__)

ROUTES = ("tcl", "nz", "series", "redfield", "mc")
MAP_ROUTES = ("tcl", "nz", "series", "redfield", "exact")
STATE_TOLERANCES = {
    "tcl": (1e-9, 1e-9, 1e-8),
    "redfield": (1e-9, 1e-9, 1e-8),
    "series": (1e-9, 1e-9, 1e-8),
    "nz": (1e-7, 1e-7, 1e-8),
    "mc": (1e-9, 1e-9, 1e-8),
}


# --- Helpers ---

def _n_list(text: str) -> List[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--n-list must be comma-separated integers, got {text!r}")
    if not values or any(n < 1 for n in values):
        raise ConfigError(f"--n-list entries must be >= 1, got {text!r}")
    return values


def load_run_config(args) -> RunConfig:
    """Config file plus command-line overrides; --save-config writes the result"""
    manager = get_config(args.config)
    config = dataclasses.replace(manager.config)
    if args.t_end is not None:
        config.grid = dataclasses.replace(config.grid, t_end=args.t_end)
    if args.points is not None:
        config.grid = dataclasses.replace(config.grid, n_points=args.points)
    if args.trials is not None:
        config.montecarlo = dataclasses.replace(config.montecarlo, trials=args.trials)
    if args.seed is not None:
        config.montecarlo = dataclasses.replace(config.montecarlo, seed=args.seed)
    if args.rate is not None:
        if args.rate <= 0:
            raise ConfigError(f"rate must be > 0, got {args.rate}", "--rate")
        spec = config.waiting_time
        if not isinstance(spec, (Exponential, Erlang)):
            raise ConfigError("--rate applies to exponential and Erlang waiting times only", "--rate")
        config.waiting_time = dataclasses.replace(spec, rate=args.rate)
    config.time_grid()
    setup_logging(config.logging.log_file, config.logging.level, args.verbose)
    if args.save_config:
        manager.save_settings(args.save_config, config)
    return config


def _grid(args, t_end: float, n_points: int) -> TimeGrid:
    return TimeGrid(args.t_end if args.t_end is not None else t_end,
                    args.points if args.points is not None else n_points)


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)


def _mask_poles(values: np.ndarray, times: np.ndarray, poles, step: float) -> np.ndarray:
    values = np.array(values, dtype=float)
    for pole in poles:
        values[np.abs(times - pole.location) <= step] = np.nan
    return values


# --- Commands ---

def cmd_curves(args) -> int:
    config = load_run_config(args)
    grid = config.time_grid()
    times = grid.times
    rf = build(config.waiting_time)
    js = jump_statistics(rf, 0, grid.t_end)
    poles = mu_poles(js, times)
    g = rf.g(times)
    S = rf.S(times)
    columns = {
        "t": times,
        "f": rf.f(times),
        "g": g,
        "h": hazard(rf, times),
        "S": S,
        "S_over_g": S / g,
        "q": js.q(times),
        "mu": _mask_poles(mu(js, times), times, poles, grid.step),
        "k_smooth": rf.k(times),
    }
    metadata = {
        "waiting_time": config.waiting_time.to_dict(),
        "k_delta": format(float(rf.k.delta_weight), '.17g'),
        "mu_poles": [format(p.location, '.17g') for p in poles],
        "mu_convention": "-q'/(2q) = -(1/2) d/dt log|q|",
    }
    names, rows = column_table(columns)
    _emit(write_csv(names, rows, metadata, args.out), args.out)
    return 0


def _nz(model, grid: TimeGrid):
    return model.nz(grid.t_end) if isinstance(model, HazardModel) else model.nz()


def _redfield(model, grid: TimeGrid):
    return model.redfield(grid.t_end) if isinstance(model, HazardModel) else model.redfield()


def _solve(config: RunConfig, route: str) -> Trajectory:
    model = config.build_model()
    grid = config.time_grid()
    rho0 = config.rho0()
    settings = config.solver
    if route in ("series", "mc") and isinstance(model, HazardModel):
        raise ConfigError(f"route {route!r} needs a semi_markov model", "model.type")
    if route == "tcl":
        return solve_tcl(model.tcl(), rho0, grid, settings.tcl_tolerance)
    if route == "redfield":
        return solve_tcl(_redfield(model, grid), rho0, grid, settings.tcl_tolerance)
    if route == "nz":
        return solve_nz(_nz(model, grid), rho0, grid, settings.nz_tolerance)
    if route == "series":
        js = model.jump_statistics(settings.n_max, grid.t_end)
        return solve_series(model.kraus, js, rho0, grid, rf=model.renewal)
    mc = config.montecarlo
    counts = estimate_counts_parallel(config.waiting_time, grid, mc.trials, mc.seed, mc.streams)
    return estimate_state(model.kraus, counts, rho0)


def cmd_solve(args) -> int:
    config = load_run_config(args)
    trajectory = _solve(config, args.route)
    trace_tol, herm_tol, pos_tol = STATE_TOLERANCES[args.route]
    trajectory.check_invariants(trace_tol, herm_tol, pos_tol)
    dim = trajectory.states.shape[1]
    names = ["t"]
    for i in range(dim):
        for j in range(dim):
            names += [f"re_{i}{j}", f"im_{i}{j}"]
    names += ["trace", "min_eig"]
    rows = []
    for t, rho in zip(trajectory.grid.times, trajectory.states):
        row = [t]
        for z in rho.reshape(-1):
            row += [z.real, z.imag]
        _, _, lowest = state_diagnostics(rho)
        rows.append(row + [np.trace(rho).real, lowest])
    metadata: Dict[str, object] = {"route": args.route, "waiting_time": config.waiting_time.to_dict()}
    metadata.update(trajectory.metadata)
    _emit(write_csv(names, rows, metadata, args.out), args.out)
    return 0


def cmd_divisibility(args) -> int:
    config = load_run_config(args)
    model = config.build_model()
    grid = config.time_grid()
    route = args.route or "exact"
    if route not in MAP_ROUTES:
        raise ConfigError(f"unknown map route {route!r}; expected one of {MAP_ROUTES}", "--route")
    if route == "series":
        if isinstance(model, HazardModel):
            raise ConfigError("route 'series' needs a semi_markov model", "model.type")
        maps = dynamical_map("series", grid, kraus=model.kraus,
                             js=model.jump_statistics(config.solver.n_max, grid.t_end), rf=model.renewal)
    elif route == "exact":
        maps = exact_maps(model.tcl(), grid)
    elif route == "redfield":
        maps = exact_maps(_redfield(model, grid), grid)
    else:
        maps = dynamical_map(route, grid, spec=_nz(model, grid) if route == "nz" else model.tcl())
    report = divisibility(maps, grid, stride=config.solver.divisibility_stride,
                          determinant_guard=config.solver.determinant_guard,
                          tolerance=config.solver.cp_tolerance)
    metadata = {
        "route": route,
        "cp_divisible": report.verdict,
        "min_choi_eigenvalue": format(report.min_eigenvalue, '.17g'),
        "singular_times": [format(t, '.17g') for t in report.singular_times],
    }
    _emit(write_csv(["s", "t", "min_choi_eigenvalue"], report.pairs, metadata, args.out), args.out)
    return 0


def cmd_figure1(args) -> int:
    grid = _grid(args, 10.0, 1001)
    times = grid.times
    rate = args.rate if args.rate is not None else 1.0
    columns = {"t": times}
    for n in _n_list(args.n_list):
        rf = build(Erlang(n, rate))
        S = rf.S(times)
        columns[f"h_{n}"] = hazard(rf, times)
        columns[f"S_{n}"] = S
        columns[f"S_over_g_{n}"] = S / rf.g(times)
    names, rows = column_table(columns)
    _emit(write_csv(names, rows, {"rate": rate}, args.out), args.out)
    return 0


def cmd_figure2(args) -> int:
    grid = _grid(args, 10.0, 1001)
    rate = args.rate if args.rate is not None else 1.0
    columns = {"t": grid.times}
    for n in _n_list(args.n_list):
        spec = Erlang(n, rate)
        columns[f"c_diag_{n}"] = coherence_factor(exact_maps(diag_model(spec).tcl(), grid))
        columns[f"c_deph_{n}"] = coherence_factor(exact_maps(deph_model(spec).tcl(), grid))
    names, rows = column_table(columns)
    _emit(write_csv(names, rows, {"rate": rate, "initial_state": "|+><+|"}, args.out), args.out)
    return 0


def cmd_validate(args) -> int:
    colorama_init()
    config = load_run_config(args)
    results = run_suite(config, args.t_end)
    for r in results:
        tag = f"{Fore.GREEN}PASS{Style.RESET_ALL}" if r.passed else f"{Fore.RED}FAIL{Style.RESET_ALL}"
        print(f"[{tag}] {r.name}: {r.detail}")
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    if failed:
        raise InvariantViolationError(f"{len(failed)} check(s) failed: " + ", ".join(r.name for r in failed))
    return 0


COMMANDS = {
    "curves": cmd_curves,
    "solve": cmd_solve,
    "divisibility": cmd_divisibility,
    "figure1": cmd_figure1,
    "figure2": cmd_figure2,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="CSV output path (default: stdout)")
    common.add_argument("--t-end", type=float, help="grid end time, in units of 1/rate")
    common.add_argument("--points", type=int, help="number of grid points")
    common.add_argument("--trials", type=int, help="Monte Carlo trials")
    common.add_argument("--seed", type=int, help="Monte Carlo seed")
    common.add_argument("--rate", type=float, help="waiting-time rate")
    common.add_argument("--n-list", default="1,2,3,4", help="Erlang orders for the figures")
    common.add_argument("--save-config", help="write the effective configuration to this JSON file")
    common.add_argument("--verbose", action="store_true", help="echo log records to stderr")

    parser = argparse.ArgumentParser(
        prog="semimarkov_dynamics",
        description="Quantum semi-Markov dynamics: local and non-local generators",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("curves", parents=[common], help="renewal curves")
    solve = sub.add_parser("solve", parents=[common], help="reduced dynamics")
    solve.add_argument("--route", choices=ROUTES, default="tcl")
    div = sub.add_parser("divisibility", parents=[common], help="CP-divisibility scan")
    div.add_argument("--route", choices=MAP_ROUTES, default="exact")
    sub.add_parser("figure1", parents=[common], help="hazard rates and bounds")
    sub.add_parser("figure2", parents=[common], help="coherence decay")
    sub.add_parser("validate", parents=[common], help="cross-route consistency suite")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in ("figure1", "figure2"):
        setup_logging(verbose=args.verbose)
    try:
        return COMMANDS[args.command](args)
    except SemiMarkovError as e:
        logger.error("%s failed: %s", args.command, e)
        print(f"❌ {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
