"""
Cross-route consistency suite behind the `validate` command

Every check returns a CheckResult; numerical failures inside a check are
reported as a failed check rather than aborting the suite.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.linalg import expm

from .config import RunConfig
from .errors import SemiMarkovError
from .generators import (GeneratorSpec, nz_channel_from_tcl,
                         tcl_channel_from_nz)
from .scenarios import HazardModel, SemiMarkovModel, factor_of_two_defect
from .solvers import divisibility, exact_maps, solve_nz, solve_series, solve_tcl
from .superop import SuperOperator, commutator_norm, liouville, trace_distance
from .timegrid import TimeGrid
from .waiting_time import Exponential, bounds_report, hazard, jump_statistics, mu

logger = logging.getLogger(__name__)

ROUTE_AGREEMENT = 1e-4
SEMIGROUP_AGREEMENT = 1e-8
ROUND_TRIP_TOL = 1e-7
RENEWAL_TOL = 1e-8
COMMUTATOR_TOL = 1e-8
SINGULARITY_MARGIN = 0.1
MAX_STEP = 1e-3
ROUTE_HORIZON = 3.0


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _run(name: str, check: Callable[[], Tuple[bool, str]]) -> CheckResult:
    try:
        passed, detail = check()
    except SemiMarkovError as e:
        passed, detail = False, f"{type(e).__name__}: {e}"
    result = CheckResult(name, bool(passed), detail)
    logger.info("check %s: %s (%s)", name, "pass" if passed else "FAIL", detail)
    return result


def regular_grid(tcl: GeneratorSpec, t_end: float, step: float) -> TimeGrid:
    """Grid on [0, min(t_end, first singularity - margin)]"""
    hit = tcl.first_singularity(t_end)
    t_stop = t_end if hit is None else hit.location - SINGULARITY_MARGIN
    t_stop = max(t_stop, step)
    return TimeGrid(t_stop, max(int(np.ceil(t_stop / step)), 1) + 1)


def _max_trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    return max(trace_distance(x, y) for x, y in zip(a, b))


# --- Individual checks ---

def check_renewal_identity(model) -> Tuple[bool, str]:
    """f = k * g in closed form"""
    rf = model.renewal
    residual_fn = rf.k.convolve(rf.g) - rf.f
    times = np.linspace(0.0, 10.0, 1001)
    residual = float(np.max(np.abs(residual_fn(times)))) + abs(residual_fn.delta_weight)
    return residual <= RENEWAL_TOL, f"max |k*g - f| = {residual:.3e}"


def check_bounds(model, times: np.ndarray) -> Tuple[bool, str]:
    report = bounds_report(model.renewal, times)
    gap = float(np.min(np.minimum(report.h - report.S, report.S_over_g - report.h)))
    return True, f"S <= h <= S/g on {times.size} points (min gap {gap:.3e})"


def check_exponential_collapse(model: SemiMarkovModel, times: np.ndarray) -> Tuple[bool, str]:
    """h = mu = S = rate for exponential waiting times"""
    rate = model.renewal.spec.rate
    js = jump_statistics(model.renewal, 1, float(times[-1]))
    deviation = max(float(np.max(np.abs(hazard(model.renewal, times) - rate))),
                    float(np.max(np.abs(model.renewal.S(times) - rate))),
                    float(np.max(np.abs(mu(js, times) - rate))))
    return deviation <= 1e-10, f"max |h, S, mu - rate| = {deviation:.3e}"


def check_three_routes(model: SemiMarkovModel, rho0: np.ndarray, grid: TimeGrid,
                       n_max: int) -> Tuple[bool, str]:
    tcl = solve_tcl(model.tcl(), rho0, grid)
    nz = solve_nz(model.nz(), rho0, grid)
    series = solve_series(model.kraus, model.jump_statistics(n_max, grid.t_end), rho0, grid,
                          rf=model.renewal)
    distances = {
        "tcl-nz": _max_trace_distance(tcl.states, nz.states),
        "tcl-series": _max_trace_distance(tcl.states, series.states),
        "nz-series": _max_trace_distance(nz.states, series.states),
    }
    worst = max(distances.values())
    detail = ", ".join(f"{k} {v:.2e}" for k, v in distances.items()) + f" on [0, {grid.t_end:.4g}]"
    return worst <= ROUTE_AGREEMENT, detail


def check_semigroup(model: SemiMarkovModel, rho0: np.ndarray, grid: TimeGrid,
                    n_max: int) -> Tuple[bool, str]:
    """Exponential waiting time: every route equals exp(rate t (E - 1))"""
    rate = model.renewal.spec.rate
    generator = (liouville(model.kraus) - SuperOperator.identity(model.dim)).matrix * rate
    vec0 = rho0.reshape(-1, order='F')
    exact = np.array([(expm(generator * t) @ vec0).reshape(rho0.shape, order='F') for t in grid.times])
    routes = {
        "tcl": solve_tcl(model.tcl(), rho0, grid).states,
        "nz": solve_nz(model.nz(), rho0, grid).states,
        "series": solve_series(model.kraus, model.jump_statistics(n_max, grid.t_end), rho0, grid,
                               rf=model.renewal).states,
    }
    errors = {k: float(np.max(np.abs(v - exact))) for k, v in routes.items()}
    return max(errors.values()) <= SEMIGROUP_AGREEMENT, ", ".join(f"{k} {v:.2e}" for k, v in errors.items())


def check_round_trip(model: SemiMarkovModel, times: np.ndarray) -> Tuple[bool, str]:
    """m_NZ -> m_TCL -> m_NZ and m_TCL -> m_NZ -> m_TCL per channel"""
    worst = 0.0
    for channel in model.nz().channels:
        if channel.is_zero():
            continue
        tcl = tcl_channel_from_nz(channel)
        back = nz_channel_from_tcl(tcl)
        worst = max(worst, float(np.max(np.abs(back.values(times) - channel.values(times)))),
                    abs(back.delta_weight - channel.delta_weight))
        again = tcl_channel_from_nz(back)
        worst = max(worst, float(np.max(np.abs(again.values(times) - tcl.values(times)))))
    return worst <= ROUND_TRIP_TOL, f"max round-trip discrepancy {worst:.3e}"


def check_commuting_maps(spec: GeneratorSpec, grid: TimeGrid) -> Tuple[bool, str]:
    maps = exact_maps(spec, grid)
    picks = np.linspace(0, len(grid) - 1, min(len(grid), 8)).astype(int)
    worst = max(commutator_norm(SuperOperator(maps[i]), SuperOperator(maps[j]))
                for i in picks for j in picks)
    return worst <= COMMUTATOR_TOL, f"max ||[L_t, L_s]|| = {worst:.3e}"


def check_redfield_divisible(model, grid: TimeGrid, stride: int) -> Tuple[bool, str]:
    redfield = model.redfield()
    report = divisibility(exact_maps(redfield, grid), grid, stride=stride)
    return report.verdict, f"min Choi eigenvalue {report.min_eigenvalue:.3e} over {len(report.pairs)} pairs"


def check_redfield_rates(model: SemiMarkovModel, times: np.ndarray) -> Tuple[bool, str]:
    """-m_Red / |l| = S >= 0"""
    spec = model.redfield()
    worst = 0.0
    for lam, channel in zip(spec.basis.eigenvalues, spec.channels):
        if channel.is_zero():
            continue
        scaled = -np.real(channel.values(times)) / abs(lam)
        worst = max(worst, float(np.max(np.abs(scaled - model.renewal.S(times)))))
        if np.any(scaled < -1e-12):
            return False, "negative Redfield rate"
    return worst <= 1e-9, f"max |-m_Red/|l| - S| = {worst:.3e}"


def check_factor_of_two() -> Tuple[bool, str]:
    defect = factor_of_two_defect()
    return defect <= 1e-12, f"||L_deph - 2 L_diag|| = {defect:.3e}"


def check_local_nonlocal(model: HazardModel, rho0: np.ndarray, grid: TimeGrid) -> Tuple[bool, str]:
    tcl = solve_tcl(model.tcl(), rho0, grid)
    nz = solve_nz(model.nz(), rho0, grid)
    distance = _max_trace_distance(tcl.states, nz.states)
    return distance <= ROUTE_AGREEMENT, f"tcl-nz {distance:.2e} on [0, {grid.t_end:.4g}]"


# --- Suite ---

def run_suite(config: RunConfig, t_end: Optional[float] = None) -> List[CheckResult]:
    """All checks applicable to the configured dynamics"""
    model = config.build_model()
    rho0 = config.rho0().entries
    base = config.time_grid()
    t_end = t_end if t_end is not None else min(base.t_end, 10.0)
    step = min(base.step, MAX_STEP)
    curve_times = np.linspace(0.0, t_end, max(int(round(t_end / step)), 1) + 1)
    results = [
        _run("renewal identity f = k*g", lambda: check_renewal_identity(model)),
        _run("bounds S <= h <= S/g", lambda: check_bounds(model, curve_times)),
    ]
    exponential = isinstance(model.renewal.spec, Exponential)
    if exponential and isinstance(model, SemiMarkovModel):
        results.append(_run("exponential collapse h = mu = S = rate",
                            lambda: check_exponential_collapse(model, curve_times)))
    try:
        grid = regular_grid(model.tcl(), min(t_end, ROUTE_HORIZON), step)
    except SemiMarkovError as e:
        return results + [CheckResult("local generator", False, str(e))]
    n_max = config.solver.n_max
    stride = config.solver.divisibility_stride
    if isinstance(model, SemiMarkovModel):
        if exponential:
            results.append(_run("semigroup recovery", lambda: check_semigroup(model, rho0, grid, n_max)))
        else:
            results.append(_run("three-route agreement", lambda: check_three_routes(model, rho0, grid, n_max)))
        results.append(_run("round-trip conversion", lambda: check_round_trip(model, grid.times)))
        results.append(_run("Redfield rate -m/|l| = S", lambda: check_redfield_rates(model, curve_times)))
        if model.dim == 2:
            results.append(_run("L_deph = 2 L_diag", check_factor_of_two))
    else:
        results.append(_run("local/non-local agreement", lambda: check_local_nonlocal(model, rho0, grid)))
    results.append(_run("commuting dynamical maps", lambda: check_commuting_maps(model.tcl(), grid)))
    results.append(_run("Redfield CP-divisibility", lambda: check_redfield_divisible(model, grid, stride)))
    return results
