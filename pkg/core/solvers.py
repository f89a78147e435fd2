"""
Propagation routes for the reduced dynamics

    solve_tcl     fourth-order Runge-Kutta on the local equation (TCL or Redfield)
    solve_nz      memory equation per damping-basis channel (product trapezoidal rule)
    solve_series  sum_n p_n(t) E^n rho_0 over the jump counts
    exact maps    sum_alpha c_alpha(t) M_alpha from closed-form decay factors

plus dynamical maps and CP-divisibility diagnostics.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .errors import (AccuracyError, InvariantViolationError, TCLSingularError,
                     TruncationError, ValidationError)
from .generators import GeneratorKind, GeneratorSpec
from .superop import (DensityMatrix, KrausMap, SuperOperator, liouville,
                      state_diagnostics, unvec, vec)
from .timegrid import TimeGrid
from .volterra import solve_memory_equation
from .waiting_time import JumpStatistics, jump_statistics

logger = logging.getLogger(__name__)

TCL_HALVING_TOL = 1e-6
NZ_HALVING_TOL = 1e-5
SERIES_TAIL_TARGET = 1e-10
SERIES_MAX_TERMS = 512
DETERMINANT_GUARD = 1e-12
DIVISIBILITY_TOL = 1e-8
DEFAULT_STRIDE = 20

__all__ = [
    "TimeGrid", "Trajectory", "DivisibilityReport", "solve_tcl", "solve_nz",
    "solve_series", "exact_maps", "dynamical_map", "divisibility",
]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States (and optionally maps) on a grid"""
    grid: TimeGrid
    states: np.ndarray
    maps: Optional[np.ndarray] = None
    errors: Optional[np.ndarray] = None
    route: str = ""
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return self.states.shape[0]

    def state(self, i: int, positivity_tol: float = 1e-8) -> DensityMatrix:
        return DensityMatrix(self.states[i], hermitian_tol=1e-7, trace_tol=1e-7,
                             positivity_tol=positivity_tol)

    def map_at(self, i: int) -> SuperOperator:
        if self.maps is None:
            raise ValidationError("trajectory was computed without dynamical maps")
        return SuperOperator(self.maps[i])

    def check_invariants(self, trace_tol: float = 1e-9, hermiticity_tol: float = 1e-9,
                         positivity_tol: float = 1e-8) -> None:
        """Raises InvariantViolationError at the first offending time"""
        for t, rho in zip(self.grid.times, self.states):
            trace_error, hermiticity, lowest = state_diagnostics(rho)
            if trace_error > trace_tol or hermiticity > hermiticity_tol or lowest < -positivity_tol:
                raise InvariantViolationError(
                    f"{self.route or 'trajectory'} state at t = {t:.12g} is not a density matrix "
                    f"(trace error {trace_error:.3e}, hermiticity {hermiticity:.3e}, "
                    f"min eigenvalue {lowest:.3e})")


@dataclass(frozen=True)
class DivisibilityReport:
    """Minimal Choi eigenvalues of the intermediate propagators"""
    pairs: Tuple[Tuple[float, float, float], ...]
    verdict: bool
    singular_times: Tuple[float, ...]
    tolerance: float = DIVISIBILITY_TOL

    @property
    def min_eigenvalue(self) -> float:
        return min((p[2] for p in self.pairs), default=float('nan'))


def _initial_vector(rho0) -> np.ndarray:
    if isinstance(rho0, DensityMatrix):
        rho0 = rho0.entries
    return vec(np.asarray(rho0, dtype=complex))


def _states_from_vectors(vectors: np.ndarray, dim: int) -> np.ndarray:
    return np.array([unvec(v, dim) for v in vectors])


# --- Local equation ---

def _rk4(generators: np.ndarray, y0: np.ndarray, stride: int, step: float) -> np.ndarray:
    """Classic RK4; generators are sampled stride times per step"""
    n_steps = (generators.shape[0] - 1) // stride
    half = stride // 2
    out = np.empty((n_steps + 1,) + y0.shape, dtype=complex)
    out[0] = y = y0
    for j in range(n_steps):
        i = j * stride
        k1 = step * (generators[i] @ y)
        k2 = step * (generators[i + half] @ (y + 0.5 * k1))
        k3 = step * (generators[i + half] @ (y + 0.5 * k2))
        k4 = step * (generators[i + stride] @ (y + k3))
        y = y + (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        out[j + 1] = y
    return out


def _check_regular(spec: GeneratorSpec, t_end: float) -> None:
    hit = spec.first_singularity(t_end)
    if hit is not None:
        raise TCLSingularError(
            f"local generator diverges at t = {hit.location:.12g} inside [0, {t_end:g}]", hit.bracket)


def solve_tcl(spec: GeneratorSpec, rho0, grid: TimeGrid, tolerance: float = TCL_HALVING_TOL,
              with_maps: bool = False) -> Trajectory:
    """RK4 on d rho/dt = K_t rho with a step-halving accuracy check

    Raises:
        TCLSingularError: a channel diverges inside the grid range
        AccuracyError: halving the step changes the solution by more than tolerance
    """
    if spec.kind is GeneratorKind.NZ:
        raise ValidationError("solve_tcl needs a TCL or Redfield generator")
    _check_regular(spec, grid.t_end)
    dim = spec.dim
    y0 = _initial_vector(rho0)
    if with_maps:
        y0 = np.column_stack([y0, np.eye(dim * dim, dtype=complex)])
    quarter = grid.refined(4).times
    generators = np.einsum('ta,aij->tij', spec.values(quarter), spec.basis.projectors())
    if not np.all(np.isfinite(generators)):
        raise TCLSingularError("local generator is not finite on the grid")
    coarse = _rk4(generators, y0, 4, grid.step)
    fine = _rk4(generators, y0, 2, 0.5 * grid.step)[::2]
    discrepancy = float(np.max(np.abs(fine - coarse)))
    logger.debug("RK4 step-halving discrepancy %.3e", discrepancy)
    if discrepancy > tolerance:
        raise AccuracyError(
            f"RK4 step halving changed the solution by {discrepancy:.3e} (> {tolerance:.1e})", discrepancy)
    vectors = fine[:, :, 0] if with_maps else fine
    maps = fine[:, :, 1:] if with_maps else None
    route = "redfield" if spec.kind is GeneratorKind.REDFIELD else "tcl"
    return Trajectory(grid, _states_from_vectors(vectors, dim), maps, route=route,
                      metadata={"step_halving_discrepancy": discrepancy})


def exact_maps(spec: GeneratorSpec, grid: TimeGrid) -> np.ndarray:
    """Lambda_t = sum_alpha c_alpha(t) M_alpha from the channel decay factors"""
    if spec.kind is GeneratorKind.NZ:
        raise ValidationError("exact maps need local channels; convert the generator first")
    times = grid.times
    decays = np.column_stack([np.broadcast_to(np.atleast_1d(ch.decay(times)), times.shape)
                              for ch in spec.channels])
    return np.einsum('ta,aij->tij', decays, spec.basis.projectors())


# --- Memory equation ---

def solve_nz(spec: GeneratorSpec, rho0, grid: TimeGrid, tolerance: float = NZ_HALVING_TOL,
             with_maps: bool = False) -> Trajectory:
    """Memory-kernel equation, one scalar Volterra problem per damping channel

    Channel decay factors x_alpha solve x' = delta x + int k(t - s) x(s) ds with
    x(0) = 1; rho_t = sum_alpha x_alpha(t) Tr(varsigma_alpha^dagger rho_0) tau_alpha.

    Raises:
        AccuracyError: step-halving disagreement above tolerance
    """
    if spec.kind is not GeneratorKind.NZ:
        raise ValidationError("solve_nz needs a memory-kernel generator")
    times = grid.times
    factors, _, discrepancy = solve_memory_equation(spec.values, spec.delta_weights(), times,
                                                    np.ones(len(spec.channels)), tolerance)
    y0 = _initial_vector(rho0)
    coefficients = spec.basis.left_matrix.conj().T @ y0
    vectors = (factors * coefficients) @ spec.basis.right_matrix.T
    maps = np.einsum('ta,aij->tij', factors, spec.basis.projectors()) if with_maps else None
    return Trajectory(grid, _states_from_vectors(vectors, spec.dim), maps, route="nz",
                      metadata={"step_halving_discrepancy": discrepancy})


# --- Jump-count series ---

def _series_statistics(js: JumpStatistics, t_end: float, rf=None,
                       target: float = SERIES_TAIL_TARGET) -> Tuple[JumpStatistics, float]:
    tail = 1.0 - float(sum(np.real(p(t_end)) for p in js.p_n))
    while tail > target:
        if rf is None or 2 * max(js.n_max, 1) > SERIES_MAX_TERMS:
            raise TruncationError(
                f"jump-count series tail {tail:.3e} at t = {t_end:g} exceeds {target:.0e} "
                f"with N_max = {js.n_max}")
        js = jump_statistics(rf, 2 * max(js.n_max, 1), t_end)
        tail = 1.0 - float(sum(np.real(p(t_end)) for p in js.p_n))
        logger.info("jump-count series extended to N_max = %d (tail %.3e)", js.n_max, tail)
    return js, max(tail, 0.0)


def series_maps(E: KrausMap, js: JumpStatistics, times: np.ndarray) -> np.ndarray:
    """sum_n p_n(t) S_E^n at every time"""
    step_map = liouville(E).matrix
    powers = np.empty((js.n_max + 1,) + step_map.shape, dtype=complex)
    powers[0] = np.eye(step_map.shape[0])
    for n in range(1, js.n_max + 1):
        powers[n] = step_map @ powers[n - 1]
    return np.einsum('nt,nij->tij', js.probabilities(times), powers)


def solve_series(E: KrausMap, js: JumpStatistics, rho0, grid: TimeGrid, rf=None,
                 with_maps: bool = False, tail_target: float = SERIES_TAIL_TARGET) -> Trajectory:
    """rho_t = sum_n p_n(t) E^n rho_0

    With renewal functions rf the truncation is doubled until the tail at
    t_end is below tail_target.

    Raises:
        TruncationError: tail target unreachable with N_max <= 512
    """
    js, tail = _series_statistics(js, grid.t_end, rf, tail_target)
    maps = series_maps(E, js, grid.times)
    vectors = maps @ _initial_vector(rho0)
    return Trajectory(grid, _states_from_vectors(vectors, E.dim), maps if with_maps else None,
                      route="series", metadata={"n_max": js.n_max, "truncation_tail": tail})


# --- Maps and divisibility ---

def dynamical_map(route: str, grid: TimeGrid, spec: Optional[GeneratorSpec] = None,
                  kraus: Optional[KrausMap] = None, js: Optional[JumpStatistics] = None,
                  rf=None) -> np.ndarray:
    """Lambda_t on the grid by the named route (tcl, redfield, nz, series, exact)"""
    route = route.lower()
    if route == "series":
        if kraus is None or js is None:
            raise ValidationError("series maps need the jump map and jump statistics")
        return solve_series(kraus, js, np.eye(kraus.dim) / kraus.dim, grid, rf=rf, with_maps=True).maps
    if spec is None:
        raise ValidationError(f"route {route!r} needs a generator")
    dim = spec.dim
    rho = np.eye(dim) / dim
    if route in ("tcl", "redfield"):
        return solve_tcl(spec, rho, grid, with_maps=True).maps
    if route == "nz":
        return solve_nz(spec, rho, grid, with_maps=True).maps
    if route == "exact":
        return exact_maps(spec, grid)
    raise ValidationError(f"unknown route {route!r}")


def _choi_stack(maps: np.ndarray) -> np.ndarray:
    n, size, _ = maps.shape
    dim = int(round(np.sqrt(size)))
    return maps.reshape((n,) + (dim,) * 4).swapaxes(1, 4).reshape(n, size, size)


def divisibility(maps: np.ndarray, grid: TimeGrid, stride: int = DEFAULT_STRIDE,
                 determinant_guard: float = DETERMINANT_GUARD,
                 tolerance: float = DIVISIBILITY_TOL) -> DivisibilityReport:
    """Minimal Choi eigenvalue of Lambda_t Lambda_s^-1 over grid pairs s < t

    Times whose map is not invertible (|det| below the guard) are listed and
    skipped as starting points.
    """
    times = grid.times
    indices = np.arange(0, times.size, stride)
    pairs: List[Tuple[float, float, float]] = []
    singular: List[float] = []
    for pos, i in enumerate(indices):
        later = indices[pos + 1:]
        if later.size == 0:
            break
        lam_s = maps[i]
        if abs(np.linalg.det(lam_s)) < determinant_guard:
            singular.append(float(times[i]))
            continue
        inverse = np.linalg.inv(lam_s)
        propagators = maps[later] @ inverse
        chois = _choi_stack(propagators)
        lowest = np.linalg.eigvalsh(0.5 * (chois + np.conj(np.swapaxes(chois, 1, 2))))[:, 0]
        pairs.extend((float(times[i]), float(times[j]), float(e)) for j, e in zip(later, lowest))
    verdict = all(p[2] >= -tolerance for p in pairs)
    if singular:
        logger.info("divisibility: %d singular maps skipped", len(singular))
    return DivisibilityReport(tuple(pairs), verdict, tuple(singular), tolerance)
