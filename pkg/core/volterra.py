"""
Volterra equation kernels shared by the renewal, generator and solver layers

- first-kind deconvolution f = k * G by midpoint product integration
- memory equations x' = delta * x + k * x by the implicit product trapezoidal rule
- trapezoidal convolution of sampled functions
"""

import logging
from typing import Callable, Tuple

import numpy as np
from scipy.signal import fftconvolve

from .errors import AccuracyError, DeconvolutionUnstableError

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e12
COST_WARNING_POINTS = 20000


def trapezoid_convolution(a: np.ndarray, b: np.ndarray, step: float) -> np.ndarray:
    """(a * b)(t_i) = integral_0^t_i a(t_i - s) b(s) ds on a uniform grid"""
    a = np.asarray(a)
    b = np.asarray(b)
    n = a.shape[0]
    full = fftconvolve(a, b)[:n]
    return step * (full - 0.5 * (a * b[0] + a[0] * b))


def deconvolve_first_kind(rhs: np.ndarray, factor: Callable[[np.ndarray], np.ndarray],
                          times: np.ndarray) -> Tuple[np.ndarray, float]:
    """Solve rhs(t) = integral_0^t k(t - s) factor(s) ds for k

    Unknowns live at the midpoints t_{m-1/2}; the lower-triangular Toeplitz
    system is solved by forward substitution. Returns k on the grid (midpoint
    values averaged, end points extrapolated) and the exact 1-norm condition
    number of the system.

    Raises:
        DeconvolutionUnstableError: condition number above 1e12
    """
    times = np.asarray(times, dtype=float)
    n = times.size - 1
    if n < 2:
        raise ValueError("deconvolution needs at least three grid points")
    step = times[1] - times[0]
    mids = times[:-1] + 0.5 * step
    column = step * np.asarray(factor(mids), dtype=float)
    if column[0] == 0:
        raise DeconvolutionUnstableError("vanishing diagonal in first-kind system")

    # unknowns and the first column of the inverse, solved together
    rhs_block = np.zeros((n, 2))
    rhs_block[:, 0] = np.asarray(rhs, dtype=float)[1:]
    rhs_block[0, 1] = 1.0
    solution = np.zeros((n, 2))
    for i in range(n):
        history = column[i:0:-1] @ solution[:i] if i else 0.0
        solution[i] = (rhs_block[i] - history) / column[0]

    condition = float(np.sum(np.abs(column)) * np.sum(np.abs(solution[:, 1])))
    if condition > MAX_CONDITION:
        raise DeconvolutionUnstableError(
            f"first-kind Volterra system condition {condition:.3e} exceeds {MAX_CONDITION:.0e}",
            condition)

    mid_values = solution[:, 0]
    kernel = np.empty(times.size)
    kernel[1:-1] = 0.5 * (mid_values[:-1] + mid_values[1:])
    kernel[0] = 1.5 * mid_values[0] - 0.5 * mid_values[1]
    kernel[-1] = 1.5 * mid_values[-1] - 0.5 * mid_values[-2]
    return kernel, condition


def integrate_memory_equation(kernel: np.ndarray, delta: np.ndarray, step: float,
                              x0: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Independent scalar memory equations x' = delta x + integral k(t-s) x(s) ds

    Args:
        kernel: smooth kernel samples, shape (n_points, n_channels)
        delta: delta weights per channel
        step: grid spacing
        x0: initial values per channel

    Returns:
        (x, x') sampled on the grid, both shaped like kernel
    """
    kernel = np.asarray(kernel, dtype=complex)
    n_points, n_channels = kernel.shape
    if n_points > COST_WARNING_POINTS:
        logger.warning("Volterra history sum over %d points is O(N^2); expect a long run", n_points)
    delta = np.asarray(delta, dtype=complex)
    x = np.zeros((n_points, n_channels), dtype=complex)
    rate = np.zeros((n_points, n_channels), dtype=complex)
    x[0] = x0
    rate[0] = delta * x[0]
    implicit = delta + 0.5 * step * kernel[0]
    denominator = 1.0 - 0.5 * step * implicit
    for j in range(n_points - 1):
        history = 0.5 * kernel[j + 1] * x[0]
        if j:
            history = history + np.einsum('ic,ic->c', kernel[j:0:-1], x[1:j + 1])
        history = step * history
        x[j + 1] = (x[j] + 0.5 * step * (rate[j] + history)) / denominator
        rate[j + 1] = implicit * x[j + 1] + history
    return x, rate


def solve_memory_equation(kernel_fn: Callable[[np.ndarray], np.ndarray], delta: np.ndarray,
                          times: np.ndarray, x0: np.ndarray,
                          tolerance: float) -> Tuple[np.ndarray, np.ndarray, float]:
    """Memory equations at steps h, h/2, h/4 with Richardson extrapolation

    The accuracy check compares the extrapolated solutions of the (h, h/2)
    and (h/2, h/4) pairs; the finer one is returned.

    Raises:
        AccuracyError: extrapolated solutions differ by more than tolerance
    """
    times = np.asarray(times, dtype=float)
    step = times[1] - times[0]
    levels = []
    for factor in (1, 2, 4):
        grid = np.linspace(times[0], times[-1], factor * (times.size - 1) + 1)
        x, rate = integrate_memory_equation(kernel_fn(grid), delta, step / factor, x0)
        levels.append((x[::factor], rate[::factor]))
    (x1, _), (x2, r2), (x4, r4) = levels
    coarse = (4.0 * x2 - x1) / 3.0
    x = (4.0 * x4 - x2) / 3.0
    rate = (4.0 * r4 - r2) / 3.0
    discrepancy = float(np.max(np.abs(x - coarse)))
    logger.debug("memory equation step-halving discrepancy %.3e", discrepancy)
    if discrepancy > tolerance:
        raise AccuracyError(
            f"Volterra step halving changed the solution by {discrepancy:.3e} (> {tolerance:.1e}); "
            f"refine the grid", discrepancy)
    return x, rate, discrepancy
