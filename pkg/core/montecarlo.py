"""
Monte Carlo oracle for the renewal process

Jump counts are sampled trajectory by trajectory, binned on the time grid
and averaged into p_n(t), q(t) and the semi-Markov state. Random streams are
Philox counter-based generators keyed by (seed, stream id).
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError
from .solvers import Trajectory
from .superop import DensityMatrix, KrausMap, liouville, unvec, vec
from .timegrid import TimeGrid
from .waiting_time import Convolution, Erlang, Exponential, Mixture, WaitingTimeSpec

logger = logging.getLogger(__name__)

COUNT_CAP = 64
CHUNK_TRIALS = 10000


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream: Philox keyed by seed and stream id"""
    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.Philox(sequence))


def _exponential_draws(rng: np.random.Generator, rate: float, size) -> np.ndarray:
    # inverse CDF
    return -np.log1p(-rng.random(size)) / rate


def sample_waiting_time(spec: WaitingTimeSpec, rng: np.random.Generator, size=None):
    """Draw waiting times (a scalar when size is None)"""
    if isinstance(spec, Exponential):
        return _exponential_draws(rng, spec.rate, size)
    if isinstance(spec, Erlang):
        shape = (int(spec.n),) + (() if size is None else tuple(np.atleast_1d(size)))
        return _exponential_draws(rng, spec.rate, shape).sum(axis=0)
    if isinstance(spec, Mixture):
        weights = np.array([w for w, _ in spec.components])
        choice = rng.choice(len(weights), size=size, p=weights / weights.sum())
        draws = [sample_waiting_time(c, rng, size) for _, c in spec.components]
        return np.choose(choice, draws)
    if isinstance(spec, Convolution):
        total = sample_waiting_time(spec.parts[0], rng, size)
        for part in spec.parts[1:]:
            total = total + sample_waiting_time(part, rng, size)
        return total
    raise ValidationError(f"unsupported waiting-time specification {spec!r}")


@dataclass(frozen=True, eq=False)
class CountEstimate:
    """Histogram of jump counts per grid time; column COUNT_CAP holds n >= cap"""
    grid: TimeGrid
    histogram: np.ndarray
    trials: int

    @property
    def cap(self) -> int:
        return self.histogram.shape[1] - 1

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def p_hat(self) -> np.ndarray:
        """Estimated p_n(t) for n < cap, shape (cap, len(times))"""
        return self.histogram[:, :-1].T / self.trials

    @property
    def q_hat(self) -> np.ndarray:
        signs = (-1.0) ** np.arange(self.cap)
        return signs @ self.p_hat

    @property
    def sigma(self) -> np.ndarray:
        """Binomial standard error of p_hat"""
        p = self.p_hat
        return np.sqrt(p * (1.0 - p) / self.trials)

    @property
    def overflow_bias(self) -> np.ndarray:
        """Probability mass in the overflow bin, a bound on the q_hat bias"""
        return self.histogram[:, -1] / self.trials


def _count_chunk(spec: WaitingTimeSpec, times: np.ndarray, trials: int, cap: int,
                 rng: np.random.Generator) -> np.ndarray:
    arrivals = np.cumsum(np.asarray(sample_waiting_time(spec, rng, (trials, cap))), axis=1)
    # at_least[n - 1, i] counts trajectories with at least n jumps by times[i]
    at_least = np.empty((cap, times.size), dtype=np.int64)
    for n in range(cap):
        first_index = np.searchsorted(times, arrivals[:, n], side='left')
        at_least[n] = np.cumsum(np.bincount(first_index, minlength=times.size + 1))[:times.size]
    histogram = np.empty((times.size, cap + 1), dtype=np.int64)
    histogram[:, 0] = trials - at_least[0]
    histogram[:, 1:cap] = (at_least[:-1] - at_least[1:]).T
    histogram[:, cap] = at_least[-1]
    return histogram


def estimate_counts(spec: WaitingTimeSpec, grid: TimeGrid, trials: int,
                    rng: np.random.Generator, cap: int = COUNT_CAP) -> CountEstimate:
    """Bin sampled renewal trajectories on the grid"""
    if trials < 1:
        raise ValidationError(f"trials must be >= 1, got {trials}")
    spec.validate()
    times = grid.times
    histogram = np.zeros((times.size, cap + 1), dtype=np.int64)
    remaining = trials
    while remaining:
        size = min(remaining, CHUNK_TRIALS)
        histogram += _count_chunk(spec, times, size, cap, rng)
        remaining -= size
    estimate = CountEstimate(grid, histogram, trials)
    if estimate.overflow_bias.max() > 0:
        logger.warning("%d trajectories exceeded %d jumps", int(histogram[-1, -1]), cap)
    return estimate


def merge_counts(estimates: Sequence[CountEstimate]) -> CountEstimate:
    if not estimates:
        raise ValidationError("nothing to merge")
    first = estimates[0]
    for other in estimates[1:]:
        if other.grid != first.grid or other.cap != first.cap:
            raise ValidationError("count estimates live on different grids")
    return CountEstimate(first.grid, sum(e.histogram for e in estimates), sum(e.trials for e in estimates))


def estimate_counts_parallel(spec: WaitingTimeSpec, grid: TimeGrid, trials: int, seed: int,
                             streams: int = 1, max_workers: Optional[int] = None) -> CountEstimate:
    """Split the trials over independent streams and merge in stream order"""
    if streams < 1:
        raise ValidationError(f"streams must be >= 1, got {streams}")
    base, extra = divmod(trials, streams)
    shares = [base + (1 if i < extra else 0) for i in range(streams)]

    def run(stream_id: int) -> CountEstimate:
        rng = RngStream(seed, stream_id).generator()
        return estimate_counts(spec, grid, shares[stream_id], rng)

    active = [i for i, n in enumerate(shares) if n > 0]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        parts = list(pool.map(run, active))
    return merge_counts(parts)


def estimate_state(E: KrausMap, counts: CountEstimate, rho0) -> Trajectory:
    """rho_hat(t) = sum_n p_hat_n(t) E^n rho0 with entrywise standard errors

    Trajectories in the overflow bin (at least cap jumps) contribute E^cap rho0,
    so the trace is kept; their mass is reported as overflow_bias.
    """
    if isinstance(rho0, DensityMatrix):
        rho0 = rho0.entries
    step_map = liouville(E).matrix
    terms = np.empty((counts.cap + 1, step_map.shape[0]), dtype=complex)
    terms[0] = vec(np.asarray(rho0, dtype=complex))
    for n in range(1, counts.cap + 1):
        terms[n] = step_map @ terms[n - 1]
    p = counts.histogram.T / counts.trials
    vectors = p.T @ terms
    # multinomial variance of the sample mean, real and imaginary parts separately
    var_re = (p.T @ terms.real ** 2 - vectors.real ** 2) / counts.trials
    var_im = (p.T @ terms.imag ** 2 - vectors.imag ** 2) / counts.trials
    errors = np.sqrt(np.clip(var_re, 0, None) + np.clip(var_im, 0, None))
    overflow = float(counts.overflow_bias.max())
    if overflow > 0:
        logger.warning("state estimate: %.3e of the trajectories counted at the %d-jump cap",
                       overflow, counts.cap)
    dim = E.dim
    states = np.array([unvec(v, dim) for v in vectors])
    return Trajectory(counts.grid, states, errors=np.array([unvec(e, dim).real for e in errors]),
                      route="mc", metadata={"trials": counts.trials, "overflow_bias": overflow})
