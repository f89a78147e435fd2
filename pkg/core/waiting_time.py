"""
Classical renewal layer
Waiting-time distributions and everything derived from them: density f,
survival g, hazard h, memory kernel k, sprinkling density S, jump-count
probabilities p_n, the even-odd difference q, its rate mu, and the
square-root-survival channel.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from .errors import (ConfigError, InvariantViolationError, SaturatedSurvivalError,
                     ValidationError)
from .rational_laplace import ExpPolynomial, RationalLT, inverse_laplace
from .volterra import deconvolve_first_kind, trapezoid_convolution

logger = logging.getLogger(__name__)

SURVIVAL_FLOOR = 1e-200
MU_POLE_THRESHOLD = 1e-14
ROOT_XTOL = 1e-10
BOUNDS_SLACK = 1e-9


# --- Waiting-time specifications ---

@dataclass(frozen=True)
class Exponential:
    """Memoryless waiting time, f(t) = rate * exp(-rate t)"""
    rate: float = 1.0

    def validate(self) -> None:
        if not self.rate > 0:
            raise ValidationError(f"exponential rate must be > 0, got {self.rate}")

    def laplace(self) -> RationalLT:
        return RationalLT.pole(-self.rate, 1, self.rate)

    def mean(self) -> float:
        return 1.0 / self.rate

    def variance(self) -> float:
        return 1.0 / self.rate ** 2

    def to_dict(self) -> Dict[str, Any]:
        return {"type": "exponential", "rate": self.rate}


@dataclass(frozen=True)
class Erlang:
    """Convolution of n exponentials with the same rate"""
    n: int = 1
    rate: float = 1.0

    def validate(self) -> None:
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValidationError(f"Erlang order must be an integer >= 1, got {self.n}")
        if not self.rate > 0:
            raise ValidationError(f"Erlang rate must be > 0, got {self.rate}")

    def laplace(self) -> RationalLT:
        return RationalLT.pole(-self.rate, int(self.n), self.rate ** self.n)

    def mean(self) -> float:
        return self.n / self.rate

    def variance(self) -> float:
        return self.n / self.rate ** 2

    def to_dict(self) -> Dict[str, Any]:
        return {"type": "erlang", "n": int(self.n), "rate": self.rate}


@dataclass(frozen=True)
class Mixture:
    """Hyper-exponential style convex combination of components"""
    components: Tuple[Tuple[float, Union[Exponential, Erlang]], ...] = ()

    def validate(self) -> None:
        if not self.components:
            raise ValidationError("mixture needs at least one component")
        for weight, component in self.components:
            if not weight > 0:
                raise ValidationError(f"mixture weights must be positive, got {weight}")
            if not isinstance(component, (Exponential, Erlang)):
                raise ValidationError("mixture components must be exponential or Erlang")
            component.validate()
        total = sum(w for w, _ in self.components)
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(f"mixture weights must sum to 1, got {total!r}")

    def laplace(self) -> RationalLT:
        total = RationalLT.constant(0.0)
        for weight, component in self.components:
            total = total + component.laplace() * weight
        return total

    def mean(self) -> float:
        return sum(w * c.mean() for w, c in self.components)

    def variance(self) -> float:
        second = sum(w * (c.variance() + c.mean() ** 2) for w, c in self.components)
        return second - self.mean() ** 2

    def to_dict(self) -> Dict[str, Any]:
        return {"type": "mixture",
                "components": [{"weight": w, "spec": c.to_dict()} for w, c in self.components]}


@dataclass(frozen=True)
class Convolution:
    """Sum of independent waiting times"""
    parts: Tuple[Any, ...] = ()

    def validate(self) -> None:
        if not self.parts:
            raise ValidationError("convolution needs at least one part")
        for part in self.parts:
            part.validate()

    def laplace(self) -> RationalLT:
        total = RationalLT.constant(1.0)
        for part in self.parts:
            total = total * part.laplace()
        return total

    def mean(self) -> float:
        return sum(p.mean() for p in self.parts)

    def variance(self) -> float:
        return sum(p.variance() for p in self.parts)

    def to_dict(self) -> Dict[str, Any]:
        return {"type": "convolution", "parts": [p.to_dict() for p in self.parts]}


WaitingTimeSpec = Union[Exponential, Erlang, Mixture, Convolution]


def spec_from_dict(data: Any, path: str = "waiting_time") -> WaitingTimeSpec:
    """Parse a tagged waiting-time object such as {"type": "erlang", "n": 2, "rate": 1.0}"""
    if not isinstance(data, dict) or "type" not in data:
        raise ConfigError("expected an object with a 'type' tag", path)
    kind = str(data["type"]).lower()
    try:
        if kind == "exponential":
            spec = Exponential(rate=float(data.get("rate", 1.0)))
        elif kind == "erlang":
            n = data.get("n", 1)
            if isinstance(n, bool) or not isinstance(n, int):
                raise ConfigError(f"order must be an integer, got {n!r}", f"{path}.n")
            spec = Erlang(n=n, rate=float(data.get("rate", 1.0)))
        elif kind == "mixture":
            components = []
            for i, entry in enumerate(data.get("components", [])):
                sub = f"{path}.components[{i}]"
                if not isinstance(entry, dict) or "weight" not in entry or "spec" not in entry:
                    raise ConfigError("expected {'weight': w, 'spec': {...}}", sub)
                components.append((float(entry["weight"]), spec_from_dict(entry["spec"], f"{sub}.spec")))
            spec = Mixture(tuple(components))
        elif kind == "convolution":
            parts = [spec_from_dict(p, f"{path}.parts[{i}]") for i, p in enumerate(data.get("parts", []))]
            spec = Convolution(tuple(parts))
        else:
            raise ConfigError(f"unknown waiting-time type {data['type']!r}", f"{path}.type")
        spec.validate()
    except ValidationError as e:
        raise ConfigError(str(e), path) from e
    except (TypeError, ValueError) as e:
        raise ConfigError(f"malformed waiting-time parameters: {e}", path) from e
    return spec


def mean_waiting_time(spec: WaitingTimeSpec) -> float:
    return spec.mean()


# --- Renewal functions ---

@dataclass(frozen=True)
class RenewalFunctions:
    """Closed-form renewal quantities of one waiting-time distribution"""
    spec: Any
    f: ExpPolynomial
    g: ExpPolynomial
    k: ExpPolynomial
    S: ExpPolynomial
    f_LT: RationalLT
    g_LT: RationalLT
    k_LT: RationalLT
    S_LT: RationalLT


def build(spec: WaitingTimeSpec) -> RenewalFunctions:
    """Derive f, g, k, S from the waiting-time transform"""
    spec.validate()
    f_lt = spec.laplace()
    complement = 1 - f_lt
    g_lt = complement.divide_by_u()
    k_lt = f_lt.mul_u() / complement
    s_lt = f_lt / complement
    logger.debug("renewal transforms built for %s: k poles %s", spec, k_lt.poles)
    return RenewalFunctions(
        spec=spec,
        f=inverse_laplace(f_lt),
        g=inverse_laplace(g_lt),
        k=inverse_laplace(k_lt),
        S=inverse_laplace(s_lt),
        f_LT=f_lt,
        g_LT=g_lt,
        k_LT=k_lt,
        S_LT=s_lt,
    )


def hazard(rf: RenewalFunctions, t):
    """h(t) = f(t) / g(t)

    Raises:
        SaturatedSurvivalError: g fell below the underflow floor
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    g = np.atleast_1d(rf.g(t_arr))
    bad = g <= SURVIVAL_FLOOR
    if np.any(bad):
        first = int(np.argmax(bad))
        last_valid = float(t_arr[first - 1]) if first > 0 else None
        raise SaturatedSurvivalError(
            f"survival probability saturated at t = {t_arr[first]:.6g}", last_valid)
    h = np.atleast_1d(rf.f(t_arr)) / g
    return h if np.ndim(t) else float(h[0])


@dataclass(frozen=True)
class Singularity:
    """Zero of a decay function, bracketed on a grid and refined by bisection"""
    location: float
    bracket: Tuple[float, float]


def locate_zeros(fn: Callable[[np.ndarray], np.ndarray], times: np.ndarray) -> Tuple[Singularity, ...]:
    """Sign changes of a real function on a grid, refined with brentq"""
    times = np.asarray(times, dtype=float)
    values = np.real(np.asarray(fn(times)))
    found = []
    for i in range(times.size - 1):
        a, b = values[i], values[i + 1]
        if a == 0.0:
            continue
        if b == 0.0:
            found.append(Singularity(float(times[i + 1]), (float(times[i]), float(times[i + 1]))))
        elif np.sign(a) != np.sign(b):
            root = brentq(lambda s: float(np.real(fn(np.array([s]))[0])),
                          times[i], times[i + 1], xtol=ROOT_XTOL)
            found.append(Singularity(float(root), (float(times[i]), float(times[i + 1]))))
    return tuple(found)


@dataclass(frozen=True)
class JumpStatistics:
    """Jump-count probabilities p_0..p_N and the even-odd difference q"""
    p_n: Tuple[ExpPolynomial, ...]
    q: ExpPolynomial
    n_max: int
    tail_bound: float
    p_LT: Tuple[RationalLT, ...] = field(default=(), repr=False)
    q_LT: Optional[RationalLT] = field(default=None, repr=False)

    @property
    def q_dot(self) -> ExpPolynomial:
        return self.q.derivative()

    def probabilities(self, t) -> np.ndarray:
        """Array of shape (n_max + 1, len(t))"""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        return np.array([np.atleast_1d(p(t_arr)) for p in self.p_n])

    def alternating_sum(self, t) -> np.ndarray:
        probs = self.probabilities(t)
        signs = (-1.0) ** np.arange(probs.shape[0])
        return signs @ probs


def jump_statistics(rf: RenewalFunctions, n_max: int, t_end: float = 20.0) -> JumpStatistics:
    """p~_n = f~**n g~ and q~ = g~ / (1 + f~) in closed form"""
    if n_max < 0:
        raise ValidationError(f"N_max must be >= 0, got {n_max}")
    transforms = [rf.g_LT]
    for _ in range(n_max):
        transforms.append(transforms[-1] * rf.f_LT)
    p_n = tuple(inverse_laplace(r) for r in transforms)
    q_lt = rf.g_LT / (1 + rf.f_LT)
    tail = 1.0 - float(sum(np.real(p(t_end)) for p in p_n))
    logger.debug("jump statistics with N_max=%d: tail %.3e at t=%g", n_max, tail, t_end)
    return JumpStatistics(p_n=p_n, q=inverse_laplace(q_lt), n_max=n_max,
                          tail_bound=max(tail, 0.0), p_LT=tuple(transforms), q_LT=q_lt)


def mu(js: JumpStatistics, t):
    """mu(t) = -q'(t) / (2 q(t)), signed infinity where |q| is below threshold"""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    q = np.atleast_1d(js.q(t_arr))
    q_dot = np.atleast_1d(js.q_dot(t_arr))
    near_pole = np.abs(q) < MU_POLE_THRESHOLD
    with np.errstate(divide='ignore', invalid='ignore'):
        values = -0.5 * q_dot / q
    if np.any(near_pole):
        logger.warning("mu diverges near t = %s", t_arr[near_pole][:5])
        values = np.where(near_pole, np.copysign(np.inf, -q_dot), values)
    return values if np.ndim(t) else float(values[0])


def mu_poles(js: JumpStatistics, times: np.ndarray) -> Tuple[Singularity, ...]:
    """Divergences of mu, i.e. zeros of q on the grid"""
    return locate_zeros(js.q, times)


# --- Square-root survival channel ---

@dataclass(frozen=True)
class SqrtSurvivalChannel:
    """f_sqrt = -d/dt sqrt(g) and its memory kernel k_sqrt on a grid"""
    times: np.ndarray
    f_sqrt: np.ndarray
    k_smooth: np.ndarray
    delta_weight: float
    residual: float
    condition: float


def _sqrt_channel_on(rf: RenewalFunctions, times: np.ndarray):
    g = rf.g(times)
    if np.any(g <= 0):
        first = int(np.argmax(g <= 0))
        raise SaturatedSurvivalError(f"survival not positive at t = {times[first]:.6g}",
                                     float(times[first - 1]) if first else None)
    sqrt_g = np.sqrt(g)
    f_sqrt = rf.f(times) / (2.0 * sqrt_g)
    delta_weight = 0.5 * float(rf.f(0.0))
    kernel, condition = deconvolve_first_kind(f_sqrt - delta_weight * sqrt_g,
                                              lambda s: np.sqrt(rf.g(s)), times)
    return sqrt_g, f_sqrt, delta_weight, kernel, condition


def sqrt_survival_channel(rf: RenewalFunctions, times: np.ndarray,
                          halving_tolerance: Optional[float] = None,
                          max_refinements: int = 3) -> SqrtSurvivalChannel:
    """Memory kernel of the survival probability sqrt(g) by deconvolution

    With halving_tolerance set, the grid is refined until halving the step
    changes the kernel by less than the tolerance; values are returned on the
    requested grid.
    """
    times = np.asarray(times, dtype=float)
    step = times[1] - times[0]
    sqrt_g, f_sqrt, delta_weight, kernel, condition = _sqrt_channel_on(rf, times)
    if halving_tolerance is not None:
        stride = 1
        for _ in range(max_refinements):
            stride *= 2
            fine = np.linspace(times[0], times[-1], stride * (times.size - 1) + 1)
            refined = _sqrt_channel_on(rf, fine)[3][::stride]
            change = float(np.max(np.abs(refined - kernel)))
            kernel = refined
            if change < halving_tolerance:
                break
        else:
            logger.warning("k_sqrt still changes by %.3e after %d refinements", change, max_refinements)
    reconstructed = delta_weight * sqrt_g + trapezoid_convolution(kernel, sqrt_g, step)
    residual = float(np.max(np.abs(f_sqrt - reconstructed)))
    logger.debug("sqrt-survival deconvolution: residual %.3e, condition %.3e", residual, condition)
    return SqrtSurvivalChannel(times=times, f_sqrt=f_sqrt, k_smooth=kernel,
                               delta_weight=delta_weight, residual=residual, condition=condition)


# --- Bounds ---

@dataclass(frozen=True)
class BoundsReport:
    """Rows of (t, S, h, S/g)"""
    t: np.ndarray
    S: np.ndarray
    h: np.ndarray
    S_over_g: np.ndarray

    def rows(self) -> List[Tuple[float, float, float, float]]:
        return list(zip(self.t, self.S, self.h, self.S_over_g))


def bounds_report(rf: RenewalFunctions, times: np.ndarray) -> BoundsReport:
    """Check S(t) <= h(t) <= S(t)/g(t) on the grid

    Raises:
        InvariantViolationError: naming the first offending t
    """
    times = np.asarray(times, dtype=float)
    h = hazard(rf, times)
    s = rf.S(times)
    s_over_g = s / rf.g(times)
    bad = (s - BOUNDS_SLACK > h) | (h > s_over_g + BOUNDS_SLACK)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise InvariantViolationError(
            f"bound S <= h <= S/g violated at t = {times[i]:.12g}: "
            f"S={s[i]:.12g}, h={h[i]:.12g}, S/g={s_over_g[i]:.12g}")
    return BoundsReport(times, s, h, s_over_g)
