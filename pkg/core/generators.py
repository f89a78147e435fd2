"""
Time-local (TCL), memory-kernel (NZ) and Redfield-like generators over a
shared damping basis, and the channel-by-channel conversions between them.

A channel function is stored in one of four representations:

    ExactKernel  NZ memory kernel, ExpPolynomial with optional delta weight
    ExactRate    smooth ExpPolynomial rate (Redfield channels)
    ExactDecay   TCL channel through its decay factor c = base**exponent,
                 m = c'/c, so zeros of c are the TCL singularities
    Sampled      values on a uniform grid (+ delta weight for NZ channels)
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import AccuracyError, ConvergenceError, TCLSingularError, ValidationError
from .rational_laplace import ExpPolynomial, RationalLT, inverse_laplace
from .superop import (DampingBasis, KrausMap, SuperOperator, damping_basis,
                      lindblad_form, liouville)
from .timegrid import TimeGrid
from .volterra import deconvolve_first_kind, integrate_memory_equation, trapezoid_convolution
from .waiting_time import RenewalFunctions, Singularity, locate_zeros

logger = logging.getLogger(__name__)

DEFAULT_SCAN = TimeGrid(20.0, 2001)
DEFAULT_DECONVOLUTION_GRID = TimeGrid(10.0, 10001)
SINGULAR_WINDOW = 1e-9


class GeneratorKind(Enum):
    """Generator families"""
    TCL = "tcl"
    NZ = "nz"
    REDFIELD = "redfield"


@dataclass(frozen=True)
class ExactKernel:
    kernel: ExpPolynomial


@dataclass(frozen=True)
class ExactRate:
    rate: ExpPolynomial


@dataclass(frozen=True)
class ExactDecay:
    base: ExpPolynomial
    exponent: float = 1.0

    @property
    def is_rational(self) -> bool:
        return float(self.exponent).is_integer() and self.exponent >= 0

    def rational(self) -> ExpPolynomial:
        return self.base.power(int(self.exponent))


@dataclass(frozen=True, eq=False)
class Sampled:
    times: np.ndarray
    values: np.ndarray
    delta_weight: complex = 0.0


Representation = Union[ExactKernel, ExactRate, ExactDecay, Sampled]


def _interp(times: np.ndarray, values: np.ndarray, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.iscomplexobj(values):
        return np.interp(t, times, values.real) + 1j * np.interp(t, times, values.imag)
    return np.interp(t, times, values)


@dataclass(frozen=True, eq=False)
class ChannelFunction:
    """Time function of one damping-basis channel"""
    label: int
    kind: GeneratorKind
    representation: Representation
    singularities: Tuple[Singularity, ...] = ()

    # constructors
    @classmethod
    def zero(cls, label: int, kind: GeneratorKind) -> "ChannelFunction":
        if kind is GeneratorKind.NZ:
            return cls(label, kind, ExactKernel(ExpPolynomial.zero()))
        if kind is GeneratorKind.REDFIELD:
            return cls(label, kind, ExactRate(ExpPolynomial.zero()))
        return cls(label, kind, ExactDecay(ExpPolynomial.exponential(0.0), 1.0))

    @classmethod
    def tcl_constant(cls, label: int, rate: complex) -> "ChannelFunction":
        """m(t) = rate, decay factor exp(rate t)"""
        return cls(label, GeneratorKind.TCL, ExactDecay(ExpPolynomial.exponential(-rate), 1.0))

    @classmethod
    def tcl_decay(cls, label: int, base: ExpPolynomial, exponent: float = 1.0,
                  scan: TimeGrid = DEFAULT_SCAN) -> "ChannelFunction":
        """TCL channel with decay factor base**exponent, zeros of base located on scan"""
        zeros = locate_zeros(base.evaluate, scan.times) if base.real else ()
        return cls(label, GeneratorKind.TCL, ExactDecay(base, exponent), zeros)

    # queries
    @property
    def is_exact(self) -> bool:
        return not isinstance(self.representation, Sampled)

    @property
    def delta_weight(self) -> complex:
        rep = self.representation
        if isinstance(rep, ExactKernel):
            return rep.kernel.delta_weight
        if isinstance(rep, Sampled):
            return rep.delta_weight
        return 0.0

    def is_zero(self) -> bool:
        rep = self.representation
        if isinstance(rep, ExactKernel):
            return rep.kernel.is_zero()
        if isinstance(rep, ExactRate):
            return rep.rate.is_zero()
        if isinstance(rep, ExactDecay):
            if rep.exponent == 0:
                return True
            terms = rep.base.terms
            return len(terms) == 1 and terms[0].power == 0 and terms[0].decay == 0 and terms[0].amplitude == 1
        return bool(np.all(rep.values == 0)) and rep.delta_weight == 0

    def values(self, t):
        """Smooth part m(t); the delta weight of NZ channels is excluded"""
        rep = self.representation
        if isinstance(rep, ExactKernel):
            return rep.kernel.evaluate(t)
        if isinstance(rep, ExactRate):
            return rep.rate.evaluate(t)
        if isinstance(rep, ExactDecay):
            base = rep.base.evaluate(t)
            with np.errstate(divide='ignore', invalid='ignore'):
                return rep.exponent * rep.base.derivative().evaluate(t) / base
        return _interp(rep.times, rep.values, t)

    def integral(self, t):
        """Running integral over [0, t], delta weight included"""
        rep = self.representation
        if isinstance(rep, ExactKernel):
            return rep.kernel.integrate(t)
        if isinstance(rep, ExactRate):
            return rep.rate.integrate(t)
        if isinstance(rep, ExactDecay):
            return np.log(np.asarray(self.decay(t), dtype=complex))
        running = cumulative_trapezoid(rep.values, rep.times, initial=0) + rep.delta_weight
        return _interp(rep.times, running, t)

    def decay(self, t):
        """exp of the running integral of a local channel"""
        if self.kind is GeneratorKind.NZ:
            raise ValidationError("decay factors belong to local (TCL/Redfield) channels")
        rep = self.representation
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        if isinstance(rep, ExactDecay):
            if rep.is_rational:
                out = np.atleast_1d(rep.rational().evaluate(t_arr))
            else:
                base = np.atleast_1d(rep.base.evaluate(t_arr))
                with np.errstate(invalid='ignore'):
                    out = np.power(base, rep.exponent)
        elif isinstance(rep, ExactRate):
            out = np.exp(np.atleast_1d(rep.rate.integrate(t_arr)))
        else:
            running = cumulative_trapezoid(rep.values, rep.times, initial=0)
            out = np.exp(_interp(rep.times, running, t_arr))
        return out if np.ndim(t) else out[0]

    def decay_derivative(self, t):
        """d/dt of the decay factor"""
        rep = self.representation
        if isinstance(rep, ExactDecay) and rep.is_rational:
            return rep.rational().derivative().evaluate(t)
        return self.values(t) * self.decay(t)

    def first_singularity(self, t_end: float) -> Optional[Singularity]:
        for s in self.singularities:
            if s.location <= t_end:
                return s
        return None


@dataclass(frozen=True, eq=False)
class GeneratorSpec:
    """Damping basis plus one channel function per eigen-operator"""
    basis: DampingBasis
    channels: Tuple[ChannelFunction, ...]
    kind: GeneratorKind

    def __post_init__(self):
        object.__setattr__(self, 'channels', tuple(self.channels))
        if len(self.channels) != len(self.basis):
            raise ValidationError(f"{len(self.channels)} channels for a basis of size {len(self.basis)}")
        for alpha in self.basis.stationary_channels():
            if not self.channels[alpha].is_zero():
                raise ValidationError(f"stationary channel {alpha} must have a zero function")
        for ch in self.channels:
            if ch.kind is not self.kind:
                raise ValidationError(f"channel {ch.label} is {ch.kind.value}, generator is {self.kind.value}")

    @property
    def dim(self) -> int:
        return self.basis.dim

    def values(self, times) -> np.ndarray:
        """Smooth channel values, shape (len(times), n_channels)"""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        return np.column_stack([np.broadcast_to(np.atleast_1d(ch.values(times)), times.shape)
                                for ch in self.channels]).astype(complex)

    def delta_weights(self) -> np.ndarray:
        return np.array([ch.delta_weight for ch in self.channels], dtype=complex)

    def singularities(self) -> Tuple[Singularity, ...]:
        found = [s for ch in self.channels for s in ch.singularities]
        return tuple(sorted(found, key=lambda s: s.location))

    def first_singularity(self, t_end: float = np.inf) -> Optional[Singularity]:
        for s in self.singularities():
            if s.location <= t_end:
                return s
        return None


# --- Builders ---

def nz_from_semimarkov(E: KrausMap, rf: RenewalFunctions) -> GeneratorSpec:
    """Memory-kernel generator k(t) (E - 1) in its damping basis"""
    generator = liouville(E) - SuperOperator.identity(E.dim)
    basis = damping_basis(generator)
    channels = []
    for alpha, lam in enumerate(basis.eigenvalues):
        if lam == 0:
            channels.append(ChannelFunction.zero(alpha, GeneratorKind.NZ))
        else:
            channels.append(ChannelFunction(alpha, GeneratorKind.NZ, ExactKernel(rf.k.scale(lam))))
    return GeneratorSpec(basis, tuple(channels), GeneratorKind.NZ)


def hazard_tcl(generator: SuperOperator, rf: RenewalFunctions,
               scan: TimeGrid = DEFAULT_SCAN) -> GeneratorSpec:
    """Local generator h(t) L; channel decay factors are g**(-lambda)"""
    basis = damping_basis(generator)
    channels = []
    for alpha, lam in enumerate(basis.eigenvalues):
        if abs(lam.imag) > 1e-12:
            raise ValidationError("hazard-driven generators need real damping eigenvalues")
        if lam == 0:
            channels.append(ChannelFunction.zero(alpha, GeneratorKind.TCL))
        else:
            channels.append(ChannelFunction.tcl_decay(alpha, rf.g, -lam.real, scan))
    return GeneratorSpec(basis, tuple(channels), GeneratorKind.TCL)


# --- Channel conversions ---

def tcl_channel_from_nz(m_nz: ChannelFunction, scan: TimeGrid = DEFAULT_SCAN,
                        regular_until: Optional[float] = None) -> ChannelFunction:
    """m_TCL = G / (1 + int G) with G the inverse transform of m/(u - m)

    Raises:
        TCLSingularError: the decay factor vanishes before regular_until
    """
    if m_nz.kind is not GeneratorKind.NZ:
        raise ValidationError("tcl_channel_from_nz expects a memory-kernel channel")
    rep = m_nz.representation
    if isinstance(rep, ExactKernel):
        decay = inverse_laplace(1 / (RationalLT.u() - rep.kernel.laplace()))
        channel = ChannelFunction.tcl_decay(m_nz.label, decay, 1.0, scan)
    else:
        step = rep.times[1] - rep.times[0]
        x, rate = integrate_memory_equation(rep.values.reshape(-1, 1), np.array([rep.delta_weight]),
                                            step, np.ones(1))
        decay, rate = x[:, 0], rate[:, 0]
        with np.errstate(divide='ignore', invalid='ignore'):
            values = rate / decay
        if not np.iscomplexobj(rep.values) or np.all(np.abs(decay.imag) < 1e-12):
            decay, values = decay.real, values.real
        zeros = locate_zeros(lambda s: _interp(rep.times, decay.real, s), rep.times)
        channel = ChannelFunction(m_nz.label, GeneratorKind.TCL, Sampled(rep.times, values), zeros)
    if regular_until is not None:
        hit = channel.first_singularity(regular_until)
        if hit is not None:
            raise TCLSingularError(f"channel {m_nz.label}: decay factor vanishes at t = {hit.location:.12g}",
                                   hit.bracket)
    return channel


def nz_channel_from_tcl(m_tcl: ChannelFunction,
                        grid: TimeGrid = DEFAULT_DECONVOLUTION_GRID) -> ChannelFunction:
    """m_NZ from the decay factor c = exp(int m_TCL) solving c' = m_NZ * c

    Closed form m~ = u - 1/c~ when c is an ExpPolynomial; otherwise the first-kind
    Volterra equation for the smooth kernel is solved on grid.
    """
    if m_tcl.kind is not GeneratorKind.TCL:
        raise ValidationError("nz_channel_from_tcl expects a time-local channel")
    rep = m_tcl.representation
    if isinstance(rep, ExactDecay) and rep.is_rational:
        c_lt = rep.rational().laplace()
        kernel = inverse_laplace(RationalLT.u() - 1 / c_lt)
        return ChannelFunction(m_tcl.label, GeneratorKind.NZ, ExactKernel(kernel))
    times = grid.times
    c = np.atleast_1d(m_tcl.decay(times))
    c_dot = np.atleast_1d(m_tcl.decay_derivative(times))
    if np.iscomplexobj(c) and np.all(np.abs(c.imag) < 1e-12) and np.all(np.abs(np.imag(c_dot)) < 1e-12):
        c, c_dot = c.real, np.real(c_dot)
    if np.iscomplexobj(c):
        raise ValidationError("gridded conversion supports real decay factors only")
    delta = float(c_dot[0])
    kernel, condition = deconvolve_first_kind(c_dot - delta * c,
                                              lambda s: np.real(m_tcl.decay(s)), times)
    logger.debug("channel %d: NZ kernel deconvolved (condition %.3e)", m_tcl.label, condition)
    return ChannelFunction(m_tcl.label, GeneratorKind.NZ, Sampled(times, kernel, delta))


def redfield_channel(m_nz: ChannelFunction) -> ChannelFunction:
    """Running integral of the memory kernel, delta weight included"""
    if m_nz.kind is not GeneratorKind.NZ:
        raise ValidationError("redfield_channel expects a memory-kernel channel")
    rep = m_nz.representation
    if isinstance(rep, ExactKernel):
        return ChannelFunction(m_nz.label, GeneratorKind.REDFIELD, ExactRate(rep.kernel.antiderivative()))
    running = cumulative_trapezoid(rep.values, rep.times, initial=0) + rep.delta_weight
    return ChannelFunction(m_nz.label, GeneratorKind.REDFIELD, Sampled(rep.times, running))


def _fixed_point_iterate(kernel: np.ndarray, delta: complex, step: float, max_iter: int,
                         tol: float, label: int) -> np.ndarray:
    current = np.zeros(kernel.size, dtype=complex)
    change = np.inf
    for iteration in range(1, max_iter + 1):
        running = cumulative_trapezoid(current, dx=step, initial=0)
        with np.errstate(over='ignore', invalid='ignore'):
            updated = delta + np.exp(-running) * trapezoid_convolution(kernel, np.exp(running), step)
        change = float(np.max(np.abs(updated - current)))
        current = updated
        if not np.isfinite(change):
            break
        if change < tol:
            logger.debug("fixed point for channel %d reached after %d updates (step %.3e)",
                         label, iteration - 1, step)
            return current
    raise ConvergenceError(
        f"fixed-point iteration for channel {label} did not converge in {max_iter} iterations "
        f"(last change {change:.3e})", change)


def fixed_point_tcl(m_nz: ChannelFunction, grid: TimeGrid, max_iter: int = 200,
                    tol: float = 1e-10, accuracy: float = 1e-6) -> ChannelFunction:
    """Iterate m(t) = int_0^t m_NZ(t - s) exp(-int_s^t m) ds for a commuting channel

    The first iterate from m = 0 is the Redfield rate. The iteration runs at
    steps h, h/2 and h/4; the (h/2, h/4) Richardson extrapolation is returned
    and compared with the (h, h/2) one.

    Raises:
        ConvergenceError: no convergence within max_iter, with the last change
        AccuracyError: the two extrapolations differ by more than accuracy
    """
    times = grid.times
    levels = []
    for factor in (1, 2, 4):
        fine = np.linspace(times[0], times[-1], factor * (times.size - 1) + 1)
        kernel = np.asarray(m_nz.values(fine), dtype=complex)
        levels.append(_fixed_point_iterate(kernel, m_nz.delta_weight, grid.step / factor,
                                           max_iter, tol, m_nz.label)[::factor])
    coarse = (4.0 * levels[1] - levels[0]) / 3.0
    current = (4.0 * levels[2] - levels[1]) / 3.0
    discrepancy = float(np.max(np.abs(current - coarse)))
    logger.debug("fixed point for channel %d: step-halving discrepancy %.3e", m_nz.label, discrepancy)
    if discrepancy > accuracy:
        raise AccuracyError(
            f"fixed-point rate for channel {m_nz.label} changed by {discrepancy:.3e} under step halving "
            f"(> {accuracy:.1e}); refine the grid", discrepancy)
    values = current.real if np.all(np.abs(current.imag) < tol) else current
    return ChannelFunction(m_nz.label, GeneratorKind.TCL, Sampled(times, values))


# --- Whole generators ---

def to_tcl(spec: GeneratorSpec, scan: TimeGrid = DEFAULT_SCAN) -> GeneratorSpec:
    return GeneratorSpec(spec.basis, tuple(tcl_channel_from_nz(ch, scan) for ch in spec.channels),
                         GeneratorKind.TCL)


def to_nz(spec: GeneratorSpec, grid: TimeGrid = DEFAULT_DECONVOLUTION_GRID) -> GeneratorSpec:
    return GeneratorSpec(spec.basis, tuple(nz_channel_from_tcl(ch, grid) for ch in spec.channels),
                         GeneratorKind.NZ)


def to_redfield(spec: GeneratorSpec) -> GeneratorSpec:
    return GeneratorSpec(spec.basis, tuple(redfield_channel(ch) for ch in spec.channels),
                         GeneratorKind.REDFIELD)


def assemble(spec: GeneratorSpec, t: float) -> SuperOperator:
    """sum_alpha m_alpha(t) M_alpha without delta contributions

    Raises:
        TCLSingularError: t hits a singularity of a local channel
    """
    for s in spec.singularities():
        if abs(s.location - t) <= SINGULAR_WINDOW * max(1.0, abs(t)):
            raise TCLSingularError(f"local generator is singular at t = {t:.12g}", s.bracket)
    values = spec.values([t])[0]
    if not np.all(np.isfinite(values)):
        raise TCLSingularError(f"local generator is not finite at t = {t:.12g}")
    return spec.basis.reconstruct(values)


def assemble_many(spec: GeneratorSpec, times) -> np.ndarray:
    """Generator matrices at many times, shape (len(times), d^2, d^2)"""
    return np.einsum('ta,aij->tij', spec.values(times), spec.basis.projectors())


def lindblad_rates(spec: GeneratorSpec, times, op: np.ndarray) -> np.ndarray:
    """Rate along op of the GKS form of the assembled generator at each time"""
    return np.array([lindblad_form(assemble(spec, t)).rate_along(op) for t in np.atleast_1d(times)])
