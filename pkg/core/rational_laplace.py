"""
Exact algebra of rational Laplace transforms

Rational functions keep their denominator in factored form, a tuple of
(pole, order) pairs, so the high-order poles of Erlang-type transforms never
pass through numerical root finding. Only genuinely new denominators (the
numerator of a divisor) are factored, by companion-matrix eigenvalues.

Time-domain counterparts are ExpPolynomials, sums of c * t**m * exp(-a t)
plus an optional Dirac-delta weight at t = 0.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import (DegeneratePolesError, InvalidTransformError,
                     NumericalError, UnsupportedTimeError)

logger = logging.getLogger(__name__)

ROOT_CLUSTER_RTOL = 1e-8
ROOT_CLUSTER_ATOL = 1e-10
SPLIT_EPS = 1e-13
MAX_SPLIT_RTOL = 1e-3
TRIM_RTOL = 1e-13
CANCEL_RTOL = 1e-9
REALITY_TOL = 1e-9
TALBOT_NODES = 32

Number = Union[int, float, complex]
Poles = Tuple[Tuple[complex, int], ...]


# --- Polynomials ---

def _trim(coeffs: np.ndarray) -> np.ndarray:
    coeffs = np.atleast_1d(np.asarray(coeffs, dtype=complex))
    if coeffs.size == 0:
        return np.zeros(1, dtype=complex)
    scale = np.max(np.abs(coeffs))
    if scale == 0:
        return np.zeros(1, dtype=complex)
    n = coeffs.size
    while n > 1 and abs(coeffs[n - 1]) <= TRIM_RTOL * scale:
        n -= 1
    return coeffs[:n]


@dataclass(frozen=True, eq=False)
class Polynomial:
    """Polynomial in u with complex coefficients, ascending degree"""
    coefficients: Tuple[complex, ...]

    def __post_init__(self):
        object.__setattr__(self, 'coefficients', tuple(_trim(self.coefficients)))

    @classmethod
    def from_roots(cls, roots: Sequence[complex]) -> "Polynomial":
        if len(roots) == 0:
            return cls((1.0,))
        return cls(P.polyfromroots(np.asarray(roots, dtype=complex)))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.coefficients, dtype=complex)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def leading(self) -> complex:
        return self.coefficients[-1]

    def is_zero(self) -> bool:
        return len(self.coefficients) == 1 and self.coefficients[0] == 0

    def is_real(self, tol: float = REALITY_TOL) -> bool:
        arr = self.array
        return bool(np.all(np.abs(arr.imag) <= tol * max(np.max(np.abs(arr)), 1e-300)))

    def __call__(self, u):
        return P.polyval(u, self.array)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(P.polyadd(self.array, _as_poly(other).array))

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(P.polysub(self.array, _as_poly(other).array))

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(P.polymul(self.array, _as_poly(other).array))

    __rmul__ = __mul__

    def __neg__(self) -> "Polynomial":
        return Polynomial(-self.array)

    def roots(self) -> np.ndarray:
        """Roots via companion-matrix eigenvalues"""
        if self.degree < 1:
            return np.zeros(0, dtype=complex)
        arr = self.array
        if self.is_real(tol=0.0):
            return P.polyroots(arr.real).astype(complex)
        return P.polyroots(arr)

    def taylor(self, point: complex, count: int) -> np.ndarray:
        """First `count` Taylor coefficients of p(point + v) in v"""
        out = np.zeros(count, dtype=complex)
        arr = self.array
        for k in range(min(count, self.degree + 1)):
            out[k] = P.polyval(point, arr) / math.factorial(k)
            arr = P.polyder(arr)
        return out

    def __repr__(self) -> str:
        return f"Polynomial({list(self.coefficients)})"


def _as_poly(value) -> Polynomial:
    if isinstance(value, Polynomial):
        return value
    return Polynomial((complex(value),))


# --- Pole bookkeeping ---

def _same_pole(p: complex, q: complex) -> bool:
    scale = max(abs(p), abs(q))
    return abs(p - q) <= max(ROOT_CLUSTER_RTOL * scale, ROOT_CLUSTER_ATOL)


def _snap(z: complex, tol: float) -> complex:
    z = complex(z)
    if abs(z.imag) <= tol:
        z = complex(z.real, 0.0)
    if abs(z) <= ROOT_CLUSTER_ATOL * max(1.0, tol / ROOT_CLUSTER_RTOL):
        z = 0j
    return z


def _split_tolerance(multiplicity: int, scale: float) -> float:
    """Spread of an m-fold root after companion-matrix splitting, ~eps**(1/m)"""
    rtol = min(max(SPLIT_EPS ** (1.0 / multiplicity), ROOT_CLUSTER_RTOL), MAX_SPLIT_RTOL)
    return max(rtol * scale, ROOT_CLUSTER_ATOL)


def cluster_roots(roots: Sequence[complex]) -> Poles:
    """Merge numerically split roots into poles with multiplicity

    Multiplicities are tried from the largest down; m roots form one pole when
    they all lie within the m-fold splitting radius of their mean.

    Raises:
        DegeneratePolesError: two clusters end up closer than twice the
            clustering tolerance
    """
    roots = np.asarray(roots, dtype=complex)
    if roots.size == 0:
        return ()
    scale = float(np.max(np.abs(roots)))
    tol = max(ROOT_CLUSTER_RTOL * scale, ROOT_CLUSTER_ATOL)
    order = sorted(range(roots.size), key=lambda i: (roots[i].real, roots[i].imag))
    unassigned = set(order)
    groups: List[List[int]] = []
    for m in range(roots.size, 1, -1):
        radius = _split_tolerance(m, scale)
        for i in order:
            if i not in unassigned:
                continue
            near = sorted((j for j in unassigned if abs(roots[j] - roots[i]) <= 2 * radius),
                          key=lambda j: abs(roots[j] - roots[i]))
            if len(near) < m:
                continue
            members = near[:m]
            center = np.mean(roots[members])
            if np.max(np.abs(roots[members] - center)) <= radius:
                groups.append(members)
                unassigned.difference_update(members)
    groups.extend([i] for i in order if i in unassigned)
    clusters = [list(roots[g]) for g in groups]
    clusters.sort(key=lambda c: (np.mean(c).real, np.mean(c).imag))
    centers = [complex(np.mean(c)) for c in clusters]
    for i in range(len(centers)):
        for j in range(i + 1, len(centers)):
            if abs(centers[i] - centers[j]) <= 2 * tol:
                raise DegeneratePolesError("ambiguous root clustering",
                                           clusters[i] + clusters[j])
    return tuple((_snap(c, tol), len(cl)) for c, cl in zip(centers, clusters))


def _merge(poles: Sequence[Tuple[complex, int]]) -> Poles:
    """Combine repeated entries by adding orders"""
    merged: List[List] = []
    for p, m in poles:
        if m <= 0:
            continue
        for entry in merged:
            if _same_pole(entry[0], p):
                entry[1] += m
                break
        else:
            merged.append([complex(p), int(m)])
    return tuple((p, m) for p, m in merged)


def _lcd(a: Poles, b: Poles) -> Poles:
    out = [list(x) for x in a]
    for p, m in b:
        for entry in out:
            if _same_pole(entry[0], p):
                entry[1] = max(entry[1], m)
                break
        else:
            out.append([p, m])
    return tuple((p, m) for p, m in out)


def _subtract(a: Poles, b: Poles) -> Tuple[Poles, Poles]:
    """Cancel the poles of b against a; returns (left in a, left in b)"""
    left_a = [list(x) for x in a]
    left_b = []
    for p, m in b:
        for entry in left_a:
            if _same_pole(entry[0], p):
                used = min(entry[1], m)
                entry[1] -= used
                m -= used
                break
        if m > 0:
            left_b.append((p, m))
    return tuple((p, m) for p, m in left_a if m > 0), tuple(left_b)


def _expand(poles: Poles) -> Polynomial:
    roots = [p for p, m in poles for _ in range(m)]
    return Polynomial.from_roots(roots)


def _vanishes_at(coeffs: np.ndarray, point: complex) -> bool:
    powers = max(1.0, abs(point)) ** np.arange(coeffs.size)
    scale = float(np.sum(np.abs(coeffs) * powers))
    return abs(P.polyval(point, coeffs)) <= CANCEL_RTOL * scale


# --- Rational transforms ---

@dataclass(frozen=True, eq=False)
class RationalLT:
    """Rational Laplace transform numerator / prod (u - p)**m

    The denominator is monic by construction. Instances produced by the
    arithmetic operators are reduced (no numerator root coincides with a pole).
    """
    numerator: Polynomial
    poles: Poles = ()

    def __post_init__(self):
        object.__setattr__(self, 'numerator', _as_poly(self.numerator))
        object.__setattr__(self, 'poles', _merge(self.poles))

    # constructors
    @classmethod
    def constant(cls, value: Number) -> "RationalLT":
        return cls(Polynomial((complex(value),)), ())

    @classmethod
    def u(cls) -> "RationalLT":
        return cls(Polynomial((0.0, 1.0)), ())

    @classmethod
    def pole(cls, location: complex, order: int = 1, weight: Number = 1.0) -> "RationalLT":
        """weight / (u - location)**order"""
        return cls(Polynomial((complex(weight),)), ((complex(location), order),))

    @classmethod
    def from_polynomials(cls, numerator: Polynomial, denominator: Polynomial) -> "RationalLT":
        numerator, denominator = _as_poly(numerator), _as_poly(denominator)
        if denominator.is_zero():
            raise InvalidTransformError("zero denominator")
        scaled = Polynomial(numerator.array / denominator.leading)
        return cls(scaled, cluster_roots(denominator.roots())).reduce()

    # structure
    @property
    def order(self) -> int:
        return sum(m for _, m in self.poles)

    @property
    def denominator(self) -> Polynomial:
        return _expand(self.poles)

    def is_zero(self) -> bool:
        return self.numerator.is_zero()

    def is_proper(self) -> bool:
        return self.is_zero() or self.numerator.degree <= self.order

    def limit_at_infinity(self) -> complex:
        """lim u->inf; the delta weight of the inverse transform"""
        if self.is_zero() or self.numerator.degree < self.order:
            return 0j
        if self.numerator.degree == self.order:
            return self.numerator.leading
        raise InvalidTransformError(
            f"improper rational function (deg num {self.numerator.degree} > deg den {self.order})")

    def has_real_coefficients(self, tol: float = REALITY_TOL) -> bool:
        if not self.numerator.is_real(tol):
            return False
        for p, m in self.poles:
            if abs(p.imag) <= tol * max(1.0, abs(p)):
                continue
            if not any(_same_pole(q, p.conjugate()) and k == m for q, k in self.poles):
                return False
        return True

    def __call__(self, u):
        u = np.asarray(u, dtype=complex)
        out = self.numerator(u)
        for p, m in self.poles:
            out = out / (u - p) ** m
        return out

    # algebra
    def reduce(self) -> "RationalLT":
        """Cancel numerator roots against poles"""
        coeffs = self.numerator.array
        if self.numerator.is_zero():
            return RationalLT(Polynomial((0.0,)), ())
        kept = []
        for p, m in self.poles:
            while m > 0 and coeffs.size > 1 and _vanishes_at(coeffs, p):
                coeffs, _ = P.polydiv(coeffs, np.array([-p, 1.0], dtype=complex))
                m -= 1
            if m > 0:
                kept.append((p, m))
        return RationalLT(Polynomial(coeffs), tuple(kept))

    def __add__(self, other) -> "RationalLT":
        other = _as_rational(other)
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        common = _lcd(self.poles, other.poles)
        extra_self = _subtract(common, self.poles)[0]
        extra_other = _subtract(common, other.poles)[0]
        numerator = (self.numerator * _expand(extra_self)
                     + other.numerator * _expand(extra_other))
        return RationalLT(numerator, common).reduce()

    __radd__ = __add__

    def __neg__(self) -> "RationalLT":
        return RationalLT(-self.numerator, self.poles)

    def __sub__(self, other) -> "RationalLT":
        return self + (-_as_rational(other))

    def __rsub__(self, other) -> "RationalLT":
        return _as_rational(other) + (-self)

    def __mul__(self, other) -> "RationalLT":
        other = _as_rational(other)
        return RationalLT(self.numerator * other.numerator,
                          self.poles + other.poles).reduce()

    __rmul__ = __mul__

    def __truediv__(self, other) -> "RationalLT":
        other = _as_rational(other)
        if other.is_zero():
            raise InvalidTransformError("division by the zero transform")
        left, leftover = _subtract(self.poles, other.poles)
        numerator = self.numerator * _expand(leftover)
        new_poles = cluster_roots(other.numerator.roots())
        numerator = Polynomial(numerator.array / other.numerator.leading)
        return RationalLT(numerator, left + new_poles).reduce()

    def __rtruediv__(self, other) -> "RationalLT":
        return _as_rational(other) / self

    def mul_u(self) -> "RationalLT":
        return self * RationalLT.u()

    def divide_by_u(self) -> "RationalLT":
        return RationalLT(self.numerator, self.poles + ((0j, 1),)).reduce()

    def __repr__(self) -> str:
        return f"RationalLT(numerator={self.numerator!r}, poles={self.poles!r})"


def _as_rational(value) -> RationalLT:
    if isinstance(value, RationalLT):
        return value
    if isinstance(value, Polynomial):
        return RationalLT(value, ())
    return RationalLT.constant(value)


def reduce(r: RationalLT) -> RationalLT:
    """Cancel common factors of numerator and denominator"""
    return r.reduce()


# --- Partial fractions ---

@dataclass(frozen=True)
class PartialFractions:
    """sum residue / (u - pole)**order + constant"""
    terms: Tuple[Tuple[complex, int, complex], ...]
    constant: complex = 0j

    def __call__(self, u):
        u = np.asarray(u, dtype=complex)
        out = np.full(u.shape, self.constant, dtype=complex)
        for pole, order, residue in self.terms:
            out = out + residue / (u - pole) ** order
        return out


def _inverse_power_series(a: complex, order: int, count: int) -> np.ndarray:
    """Coefficients of (v + a)**(-order) about v = 0"""
    series = np.zeros(count, dtype=complex)
    series[0] = a ** (-order)
    for k in range(1, count):
        series[k] = series[k - 1] * (-(order + k - 1) / k) / a
    return series


def partial_fractions(r: RationalLT) -> PartialFractions:
    """Partial-fraction expansion of a reduced proper rational transform"""
    constant = r.limit_at_infinity()
    terms = []
    for i, (pole, order) in enumerate(r.poles):
        series = r.numerator.taylor(pole, order)
        for j, (other, other_order) in enumerate(r.poles):
            if i == j:
                continue
            factor = _inverse_power_series(pole - other, other_order, order)
            series = np.convolve(series, factor)[:order]
        for j in range(1, order + 1):
            terms.append((pole, j, complex(series[order - j])))
    return PartialFractions(tuple(terms), complex(constant))


# --- Time domain ---

@dataclass(frozen=True)
class ExpTerm:
    """amplitude * t**power * exp(-decay * t)"""
    amplitude: complex
    power: int
    decay: complex


def _combine(terms: Sequence[ExpTerm]) -> Tuple[ExpTerm, ...]:
    merged: List[List] = []
    for term in terms:
        for entry in merged:
            if entry[1] == term.power and _same_pole(entry[2], term.decay):
                entry[0] += term.amplitude
                break
        else:
            merged.append([complex(term.amplitude), term.power, complex(term.decay)])
    return tuple(ExpTerm(c, m, a) for c, m, a in merged if c != 0)


def _symmetrize(terms: Sequence[ExpTerm]) -> Tuple[ExpTerm, ...]:
    """Force conjugate-pair structure on the terms of a real function"""
    out = list(terms)
    done = set()
    for i, term in enumerate(out):
        if i in done:
            continue
        if abs(term.decay.imag) <= REALITY_TOL * max(1.0, abs(term.decay)):
            out[i] = ExpTerm(complex(term.amplitude.real), term.power, complex(term.decay.real))
            done.add(i)
            continue
        for j in range(i + 1, len(out)):
            partner = out[j]
            if j not in done and partner.power == term.power and _same_pole(partner.decay, term.decay.conjugate()):
                amp = 0.5 * (term.amplitude + partner.amplitude.conjugate())
                out[i] = ExpTerm(amp, term.power, term.decay)
                out[j] = ExpTerm(amp.conjugate(), term.power, term.decay.conjugate())
                done.update((i, j))
                break
    return tuple(out)


@dataclass(frozen=True)
class ExpPolynomial:
    """Sum of c * t**m * exp(-a t) terms plus delta_weight * delta(t)

    `real` marks functions generated from real-coefficient transforms; their
    evaluations are returned as real arrays.
    """
    terms: Tuple[ExpTerm, ...] = ()
    delta_weight: complex = 0.0
    real: bool = True

    def __post_init__(self):
        terms = _combine(self.terms)
        if self.real:
            terms = _symmetrize(terms)
            object.__setattr__(self, 'delta_weight', float(np.real(self.delta_weight)))
        object.__setattr__(self, 'terms', terms)

    @classmethod
    def zero(cls) -> "ExpPolynomial":
        return cls()

    @classmethod
    def exponential(cls, decay: Number, amplitude: Number = 1.0) -> "ExpPolynomial":
        real = complex(decay).imag == 0 and complex(amplitude).imag == 0
        return cls((ExpTerm(complex(amplitude), 0, complex(decay)),), 0.0, real)

    @classmethod
    def delta(cls, weight: Number) -> "ExpPolynomial":
        return cls((), weight, complex(weight).imag == 0)

    def is_zero(self) -> bool:
        return not self.terms and self.delta_weight == 0

    @property
    def has_delta(self) -> bool:
        return self.delta_weight != 0

    def evaluate(self, t):
        """Smooth part at t >= 0 (the delta weight is not included)"""
        t_arr = np.asarray(t, dtype=float)
        out = np.zeros(t_arr.shape, dtype=complex)
        for term in self.terms:
            out = out + term.amplitude * t_arr ** term.power * np.exp(-term.decay * t_arr)
        if not self.real:
            return out if out.ndim else complex(out)
        scale = 1.0 + float(np.max(np.abs(out))) if out.size else 1.0
        if out.size and float(np.max(np.abs(out.imag))) > REALITY_TOL * scale:
            raise NumericalError("real function evaluated with non-negligible imaginary part")
        return out.real if out.ndim else float(out.real)

    __call__ = evaluate

    def derivative(self) -> "ExpPolynomial":
        if self.has_delta:
            raise InvalidTransformError("cannot differentiate a delta contribution")
        terms = []
        for term in self.terms:
            if term.power > 0:
                terms.append(ExpTerm(term.amplitude * term.power, term.power - 1, term.decay))
            terms.append(ExpTerm(-term.decay * term.amplitude, term.power, term.decay))
        return ExpPolynomial(tuple(terms), 0.0, self.real)

    def laplace(self) -> RationalLT:
        """Forward transform, term by term"""
        total = RationalLT.constant(self.delta_weight)
        for term in self.terms:
            total = total + RationalLT.pole(-term.decay, term.power + 1,
                                            term.amplitude * math.factorial(term.power))
        return total

    def antiderivative(self) -> "ExpPolynomial":
        """t -> integral over [0, t], delta weight included as a step"""
        return inverse_laplace(self.laplace().divide_by_u())

    def integrate(self, t):
        return self.antiderivative().evaluate(t)

    def convolve(self, other: "ExpPolynomial") -> "ExpPolynomial":
        return inverse_laplace(self.laplace() * other.laplace())

    def scale(self, factor: Number) -> "ExpPolynomial":
        factor = complex(factor)
        real = self.real and factor.imag == 0
        terms = tuple(ExpTerm(term.amplitude * factor, term.power, term.decay) for term in self.terms)
        return ExpPolynomial(terms, self.delta_weight * factor, real)

    def smooth_part(self) -> "ExpPolynomial":
        return ExpPolynomial(self.terms, 0.0, self.real)

    def __add__(self, other: "ExpPolynomial") -> "ExpPolynomial":
        return ExpPolynomial(self.terms + other.terms,
                             self.delta_weight + other.delta_weight,
                             self.real and other.real)

    def __neg__(self) -> "ExpPolynomial":
        return self.scale(-1.0)

    def __sub__(self, other: "ExpPolynomial") -> "ExpPolynomial":
        return self + (-other)

    def __mul__(self, other):
        """Pointwise product in time (smooth parts only), or scalar scaling"""
        if not isinstance(other, ExpPolynomial):
            return self.scale(other)
        if self.has_delta or other.has_delta:
            raise InvalidTransformError("pointwise product with a delta contribution")
        terms = [ExpTerm(a.amplitude * b.amplitude, a.power + b.power, a.decay + b.decay)
                 for a in self.terms for b in other.terms]
        return ExpPolynomial(tuple(terms), 0.0, self.real and other.real)

    __rmul__ = __mul__

    def power(self, n: int) -> "ExpPolynomial":
        result = ExpPolynomial.exponential(0.0, 1.0)
        for _ in range(n):
            result = result * self
        return result


def inverse_laplace(r: RationalLT) -> ExpPolynomial:
    """Closed-form inverse of a proper rational transform"""
    if not r.is_proper():
        raise InvalidTransformError(
            f"improper rational function (deg num {r.numerator.degree} > deg den {r.order})")
    fractions = partial_fractions(r)
    terms = [ExpTerm(residue / math.factorial(order - 1), order - 1, -pole)
             for pole, order, residue in fractions.terms]
    return ExpPolynomial(tuple(terms), fractions.constant, r.has_real_coefficients())


def convolve(a: ExpPolynomial, b: ExpPolynomial) -> ExpPolynomial:
    return a.convolve(b)


def evaluate(p: ExpPolynomial, t):
    return p.evaluate(t)


def integrate_0_to_t(p: ExpPolynomial, t):
    return p.integrate(t)


def numeric_inverse_laplace(transform: Callable, t, nodes: int = TALBOT_NODES):
    """Fixed-Talbot inversion of a transform evaluator

    Each t gets its own contour with r = 2M/(5t). The evaluator must accept
    complex arrays of any shape.

    Raises:
        UnsupportedTimeError: for t <= 0; use the initial-value limit instead
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr <= 0):
        raise UnsupportedTimeError(
            "numeric inversion needs t > 0; t = 0 is only reachable as the one-sided limit "
            "lim u*F(u), u -> infinity")
    m = nodes
    r = 2.0 * m / (5.0 * t_arr)
    theta = np.pi * np.arange(1, m) / m
    cot = 1.0 / np.tan(theta)
    s = r[:, None] * theta * (cot + 1j)
    sigma = theta + (theta * cot - 1.0) * cot
    values = np.asarray(transform(s), dtype=complex)
    at_r = np.asarray(transform(r.astype(complex)), dtype=complex)
    total = 0.5 * (at_r * np.exp(r * t_arr)).real
    total = total + np.sum((np.exp(t_arr[:, None] * s) * values * (1.0 + 1j * sigma)).real, axis=1)
    result = (r / m) * total
    return result if np.ndim(t) else float(result[0])
