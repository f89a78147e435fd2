import numpy as np
import pytest

from core.errors import InvalidTransformError, UnsupportedTimeError
from core.rational_laplace import (ExpPolynomial, Polynomial, RationalLT, cluster_roots,
                                   convolve, integrate_0_to_t, inverse_laplace,
                                   numeric_inverse_laplace, partial_fractions)

T = np.linspace(0.0, 8.0, 81)


def test_single_pole_inverts_to_exponential():
    f = inverse_laplace(RationalLT.pole(-1.0))
    np.testing.assert_allclose(f(T), np.exp(-T), rtol=1e-12, atol=1e-14)
    assert f.delta_weight == 0


def test_reduce_cancels_common_factor():
    r = RationalLT.from_polynomials(Polynomial((1.0, 1.0)), Polynomial.from_roots([-1.0, -2.0]))
    assert len(r.poles) == 1
    assert r.poles[0][0] == pytest.approx(-2.0)
    assert r.poles[0][1] == 1
    np.testing.assert_allclose(inverse_laplace(r)(T), np.exp(-2 * T), rtol=1e-10)


def test_partial_fractions_of_two_simple_poles():
    r = RationalLT.pole(-1.0) * RationalLT.pole(-2.0)
    fractions = partial_fractions(r)
    residues = {round(p.real): res for p, order, res in fractions.terms}
    assert residues[-1] == pytest.approx(1.0)
    assert residues[-2] == pytest.approx(-1.0)
    assert fractions.constant == 0
    u = np.array([0.5 + 1j, 3.0])
    np.testing.assert_allclose(fractions(u), r(u), rtol=1e-12)


def test_double_pole_gives_polynomial_prefactor():
    f = inverse_laplace(RationalLT.pole(-1.0, 2))
    np.testing.assert_allclose(f(T), T * np.exp(-T), rtol=1e-10, atol=1e-14)


def test_complex_pair_inverts_to_real_damped_sine():
    r = RationalLT.from_polynomials(Polynomial((1.0,)), Polynomial((2.0, 2.0, 1.0)))
    f = inverse_laplace(r)
    assert f.real
    values = f(T)
    assert values.dtype.kind == 'f'
    np.testing.assert_allclose(values, np.exp(-T) * np.sin(T), atol=1e-12)


def test_constant_becomes_delta_weight():
    f = inverse_laplace(RationalLT.constant(3.0))
    assert f.delta_weight == pytest.approx(3.0)
    assert not f.terms


def test_improper_transform_is_rejected():
    with pytest.raises(InvalidTransformError):
        inverse_laplace(RationalLT.u())


def test_zero_denominator_is_rejected():
    with pytest.raises(InvalidTransformError):
        RationalLT.from_polynomials(Polynomial((1.0,)), Polynomial((0.0,)))


def test_cluster_roots_merges_near_duplicates():
    clustered = cluster_roots([1.0, 1.0 + 1e-12])
    assert len(clustered) == 1
    assert clustered[0][1] == 2
    assert clustered[0][0] == pytest.approx(1.0)


@pytest.mark.parametrize("order", [2, 3, 4])
def test_cluster_roots_recovers_split_multiple_roots(order):
    roots = Polynomial.from_roots([-2.0] * order + [-0.5]).roots()
    clustered = dict((complex(p), m) for p, m in cluster_roots(roots))
    assert len(clustered) == 2
    center = min(clustered, key=lambda p: p.real)
    assert center == pytest.approx(-2.0, abs=1e-10)
    assert clustered[center] == order


def test_repeated_denominator_root_inverts_cleanly():
    # 1 / (u + 1/(u + 2)) = (u + 2) / (u + 1)**2
    inner = RationalLT.u() + 2.0
    c = 1 / (RationalLT.u() + 1 / inner)
    assert [m for _, m in c.poles] == [2]
    np.testing.assert_allclose(inverse_laplace(c)(T), (1 + T) * np.exp(-T), atol=1e-10)


def test_renewal_style_division_cancels_pole_at_origin():
    f = RationalLT.pole(-1.0, 2)
    k = f.mul_u() / (1 - f)
    assert all(abs(p) > 1e-8 for p, _ in k.poles)
    np.testing.assert_allclose(inverse_laplace(k)(T), np.exp(-2 * T), rtol=1e-10)


class TestExpPolynomial:

    def test_convolution_of_exponentials(self):
        e = ExpPolynomial.exponential(1.0)
        np.testing.assert_allclose(convolve(e, e)(T), T * np.exp(-T), rtol=1e-10, atol=1e-14)

    def test_running_integral(self):
        e = ExpPolynomial.exponential(1.0)
        np.testing.assert_allclose(integrate_0_to_t(e, T), 1.0 - np.exp(-T), atol=1e-13)

    def test_delta_integrates_to_step(self):
        d = ExpPolynomial.delta(2.0)
        np.testing.assert_allclose(d.integrate(T), 2.0, rtol=1e-12)

    def test_derivative(self):
        p = inverse_laplace(RationalLT.pole(-1.0, 2))
        np.testing.assert_allclose(p.derivative()(T), (1.0 - T) * np.exp(-T), atol=1e-12)

    def test_derivative_of_delta_is_rejected(self):
        with pytest.raises(InvalidTransformError):
            ExpPolynomial.delta(1.0).derivative()

    def test_laplace_round_trip_preserves_values(self):
        p = inverse_laplace(RationalLT.pole(-1.0, 2) + RationalLT.pole(-3.0))
        np.testing.assert_allclose(inverse_laplace(p.laplace())(T), p(T), atol=1e-12)

    def test_pointwise_product_and_power(self):
        e = ExpPolynomial.exponential(1.0, 2.0)
        np.testing.assert_allclose((e * e)(T), 4.0 * np.exp(-2 * T), rtol=1e-12)
        np.testing.assert_allclose(e.power(3)(T), 8.0 * np.exp(-3 * T), rtol=1e-12)

    def test_evaluate_excludes_delta(self):
        p = ExpPolynomial.exponential(1.0) + ExpPolynomial.delta(5.0)
        assert p(0.0) == pytest.approx(1.0)
        assert p.delta_weight == pytest.approx(5.0)


class TestNumericInversion:

    def test_matches_closed_form(self):
        t = np.array([0.5, 1.0, 2.0, 5.0])
        values = numeric_inverse_laplace(lambda s: 1.0 / (s + 1.0), t)
        np.testing.assert_allclose(values, np.exp(-t), rtol=1e-8)

    def test_rational_transform_evaluator(self):
        r = RationalLT.pole(-1.0, 2) * RationalLT.pole(-0.5)
        t = np.array([0.3, 1.7, 4.0])
        np.testing.assert_allclose(numeric_inverse_laplace(r, t), inverse_laplace(r)(t), rtol=1e-7)

    def test_rejects_origin(self):
        with pytest.raises(UnsupportedTimeError):
            numeric_inverse_laplace(lambda s: 1.0 / (s + 1.0), [0.0, 1.0])
