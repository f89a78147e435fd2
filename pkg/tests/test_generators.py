import numpy as np
import pytest

from core.errors import AccuracyError, ConvergenceError, TCLSingularError, ValidationError
from core.generators import (ChannelFunction, GeneratorKind, GeneratorSpec, Sampled, assemble,
                             assemble_many, fixed_point_tcl, hazard_tcl, lindblad_rates,
                             nz_channel_from_tcl, nz_from_semimarkov, redfield_channel, tcl_channel_from_nz, to_nz,
                             to_redfield, to_tcl)
from core.rational_laplace import ExpPolynomial
from core.scenarios import (amplitude_damping_model, amplitude_damping_nz_direct, deph_model,
                            diag_model, flip_model, flip_tcl_direct)
from core.superop import (SIGMA_Z, SuperOperator, damping_basis, deph_map,
                          hamiltonian_part, liouville)
from core.timegrid import TimeGrid
from core.volterra import trapezoid_convolution
from core.waiting_time import Erlang, Exponential, build, hazard, sqrt_survival_channel

from .closed_forms import MU_POLE, g2, mu2

T = np.linspace(0.0, 2.0, 201)


def _channel_with(spec, eigenvalue):
    for lam, channel in zip(spec.basis.eigenvalues, spec.channels):
        if abs(lam - eigenvalue) < 1e-9:
            return channel
    raise AssertionError(f"no channel with eigenvalue {eigenvalue}")


class TestMemoryKernelGenerator:

    @pytest.mark.parametrize("model, eigenvalues", [
        (flip_model, [0, -1, -1, -2]),
        (diag_model, [0, 0, -1, -1]),
        (deph_model, [0, 0, -2, -2]),
    ])
    def test_damping_eigenvalues(self, model, eigenvalues):
        spec = model(Erlang(2, 1.0)).nz()
        assert spec.kind is GeneratorKind.NZ
        np.testing.assert_allclose(spec.basis.eigenvalues, eigenvalues, atol=1e-12)
        for alpha in spec.basis.stationary_channels():
            assert spec.channels[alpha].is_zero()

    def test_kernels_scale_the_renewal_kernel(self):
        spec = flip_model(Erlang(2, 1.0)).nz()
        np.testing.assert_allclose(_channel_with(spec, -2).values(T), -2 * np.exp(-2 * T), atol=1e-12)

    def test_exponential_kernel_is_local(self):
        spec = flip_model(Exponential(1.0)).nz()
        np.testing.assert_allclose(spec.delta_weights(), [0, -1, -1, -2], atol=1e-12)
        np.testing.assert_allclose(spec.values(T), 0.0, atol=1e-12)

    def test_builder_matches_model(self, erlang2):
        direct = nz_from_semimarkov(deph_map(), erlang2)
        np.testing.assert_allclose(direct.values(T), deph_model(Erlang(2, 1.0)).nz().values(T), atol=1e-12)

    def test_stationary_channel_must_vanish(self):
        basis = damping_basis(liouville(deph_map()) - SuperOperator.identity(2))
        channels = [ChannelFunction.tcl_constant(a, -1.0) for a in range(4)]
        with pytest.raises(ValidationError, match="stationary"):
            GeneratorSpec(basis, channels, GeneratorKind.TCL)

    def test_channel_kind_must_match(self):
        basis = damping_basis(liouville(deph_map()) - SuperOperator.identity(2))
        channels = [ChannelFunction.zero(a, GeneratorKind.NZ) for a in range(4)]
        with pytest.raises(ValidationError):
            GeneratorSpec(basis, channels, GeneratorKind.TCL)


class TestLocalConversion:

    def test_coherence_channel_is_minus_hazard(self):
        tcl = diag_model(Erlang(2, 1.0)).tcl()
        channel = _channel_with(tcl, -1)
        np.testing.assert_allclose(channel.values(T), -T / (1.0 + T), atol=1e-10)
        np.testing.assert_allclose(channel.decay(T), g2(T), atol=1e-12)
        assert channel.first_singularity(20.0) is None

    def test_dephasing_channel_diverges(self):
        tcl = deph_model(Erlang(2, 1.0)).tcl()
        channel = _channel_with(tcl, -2)
        t = np.linspace(0.0, 2.0, 21)
        np.testing.assert_allclose(channel.values(t), -2 * mu2(t), atol=1e-9)
        assert channel.first_singularity(20.0).location == pytest.approx(MU_POLE, abs=1e-8)
        assert tcl.first_singularity().location == pytest.approx(MU_POLE, abs=1e-8)

    def test_regular_until_raises(self):
        nz = deph_model(Erlang(2, 1.0)).nz()
        channel = _channel_with(nz, -2)
        assert tcl_channel_from_nz(channel, regular_until=2.0).kind is GeneratorKind.TCL
        with pytest.raises(TCLSingularError) as info:
            tcl_channel_from_nz(channel, regular_until=3.0)
        lo, hi = info.value.bracket
        assert lo <= MU_POLE <= hi

    def test_doubled_kernel_does_not_double_local_rate(self):
        erlang_diag = _channel_with(diag_model(Erlang(2, 1.0)).tcl(), -1).values(T)
        erlang_deph = _channel_with(deph_model(Erlang(2, 1.0)).tcl(), -2).values(T)
        assert np.max(np.abs(erlang_deph - 2 * erlang_diag)) > 0.1
        markov_diag = _channel_with(diag_model(Exponential(1.0)).tcl(), -1).values(T)
        markov_deph = _channel_with(deph_model(Exponential(1.0)).tcl(), -2).values(T)
        np.testing.assert_allclose(markov_deph, 2 * markov_diag, atol=1e-12)

    def test_flip_matches_direct_form(self, erlang2):
        tcl = flip_model(Erlang(2, 1.0)).tcl()
        for t in (0.5, 1.0, 2.0):
            direct = flip_tcl_direct(hazard(erlang2, t), mu2(t))
            assert assemble(tcl, t).distance(direct) < 1e-9

    def test_exponential_gives_constant_rates(self):
        tcl = flip_model(Exponential(1.0)).tcl()
        expected = liouville(flip_model(Exponential(1.0)).kraus) - SuperOperator.identity(2)
        for t in (0.0, 1.0, 5.0):
            assert assemble(tcl, t).distance(expected) < 1e-10

    def test_assemble_at_singularity(self):
        tcl = deph_model(Erlang(2, 1.0)).tcl()
        with pytest.raises(TCLSingularError):
            assemble(tcl, MU_POLE)

    def test_assemble_many_matches_assemble(self):
        tcl = diag_model(Erlang(2, 1.0)).tcl()
        times = [0.0, 0.7, 1.9]
        stacked = assemble_many(tcl, times)
        for matrix, t in zip(stacked, times):
            np.testing.assert_allclose(matrix, assemble(tcl, t).matrix, atol=1e-12)

    def test_dephasing_rate_signals_non_markovianity(self):
        times = np.linspace(0.0, 2.0, 21)
        markov = lindblad_rates(flip_model(Exponential(1.0)).tcl(), times, SIGMA_Z)
        assert np.max(np.abs(markov)) <= 1e-10
        erlang = lindblad_rates(flip_model(Erlang(2, 1.0)).tcl(), times, SIGMA_Z)
        np.testing.assert_allclose(erlang, 0.5 * (times / (1 + times) - mu2(times)), atol=1e-9)
        assert np.max(np.abs(erlang)) >= 1e-3


ROUND_TRIP_SPECS = [Erlang(2, 1.0), Erlang(3, 2.0), Erlang(4, 1.0), Exponential(1.5)]


def _regular_times(tcl):
    first = tcl.first_singularity()
    end = 2.0 if first is None else min(2.0, 0.9 * first.location)
    return np.linspace(0.0, end, 201)


class TestRoundTrips:

    @pytest.mark.parametrize("model", [diag_model, deph_model])
    @pytest.mark.parametrize("spec", ROUND_TRIP_SPECS)
    def test_nz_tcl_nz(self, model, spec):
        nz = model(spec).nz()
        back = to_nz(to_tcl(nz))
        np.testing.assert_allclose(back.values(T), nz.values(T), rtol=1e-7, atol=1e-7)
        np.testing.assert_allclose(back.delta_weights(), nz.delta_weights(), atol=1e-7)

    @pytest.mark.parametrize("model", [diag_model, deph_model])
    @pytest.mark.parametrize("spec", ROUND_TRIP_SPECS)
    def test_tcl_nz_tcl(self, model, spec):
        tcl = model(spec).tcl()
        back = to_tcl(to_nz(tcl))
        times = _regular_times(tcl)
        np.testing.assert_allclose(back.values(times), tcl.values(times), rtol=1e-7, atol=1e-7)

    def test_rational_conversion_stays_exact(self):
        channel = _channel_with(diag_model(Erlang(2, 1.0)).tcl(), -1)
        assert nz_channel_from_tcl(channel).is_exact

    def test_conversion_direction_is_checked(self):
        nz = _channel_with(diag_model(Erlang(2, 1.0)).nz(), -1)
        with pytest.raises(ValidationError):
            nz_channel_from_tcl(nz)
        with pytest.raises(ValidationError):
            tcl_channel_from_nz(tcl_channel_from_nz(nz))

    def test_sampled_kernel_round_trip(self):
        nz = _channel_with(diag_model(Erlang(2, 1.0)).nz(), -1)
        grid = TimeGrid(3.0, 3001)
        sampled = ChannelFunction(nz.label, GeneratorKind.NZ,
                                  Sampled(grid.times, nz.values(grid.times), nz.delta_weight))
        tcl = tcl_channel_from_nz(sampled)
        np.testing.assert_allclose(tcl.values(grid.times), -grid.times / (1 + grid.times), atol=1e-5)


class TestRedfield:

    def test_rates_are_sprinkling_density(self):
        spec = to_redfield(deph_model(Erlang(2, 1.0)).nz())
        channel = _channel_with(spec, -2)
        np.testing.assert_allclose(channel.values(T), -(1.0 - np.exp(-2 * T)), atol=1e-10)
        assert channel.first_singularity(20.0) is None

    def test_decay_factor(self):
        channel = _channel_with(to_redfield(diag_model(Erlang(2, 1.0)).nz()), -1)
        running = T / 2 - (1 - np.exp(-2 * T)) / 4
        np.testing.assert_allclose(channel.decay(T), np.exp(-running), atol=1e-10)

    def test_exponential_redfield_includes_delta(self):
        channel = redfield_channel(_channel_with(flip_model(Exponential(1.0)).nz(), -2))
        np.testing.assert_allclose(channel.values(T), -2.0, atol=1e-12)


class TestFixedPoint:

    def test_exponential_converges_immediately(self):
        nz = _channel_with(diag_model(Exponential(1.0)).nz(), -1)
        tcl = fixed_point_tcl(nz, TimeGrid(2.0, 201))
        np.testing.assert_allclose(tcl.values(T), -1.0, atol=1e-12)

    def test_erlang_matches_hazard(self):
        nz = _channel_with(diag_model(Erlang(2, 1.0)).nz(), -1)
        grid = TimeGrid(5.0, 5001)
        tcl = fixed_point_tcl(nz, grid)
        t = grid.times
        np.testing.assert_allclose(tcl.values(t), -t / (1.0 + t), atol=1e-8)

    @pytest.mark.parametrize("order", [1, 2, 3])
    @pytest.mark.parametrize("model, eigenvalue", [(diag_model, -1), (deph_model, -2)])
    def test_matches_laplace_route(self, order, model, eigenvalue):
        nz = _channel_with(model(Erlang(order, 1.0)).nz(), eigenvalue)
        grid = TimeGrid(2.0, 2001)
        iterated = fixed_point_tcl(nz, grid).values(grid.times)
        exact = tcl_channel_from_nz(nz, regular_until=2.0).values(grid.times)
        assert np.max(np.abs(iterated - exact)) < 1e-6

    def test_coarse_grid_fails_step_halving(self):
        nz = _channel_with(deph_model(Erlang(2, 1.0)).nz(), -2)
        with pytest.raises(AccuracyError) as info:
            fixed_point_tcl(nz, TimeGrid(2.0, 11), accuracy=1e-9)
        assert info.value.discrepancy > 1e-9

    def test_iteration_budget(self):
        nz = _channel_with(diag_model(Erlang(2, 1.0)).nz(), -1)
        with pytest.raises(ConvergenceError) as info:
            fixed_point_tcl(nz, TimeGrid(5.0, 501), max_iter=2)
        assert info.value.residual > 0


class TestHazardDriven:

    def test_amplitude_damping_local_channels(self, erlang2):
        tcl = amplitude_damping_model(Erlang(2, 1.0)).tcl()
        np.testing.assert_allclose(tcl.basis.eigenvalues, [0, -0.5, -0.5, -1], atol=1e-12)
        h = T / (1.0 + T)
        np.testing.assert_allclose(_channel_with(tcl, -1).values(T), -h, atol=1e-10)
        coherence = _channel_with(tcl, -0.5)
        np.testing.assert_allclose(coherence.values(T), -0.5 * h, atol=1e-10)
        np.testing.assert_allclose(coherence.decay(T), np.sqrt(g2(T)), atol=1e-12)
        assert not coherence.representation.is_rational

    def test_amplitude_damping_memory_kernel(self, erlang2):
        model = amplitude_damping_model(Erlang(2, 1.0))
        nz = model.nz(10.0)
        sqrt_channel = sqrt_survival_channel(erlang2, np.linspace(0.0, 10.0, 10001))
        for t in (0.5, 1.0, 3.0):
            k_sqrt = np.interp(t, sqrt_channel.times, sqrt_channel.k_smooth)
            direct = amplitude_damping_nz_direct(float(erlang2.k(t)), k_sqrt)
            assert assemble(nz, t).distance(direct) < 1e-8

    def test_coherence_kernel_solves_its_equation(self, erlang2):
        nz = amplitude_damping_model(Erlang(2, 1.0)).nz(10.0)
        channel = _channel_with(nz, -0.5)
        assert not channel.is_exact
        times = channel.representation.times
        step = times[1] - times[0]
        sqrt_g = np.sqrt(g2(times))
        rebuilt = channel.delta_weight * sqrt_g + trapezoid_convolution(channel.values(times), sqrt_g, step)
        target = -erlang2.f(times) / (2 * sqrt_g)
        assert np.max(np.abs(rebuilt - target)) < 1e-5

    def test_complex_eigenvalues_rejected(self):
        with pytest.raises(ValidationError, match="real damping"):
            hazard_tcl(hamiltonian_part(SIGMA_Z), build(Erlang(2, 1.0)))


def test_constant_channel_helpers():
    channel = ChannelFunction.tcl_constant(1, -0.5)
    np.testing.assert_allclose(channel.values(T), -0.5, atol=1e-14)
    np.testing.assert_allclose(channel.decay(T), np.exp(-0.5 * T), rtol=1e-12)
    np.testing.assert_allclose(channel.integral(T), -0.5 * T, atol=1e-12)
    assert ChannelFunction.zero(0, GeneratorKind.TCL).is_zero()
    assert ChannelFunction.zero(0, GeneratorKind.REDFIELD).is_zero()
    with pytest.raises(ValidationError):
        ChannelFunction.zero(0, GeneratorKind.NZ).decay(1.0)


def test_decay_base_helper():
    base = ExpPolynomial.exponential(1.0)
    channel = ChannelFunction.tcl_decay(2, base, 2.0)
    np.testing.assert_allclose(channel.values(T), -2.0, atol=1e-12)
    np.testing.assert_allclose(channel.decay(T), np.exp(-2 * T), rtol=1e-12)
