import numpy as np
import pytest
from scipy.linalg import expm

from core.errors import (AccuracyError, InvariantViolationError, TCLSingularError,
                         TruncationError, ValidationError)
from core.scenarios import amplitude_damping_model, deph_model, diag_model, flip_model
from core.solvers import (Trajectory, divisibility, dynamical_map, exact_maps, solve_nz,
                          solve_series, solve_tcl)
from core.superop import SuperOperator, flip_map, liouville, vec
from core.timegrid import TimeGrid
from core.waiting_time import Erlang, Exponential

from .closed_forms import g2, q2


def _coherence(trajectory):
    return trajectory.states[:, 0, 1]


class TestLocalRoute:

    def test_diagonalizing_coherence_is_survival(self, plus_state):
        grid = TimeGrid(5.0, 501)
        traj = solve_tcl(diag_model(Erlang(2, 1.0)).tcl(), plus_state, grid)
        np.testing.assert_allclose(_coherence(traj), 0.5 * g2(grid.times), atol=1e-7)
        traj.check_invariants()
        assert traj.route == "tcl"
        assert traj.metadata["step_halving_discrepancy"] < 1e-6

    def test_accuracy_check(self, plus_state):
        with pytest.raises(AccuracyError):
            solve_tcl(diag_model(Erlang(2, 1.0)).tcl(), plus_state, TimeGrid(5.0, 51), tolerance=1e-20)

    def test_refuses_to_cross_singularity(self, plus_state):
        with pytest.raises(TCLSingularError):
            solve_tcl(deph_model(Erlang(2, 1.0)).tcl(), plus_state, TimeGrid(3.0, 301))

    def test_rejects_memory_kernel(self, plus_state):
        with pytest.raises(ValidationError):
            solve_tcl(deph_model(Erlang(2, 1.0)).nz(), plus_state, TimeGrid(1.0, 11))

    def test_exact_maps_match_integration(self, plus_state):
        grid = TimeGrid(2.0, 201)
        spec = diag_model(Erlang(2, 1.0)).tcl()
        maps = exact_maps(spec, grid)
        traj = solve_tcl(spec, plus_state, grid, with_maps=True)
        np.testing.assert_allclose(traj.maps, maps, atol=1e-8)


class TestMemoryRoute:

    def test_dephasing_coherence(self, plus_state):
        grid = TimeGrid(2.0, 2001)
        traj = solve_nz(deph_model(Erlang(2, 1.0)).nz(), plus_state, grid)
        np.testing.assert_allclose(_coherence(traj), 0.5 * q2(grid.times), atol=1e-6)
        assert traj.route == "nz"

    def test_exponential_is_a_semigroup(self):
        grid = TimeGrid(2.0, 2001)
        rho0 = np.array([[0.8, 0.1j], [-0.1j, 0.2]])
        traj = solve_nz(flip_model(Exponential(1.0)).nz(), rho0, grid)
        generator = (liouville(flip_map()) - SuperOperator.identity(2)).matrix
        for i in (500, 1000, 2000):
            expected = expm(grid.times[i] * generator) @ vec(rho0)
            np.testing.assert_allclose(vec(traj.states[i]), expected, atol=1e-8)

    def test_rejects_local_generator(self, plus_state):
        with pytest.raises(ValidationError):
            solve_nz(diag_model(Erlang(2, 1.0)).tcl(), plus_state, TimeGrid(1.0, 11))


class TestSeriesRoute:

    def test_exponential_dephasing(self, plus_state):
        model = deph_model(Exponential(1.0))
        grid = TimeGrid(2.0, 21)
        traj = solve_series(model.kraus, model.jump_statistics(40, 2.0), plus_state, grid)
        np.testing.assert_allclose(_coherence(traj), 0.5 * np.exp(-2 * grid.times), atol=1e-10)
        assert traj.metadata["n_max"] == 40

    def test_truncation_is_extended(self, plus_state):
        model = deph_model(Exponential(1.0))
        grid = TimeGrid(2.0, 21)
        traj = solve_series(model.kraus, model.jump_statistics(4, 2.0), plus_state, grid,
                            rf=model.renewal)
        assert traj.metadata["n_max"] > 4
        assert traj.metadata["truncation_tail"] <= 1e-10
        np.testing.assert_allclose(_coherence(traj), 0.5 * np.exp(-2 * grid.times), atol=1e-9)

    def test_truncation_error_without_renewal_functions(self, plus_state):
        model = deph_model(Exponential(1.0))
        with pytest.raises(TruncationError):
            solve_series(model.kraus, model.jump_statistics(4, 2.0), plus_state, TimeGrid(2.0, 21))


@pytest.mark.parametrize("factory", [diag_model, deph_model])
def test_three_routes_agree(factory, plus_state):
    model = factory(Erlang(2, 1.0))
    grid = TimeGrid(2.2, 221)
    tcl = solve_tcl(model.tcl(), plus_state, grid).states
    nz = solve_nz(model.nz(), plus_state, grid).states
    series = solve_series(model.kraus, model.jump_statistics(40, 2.2), plus_state, grid,
                          rf=model.renewal).states
    assert np.max(np.abs(tcl - nz)) <= 1e-4
    assert np.max(np.abs(tcl - series)) <= 1e-4


class TestDivisibility:

    def test_dephasing_with_erlang_waiting_times_is_not_divisible(self):
        model = deph_model(Erlang(2, 1.0))
        grid = TimeGrid(3.2, 321)
        maps = dynamical_map("series", grid, kraus=model.kraus,
                             js=model.jump_statistics(40, 3.2), rf=model.renewal)
        report = divisibility(maps, grid, stride=20)
        assert not report.verdict
        assert report.min_eigenvalue < -1.0
        # the coherence factor has its first zero at 3 pi / 4
        worst = min(report.pairs, key=lambda p: p[2])
        assert worst[0] == pytest.approx(2.4)
        assert worst[2] == pytest.approx(1.0 - q2(3.2) / q2(2.4), rel=1e-6)

    @pytest.mark.parametrize("order", [1, 2, 3])
    def test_diagonalization_is_divisible(self, order):
        model = diag_model(Erlang(order, 1.0))
        grid = TimeGrid(3.2, 321)
        maps = dynamical_map("series", grid, kraus=model.kraus,
                             js=model.jump_statistics(40, 3.2), rf=model.renewal)
        report = divisibility(maps, grid, stride=20)
        assert report.verdict
        assert report.singular_times == ()

    def test_redfield_is_divisible(self):
        grid = TimeGrid(3.2, 321)
        maps = dynamical_map("redfield", grid, spec=deph_model(Erlang(2, 1.0)).redfield())
        assert divisibility(maps, grid, stride=20).verdict

    def test_singular_maps_are_skipped(self):
        grid = TimeGrid(1.0, 3)
        maps = np.array([np.eye(4), np.zeros((4, 4)), np.eye(4)])
        report = divisibility(maps, grid, stride=1)
        assert report.singular_times == (0.5,)
        assert report.verdict


class TestMapsAndInvariants:

    def test_maps_start_at_identity(self, plus_state):
        grid = TimeGrid(1.0, 101)
        traj = solve_nz(diag_model(Erlang(2, 1.0)).nz(), plus_state, grid, with_maps=True)
        np.testing.assert_allclose(traj.maps[0], np.eye(4), atol=1e-12)
        np.testing.assert_allclose(traj.map_at(100)(plus_state), traj.states[100], atol=1e-12)

    def test_map_at_needs_maps(self, plus_state):
        traj = solve_nz(diag_model(Erlang(2, 1.0)).nz(), plus_state, TimeGrid(1.0, 11))
        with pytest.raises(ValidationError):
            traj.map_at(3)

    def test_invariant_violation_names_the_time(self):
        states = np.array([np.eye(2) / 2, np.eye(2)], dtype=complex)
        traj = Trajectory(TimeGrid(1.0, 2), states, route="tcl")
        with pytest.raises(InvariantViolationError, match="t = 1"):
            traj.check_invariants()

    def test_unknown_route(self):
        with pytest.raises(ValidationError, match="unknown route"):
            dynamical_map("bogus", TimeGrid(1.0, 11), spec=diag_model(Erlang(2, 1.0)).tcl())


class TestAmplitudeDamping:

    def test_local_route(self, plus_state):
        grid = TimeGrid(5.0, 501)
        traj = solve_tcl(amplitude_damping_model(Erlang(2, 1.0)).tcl(), plus_state, grid)
        np.testing.assert_allclose(_coherence(traj), 0.5 * np.sqrt(g2(grid.times)), atol=1e-7)
        traj.check_invariants()

    def test_memory_route(self, plus_state):
        grid = TimeGrid(5.0, 501)
        spec = amplitude_damping_model(Erlang(2, 1.0)).nz(5.0)
        traj = solve_nz(spec, plus_state, grid, tolerance=1e-4)
        np.testing.assert_allclose(_coherence(traj), 0.5 * np.sqrt(g2(grid.times)), atol=1e-4)
