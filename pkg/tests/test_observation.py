"""Test the line-of-sight measurement model and the information tensor."""

import numpy as np
import pytest

from cisphase.catalog import TimeGrid, phase_to_state, sample_trajectory
from cisphase.dynamics import propagate_with_stm
from cisphase.errors import CloseApproachError, NonInvertibleNoiseError
from cisphase.observation import (
    InfoTensor,
    MeasurementModel,
    TargetTrack,
    build_info_tensor,
    info_matrix,
    los_measurement,
    observation_jacobian,
    observer_slice,
)


class TestMeasurement:
    """Tests for los_measurement, observation_jacobian and info_matrix."""

    def test_unit_line_of_sight(self):
        """The measurement is the unit vector from observer to target."""
        u = los_measurement(np.array([0.0, 0.0, 0.0]), np.array([3.0, 4.0, 0.0]))
        assert np.allclose(u, [0.6, 0.8, 0.0])

    def test_coincident_points_raise(self):
        """Zero separation is a close approach."""
        with pytest.raises(CloseApproachError):
            los_measurement(np.ones(3), np.ones(3), rho_floor=1e-6)

    def test_jacobian_structure(self):
        """H = [(I - u u^T)/rho, 0]: the velocity block is zero and u is in the null space."""
        obs, tgt = np.array([0.1, -0.2, 0.0]), np.array([0.9, 0.3, 0.05])
        jac = observation_jacobian(obs, tgt)
        u = los_measurement(obs, tgt)
        assert jac.shape == (3, 6)
        assert np.array_equal(jac[:, 3:], np.zeros((3, 3)))
        assert np.allclose(jac[:, :3] @ u, 0.0, atol=1e-15)

    def test_jacobian_matches_finite_differences(self):
        """Partials of the unit vector agree with central differences."""
        obs, tgt = np.array([0.1, -0.2, 0.0]), np.array([0.9, 0.3, 0.05])
        jac = observation_jacobian(obs, tgt)
        h = 1e-7
        for c in range(3):
            step = np.zeros(3)
            step[c] = h
            fd = (los_measurement(obs, tgt + step) - los_measurement(obs, tgt - step)) / (2 * h)
            assert np.allclose(jac[:, c], fd, atol=1e-7)

    def test_clamped_jacobian(self):
        """In clamp mode the range is floored instead of raising."""
        obs = np.zeros(3)
        tgt = np.array([1e-9, 0.0, 0.0])
        with pytest.raises(CloseApproachError):
            observation_jacobian(obs, tgt, rho_floor=1e-6)
        jac = observation_jacobian(obs, tgt, rho_floor=1e-6, clamp=True)
        assert np.all(np.isfinite(jac))
        assert np.max(np.abs(jac)) == pytest.approx(1e6)

    def test_info_matrix_psd_and_scaling(self):
        """Information is symmetric PSD and scales as 1/sigma^2."""
        jac = observation_jacobian(np.zeros(3), np.array([0.5, 0.2, 0.1]))
        stm = np.eye(6) + 0.1 * np.arange(36).reshape(6, 6) / 36
        info = info_matrix(jac, 1e-4 * np.eye(3), stm)
        assert np.array_equal(info, info.T)
        assert np.min(np.linalg.eigvalsh(info)) > -1e-9 * np.max(np.abs(info))
        half = info_matrix(jac, 4e-4 * np.eye(3), stm)
        assert np.allclose(half, info / 4)

    def test_identity_stm_closed_form(self):
        """With Phi = I and R = sigma^2 I the trace is 2 / (rho^2 sigma^2), falling with range."""
        sigma = 1e-3
        traces = []
        for rho in (0.1, 0.5, 2.0):
            jac = observation_jacobian(np.zeros(3), np.array([rho, 0.0, 0.0]))
            assert np.allclose(jac[:, :3], np.diag([0.0, 1.0 / rho, 1.0 / rho]))
            trace = np.trace(info_matrix(jac, sigma ** 2 * np.eye(3), np.eye(6)))
            assert trace == pytest.approx(2.0 / (rho ** 2 * sigma ** 2), rel=1e-12)
            traces.append(trace)
        assert traces[0] > traces[1] > traces[2]

    def test_info_rank_at_most_two(self):
        """Angles-only information never has rank above two."""
        rng = np.random.default_rng(21)
        for _ in range(20):
            obs, tgt = rng.normal(size=3), rng.normal(size=3)
            stm = np.eye(6) + 0.3 * rng.normal(size=(6, 6))
            info = info_matrix(observation_jacobian(obs, tgt), 1e-2 * np.eye(3), stm)
            assert np.linalg.matrix_rank(info, tol=1e-9 * np.abs(info).max()) <= 2

    def test_singular_noise(self):
        """R must be positive definite."""
        jac = observation_jacobian(np.zeros(3), np.ones(3))
        with pytest.raises(NonInvertibleNoiseError):
            info_matrix(jac, np.diag([1.0, 1.0, 0.0]), np.eye(6))

    def test_model_validation(self):
        """Bad noise or close-approach settings are rejected."""
        with pytest.raises(ValueError):
            MeasurementModel(sigma=0.0)
        with pytest.raises(ValueError):
            MeasurementModel(close_approach="ignore")
        assert MeasurementModel(sigma=2.0).noise[1, 1] == 4.0


class TestInfoTensor:
    """Tests for TargetTrack and build_info_tensor."""

    def test_terminal_maps_invert(self, l2_orbit):
        """forward_to_terminal and terminal_sensitivity are inverses."""
        track = TargetTrack.build(l2_orbit, 0.2, TimeGrid(0.0, 1.0, 5))
        for k in range(5):
            prod = track.forward_to_terminal(k) @ track.terminal_sensitivity(k)
            assert np.allclose(prod, np.eye(6), atol=1e-9)
        stacked = track.terminal_sensitivities()
        assert stacked.shape == (5, 6, 6)
        assert np.allclose(stacked[2], track.terminal_sensitivity(2), atol=1e-10)

    def test_composed_map_matches_direct_propagation(self, l2_orbit):
        """Phi(t_k -> t_L) from the cumulative chain agrees with propagating t_k to t_L."""
        grid = TimeGrid(0.0, 1.0, 5)
        track = TargetTrack.build(l2_orbit, 0.2, grid)
        for k, t in enumerate(grid.observation_epochs):
            _, direct = propagate_with_stm(track.states[k], t, grid.t_end, l2_orbit.mu)
            assert np.allclose(track.forward_to_terminal(k), direct, atol=1e-6, rtol=0)

    def test_slice_maps_measurements_to_terminal_state(self, make_env, l1_orbit, l2_orbit):
        """Coefficients use S_k = d x(t_k) / d x(t_L), i.e. the backward map from t_L."""
        env = make_env([l1_orbit], [(l2_orbit, 0.35)], steps=6)
        track = env.targets[0]
        observer = env.observer_states(0, 0.4)
        coeffs = observer_slice(observer, env.targets, env.measurement)
        for k, t in enumerate(env.grid.observation_epochs):
            _, backward = propagate_with_stm(track.states[-1], env.grid.t_end, t, l2_orbit.mu)
            assert np.allclose(backward, track.terminal_sensitivity(k), atol=1e-6, rtol=0)
            jac = observation_jacobian(observer[k, :3], track.states[k, :3])
            expected = np.trace(info_matrix(jac, env.measurement.noise, backward))
            assert coeffs[0, k] == pytest.approx(expected, rel=1e-6)

    def test_shape_and_nonnegative(self, make_env, l1_orbit, l2_orbit, dro):
        """A is M x N x L and nonnegative."""
        env = make_env([l1_orbit, dro], [(l2_orbit, 0.0), (l2_orbit, 0.5), (dro, 0.3)], steps=6)
        tensor = build_info_tensor(env, [0.1, 0.7])
        assert tensor.shape == (2, 3, 6)
        assert np.all(tensor.values >= 0)

    def test_entries_match_independent_recomputation(self, make_env, l1_orbit, dro, l2_orbit):
        """Every entry equals tr(Phi^T H^T R^-1 H Phi) from fresh long propagations."""
        env = make_env([l1_orbit, dro], [(l2_orbit, 0.25), (dro, 0.6)], steps=10)
        phases = [0.4, 0.1]
        tensor = build_info_tensor(env, phases)
        grid = env.grid
        model = env.measurement
        for j, (orbit, phase) in enumerate([(l2_orbit, 0.25), (dro, 0.6)]):
            start = phase_to_state(orbit, phase)
            terminal, phi_terminal = propagate_with_stm(start, 0.0, grid.t_end, orbit.mu)
            for i, (obs_orbit, obs_phase) in enumerate(zip([l1_orbit, dro], phases)):
                for k, t in enumerate(grid.observation_epochs):
                    tgt_k, phi_k = propagate_with_stm(start, 0.0, t, orbit.mu)
                    obs_k = phase_to_state(obs_orbit, obs_phase, epoch_offset=t)
                    # Phi(t_L -> t_k) = Phi(0 -> t_k) Phi(0 -> t_L)^-1
                    sens = phi_k @ np.linalg.inv(phi_terminal)
                    jac = observation_jacobian(obs_k[:3], tgt_k[:3])
                    expected = np.trace(info_matrix(jac, model.noise, sens))
                    assert tensor.values[i, j, k] == pytest.approx(expected, rel=1e-6)

    def test_slices_independent_of_other_observers(self, make_env, l1_orbit, l2_orbit, dro):
        """Observer i's slice depends only on its own phase."""
        env = make_env([l1_orbit, dro], [(l2_orbit, 0.0)], steps=5)
        a = build_info_tensor(env, [0.3, 0.1]).values
        b = build_info_tensor(env, [0.3, 0.9]).values
        assert np.array_equal(a[0], b[0])
        single = build_info_tensor(env.with_observers([0]), [0.3]).values
        assert np.array_equal(single[0], a[0])

    def test_parallel_matches_serial(self, make_env, l1_orbit, l2_orbit, dro):
        """Worker threads do not change the result."""
        env = make_env([l1_orbit, dro], [(l2_orbit, 0.0), (dro, 0.5)], steps=5)
        serial = build_info_tensor(env, [0.2, 0.4]).values
        threaded = build_info_tensor(env, [0.2, 0.4], workers=2).values
        assert np.array_equal(serial, threaded)

    def test_close_approach_error_and_clamp(self, make_env, l1_orbit):
        """An observer sharing a target's orbit and phase raises, or is clamped when configured."""
        env = make_env([l1_orbit], [(l1_orbit, 0.3)], steps=4)
        with pytest.raises(CloseApproachError) as exc:
            build_info_tensor(env, [0.3])
        assert exc.value.observer == 0
        assert exc.value.target == 0
        clamped = make_env([l1_orbit], [(l1_orbit, 0.3)], steps=4,
                           measurement=MeasurementModel(close_approach="clamp"))
        values = build_info_tensor(clamped, [0.3]).values
        assert np.all(np.isfinite(values))
        assert values.min() > 1e10

    def test_phase_count_checked(self, make_env, l1_orbit, l2_orbit):
        """One phase per observer."""
        env = make_env([l1_orbit], [(l2_orbit, 0.0)], steps=3)
        with pytest.raises(ValueError):
            build_info_tensor(env, [0.1, 0.2])

    def test_tensor_validation(self):
        """Negative or non-finite coefficients are rejected."""
        with pytest.raises(ValueError):
            InfoTensor(-np.ones((1, 1, 1)))
        with pytest.raises(ValueError):
            InfoTensor(np.full((1, 1, 1), np.nan))
        with pytest.raises(ValueError):
            InfoTensor(np.ones((2, 2)))

    def test_observer_states_shape(self, make_env, l1_orbit, l2_orbit):
        """Observer states cover the L observation epochs."""
        env = make_env([l1_orbit], [(l2_orbit, 0.0)], steps=7)
        states = env.observer_states(0, 0.5)
        assert states.shape == (7, 6)
        assert np.allclose(states, sample_trajectory(l1_orbit, 0.5, env.grid))
