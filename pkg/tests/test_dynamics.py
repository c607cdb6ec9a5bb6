"""Test the rotating-frame dynamics and the propagators."""

import numpy as np
import pytest

from cisphase.catalog import libration_points
from cisphase.dynamics import (
    PropagationSettings,
    effective_potential,
    eom,
    eom_jacobian,
    jacobi_constant,
    propagate,
    propagate_sequence,
    propagate_with_stm,
)
from cisphase.errors import SingularPositionError


class TestPotential:
    """Tests for the effective potential and the equations of motion."""

    def test_equilateral_point(self):
        """At L4 both distances are 1, so U = (x^2 + y^2)/2 + 1."""
        assert effective_potential(np.array([0.3, 0.8660254, 0.0]), 0.2) == pytest.approx(1.42, abs=1e-7)

    def test_two_body_limit(self):
        """With a vanishing secondary the potential reduces to the rotating two-body one."""
        assert effective_potential(np.array([0.0, 1.0, 0.0]), 1e-10) == pytest.approx(1.5, abs=1e-8)

    def test_matches_direct_formula(self):
        """Compare against an independent scalar evaluation."""
        mu, x = 0.01215, 0.5
        expected = 0.5 * x * x + (1 - mu) / abs(x + mu) + mu / abs(x - 1 + mu)
        assert effective_potential(np.array([x, 0.0, 0.0]), mu) == pytest.approx(expected, rel=1e-15)

    def test_singular_position(self, mu):
        """A position on a primary raises instead of returning inf."""
        with pytest.raises(SingularPositionError):
            effective_potential(np.array([1.0 - mu, 0.0, 0.0]), mu)
        with pytest.raises(SingularPositionError):
            eom(np.array([-mu, 0.0, 0.0, 0.0, 0.0, 0.0]), mu)

    def test_collinear_equilibrium(self, mu):
        """L1 at rest has no acceleration."""
        state = np.concatenate([libration_points(mu)["L1"], np.zeros(3)])
        assert np.all(np.abs(eom(state, mu)[3:]) < 1e-10)

    def test_triangular_equilibrium(self):
        """L4 at rest has no acceleration."""
        state = np.concatenate([libration_points(0.2)["L4"], np.zeros(3)])
        assert np.allclose(eom(state, 0.2)[3:], 0.0, atol=1e-12)

    def test_velocity_pass_through(self, mu):
        """The first three derivative components are the velocity."""
        state = np.array([0.8, 0.1, 0.05, 0.1, -0.2, 0.3])
        assert np.array_equal(eom(state, mu)[:3], state[3:])

    def test_jacobi_at_equilateral_point(self):
        """C = 2U at rest."""
        state = np.concatenate([libration_points(0.2)["L4"], np.zeros(3)])
        assert jacobi_constant(state, 0.2) == pytest.approx(2.84, abs=1e-12)

    def test_jacobian_matches_finite_differences(self, mu):
        """The analytic partials agree with central differences at random states."""
        rng = np.random.default_rng(7)
        checked = 0
        h = 1e-6
        while checked < 100:
            state = np.concatenate([
                rng.uniform([-1.5, -1.0, -0.3], [1.5, 1.0, 0.3]),
                rng.uniform(-1.0, 1.0, 3),
            ])
            pos = state[:3]
            if min(np.linalg.norm(pos - [-mu, 0, 0]), np.linalg.norm(pos - [1 - mu, 0, 0])) < 0.1:
                continue
            fd = np.empty((6, 6))
            for c in range(6):
                step = np.zeros(6)
                step[c] = h
                fd[:, c] = (eom(state + step, mu) - eom(state - step, mu)) / (2 * h)
            jac = eom_jacobian(state, mu)
            assert np.max(np.abs(jac - fd)) <= 1e-6 * max(1.0, np.max(np.abs(jac)))
            checked += 1


class TestPropagation:
    """Tests for propagate and propagate_with_stm."""

    def test_zero_interval_returns_copy(self, dro):
        """t1 == t0 is the identity and does not alias the input."""
        state = np.array(dro.initial_state)
        out = propagate(state, 0.3, 0.3, dro.mu)
        assert np.array_equal(out, state)
        assert out is not state

    def test_forward_backward(self, dro):
        """Propagating there and back recovers the start."""
        there = propagate(dro.initial_state, 0.0, 2.0, dro.mu)
        back = propagate(there, 2.0, 0.0, dro.mu)
        assert np.allclose(back, dro.initial_state, atol=1e-9, rtol=0)

    def test_stable_orbit_closes(self, dro):
        """One period of a stable catalog orbit returns to the start within 1e-8."""
        final = propagate(dro.initial_state, 0.0, dro.period, dro.mu)
        assert np.max(np.abs(final - dro.initial_state)) < 1e-8

    def test_jacobi_conserved(self, dro, l1_orbit):
        """Jacobi constant drift stays below 1e-10."""
        c0 = jacobi_constant(dro.initial_state, dro.mu)
        states, _ = propagate_sequence(dro.initial_state, np.linspace(0.0, 10.0, 11), dro.mu)
        drift = max(abs(jacobi_constant(s, dro.mu) - c0) for s in states)
        assert drift < 1e-10
        final = propagate(l1_orbit.initial_state, 0.0, l1_orbit.period, l1_orbit.mu)
        assert abs(jacobi_constant(final, l1_orbit.mu) - jacobi_constant(l1_orbit.initial_state, l1_orbit.mu)) < 1e-10

    def test_default_tolerances(self):
        """DOP853 runs at rtol 1e-13 and atol 1e-14 unless configured otherwise."""
        settings = PropagationSettings()
        assert (settings.rel_tol, settings.abs_tol) == (1e-13, 1e-14)
        assert PropagationSettings.from_config({}) == settings
        assert PropagationSettings.from_config({"REL_TOL": 1e-10}).rel_tol == 1e-10

    def test_jacobi_conserved_on_catalog(self, catalog_orbits):
        """Every catalog orbit holds its Jacobi constant to 1e-10 over one period."""
        for orbit in catalog_orbits:
            c0 = jacobi_constant(orbit.initial_state, orbit.mu)
            states, _ = propagate_sequence(orbit.initial_state, np.linspace(0.0, orbit.period, 11), orbit.mu)
            assert max(abs(jacobi_constant(s, orbit.mu) - c0) for s in states) < 1e-10, orbit.id

    def test_deterministic(self, l2_orbit):
        """Identical inputs give bit-identical outputs."""
        a = propagate(l2_orbit.initial_state, 0.0, 1.3, l2_orbit.mu)
        b = propagate(l2_orbit.initial_state, 0.0, 1.3, l2_orbit.mu)
        assert np.array_equal(a, b)

    def test_stm_identity_at_zero_interval(self, dro):
        """Phi(t0, t0) = I."""
        _, phi = propagate_with_stm(dro.initial_state, 1.0, 1.0, dro.mu)
        assert np.array_equal(phi, np.eye(6))

    def test_stm_matches_finite_differences(self, l2_orbit):
        """Each STM column matches central differences of propagate."""
        x0, m = l2_orbit.initial_state, l2_orbit.mu
        h = 1e-6
        _, phi = propagate_with_stm(x0, 0.0, 1.0, m)
        for c in range(6):
            step = np.zeros(6)
            step[c] = h
            fd = (propagate(x0 + step, 0.0, 1.0, m) - propagate(x0 - step, 0.0, 1.0, m)) / (2 * h)
            assert np.linalg.norm(fd - phi[:, c]) <= 1e-5 * np.linalg.norm(phi[:, c])

    def test_stm_composition_and_inverse(self, l1_orbit):
        """Phi(0,2) = Phi(1,2) Phi(0,1), and the backward STM inverts the forward one."""
        mu = l1_orbit.mu
        x1, phi01 = propagate_with_stm(l1_orbit.initial_state, 0.0, 1.0, mu)
        _, phi12 = propagate_with_stm(x1, 1.0, 2.0, mu)
        _, phi02 = propagate_with_stm(l1_orbit.initial_state, 0.0, 2.0, mu)
        assert np.allclose(phi12 @ phi01, phi02, rtol=1e-8, atol=1e-8)
        _, phi10 = propagate_with_stm(x1, 1.0, 0.0, mu)
        assert np.allclose(phi01 @ phi10, np.eye(6), atol=1e-7)

    def test_stm_determinant(self, dro):
        """Phase-space volume is preserved."""
        _, phi = propagate_with_stm(dro.initial_state, 0.0, 3.0, dro.mu)
        assert abs(np.linalg.det(phi) - 1.0) < 1e-6

    def test_sequence_chains_stms(self, dro):
        """The cumulative STM chain equals one long propagation."""
        states, stms = propagate_sequence(dro.initial_state, [0.0, 0.4, 0.8], dro.mu, with_stm=True)
        final, phi = propagate_with_stm(dro.initial_state, 0.0, 0.8, dro.mu)
        assert np.allclose(states[-1], final, atol=1e-10)
        assert np.allclose(stms[-1], phi, atol=1e-8)

    def test_invalid_settings(self):
        """Tolerances must be positive."""
        with pytest.raises(ValueError):
            PropagationSettings(rel_tol=0.0)
        with pytest.raises(ValueError):
            PropagationSettings(max_step=-1.0)
