import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hjverse import states
from hjverse.grid import Wavefunction, make_grid
from hjverse.madelung import (MadelungFields, action_gradient, continuity_residual, decompose, exchange_defect,
                              smoothing_potential, velocity_field)
from hjverse.tdse import Potential, PropagatorConfig, Scheme, propagate, step


class TestDecompose:
    @pytest.mark.parametrize("mode", [1, 4, -3])
    def test_plane_wave(self, small_grid, mode):
        p0 = states.commensurate_momentum(small_grid, mode)
        t = 0.37
        psi = states.plane_wave(small_grid, p0, t=t, amplitude=0.6)
        m = decompose(psi)
        assert np.allclose(m.R, 0.6, atol=1e-14)
        assert not m.node_mask.any()
        expected = p0 * small_grid.x - p0 ** 2 / 2 * t
        offset = m.S - expected
        assert np.ptp(offset) < 1e-10
        assert abs(math.remainder(offset[0], 2 * math.pi)) < 1e-10
        assert np.allclose(action_gradient(m)[0], p0, atol=1e-10)

    def test_real_gaussian_has_flat_action(self):
        g = make_grid(1, 256, 12.0, "periodic", spectral=True)
        m = decompose(states.gaussian(g, 1.5))
        assert not m.node_mask.any()
        assert np.ptp(m.S) < 1e-14

    def test_hermite_node_is_masked(self, periodic_grid):
        m = decompose(states.harmonic_eigenstate(periodic_grid, 1, 1.0))
        node = int(np.argmin(np.abs(periodic_grid.x)))
        assert m.node_mask[node]
        left, right = m.S[node - 2], m.S[node + 2]
        assert abs(abs(right - left) - math.pi) < 1e-12

    def test_far_tails_are_nodes(self, gaussian):
        m = decompose(gaussian, r_floor=1e-6)
        assert m.node_mask[0] and m.node_mask[-1]
        assert not m.node_mask[len(m.node_mask) // 2]

    @pytest.mark.parametrize("r_floor", [0.0, -1e-6, 1e-2])
    def test_r_floor_range(self, gaussian, r_floor):
        with pytest.raises(ValueError):
            decompose(gaussian, r_floor)

    def test_zero_field(self, small_grid):
        with pytest.raises(ValueError):
            decompose(Wavefunction(small_grid, np.zeros(small_grid.shape, complex)))

    def test_two_dimensional(self):
        g = make_grid(2, 32, 10.0, "periodic")
        x1, x2 = g.mesh()
        k = 2 * np.pi / g.box_length
        psi = Wavefunction(g, np.exp(-(x1 ** 2 + x2 ** 2) / 4 + 1j * (2 * k * x1 - k * x2))).normalize()
        grad = action_gradient(decompose(psi))
        assert np.allclose(grad[0], 2 * k, atol=1e-10)
        assert np.allclose(grad[1], -k, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(theta=st.floats(-20, 20), x0=st.floats(-2, 2), p0=st.floats(-3, 3), chirp=st.floats(0.5, 5))
def test_round_trip_and_gauge(theta, x0, p0, chirp):
    g = make_grid(1, 256, 24.0, "periodic", spectral=True)
    psi = states.gaussian(g, 1.0, x0=x0, p0=p0, focus_time=chirp)
    m = decompose(psi)
    ok = ~m.node_mask
    assert np.max(np.abs(m.recompose().values - psi.values)[ok]) < 1e-10
    shifted = decompose(psi * np.exp(1j * theta))
    diff = (shifted.S - m.S)[ok]
    assert np.ptp(diff) < 1e-9
    assert abs(math.remainder(diff[0] - theta, 2 * math.pi)) < 1e-9


@settings(max_examples=20, deadline=None)
@given(c=st.floats(1e-3, 1e3))
def test_amplitude_scaling_leaves_action_and_u(c):
    g = make_grid(1, 256, 24.0, "periodic", spectral=True)
    psi = states.gaussian(g, 1.3, p0=0.7, focus_time=2.0)
    m = decompose(psi)
    scaled = decompose(Wavefunction(g, c * psi.values))
    assert np.allclose(scaled.R, c * m.R, rtol=1e-13)
    assert np.array_equal(scaled.node_mask, m.node_mask)
    assert np.allclose(scaled.S, m.S, atol=1e-12)
    u0, u1 = smoothing_potential(m).U, smoothing_potential(scaled).U
    assert np.allclose(u1, u0, rtol=1e-9, atol=1e-9)


class TestSmoothingPotential:
    @pytest.mark.parametrize("r0", [1e-3, 0.25, 7.0])
    def test_constant_amplitude(self, small_grid, r0):
        m = MadelungFields(small_grid, np.full(small_grid.shape, r0), 0.3 * small_grid.x,
                           np.zeros(small_grid.shape, bool))
        field = smoothing_potential(m)
        assert np.all(field.U == 0.0)
        assert not field.regularized

    def test_plane_wave(self, small_grid):
        p0 = states.commensurate_momentum(small_grid, 2)
        # |exp(ikx)| is 1 only to rounding
        assert np.max(np.abs(smoothing_potential(decompose(states.plane_wave(small_grid, p0))).U)) < 1e-12

    def test_gaussian_against_analytic(self):
        # U(x) = (hbar^2/2m) (1/(2 s^2) - x^2/(4 s^4)) for R ~ exp(-x^2/(4 s^2)); 3-point stencil error is O(h^2)
        errs = []
        for n in (256, 512):
            g = make_grid(1, n, 16.0, "periodic", spectral=True)
            x = g.x
            m = decompose(states.gaussian(g, 1.0))
            U = smoothing_potential(m).U
            exact = 0.5 * (0.5 - x ** 2 / 4)
            core = np.abs(x) < 4
            errs.append(np.max(np.abs(U - exact)[core]))
            assert U[np.argmin(np.abs(x))] > 0
        assert errs[1] < 1e-3
        assert math.log2(errs[0] / errs[1]) > 1.8

    @pytest.mark.parametrize("omega, hbar, mass", [(1.0, 1.0, 1.0), (2.0, 0.5, 1.5)])
    def test_harmonic_ground_balances_potential(self, omega, hbar, mass):
        errs = []
        for n in (512, 1024):
            g = make_grid(1, n, 16.0, "periodic", spectral=True)
            psi = states.harmonic_eigenstate(g, 0, omega, hbar, mass)
            U = smoothing_potential(decompose(psi)).U
            V = Potential.harmonic(omega).values(g, mass)
            core = np.abs(g.x) < 2.5 * math.sqrt(hbar / (mass * omega))
            errs.append(np.max(np.abs(V + U - 0.5 * hbar * omega)[core]))
        assert errs[1] < 5e-3 * hbar * omega
        assert math.log2(errs[0] / errs[1]) > 1.9

    def test_node_values_are_extended(self, periodic_grid):
        field = smoothing_potential(decompose(states.harmonic_eigenstate(periodic_grid, 1, 1.0)))
        assert field.regularized
        assert np.all(np.isfinite(field.U))


def test_velocity_scales_with_mass(small_grid):
    p0 = states.commensurate_momentum(small_grid, 3)
    m = decompose(states.plane_wave(small_grid, p0, mass=2.5))
    assert np.allclose(velocity_field(m), p0 / 2.5, atol=1e-10)
    assert np.allclose(velocity_field(m, mass=1.0), p0, atol=1e-10)


def test_gradient_ignores_phase_jump_at_node():
    g = make_grid(1, 512, 20.0, "dirichlet")
    m = decompose(states.harmonic_eigenstate(g, 1, 1.0))
    assert np.max(np.abs(action_gradient(m))) < 1e-12


class TestContinuity:
    def test_plane_wave_is_exact(self, small_grid):
        p0 = states.commensurate_momentum(small_grid, 3)
        psi = states.plane_wave(small_grid, p0)
        cfg = PropagatorConfig(Scheme.SPLIT_STEP, 0.01)
        nxt = step(psi, Potential.free(), cfg)
        assert continuity_residual(decompose(psi), decompose(nxt), dt=0.01).l2 < 1e-10

    def test_second_order_convergence(self):
        res = []
        for n, dt in [(256, 0.02), (512, 0.01)]:
            g = make_grid(1, n, 40.0, "periodic", spectral=True)
            run = propagate(states.gaussian(g, 1.0), Potential.free(), PropagatorConfig(Scheme.SPLIT_STEP, dt), 1.0)
            a, b = run.snapshots[-2:]
            res.append(continuity_residual(decompose(a), decompose(b), dt=dt).l2)
        assert math.log2(res[0] / res[1]) > 1.8

    def test_time_gap_must_match(self, small_grid, gaussian):
        a = decompose(states.gaussian(small_grid, 1.0))
        b = decompose(step(states.gaussian(small_grid, 1.0), Potential.free(), PropagatorConfig(Scheme.SPLIT_STEP, 0.01)))
        with pytest.raises(ValueError):
            continuity_residual(a, b, dt=0.02)
        with pytest.raises(ValueError):
            continuity_residual(b, a)
        with pytest.raises(ValueError):
            continuity_residual(a, decompose(gaussian))


class TestExchange:
    def setup_method(self):
        self.g = make_grid(2, 64, 16.0, "periodic", spectral=True)
        x = self.g.x
        self.a = states.harmonic_eigenstate(self.g, 0, 1.0, x=x) + 0j
        self.b = states.harmonic_eigenstate(self.g, 1, 1.0, x=x) * np.exp(0.5j * x)

    def test_product_state(self):
        sym, _ = exchange_defect(states.two_particle(self.g, self.a))
        assert sym < 1e-12

    def test_antisymmetric_state(self):
        sym, anti = exchange_defect(states.two_particle(self.g, self.a, self.b, "antisymmetric"))
        assert anti < 1e-12
        assert sym == pytest.approx(2.0)

    def test_needs_two_particles(self, gaussian):
        with pytest.raises(ValueError):
            exchange_defect(gaussian)

    def test_asymmetric_potential_breaks_symmetry(self):
        x1, x2 = self.g.mesh()
        v = Potential.custom(0.5 * x1 ** 2 + 0.5 * x2 ** 2 + 0.3 * x1)
        psi = states.two_particle(self.g, self.a, self.b, "symmetric")
        res = propagate(psi, v, PropagatorConfig(Scheme.SPLIT_STEP, 0.01), 0.5)
        assert exchange_defect(res.snapshots[-1])[0] > 1e-3
