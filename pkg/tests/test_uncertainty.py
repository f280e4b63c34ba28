import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hjverse import states
from hjverse.grid import Wavefunction, make_grid, observables
from hjverse.madelung import MadelungFields, decompose
from hjverse.uncertainty import (ResolutionError, center, delta_limit_study, hj_decomposition, is_centered,
                                 scaling_exponent, uncertainty_report, uncertainty_suite, weyl_functional,
                                 weyl_minimize)


class TestWeyl:
    @pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
    def test_gaussian_touches_zero(self, periodic_grid, sigma):
        psi = states.gaussian(periodic_grid, sigma)
        assert abs(weyl_functional(psi, 1.0 / (2 * sigma ** 2))) < 1e-10
        alpha, g_min = weyl_minimize(psi)
        assert alpha == pytest.approx(1.0 / (2 * sigma ** 2), rel=1e-10)
        assert abs(g_min) < 1e-10

    @pytest.mark.parametrize("hbar", [0.5, 1.0, 2.0])
    def test_zero_alpha_is_momentum_spread(self, periodic_grid, hbar):
        psi = states.gaussian(periodic_grid, 1.0, focus_time=2.0, hbar=hbar)
        assert weyl_functional(psi, 0.0) == pytest.approx(observables(psi).var_p / hbar ** 2, rel=1e-10)

    def test_is_a_parabola(self, periodic_grid):
        psi = states.harmonic_eigenstate(periodic_grid, 2, 1.0)
        o = observables(psi)
        alphas = np.linspace(-1.0, 2.0, 5)
        g = np.array([weyl_functional(psi, a) for a in alphas])
        coef = np.polyfit(alphas, g, 2)
        assert np.max(np.abs(np.polyval(coef, alphas) - g)) < 1e-8
        assert coef == pytest.approx([o.var_x, -1.0, o.var_p], abs=1e-8)

    @settings(max_examples=20, deadline=None)
    @given(sigma=st.floats(0.4, 2.5), x0=st.floats(-3, 3), p0=st.floats(-2, 2), t_f=st.floats(0.5, 5))
    def test_never_negative(self, sigma, x0, p0, t_f):
        g = make_grid(1, 1024, 40.0, "periodic", spectral=True)
        psi = states.gaussian(g, sigma, x0=x0, p0=p0, focus_time=t_f)
        _, g_min = weyl_minimize(psi)
        assert g_min > -1e-10
        r = uncertainty_report(psi)
        assert r.bound_ratio >= 1 - 1e-9

    def test_uncentred_input_is_centred(self, periodic_grid):
        psi = states.gaussian(periodic_grid, 1.0, x0=2.0, p0=1.5)
        assert not is_centered(psi)
        assert is_centered(center(psi))
        assert weyl_functional(psi, 0.5) == pytest.approx(weyl_functional(center(psi), 0.5), abs=1e-12)


class TestHJSplit:
    def test_plane_wave_is_all_drift(self, small_grid):
        p0 = states.commensurate_momentum(small_grid, 3)
        hj = hj_decomposition(decompose(states.plane_wave(small_grid, p0)))
        assert hj.hj_drift_term == pytest.approx(p0 ** 2, rel=1e-10)
        assert abs(hj.hj_quantum_term) < 1e-12
        assert hj.mean_p == pytest.approx(p0, rel=1e-10)
        assert abs(hj.dp2_hj) < 1e-10

    @pytest.mark.parametrize("sigma, hbar", [(0.7, 1.0), (1.0, 0.5), (2.0, 2.0)])
    def test_real_gaussian_is_all_curvature(self, periodic_grid, sigma, hbar):
        psi = states.gaussian(periodic_grid, sigma, hbar=hbar)
        hj = hj_decomposition(decompose(psi))
        assert abs(hj.hj_drift_term) < 1e-20
        assert hj.hj_quantum_term == pytest.approx(hbar ** 2 / (4 * sigma ** 2), rel=1e-10)

    @pytest.mark.parametrize("t", [0.5, 1.5, 3.0])
    def test_spreading_gaussian_split(self, periodic_grid, t):
        psi = states.spread_gaussian(periodic_grid, 1.0, t)
        hj = hj_decomposition(decompose(psi))
        width = states.gaussian_width(1.0, t)
        # the curvature term follows the current width; the drift carries the rest
        assert hj.hj_quantum_term == pytest.approx(1.0 / (4 * width ** 2), rel=1e-10)
        assert hj.dp2_hj == pytest.approx(observables(psi).var_p, rel=1e-10)
        assert hj.hj_drift_term == pytest.approx(0.25 - 1.0 / (4 * width ** 2), rel=1e-9)

    @pytest.mark.parametrize("name", ["gaussian_unit", "gaussian_moving", "gaussian_spread", "gaussian_chirped",
                                      "box_ground", "cat_pair"])
    def test_by_parts_on_node_free_states(self, name):
        psi = uncertainty_suite()[name]
        hj = hj_decomposition(decompose(psi))
        assert hj.parts_gap < 1e-8 * hj.hj_quantum_term

    def test_excluded_measure_limit(self, periodic_grid):
        m = decompose(states.gaussian(periodic_grid, 1.0))
        # the floor cannot mask 1% of an honest state's norm, so mask the core directly
        masked = MadelungFields(m.grid, m.R, m.S, np.abs(m.grid.x) < 0.1)
        with pytest.raises(ValueError, match="norm"):
            hj_decomposition(masked)

    def test_two_dimensional_rejected(self):
        g = make_grid(2, 32, 10.0, "periodic")
        x1, x2 = g.mesh()
        psi = Wavefunction(g, np.exp(-(x1 ** 2 + x2 ** 2)) + 0j).normalize()
        with pytest.raises(ValueError):
            hj_decomposition(decompose(psi))


class TestDeltaLimit:
    def test_halving_width_quadruples_curvature(self):
        rows = delta_limit_study([1.0, 0.5, 0.25])
        for a, b in zip(rows, rows[1:]):
            assert b.hj_quantum_term / a.hj_quantum_term == pytest.approx(4.0, rel=0.02)
            assert b.product == pytest.approx(0.5, abs=1e-6)
        assert scaling_exponent(rows) == pytest.approx(-2.0, abs=0.02)

    def test_unresolved_width(self):
        g = make_grid(1, 256, 40.0, "periodic", spectral=True)
        with pytest.raises(ResolutionError):
            delta_limit_study([1.0, 0.1], grid=g)

    def test_spread_below_spacing(self):
        g = make_grid(1, 64, 40.0, "periodic", spectral=True)
        with pytest.raises(ResolutionError):
            weyl_minimize(states.gaussian(g, 0.3))


def test_dirichlet_state_cannot_be_translated():
    g = make_grid(1, 256, 10.0, "dirichlet")
    with pytest.raises(ValueError, match="Dirichlet"):
        center(states.gaussian(g, 0.8, x0=1.0))


def test_suite_respects_bound():
    for name, psi in uncertainty_suite().items():
        r = uncertainty_report(psi)
        assert r.bound_ratio >= 1 - 1e-9, name
        if name.startswith("gaussian_") and name not in ("gaussian_spread", "gaussian_chirped"):
            assert r.bound_ratio == pytest.approx(1.0, abs=1e-9)
    assert math.isclose(uncertainty_report(uncertainty_suite()["hermite_2"]).bound_ratio, 5.0, rel_tol=1e-8)
