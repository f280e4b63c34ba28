import math

import numpy as np
import pytest

from hjverse import states
from hjverse.grid import inner_product, make_grid, observables


@pytest.mark.parametrize("n", range(5))
def test_hermite_functions_orthonormal(periodic_grid, n):
    a = states.harmonic_eigenstate(periodic_grid, n, 1.0)
    for m in range(5):
        b = states.harmonic_eigenstate(periodic_grid, m, 1.0)
        assert abs(inner_product(a, b) - (n == m)) < 1e-10


@pytest.mark.parametrize("n", [0, 1, 3])
@pytest.mark.parametrize("omega, mass, hbar", [(1.0, 1.0, 1.0), (2.0, 0.5, 0.7)])
def test_hermite_widths(periodic_grid, n, omega, mass, hbar):
    o = observables(states.harmonic_eigenstate(periodic_grid, n, omega, hbar, mass))
    assert o.var_x == pytest.approx((n + 0.5) * hbar / (mass * omega), rel=1e-9)
    assert o.var_p == pytest.approx((n + 0.5) * hbar * mass * omega, rel=1e-9)


def test_spread_gaussian_follows_width_law(periodic_grid):
    for t in (0.0, 1.0, 2.5):
        psi = states.spread_gaussian(periodic_grid, 1.0, t)
        assert math.sqrt(observables(psi).var_x) == pytest.approx(states.gaussian_width(1.0, t), rel=1e-10)


def test_focus_chirp_sets_inward_momentum(periodic_grid):
    psi = states.gaussian(periodic_grid, 1.0, focus_time=2.0)
    # <p^2> = hbar^2/(4 sigma^2) + m^2 sigma^2 / t_f^2
    assert observables(psi).var_p == pytest.approx(0.25 + 0.25, rel=1e-10)


def test_box_ground_needs_dirichlet(small_grid):
    with pytest.raises(ValueError):
        states.box_ground_state(small_grid)


class TestTwoParticle:
    def setup_method(self):
        self.g = make_grid(2, 32, 12.0, "periodic")
        x = self.g.x
        self.a = np.exp(-x ** 2 / 2).astype(complex)
        self.b = x * np.exp(-x ** 2 / 2) + 0j

    @pytest.mark.parametrize("sym", ["product", "symmetric", "antisymmetric"])
    def test_normalized(self, sym):
        assert states.two_particle(self.g, self.a, self.b, sym).norm_sq == pytest.approx(1.0, abs=1e-12)

    def test_needs_second_orbital(self):
        with pytest.raises(ValueError):
            states.two_particle(self.g, self.a, symmetry="antisymmetric")

    def test_needs_2d(self, small_grid):
        with pytest.raises(ValueError):
            states.two_particle(small_grid, small_grid.x + 0j)

    def test_unknown_symmetry(self):
        with pytest.raises(ValueError):
            states.two_particle(self.g, self.a, self.b, "mixed")
