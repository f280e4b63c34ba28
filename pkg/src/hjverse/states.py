"""Initial-state constructors."""
from __future__ import annotations

import math

import numpy as np
from numpy.polynomial.hermite import hermval

from .grid import Boundary, Grid, Wavefunction


def gaussian(grid: Grid, sigma0: float, x0: float = 0.0, p0: float = 0.0,
             hbar: float = 1.0, mass: float = 1.0, focus_time: float | None = None) -> Wavefunction:
    """Packet ``exp(-(x-x0)^2 / (4 sigma0^2) + i p0 x / hbar)``, so that std(x) = sigma0.

    ``focus_time`` adds the converging chirp ``S = -m (x-x0)^2 / (2 t_f)``
    whose classical rays all meet at ``x0`` at ``t = t_f``.
    """
    x = grid.x
    phase = p0 * x / hbar
    if focus_time is not None:
        phase = phase - mass * (x - x0) ** 2 / (2.0 * focus_time * hbar)
    values = np.exp(-((x - x0) ** 2) / (4.0 * sigma0 ** 2) + 1j * phase)
    return Wavefunction(grid, values, hbar=hbar, mass=mass).normalize()


def spread_gaussian(grid: Grid, sigma0: float, t: float, hbar: float = 1.0, mass: float = 1.0) -> Wavefunction:
    """Exact free evolution of ``gaussian(grid, sigma0)`` to time ``t``."""
    x = grid.x
    a = 4.0 * sigma0 ** 2 * (1.0 + 1j * hbar * t / (2.0 * mass * sigma0 ** 2))
    values = np.exp(-x ** 2 / a)
    return Wavefunction(grid, values, time=t, hbar=hbar, mass=mass).normalize()


def gaussian_width(sigma0: float, t: float, hbar: float = 1.0, mass: float = 1.0) -> float:
    """Free-spreading law for std(x) of a minimum-uncertainty packet."""
    return sigma0 * math.sqrt(1.0 + (hbar * t / (2.0 * mass * sigma0 ** 2)) ** 2)


def plane_wave(grid: Grid, p0: float, hbar: float = 1.0, mass: float = 1.0, t: float = 0.0,
               amplitude: float | None = None) -> Wavefunction:
    """``R0 exp(i (p0 x - E t) / hbar)``; normalized over the box unless ``amplitude`` is given."""
    energy = p0 ** 2 / (2.0 * mass)
    r0 = 1.0 / math.sqrt(grid.box_length ** grid.dimension) if amplitude is None else amplitude
    values = r0 * np.exp(1j * (p0 * grid.x - energy * t) / hbar)
    return Wavefunction(grid, values, time=t, hbar=hbar, mass=mass)


def commensurate_momentum(grid: Grid, mode: int, hbar: float = 1.0) -> float:
    return hbar * 2.0 * np.pi * mode / grid.box_length


def harmonic_eigenstate(grid: Grid, n: int, omega: float, hbar: float = 1.0, mass: float = 1.0,
                        x: np.ndarray | None = None) -> Wavefunction | np.ndarray:
    """Normalized Hermite function of order ``n``."""
    xs = grid.x if x is None else x
    xi = np.sqrt(mass * omega / hbar) * xs
    coeffs = np.zeros(n + 1)
    coeffs[n] = 1.0
    pref = (mass * omega / (np.pi * hbar)) ** 0.25 / math.sqrt(2.0 ** n * math.factorial(n))
    values = pref * hermval(xi, coeffs) * np.exp(-xi ** 2 / 2.0)
    if x is not None:
        return values
    return Wavefunction(grid, values.astype(complex), hbar=hbar, mass=mass).normalize()


def box_ground_state(grid: Grid, hbar: float = 1.0, mass: float = 1.0) -> Wavefunction:
    """Lowest state of a hard box whose walls are the grid walls."""
    if grid.boundary is not Boundary.DIRICHLET:
        raise ValueError("box_ground_state needs a Dirichlet grid")
    values = np.cos(np.pi * grid.x / grid.box_length)
    values[0] = 0.0
    return Wavefunction(grid, values.astype(complex), hbar=hbar, mass=mass).normalize()


def two_particle(grid: Grid, phi_a: np.ndarray, phi_b: np.ndarray | None = None,
                 symmetry: str = "product", hbar: float = 1.0, mass: float = 1.0) -> Wavefunction:
    """Two equal-mass particles on a 2D grid with axes (x1, x2).

    ``symmetry``: ``product`` gives phi_a(x1) phi_a(x2); ``symmetric`` and
    ``antisymmetric`` combine phi_a and phi_b with the matching exchange sign.
    """
    if grid.dimension != 2:
        raise ValueError("two_particle needs a 2D grid")
    if symmetry == "product":
        values = np.outer(phi_a, phi_a)
    elif symmetry in ("symmetric", "antisymmetric"):
        if phi_b is None:
            raise ValueError(f"{symmetry} two-particle state needs two orbitals")
        sign = 1.0 if symmetry == "symmetric" else -1.0
        values = np.outer(phi_a, phi_b) + sign * np.outer(phi_b, phi_a)
    else:
        raise ValueError(f"unknown symmetry {symmetry!r}")
    return Wavefunction(grid, values.astype(complex), hbar=hbar, mass=mass).normalize()
