"""Uniform grids, wavefunctions on them, and the spectral observables.

Coordinates are centred: point ``k`` along an axis sits at
``-L/2 + k*h`` with ``h = L/n``.

Dirichlet grids put the walls at ``-L/2`` (grid point 0, pinned to zero)
and at ``+L/2`` (one step past the last point).  Derivatives there use odd
reflection about each wall, which is the natural extension of a field that
vanishes on the wall.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

NORM_TOLERANCE = 1e-6


class Boundary(str, Enum):
    PERIODIC = "periodic"
    DIRICHLET = "dirichlet"


@dataclass(frozen=True)
class Grid:
    dimension: int
    points_per_axis: int
    box_length: float
    boundary: Boundary = Boundary.PERIODIC

    @property
    def spacing(self) -> float:
        return self.box_length / self.points_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dimension

    @property
    def size(self) -> int:
        return self.points_per_axis ** self.dimension

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dimension

    @property
    def x(self) -> np.ndarray:
        """Axis coordinates (identical along every axis)."""
        return -0.5 * self.box_length + self.spacing * np.arange(self.points_per_axis)

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.x] * self.dimension), indexing="ij"))

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.points_per_axis, d=self.spacing)


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def make_grid(dimension: int, points_per_axis: int, box_length: float,
              boundary: Boundary | str = Boundary.PERIODIC,
              spectral: bool = False) -> Grid:
    """Build a validated grid.

    ``spectral=True`` declares that FFT stepping will be used and enforces
    a power-of-two point count on periodic grids.
    """
    boundary = Boundary(boundary)
    if dimension not in (1, 2):
        raise ValueError(f"dimension must be 1 or 2, got {dimension}")
    if points_per_axis < 8:
        raise ValueError(f"points_per_axis must be >= 8, got {points_per_axis}")
    if not box_length > 0:
        raise ValueError(f"box_length must be positive, got {box_length}")
    if spectral and boundary is Boundary.PERIODIC and not _is_power_of_two(points_per_axis):
        raise ValueError(
            f"points_per_axis={points_per_axis} is not a power of two (required for spectral stepping)")
    return Grid(dimension, int(points_per_axis), float(box_length), boundary)


@dataclass(frozen=True, eq=False)
class Wavefunction:
    grid: Grid
    values: np.ndarray
    time: float = 0.0
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != self.grid.shape:
            raise ValueError(f"values shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise FloatingPointError("wavefunction has non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.cell_volume)

    def normalize(self) -> "Wavefunction":
        n2 = self.norm_sq
        if n2 == 0.0:
            raise ValueError("cannot normalize an identically zero wavefunction")
        return self.with_values(self.values / np.sqrt(n2))

    def with_values(self, values: np.ndarray, time: float | None = None) -> "Wavefunction":
        return replace(self, values=values, time=self.time if time is None else time)

    def __mul__(self, c):
        return self.with_values(self.values * c)

    __rmul__ = __mul__


@dataclass(frozen=True)
class Observables:
    mean_x: float
    mean_p: float
    var_x: float
    var_p: float
    norm_sq: float
    mean_p2: float = field(default=0.0)


def inner_product(a: Wavefunction, b: Wavefunction) -> complex:
    """Discrete <a|b> on a shared grid."""
    if a.grid != b.grid:
        raise ValueError("inner_product: wavefunctions live on different grids")
    return complex(np.sum(np.conj(a.values) * b.values) * a.grid.cell_volume)


# -- derivatives ---------------------------------------------------------

def spectral_derivative(values: np.ndarray, grid: Grid, order: int = 1, axis: int = -1) -> np.ndarray:
    k = grid.wavenumbers
    shape = [1] * values.ndim
    shape[axis] = k.size
    factor = ((1j * k) ** order).reshape(shape)
    if order % 2 == 1:
        # Nyquist mode has no well-defined odd derivative
        nyq = grid.points_per_axis // 2
        idx = [slice(None)] * values.ndim
        idx[axis] = nyq
        factor = factor.copy()
        factor[tuple(idx)] = 0.0
    out = np.fft.ifft(np.fft.fft(values, axis=axis) * factor, axis=axis)
    if np.isrealobj(values):
        return out.real
    return out


def _odd_extend(values: np.ndarray) -> np.ndarray:
    # 1D: two ghost points each side, walls at index 0 and index n
    left = -values[2:0:-1]
    right = np.concatenate([[0.0], -values[-1:-2:-1]])
    return np.concatenate([left, values, right])


def fd_derivative(values: np.ndarray, grid: Grid, order: int = 1) -> np.ndarray:
    """4th-order central differences with odd reflection at Dirichlet walls (1D)."""
    if values.ndim != 1:
        raise ValueError("fd_derivative supports 1D fields only")
    f = _odd_extend(values)
    h = grid.spacing
    c = slice(2, -2)
    if order == 1:
        return (-f[4:] + 8 * f[3:-1] - 8 * f[1:-3] + f[:-4]) / (12 * h)
    if order == 2:
        return (-f[4:] + 16 * f[3:-1] - 30 * f[c] + 16 * f[1:-3] - f[:-4]) / (12 * h * h)
    raise ValueError("fd_derivative: order must be 1 or 2")


def derivative(values: np.ndarray, grid: Grid, order: int = 1) -> np.ndarray:
    """Spatial derivative along the single axis of a 1D field, by boundary type."""
    if grid.boundary is Boundary.PERIODIC:
        return spectral_derivative(values, grid, order)
    return fd_derivative(values, grid, order)


# -- observables -------------------------------------------------------------

def momentum_moments(psi: Wavefunction) -> tuple[float, float]:
    """Return (<p>, <p^2>) for a normalized 1D state.

    Periodic grids integrate against |psi_hat(k)|^2 with p = hbar*k; this is
    the spectral oracle.  Dirichlet grids use 4th-order differences.
    """
    grid, hbar = psi.grid, psi.hbar
    if grid.boundary is Boundary.PERIODIC:
        weight = np.abs(np.fft.fft(psi.values)) ** 2 * grid.spacing / grid.points_per_axis
        p = hbar * grid.wavenumbers
        return float(np.sum(p * weight)), float(np.sum(p * p * weight))
    dpsi = fd_derivative(psi.values, grid, 1)
    h = grid.spacing
    mean_p = float(np.real(np.sum(np.conj(psi.values) * (-1j * hbar) * dpsi)) * h)
    mean_p2 = float(hbar ** 2 * np.sum(np.abs(dpsi) ** 2) * h)
    return mean_p, mean_p2


def observables(psi: Wavefunction) -> Observables:
    if psi.grid.dimension != 1:
        raise ValueError("observables are defined for 1D wavefunctions")
    n2 = psi.norm_sq
    if abs(n2 - 1.0) > NORM_TOLERANCE:
        raise ValueError(f"observables: wavefunction not normalized (norm^2 = {n2!r})")
    x = psi.grid.x
    rho = np.abs(psi.values) ** 2 * psi.grid.spacing
    mean_x = float(np.sum(x * rho))
    var_x = float(np.sum((x - mean_x) ** 2 * rho))
    mean_p, mean_p2 = momentum_moments(psi)
    var_p = max(mean_p2 - mean_p ** 2, 0.0)
    return Observables(mean_x, mean_p, var_x, var_p, n2, mean_p2)
