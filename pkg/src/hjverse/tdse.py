"""Time-dependent Schroedinger propagation: Strang split-step and Crank-Nicolson."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import splu

from .grid import Boundary, Grid, Wavefunction, fd_derivative


class NumericalAbort(FloatingPointError):
    """Propagation produced non-finite values."""


class CFLWarning(UserWarning):
    """dt * max|V| / hbar exceeds one; the potential phase per step is aliased."""


class PotentialKind(str, Enum):
    FREE = "free"
    HARMONIC = "harmonic"
    SOFT_COULOMB = "soft_coulomb"
    BARRIER = "barrier"
    FOCUSING_LENS = "focusing_lens"
    CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class Potential:
    """External potential.  On 2D grids the one-body form is applied to each axis,
    which describes two equal-mass particles in one dimension; ``custom`` tables
    are taken as given."""

    kind: PotentialKind = PotentialKind.FREE
    omega: float = 0.0
    depth: float = 0.0
    softening: float = 1.0
    height: float = 0.0
    width: float = 0.0
    strength: float = 0.0
    switch_off_time: float = 0.0
    table: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", PotentialKind(self.kind))
        if self.kind is PotentialKind.CUSTOM:
            if self.table is None:
                raise ValueError("custom potential needs a table")
            table = np.asarray(self.table, dtype=float)
            if not np.all(np.isfinite(table)):
                raise ValueError("custom potential table has non-finite entries")
            object.__setattr__(self, "table", table)
        if self.kind is PotentialKind.SOFT_COULOMB and not self.softening > 0:
            raise ValueError("soft_coulomb softening must be positive")

    @classmethod
    def free(cls):
        return cls(PotentialKind.FREE)

    @classmethod
    def harmonic(cls, omega: float):
        return cls(PotentialKind.HARMONIC, omega=omega)

    @classmethod
    def soft_coulomb(cls, depth: float, softening: float):
        return cls(PotentialKind.SOFT_COULOMB, depth=depth, softening=softening)

    @classmethod
    def barrier(cls, height: float, width: float):
        return cls(PotentialKind.BARRIER, height=height, width=width)

    @classmethod
    def focusing_lens(cls, strength: float, switch_off_time: float):
        return cls(PotentialKind.FOCUSING_LENS, strength=strength, switch_off_time=switch_off_time)

    @classmethod
    def custom(cls, table):
        return cls(PotentialKind.CUSTOM, table=table)

    @property
    def time_dependent(self) -> bool:
        return self.kind is PotentialKind.FOCUSING_LENS

    @property
    def is_free(self) -> bool:
        return self.kind is PotentialKind.FREE

    def one_body(self, x: np.ndarray, mass: float, t: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        k = self.kind
        if k is PotentialKind.FREE:
            return np.zeros_like(x)
        if k is PotentialKind.HARMONIC:
            return 0.5 * mass * self.omega ** 2 * x ** 2
        if k is PotentialKind.SOFT_COULOMB:
            return -self.depth / np.sqrt(x ** 2 + self.softening ** 2)
        if k is PotentialKind.BARRIER:
            return np.where(np.abs(x) < 0.5 * self.width, self.height, 0.0)
        if k is PotentialKind.FOCUSING_LENS:
            on = 1.0 if t < self.switch_off_time else 0.0
            return on * 0.5 * self.strength * x ** 2
        raise ValueError(f"one_body undefined for {k.value} potentials")

    def one_body_force(self, x: np.ndarray, mass: float, t: float = 0.0) -> np.ndarray:
        """-dV/dx for rays; barrier edges are treated as force-free."""
        x = np.asarray(x, dtype=float)
        k = self.kind
        if k in (PotentialKind.FREE, PotentialKind.BARRIER):
            return np.zeros_like(x)
        if k is PotentialKind.HARMONIC:
            return -mass * self.omega ** 2 * x
        if k is PotentialKind.SOFT_COULOMB:
            return -self.depth * x / (x ** 2 + self.softening ** 2) ** 1.5
        if k is PotentialKind.FOCUSING_LENS:
            return -self.strength * x if t < self.switch_off_time else np.zeros_like(x)
        raise ValueError(f"one_body_force undefined for {k.value} potentials")

    def values(self, grid: Grid, mass: float, t: float = 0.0) -> np.ndarray:
        if self.kind is PotentialKind.CUSTOM:
            if self.table.shape != grid.shape:
                raise ValueError(f"custom table shape {self.table.shape} != grid {grid.shape}")
            return self.table
        if grid.dimension == 1:
            return self.one_body(grid.x, mass, t)
        v1 = self.one_body(grid.x, mass, t)
        return v1[:, None] + v1[None, :]

    def force(self, grid: Grid, mass: float) -> Callable[[np.ndarray, float], np.ndarray]:
        """Force field on 1D positions, ``f(x, t)``."""
        if self.kind is not PotentialKind.CUSTOM:
            return lambda x, t: self.one_body_force(x, mass, t)
        spline = _field_spline(grid, self.table)
        dspline = spline.derivative()
        return lambda x, t: -dspline(x)


def _field_spline(grid: Grid, field: np.ndarray) -> CubicSpline:
    x = grid.x
    if grid.boundary is Boundary.PERIODIC:
        xs = np.append(x, x[-1] + grid.spacing)
        return CubicSpline(xs, np.append(field, field[0]), bc_type="periodic")
    xs = np.append(x, x[-1] + grid.spacing)
    return CubicSpline(xs, np.append(field, 0.0))


class Scheme(str, Enum):
    SPLIT_STEP = "split_step_spectral"
    CRANK_NICOLSON = "crank_nicolson"


@dataclass(frozen=True)
class PropagatorConfig:
    scheme: Scheme = Scheme.SPLIT_STEP
    dt: float = 1e-3
    steps_per_output: int = 1

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.steps_per_output < 1:
            raise ValueError(f"steps_per_output must be >= 1, got {self.steps_per_output}")

    def check(self, grid: Grid) -> None:
        if self.scheme is Scheme.SPLIT_STEP and grid.boundary is not Boundary.PERIODIC:
            raise ValueError("split_step_spectral requires a periodic grid")


def _laplacian_1d(n: int, h: float, periodic: bool) -> sp.csc_matrix:
    main = -2.0 * np.ones(n)
    off = np.ones(n - 1)
    lap = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    if periodic:
        lap[0, n - 1] = 1.0
        lap[n - 1, 0] = 1.0
    return (lap / (h * h)).tocsc()


class Stepper:
    """Reusable single-step propagator for one (grid, potential, config)."""

    def __init__(self, grid: Grid, potential: Potential, cfg: PropagatorConfig,
                 hbar: float, mass: float):
        cfg.check(grid)
        self.grid, self.potential, self.cfg = grid, potential, cfg
        self.hbar, self.mass = hbar, mass
        self._v_cache: np.ndarray | None = None
        if cfg.scheme is Scheme.SPLIT_STEP:
            k = grid.wavenumbers
            k2 = k ** 2 if grid.dimension == 1 else k[:, None] ** 2 + k[None, :] ** 2
            self._kinetic = np.exp(-1j * hbar * k2 * cfg.dt / (2.0 * mass))
        else:
            periodic = grid.boundary is Boundary.PERIODIC
            n = grid.points_per_axis if periodic else grid.points_per_axis - 1
            lap1 = _laplacian_1d(n, grid.spacing, periodic)
            if grid.dimension == 1:
                self._lap = lap1
            else:
                eye = sp.identity(n, format="csc")
                self._lap = (sp.kron(lap1, eye) + sp.kron(eye, lap1)).tocsc()
            self._interior = (slice(None),) * grid.dimension if periodic else (slice(1, None),) * grid.dimension

    def _potential_at(self, t: float) -> np.ndarray:
        v = self.potential.values(self.grid, self.mass, t)
        dt, hbar = self.cfg.dt, self.hbar
        vmax = float(np.max(np.abs(v))) if v.size else 0.0
        if dt * vmax / hbar > 1.0:
            warnings.warn(f"dt*max|V|/hbar = {dt * vmax / hbar:.3g} > 1", CFLWarning, stacklevel=3)
        return v

    def _cn_factor(self, v: np.ndarray):
        if self._v_cache is not None and np.array_equal(v, self._v_cache[0]):
            return self._v_cache[1], self._v_cache[2]
        vi = v[self._interior].ravel()
        ham = -(self.hbar ** 2) / (2.0 * self.mass) * self._lap + sp.diags(vi)
        a = 0.5j * self.cfg.dt / self.hbar
        ident = sp.identity(ham.shape[0], format="csc")
        lu = splu((ident + a * ham).tocsc())
        rhs = (ident - a * ham).tocsr()
        self._v_cache = (v.copy(), lu, rhs)
        return lu, rhs

    def __call__(self, psi: Wavefunction) -> Wavefunction:
        dt, hbar = self.cfg.dt, self.hbar
        t_mid = psi.time + 0.5 * dt
        v = self._potential_at(t_mid)
        if self.cfg.scheme is Scheme.SPLIT_STEP:
            half = np.exp(-0.5j * v * dt / hbar)
            out = half * psi.values
            out = np.fft.ifftn(np.fft.fftn(out) * self._kinetic)
            out = half * out
        else:
            lu, rhs = self._cn_factor(v)
            interior = psi.values[self._interior]
            new = lu.solve(rhs @ interior.ravel()).reshape(interior.shape)
            out = np.zeros_like(psi.values)
            out[self._interior] = new
        if not np.all(np.isfinite(out)):
            raise NumericalAbort(f"non-finite wavefunction at t = {psi.time + dt!r}")
        return psi.with_values(out, time=psi.time + dt)


def step(psi: Wavefunction, v: Potential, cfg: PropagatorConfig) -> Wavefunction:
    """Advance ``psi`` by one ``cfg.dt``."""
    return Stepper(psi.grid, v, cfg, psi.hbar, psi.mass)(psi)


@dataclass
class PropagationResult:
    snapshots: list[Wavefunction]
    records: dict[str, list]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])


def n_steps_for(t_final: float, dt: float) -> int:
    if t_final < 0:
        raise ValueError(f"t_final must be >= 0, got {t_final}")
    n = int(round(t_final / dt))
    if abs(n * dt - t_final) > 1e-9 * max(t_final, dt):
        raise ValueError(f"t_final={t_final} is not an integer multiple of dt={dt}")
    return n


def propagate(psi: Wavefunction, v: Potential, cfg: PropagatorConfig, t_final: float,
              *observers: Callable[[Wavefunction], object],
              keep_snapshots: bool = True) -> PropagationResult:
    """Step ``psi`` to ``psi.time + t_final``.

    Every ``cfg.steps_per_output`` steps (and at the first and last step) the
    state is recorded and each observer is called on it.
    """
    n = n_steps_for(t_final, cfg.dt)
    stepper = Stepper(psi.grid, v, cfg, psi.hbar, psi.mass)
    t0 = psi.time
    names = [getattr(obs, "__name__", f"observer_{i}") for i, obs in enumerate(observers)]
    records: dict[str, list] = {name: [] for name in names}
    snapshots: list[Wavefunction] = []

    def emit(state):
        if keep_snapshots or not snapshots:
            snapshots.append(state)
        else:
            snapshots[-1] = state
        for name, obs in zip(names, observers):
            records[name].append(obs(state))

    emit(psi)
    cur = psi
    for k in range(1, n + 1):
        cur = stepper(cur)
        cur = cur.with_values(cur.values, time=t0 + k * cfg.dt)
        if k % cfg.steps_per_output == 0 or k == n:
            emit(cur)
    return PropagationResult(snapshots, records)


def energy(psi: Wavefunction, v: Potential) -> float:
    """<H> with spectral (periodic) or 4th-order (Dirichlet, 1D) kinetic energy."""
    grid = psi.grid
    dv = grid.cell_volume
    vv = v.values(grid, psi.mass, psi.time)
    pot = float(np.sum(vv * np.abs(psi.values) ** 2) * dv)
    coef = psi.hbar ** 2 / (2.0 * psi.mass)
    if grid.boundary is Boundary.PERIODIC:
        k = grid.wavenumbers
        k2 = k ** 2 if grid.dimension == 1 else k[:, None] ** 2 + k[None, :] ** 2
        weight = np.abs(np.fft.fftn(psi.values)) ** 2 * dv / grid.size
        kin = coef * float(np.sum(k2 * weight))
    else:
        if grid.dimension != 1:
            raise ValueError("Dirichlet energy is implemented for 1D grids")
        kin = coef * float(np.sum(np.abs(fd_derivative(psi.values, grid, 1)) ** 2) * dv)
    return kin + pot


def position_width(psi: Wavefunction) -> float:
    """std(x) of a 1D state, normalised on the fly."""
    rho = np.abs(psi.values) ** 2
    rho = rho / rho.sum()
    x = psi.grid.x
    mean = float(np.sum(x * rho))
    return math.sqrt(float(np.sum((x - mean) ** 2 * rho)))


def stencil_energy(psi: Wavefunction, v: Potential) -> float:
    """<H> with the 3-point (5-point in 2D) kinetic stencil; conserved exactly by Crank-Nicolson."""
    grid = psi.grid
    f = psi.values
    periodic = grid.boundary is Boundary.PERIODIC
    lap = np.zeros_like(f)
    for axis in range(grid.dimension):
        if periodic:
            fp, fm = np.roll(f, -1, axis), np.roll(f, 1, axis)
        else:
            pad = [(0, 0)] * f.ndim
            pad[axis] = (1, 1)
            g = np.pad(f, pad)
            fp = np.take(g, np.arange(2, g.shape[axis]), axis=axis)
            fm = np.take(g, np.arange(0, g.shape[axis] - 2), axis=axis)
        lap += fp - 2.0 * f + fm
    lap /= grid.spacing ** 2
    hf = -(psi.hbar ** 2) / (2.0 * psi.mass) * lap + v.values(grid, psi.mass, psi.time) * f
    return float(np.real(np.sum(np.conj(f) * hf)) * grid.cell_volume)
