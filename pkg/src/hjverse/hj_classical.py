"""Characteristics of the Hamilton-Jacobi flow, with an optional scaled smoothing force.

Rays obey x' = p/m, p' = -d(V + lam*U)/dx.  With ``lam = 0`` this is the bare
classical flow, whose neighbouring rays may cross (a caustic).  With
``lam = 1`` and U taken from the co-propagated wavefunction the rays are the
guided universe trajectories, which never cross.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .grid import Boundary, Grid
from .madelung import MadelungFields, action_gradient, decompose, smoothing_potential
from .tdse import Potential, PropagatorConfig, Scheme, Stepper, n_steps_for
from .trajectories import sample_initial

J_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class RayBundle:
    positions: np.ndarray
    momenta: np.ndarray
    jacobian: np.ndarray
    time: float


@dataclass(frozen=True)
class CausticReport:
    formed: bool
    first_time: float | None = None
    location: float | None = None
    rays_involved: tuple[int, int] | None = None

    def as_dict(self) -> dict:
        return {"formed": self.formed, "first_time": self.first_time,
                "location": self.location,
                "rays_involved": list(self.rays_involved) if self.rays_involved else None}


def _periodic_spline(grid: Grid, values: np.ndarray) -> CubicSpline:
    xs = np.append(grid.x, grid.x[-1] + grid.spacing)
    if grid.boundary is Boundary.PERIODIC:
        return CubicSpline(xs, np.append(values, values[0]), bc_type="periodic")
    return CubicSpline(xs, np.append(values, values[-1]))


def launch_rays(initial: MadelungFields, n_rays: int, launch: str = "quantile") -> tuple[np.ndarray, np.ndarray]:
    """Launch positions and momenta p = dS/dx.

    ``quantile`` places rays at equal-mass quantiles of R^2; ``uniform``
    spaces them evenly between the outermost quantile rays.
    """
    if n_rays < 16:
        raise ValueError(f"n_rays must be >= 16, got {n_rays}")
    x0 = sample_initial(initial, n_rays, "quantile_of_R_squared")
    if launch == "uniform":
        x0 = np.linspace(x0[0], x0[-1], n_rays)
    elif launch != "quantile":
        raise ValueError(f"unknown launch mode {launch!r}")
    g = initial.grid
    idx = np.rint((x0 + 0.5 * g.box_length) / g.spacing).astype(int) % g.points_per_axis
    if initial.node_mask[idx].any():
        raise ValueError("ray launch point lies on a node-masked cell")
    p0 = _periodic_spline(g, action_gradient(initial)[0])(x0)
    return x0, p0


def _detect(jac_prev, jac, x, t, dt, j_floor):
    bad = (jac <= j_floor) | (np.sign(jac) != np.sign(jac_prev))
    if not bad.any():
        return None
    i = int(np.argmin(np.where(bad, jac, np.inf)))
    t_hit = t
    if jac_prev[i] > 0 > jac[i]:
        t_hit = t - dt + dt * jac_prev[i] / (jac_prev[i] - jac[i])
    return CausticReport(True, float(t_hit), float(0.5 * (x[i] + x[i + 1])), (i, i + 1))


def _trace(x0, p0, force: Callable[[np.ndarray, float], np.ndarray], mass, dt, n_steps, t0,
           j_floor, steps_per_output):
    spacing0 = np.diff(x0)
    x, p = x0.copy(), p0.copy()
    jac = np.ones_like(spacing0)
    bundles = [RayBundle(x.copy(), p.copy(), jac.copy(), t0)]
    report = CausticReport(False)
    f = force(x, t0)
    for k in range(1, n_steps + 1):
        t = t0 + k * dt
        p_half = p + 0.5 * dt * f
        x = x + dt * p_half / mass
        f = force(x, t)
        p = p_half + 0.5 * dt * f
        jac_prev = jac
        jac = np.diff(x) / spacing0
        if not report.formed:
            hit = _detect(jac_prev, jac, x, t, dt, j_floor)
            if hit is not None:
                report = hit
        if k % steps_per_output == 0 or k == n_steps:
            bundles.append(RayBundle(x.copy(), p.copy(), jac.copy(), t))
    return bundles, report


def trace_classical(initial: MadelungFields, v: Potential, mass: float | None = None,
                    dt: float = 1e-3, t_final: float = 1.0, n_rays: int = 64,
                    launch: str = "quantile", j_floor: float = J_FLOOR,
                    steps_per_output: int = 1) -> tuple[list[RayBundle], CausticReport]:
    """Velocity-Verlet characteristics of the unsmoothed flow, with caustic detection."""
    mass = initial.mass if mass is None else mass
    x0, p0 = launch_rays(initial, n_rays, launch)
    force = v.force(initial.grid, mass)
    return _trace(x0, p0, force, mass, dt, n_steps_for(t_final, dt), initial.time,
                  j_floor, steps_per_output)


class SmoothingForce:
    """-dU/dx from a wavefunction propagated alongside the rays.

    U is cubic-spline interpolated in space and linear in time between the
    stored quantum snapshots; snapshots are produced on demand.
    """

    def __init__(self, initial: MadelungFields, v: Potential, mass: float, dt: float,
                 substeps: int = 1, r_floor: float = 1e-6):
        grid = initial.grid
        scheme = Scheme.SPLIT_STEP if grid.boundary is Boundary.PERIODIC else Scheme.CRANK_NICOLSON
        self.qdt = dt / substeps
        self._stepper = Stepper(grid, v, PropagatorConfig(scheme, self.qdt), initial.hbar, mass)
        self._psi = initial.recompose()
        self._t0 = initial.time
        self._mass = mass
        self._r_floor = r_floor
        self._grid = grid
        self._derivs: list = []
        self._append(initial)

    def _append(self, m):
        u = smoothing_potential(m, self._mass).U
        self._derivs.append(_periodic_spline(self._grid, u).derivative())

    def _ensure(self, k):
        while len(self._derivs) <= k:
            self._psi = self._stepper(self._psi)
            self._append(decompose(self._psi, self._r_floor))

    def __call__(self, x, t):
        half = 0.5 * self._grid.box_length
        if np.any(np.abs(x) > half):
            raise ValueError("ray left the grid; smoothing potential undefined there")
        s = (t - self._t0) / self.qdt
        i = int(np.floor(s + 1e-9))
        w = s - i
        if abs(w) < 1e-9:
            w = 0.0
        self._ensure(i + (1 if w else 0))
        g = self._derivs[i](x)
        if w:
            g = (1.0 - w) * g + w * self._derivs[i + 1](x)
        return -g


def trace_scaled(initial: MadelungFields, v: Potential, mass: float | None = None,
                 dt: float = 1e-3, t_final: float = 1.0, n_rays: int = 64, lam: float = 1.0,
                 launch: str = "quantile", j_floor: float = J_FLOOR, steps_per_output: int = 1,
                 substeps: int = 1) -> tuple[list[RayBundle], CausticReport]:
    """Rays under -d(V + lam*U)/dx; ``lam = 0`` is exactly :func:`trace_classical`."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    mass = initial.mass if mass is None else mass
    if lam == 0.0:
        return trace_classical(initial, v, mass, dt, t_final, n_rays, launch, j_floor, steps_per_output)
    x0, p0 = launch_rays(initial, n_rays, launch)
    fv = v.force(initial.grid, mass)
    fu = SmoothingForce(initial, v, mass, dt, substeps)

    def force(x, t):
        return fv(x, t) + lam * fu(x, t)

    return _trace(x0, p0, force, mass, dt, n_steps_for(t_final, dt), initial.time,
                  j_floor, steps_per_output)


def ray_energy(bundle: RayBundle, v: Potential, mass: float) -> np.ndarray:
    return bundle.momenta ** 2 / (2.0 * mass) + v.one_body(bundle.positions, mass, bundle.time)
