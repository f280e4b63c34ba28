"""Universe trajectories guided by v = grad(S)/m, and the density check against R^2."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy import ndimage
from scipy.interpolate import CubicSpline

from .grid import Boundary, Grid
from .madelung import MadelungFields, velocity_field

QUARANTINE_CELLS = 2
MAX_FLAGGED_FRACTION = 0.01


class Sampling(str, Enum):
    QUANTILE = "quantile_of_R_squared"
    UNIFORM = "uniform"


class EnsembleError(RuntimeError):
    pass


@dataclass(eq=False)
class TrajectoryEnsemble:
    times: np.ndarray
    paths: np.ndarray                       # (n_times, count)
    sampling: Sampling = Sampling.QUANTILE
    seed: int = 0
    frozen: np.ndarray = field(default=None)  # universes frozen at least once near a node
    aborted: np.ndarray = field(default=None)  # universes that left a Dirichlet box

    def __post_init__(self):
        self.times = np.atleast_1d(np.asarray(self.times, dtype=float))
        self.paths = np.atleast_2d(np.asarray(self.paths, dtype=float))
        if self.frozen is None:
            self.frozen = np.zeros(self.count, dtype=bool)
        if self.aborted is None:
            self.aborted = np.zeros(self.count, dtype=bool)

    @property
    def count(self) -> int:
        return self.paths.shape[1]

    @property
    def positions(self) -> np.ndarray:
        return self.paths[-1]

    @property
    def flagged_fraction(self) -> float:
        return float(np.mean(self.frozen | self.aborted))

    def at(self, t: float, tol: float = 1e-9) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > tol * max(1.0, abs(t)):
            raise ValueError(f"no recorded output at t = {t}")
        return self.paths[i]

    def order_preserved(self) -> np.ndarray:
        """Per output time: is the initial left-to-right order of universes intact?"""
        order = np.argsort(self.paths[0], kind="stable")
        return np.all(np.diff(self.paths[:, order], axis=1) > 0, axis=1)

    @classmethod
    def from_positions(cls, x0, t0: float = 0.0, sampling=Sampling.QUANTILE, seed: int = 0):
        return cls(np.array([t0]), np.asarray(x0, dtype=float)[None, :], Sampling(sampling), seed)


# -- sampling ------------------------------------------------------------

def density_cdf(m: MadelungFields) -> tuple[np.ndarray, np.ndarray]:
    """Piecewise-linear CDF of R^2: density constant on each cell centred on a grid point."""
    if m.grid.dimension != 1:
        raise ValueError("trajectory ensembles are 1D")
    h = m.grid.spacing
    edges = np.append(m.grid.x - 0.5 * h, m.grid.x[-1] + 0.5 * h)
    mass = m.density * h
    cdf = np.concatenate([[0.0], np.cumsum(mass)])
    return edges, cdf / cdf[-1]


def cdf_at(m: MadelungFields, x: np.ndarray) -> np.ndarray:
    edges, cdf = density_cdf(m)
    return np.interp(x, edges, cdf)


def sample_initial(m: MadelungFields, count: int, sampling: Sampling | str = Sampling.QUANTILE,
                   seed: int = 0) -> np.ndarray:
    """Initial universe positions distributed as R^2.

    Quantile sampling inverts the CDF at ``(j + 1/2)/count``; uniform
    sampling pushes Philox-generated uniforms through the same inverse and
    returns them sorted.
    """
    sampling = Sampling(sampling)
    if count < 1:
        raise ValueError("count must be positive")
    edges, cdf = density_cdf(m)
    cell_mass = np.diff(cdf)
    if cell_mass.max() >= 1.0 - 1e-12:
        raise ValueError("degenerate density: all mass in a single cell")
    if sampling is Sampling.QUANTILE:
        u = (np.arange(count) + 0.5) / count
    else:
        rng = np.random.Generator(np.random.Philox(seed))
        u = np.sort(rng.random(count))
    keep = np.concatenate([[True], cell_mass > 0])
    return np.interp(u, cdf[keep], edges[keep])


# -- advection -------------------------------------------------------------

def _spline(grid: Grid, values: np.ndarray) -> CubicSpline:
    xs = np.append(grid.x, grid.x[-1] + grid.spacing)
    if grid.boundary is Boundary.PERIODIC:
        return CubicSpline(xs, np.append(values, values[0]), bc_type="periodic")
    return CubicSpline(xs, np.append(values, values[-1]))


class VelocityHistory:
    """v(x, t): cubic splines in space per snapshot, linear in time between them."""

    def __init__(self, history: Sequence[MadelungFields], mass: float | None = None):
        if not history:
            raise ValueError("empty Madelung history")
        self.history = list(history)
        self.grid = self.history[0].grid
        self.times = np.array([m.time for m in self.history])
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("Madelung history times must increase")
        self.mass = mass
        self._splines: dict[int, CubicSpline] = {}
        self._quarantine: dict[int, np.ndarray] = {}

    def _snapshot(self, i):
        if i not in self._splines:
            m = self.history[i]
            self._splines[i] = _spline(self.grid, velocity_field(m, self.mass)[0])
            self._quarantine[i] = ndimage.binary_dilation(m.node_mask, iterations=QUARANTINE_CELLS) \
                if m.node_mask.any() else m.node_mask
        return self._splines[i], self._quarantine[i]

    def _bracket(self, t):
        eps = 1e-9 * max(1.0, abs(t))
        if t < self.times[0] - eps or t > self.times[-1] + eps:
            raise ValueError(f"t = {t} outside the Madelung history")
        i = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 1))
        if i == len(self.times) - 1 or abs(t - self.times[i]) <= eps:
            return i, i, 0.0
        w = (t - self.times[i]) / (self.times[i + 1] - self.times[i])
        if abs(1.0 - w) <= eps:
            return i + 1, i + 1, 0.0
        return i, i + 1, w

    def __call__(self, x: np.ndarray, t: float) -> np.ndarray:
        i, j, w = self._bracket(t)
        vi = self._snapshot(i)[0](x)
        if w == 0.0:
            return vi
        return (1.0 - w) * vi + w * self._snapshot(j)[0](x)

    def quarantined(self, x: np.ndarray, t: float) -> np.ndarray:
        i, j, _ = self._bracket(t)
        g = self.grid
        idx = np.rint((x + 0.5 * g.box_length) / g.spacing).astype(int) % g.points_per_axis
        return self._snapshot(i)[1][idx] | self._snapshot(j)[1][idx]


def advect(ensemble: TrajectoryEnsemble, madelung_history: Sequence[MadelungFields],
           mass: float | None = None, dt: float | None = None,
           record_every: int = 1) -> TrajectoryEnsemble:
    """RK4-integrate every universe from the ensemble's last time to the end of the history."""
    vel = VelocityHistory(madelung_history, mass)
    times = vel.times
    gaps = np.diff(times)
    if dt is None:
        dt = float(gaps.min()) if gaps.size else 0.0
    if gaps.size and gaps.max() > dt * (1 + 1e-9):
        raise ValueError(f"history gap {gaps.max()} exceeds dt = {dt}")
    grid = vel.grid
    half_box = 0.5 * grid.box_length
    periodic = grid.boundary is Boundary.PERIODIC

    t0 = float(ensemble.times[-1])
    x = ensemble.positions.copy()
    frozen = ensemble.frozen.copy()
    aborted = ensemble.aborted.copy()
    t_end = float(times[-1])
    eps = 1e-9 * max(1.0, abs(t_end))
    if not times[0] - eps <= t0 <= t_end + eps:
        raise ValueError(f"ensemble time {t0} outside the Madelung history [{times[0]}, {t_end}]")
    n = int(round((t_end - t0) / dt)) if dt > 0 else 0
    if n and abs(t0 + n * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError("history span is not a whole number of steps")

    out_t, out_x = [], []
    for k in range(1, n + 1):
        t = t0 + (k - 1) * dt
        stuck = vel.quarantined(x, t) | aborted
        frozen |= stuck & ~aborted
        k1 = vel(x, t)
        k2 = vel(x + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = vel(x + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = vel(x + dt * k3, t + dt)
        x_new = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        x = np.where(stuck, x, x_new)
        if periodic:
            x = (x + half_box) % grid.box_length - half_box
        else:
            left = (x < -half_box) | (x > half_box)
            aborted |= left
            x = np.clip(x, -half_box, half_box)
        if k % record_every == 0 or k == n:
            out_t.append(t0 + k * dt)
            out_x.append(x.copy())

    return TrajectoryEnsemble(
        np.concatenate([ensemble.times, out_t]),
        np.vstack([ensemble.paths] + ([np.array(out_x)] if out_x else [])),
        ensemble.sampling, ensemble.seed, frozen, aborted)


# -- density check -------------------------------------------------------------

def ks_distance(positions: np.ndarray, m: MadelungFields) -> float:
    """Kolmogorov-Smirnov distance between the empirical CDF and the CDF of R^2."""
    xs = np.sort(np.asarray(positions, dtype=float))
    n = xs.size
    f = cdf_at(m, xs)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def equivariance_check(ensemble: TrajectoryEnsemble, m: MadelungFields) -> float:
    if ensemble.flagged_fraction > MAX_FLAGGED_FRACTION:
        raise EnsembleError(
            f"{ensemble.flagged_fraction:.2%} of universes frozen or aborted (limit 1%)")
    return ks_distance(ensemble.at(m.time), m)
