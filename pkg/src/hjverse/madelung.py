"""Amplitude/action decomposition psi = R exp(iS/hbar) and the fields built on it."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .grid import Boundary, Grid, Wavefunction

DEFAULT_R_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class MadelungFields:
    grid: Grid
    R: np.ndarray
    S: np.ndarray
    node_mask: np.ndarray
    time: float = 0.0
    hbar: float = 1.0
    mass: float = 1.0

    def recompose(self) -> Wavefunction:
        return Wavefunction(self.grid, self.R * np.exp(1j * self.S / self.hbar),
                            time=self.time, hbar=self.hbar, mass=self.mass)

    @property
    def density(self) -> np.ndarray:
        return self.R ** 2


@dataclass(frozen=True, eq=False)
class SmoothingPotentialField:
    grid: Grid
    U: np.ndarray
    regularized: bool


class ContinuityResidual(NamedTuple):
    field: np.ndarray
    l2: float


def _wrap(a):
    """Map phase differences into [-pi, pi)."""
    return (a + np.pi) % (2.0 * np.pi) - np.pi


def _unwrap_1d(phase, valid, amplitude):
    out = phase.copy()
    labels, n = ndimage.label(valid)
    for lab in range(1, n + 1):
        idx = np.flatnonzero(labels == lab)
        a, b = idx[0], idx[-1]
        seed = a + int(np.argmax(amplitude[a:b + 1]))
        d = _wrap(np.diff(phase[a:b + 1]))
        s = seed - a
        seg = np.empty(b - a + 1)
        seg[s] = phase[seed]
        seg[s + 1:] = phase[seed] + np.cumsum(d[s:])
        seg[:s] = phase[seed] - np.cumsum(d[:s][::-1])[::-1]
        out[a:b + 1] = seg
    return out


def _unwrap_nd(phase, valid, amplitude):
    """Flood fill from the largest amplitude of each connected non-node region."""
    out = phase.copy()
    labels, n = ndimage.label(valid)
    shape = phase.shape
    visited = np.zeros(shape, dtype=bool)
    for lab in range(1, n + 1):
        region = labels == lab
        seed = np.unravel_index(np.argmax(np.where(region, amplitude, -1.0)), shape)
        visited[seed] = True
        queue = deque([seed])
        while queue:
            cur = queue.popleft()
            for axis in range(len(shape)):
                for step in (-1, 1):
                    nb = list(cur)
                    nb[axis] += step
                    if not 0 <= nb[axis] < shape[axis]:
                        continue
                    nb = tuple(nb)
                    if visited[nb] or not region[nb]:
                        continue
                    visited[nb] = True
                    out[nb] = out[cur] + _wrap(phase[nb] - phase[cur])
                    queue.append(nb)
    return out


def decompose(psi: Wavefunction, r_floor: float = DEFAULT_R_FLOOR) -> MadelungFields:
    """Split ``psi`` into amplitude ``R = |psi|`` and unwrapped action ``S``.

    Points with ``R < r_floor * max(R)`` are nodes.  Each connected non-node
    region is unwrapped from its own amplitude maximum; unwrapping never
    crosses a node or the periodic seam.  ``S`` at node points copies the
    nearest non-node value.
    """
    if not 0 < r_floor <= 1e-3:
        raise ValueError(f"r_floor must lie in (0, 1e-3], got {r_floor}")
    R = np.abs(psi.values)
    rmax = float(R.max())
    if rmax == 0.0:
        raise ValueError("decompose: wavefunction is identically zero")
    node_mask = R < r_floor * rmax
    phase = np.angle(psi.values)
    if psi.grid.dimension == 1:
        unwrapped = _unwrap_1d(phase, ~node_mask, R)
    else:
        unwrapped = _unwrap_nd(phase, ~node_mask, R)
    if node_mask.any():
        _, nearest = ndimage.distance_transform_edt(node_mask, return_indices=True)
        unwrapped = unwrapped[tuple(nearest)]
    return MadelungFields(psi.grid, R, psi.hbar * unwrapped, node_mask,
                          time=psi.time, hbar=psi.hbar, mass=psi.mass)


# -- finite differences ------------------------------------------------------

def _neighbors(f, axis, periodic, fill=0.0):
    if periodic:
        return np.roll(f, -1, axis=axis), np.roll(f, 1, axis=axis)
    pad = [(0, 0)] * f.ndim
    pad[axis] = (1, 1)
    g = np.pad(f, pad, constant_values=fill)
    sl_p = [slice(None)] * f.ndim
    sl_m = [slice(None)] * f.ndim
    sl_p[axis] = slice(2, None)
    sl_m[axis] = slice(None, -2)
    return g[tuple(sl_p)], g[tuple(sl_m)]


def action_gradient(m: MadelungFields) -> np.ndarray:
    """Centred dS/dx along each axis (stacked on axis 0).

    Each single-cell difference is reduced modulo 2*pi*hbar, so the periodic
    seam of a travelling wave is handled.  Differences touching a node-masked
    point are dropped, so phase jumps across a node never enter; points with
    one valid side (including Dirichlet edges) use that one-sided difference.
    """
    grid = m.grid
    h = grid.spacing
    periodic = grid.boundary is Boundary.PERIODIC
    ok = ~m.node_mask
    grads = []
    for axis in range(grid.dimension):
        fwd = np.roll(m.S, -1, axis=axis) - m.S
        fwd_ok = ok & np.roll(ok, -1, axis=axis)
        if not periodic:
            last = [slice(None)] * grid.dimension
            last[axis] = -1
            fwd_ok[tuple(last)] = False
        fwd = np.where(fwd_ok, m.hbar * _wrap(fwd / m.hbar), 0.0)
        bwd, bwd_ok = np.roll(fwd, 1, axis=axis), np.roll(fwd_ok, 1, axis=axis)
        if not periodic:
            first = [slice(None)] * grid.dimension
            first[axis] = 0
            bwd_ok[tuple(first)] = False
        count = fwd_ok.astype(int) + bwd_ok.astype(int)
        total = np.where(fwd_ok, fwd, 0.0) + np.where(bwd_ok, bwd, 0.0)
        grads.append(np.where(count > 0, total / (np.maximum(count, 1) * h), 0.0))
    return np.stack(grads)


def laplacian(f: np.ndarray, grid: Grid) -> np.ndarray:
    """Second-order 3-point (1D) / 5-point (2D) Laplacian; zero ghosts on Dirichlet grids."""
    periodic = grid.boundary is Boundary.PERIODIC
    out = np.zeros_like(f, dtype=float)
    for axis in range(grid.dimension):
        fp, fm = _neighbors(f, axis, periodic)
        out += fp - 2.0 * f + fm
    return out / grid.spacing ** 2


def _extend_from_nearest(values, mask):
    _, nearest = ndimage.distance_transform_edt(mask, return_indices=True)
    return values[tuple(nearest)]


def smoothing_potential(m: MadelungFields, mass: float | None = None) -> SmoothingPotentialField:
    """U = -(hbar^2 / 2m) lap(R) / R, with node points copied from the nearest non-node point."""
    mass = m.mass if mass is None else mass
    if m.node_mask.all():
        raise ValueError("smoothing_potential: every grid point is a node")
    U = np.zeros_like(m.R)
    ok = ~m.node_mask
    U[ok] = -(m.hbar ** 2 / (2.0 * mass)) * laplacian(m.R, m.grid)[ok] / m.R[ok]
    regularized = bool(m.node_mask.any())
    if regularized:
        U = _extend_from_nearest(U, m.node_mask)
    return SmoothingPotentialField(m.grid, U, regularized)


def velocity_field(m: MadelungFields, mass: float | None = None) -> np.ndarray:
    """Guidance velocity grad(S)/m (stacked per axis)."""
    mass = m.mass if mass is None else mass
    return action_gradient(m) / mass


def continuity_residual(m_t: MadelungFields, m_t_plus: MadelungFields,
                        mass: float | None = None, dt: float | None = None) -> ContinuityResidual:
    """d(R^2)/dt + div(R^2 grad(S)/m) at the midpoint of two slices.

    Time derivative is the centred difference of the two slices; the flux is
    averaged over them and differenced centrally in space.  Points that are
    nodes in either slice are zeroed.
    """
    if m_t.grid != m_t_plus.grid:
        raise ValueError("continuity_residual: slices on different grids")
    mass = m_t.mass if mass is None else mass
    gap = m_t_plus.time - m_t.time
    if dt is None:
        dt = gap
    if not dt > 0 or abs(gap - dt) > 1e-9 * max(abs(dt), 1.0):
        raise ValueError(f"continuity_residual: time gap {gap!r} does not match dt={dt!r}")
    grid = m_t.grid
    rho0, rho1 = m_t.density, m_t_plus.density
    flux = 0.5 * (rho0 * action_gradient(m_t) + rho1 * action_gradient(m_t_plus)) / mass
    periodic = grid.boundary is Boundary.PERIODIC
    div = np.zeros_like(rho0)
    for axis in range(grid.dimension):
        fp, fm = _neighbors(flux[axis], axis, periodic)
        div += (fp - fm) / (2.0 * grid.spacing)
    res = (rho1 - rho0) / dt + div
    res[m_t.node_mask | m_t_plus.node_mask] = 0.0
    l2 = float(np.sqrt(np.sum(res ** 2) * grid.cell_volume))
    return ContinuityResidual(res, l2)


def exchange_defect(psi2: Wavefunction) -> tuple[float, float]:
    """Relative distance of a two-particle state from exchange (anti)symmetry."""
    g = psi2.grid
    if g.dimension != 2:
        raise ValueError("exchange_defect needs a two-particle (2D) wavefunction")
    v = psi2.values
    if v.shape[0] != v.shape[1]:
        raise ValueError("exchange_defect needs a square grid")
    norm = np.linalg.norm(v)
    swapped = v.T
    return float(np.linalg.norm(v - swapped) / norm), float(np.linalg.norm(v + swapped) / norm)
