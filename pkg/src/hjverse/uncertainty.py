"""Position-momentum uncertainty from the Weyl functional and its Hamilton-Jacobi split.

g(alpha) = integral |alpha x psi + psi'|^2 dx = alpha^2 dx2 - alpha + dp2 / hbar^2
is non-negative for every real alpha; its minimum at alpha = 1/(2 dx2) gives
dx2 * dp2 >= (hbar/2)^2.

The H-J split writes <p^2> = int R^2 (S')^2 dx - hbar^2 int R R'' dx: a drift
term along the guiding action plus an amplitude-curvature term.  The
curvature term enters with a minus sign; it equals +hbar^2 int (R')^2 dx
after integrating by parts.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .grid import Boundary, Grid, Wavefunction, derivative, make_grid, observables, spectral_derivative
from .madelung import DEFAULT_R_FLOOR, MadelungFields, decompose
from . import states

log = logging.getLogger(__name__)

CENTER_TOLERANCE = 1e-9
MAX_EXCLUDED_MEASURE = 0.01


class ResolutionError(ValueError):
    pass


@dataclass(frozen=True)
class HJDecomposition:
    hj_drift_term: float
    hj_quantum_term: float
    hj_quantum_term_parts: float
    mean_p: float
    dp2_hj: float
    excluded_measure: float

    @property
    def parts_gap(self) -> float:
        """|(-hbar^2 int R R'') - (hbar^2 int R'^2)|; small for node-free states."""
        return abs(self.hj_quantum_term - self.hj_quantum_term_parts)


@dataclass(frozen=True)
class UncertaintyReport:
    dx2: float
    dp2_spectral: float
    dp2_hj: float
    hj_drift_term: float
    hj_quantum_term: float
    product: float
    g_min_alpha: float
    g_min: float
    excluded_measure: float
    hbar: float

    @property
    def bound_ratio(self) -> float:
        return self.product / (0.5 * self.hbar)


def is_centered(psi: Wavefunction, tol: float = CENTER_TOLERANCE) -> bool:
    o = observables(psi)
    scale_x = math.sqrt(o.var_x) + psi.grid.spacing
    scale_p = math.sqrt(o.var_p) + psi.hbar / psi.grid.box_length
    return abs(o.mean_x) <= tol * scale_x and abs(o.mean_p) <= tol * scale_p


def center(psi: Wavefunction) -> Wavefunction:
    """Translate so that <x> = 0, then apply a phase ramp so that <p> = 0."""
    o = observables(psi)
    grid = psi.grid
    values = psi.values
    if o.mean_x != 0.0:
        if grid.boundary is Boundary.PERIODIC:
            values = np.fft.ifft(np.fft.fft(values) * np.exp(1j * grid.wavenumbers * o.mean_x))
        elif abs(o.mean_x) > CENTER_TOLERANCE * grid.spacing:
            raise ValueError("cannot translate a state inside a Dirichlet box")
    shifted = psi.with_values(values)
    mean_p = observables(shifted).mean_p
    values = values * np.exp(-1j * mean_p * grid.x / psi.hbar)
    return psi.with_values(values)


def _ensure_centered(psi: Wavefunction) -> Wavefunction:
    if is_centered(psi):
        return psi
    log.info("state not centred; translating and phase-ramping before the Weyl functional")
    return center(psi)


def weyl_functional(psi: Wavefunction, alpha: float) -> float:
    """Quadrature of |alpha x psi + dpsi/dx|^2 for a normalized, centred 1D state."""
    psi = _ensure_centered(psi)
    dpsi = derivative(psi.values, psi.grid, 1)
    integrand = np.abs(alpha * psi.grid.x * psi.values + dpsi) ** 2
    return float(np.sum(integrand) * psi.grid.spacing)


def weyl_minimize(psi: Wavefunction) -> tuple[float, float]:
    """Closed-form minimizer alpha* = 1/(2 dx2) and g(alpha*)."""
    psi = _ensure_centered(psi)
    dx2 = observables(psi).var_x
    if math.sqrt(dx2) < psi.grid.spacing:
        raise ResolutionError(f"position spread {math.sqrt(dx2)!r} is below the grid spacing")
    alpha = 1.0 / (2.0 * dx2)
    g_min = weyl_functional(psi, alpha)
    if g_min < -1e-8:
        raise ArithmeticError(f"Weyl functional negative at its minimum: {g_min!r}")
    return alpha, g_min


def _field_derivative(f: np.ndarray, grid: Grid, order: int) -> np.ndarray:
    if grid.boundary is Boundary.PERIODIC:
        return spectral_derivative(f, grid, order)
    return derivative(f, grid, order)


def hj_decomposition(m: MadelungFields, mass: float | None = None) -> HJDecomposition:
    """<p^2> and its mean from amplitude and action alone.

    S' is evaluated as hbar Im(psi* psi') / R^2 on the recomposed field, so
    the periodic seam of S never enters; R' and R'' are derivatives of the
    amplitude itself.  Node points are excluded and their share of the norm
    is reported.  At an interior node R has a kink, so -R R'' misses a
    point contribution that the by-parts form (R')^2 keeps; ``parts_gap``
    exposes it.
    """
    grid, hbar = m.grid, m.hbar
    if grid.dimension != 1:
        raise ValueError("hj_decomposition is 1D")
    h = grid.spacing
    psi = m.recompose().values
    ok = ~m.node_mask
    rho = m.R ** 2
    total = float(np.sum(rho) * h)
    excluded = float(np.sum(rho[m.node_mask]) * h) / total
    if excluded > MAX_EXCLUDED_MEASURE:
        raise ValueError(f"node-masked points carry {excluded:.3%} of the norm (limit 1%)")
    dpsi = _field_derivative(psi, grid, 1)
    dS = np.zeros_like(m.R)
    dS[ok] = hbar * np.imag(np.conj(psi[ok]) * dpsi[ok]) / rho[ok]
    dR = _field_derivative(m.R, grid, 1)
    d2R = _field_derivative(m.R, grid, 2)
    drift = float(np.sum((rho * dS ** 2)[ok]) * h) / total
    mean_p = float(np.sum((rho * dS)[ok]) * h) / total
    quantum = -hbar ** 2 * float(np.sum((m.R * d2R)[ok]) * h) / total
    # (R')^2 stays finite at nodes and walls, so the by-parts form keeps every point
    quantum_parts = hbar ** 2 * float(np.sum(dR ** 2) * h) / total
    return HJDecomposition(drift, quantum, quantum_parts, mean_p,
                           drift + quantum - mean_p ** 2, excluded)


def uncertainty_report(psi: Wavefunction, r_floor: float = DEFAULT_R_FLOOR) -> UncertaintyReport:
    psi = center(psi)
    o = observables(psi)
    alpha, g_min = weyl_minimize(psi)
    hj = hj_decomposition(decompose(psi, r_floor), psi.mass)
    return UncertaintyReport(
        dx2=o.var_x, dp2_spectral=o.var_p, dp2_hj=hj.dp2_hj,
        hj_drift_term=hj.hj_drift_term, hj_quantum_term=hj.hj_quantum_term,
        product=math.sqrt(o.var_x * o.var_p), g_min_alpha=alpha, g_min=g_min,
        excluded_measure=hj.excluded_measure, hbar=psi.hbar)


# -- width sweep --------------------------------------------------------------

@dataclass(frozen=True)
class DeltaLimitRow:
    sigma: float
    dx2: float
    dp2: float
    hj_quantum_term: float
    product: float


def delta_limit_grid(widths, points_per_sigma: int = 8, box_factor: float = 20.0) -> Grid:
    """Periodic grid that holds the widest packet and resolves the narrowest."""
    box = box_factor * max(widths)
    n = 8
    while box / n > min(widths) / points_per_sigma:
        n *= 2
    return make_grid(1, n, box, "periodic", spectral=True)


def delta_limit_study(widths, grid: Grid | None = None, hbar: float = 1.0,
                      mass: float = 1.0) -> list[DeltaLimitRow]:
    """Shrink a real Gaussian toward a point and watch the curvature term blow up."""
    widths = [float(s) for s in widths]
    grid = delta_limit_grid(widths) if grid is None else grid
    rows = []
    for sigma in widths:
        if sigma < 4.0 * grid.spacing:
            raise ResolutionError(f"width {sigma} is below 4 grid spacings ({4 * grid.spacing})")
        psi = states.gaussian(grid, sigma, hbar=hbar, mass=mass)
        o = observables(psi)
        hj = hj_decomposition(decompose(psi), mass)
        rows.append(DeltaLimitRow(sigma, o.var_x, o.var_p, hj.hj_quantum_term,
                                  math.sqrt(o.var_x * o.var_p)))
    return rows


def scaling_exponent(rows: list[DeltaLimitRow]) -> float:
    """Log-log slope of the curvature term against width."""
    s = np.log([r.sigma for r in rows])
    q = np.log([r.hj_quantum_term for r in rows])
    return float(np.polyfit(s, q, 1)[0])


# -- state suite --------------------------------------------------------------

def uncertainty_suite(hbar: float = 1.0, mass: float = 1.0) -> dict[str, Wavefunction]:
    """Normalizable test states spanning the equality case and well above it."""
    g = make_grid(1, 1024, 40.0, "periodic", spectral=True)
    box = make_grid(1, 1024, 1.0, "dirichlet")
    suite = {
        "gaussian_narrow": states.gaussian(g, 0.5, hbar=hbar, mass=mass),
        "gaussian_unit": states.gaussian(g, 1.0, hbar=hbar, mass=mass),
        "gaussian_wide": states.gaussian(g, 2.0, hbar=hbar, mass=mass),
        "gaussian_moving": states.gaussian(g, 1.0, x0=1.5, p0=2.0, hbar=hbar, mass=mass),
        "gaussian_spread": states.spread_gaussian(g, 1.0, 1.5, hbar=hbar, mass=mass),
        "gaussian_chirped": states.gaussian(g, 1.0, focus_time=2.0, hbar=hbar, mass=mass),
        "box_ground": states.box_ground_state(box, hbar=hbar, mass=mass),
        "hermite_1": states.harmonic_eigenstate(g, 1, 1.0, hbar=hbar, mass=mass),
        "hermite_2": states.harmonic_eigenstate(g, 2, 1.0, hbar=hbar, mass=mass),
        "hermite_3": states.harmonic_eigenstate(g, 3, 1.0, hbar=hbar, mass=mass),
    }
    cat = suite["gaussian_unit"].values + states.gaussian(g, 1.0, x0=4.0, hbar=hbar, mass=mass).values
    suite["cat_pair"] = Wavefunction(g, cat, hbar=hbar, mass=mass).normalize()
    return suite
