"""Execute a validated scenario and write its result files."""
from __future__ import annotations

import csv
import json
import math
import platform
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import states
from .born import (MAX_ENUMERATION_N, TwoStateWeights, branch_distribution, enumerate_branches,
                   moments_by_generating_function, simulate_branching)
from .grid import Grid, Wavefunction, make_grid, observables
from .hj_classical import J_FLOOR, trace_scaled
from .madelung import continuity_residual, decompose, exchange_defect
from .scenario import Scenario, ScenarioError
from .tdse import Potential, PotentialKind, PropagatorConfig, Scheme, Stepper, energy, n_steps_for, stencil_energy
from .trajectories import TrajectoryEnsemble, advect, ks_distance, sample_initial
from .uncertainty import delta_limit_study, scaling_exponent, uncertainty_report, uncertainty_suite

UNCERTAINTY_COLUMNS = ("dx2", "dp2_spectral", "dp2_hj", "hj_drift_term", "hj_quantum_term",
                       "product", "g_min_alpha", "g_min")


def fmt(value) -> str:
    """CSV cell: floats at 17 significant digits, booleans as 0/1, None as empty."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# -- building physics objects ---------------------------------------------------

@dataclass
class Setup:
    grid: Grid
    psi0: Wavefunction
    potential: Potential
    config: PropagatorConfig
    n_steps: int


def _fail(field: str, msg: str):
    raise ScenarioError(f"{field}: {msg}")


def build_potential(sc: Scenario, grid: Grid) -> Potential:
    spec = sc.physics.potential
    mass = sc.physics.mass
    kind = PotentialKind(spec.kind)
    if kind is PotentialKind.CUSTOM:
        if spec.table is None:
            _fail("physics.potential.table", "required for a custom potential")
        table = np.asarray(spec.table, dtype=float)
        if table.shape != grid.shape:
            _fail("physics.potential.table", f"shape {table.shape} does not match grid {grid.shape}")
        pot = Potential.custom(table)
    else:
        if spec.table is not None:
            _fail("physics.potential.table", f"only allowed for custom potentials, not {spec.kind}")
        try:
            pot = Potential(kind, omega=spec.omega, depth=spec.depth, softening=spec.softening,
                            height=spec.height, width=spec.width, strength=spec.strength,
                            switch_off_time=spec.switch_off_time)
        except ValueError as exc:
            _fail("physics.potential", str(exc))
    if spec.interaction != 0.0:
        if grid.dimension != 2:
            _fail("physics.potential.interaction", "pair interaction needs grid.dimension 2")
        if pot.time_dependent:
            _fail("physics.potential.interaction", "not combinable with a time-dependent potential")
        x1, x2 = grid.mesh()
        pair = spec.interaction / np.sqrt((x1 - x2) ** 2 + spec.interaction_softening ** 2)
        pot = Potential.custom(pot.values(grid, mass) + pair)
    return pot


def build_initial(sc: Scenario, grid: Grid) -> Wavefunction:
    ini = sc.initial
    hbar, mass = sc.physics.hbar, sc.physics.mass
    if ini.kind == "gaussian":
        return states.gaussian(grid, ini.sigma0, ini.x0, ini.p0, hbar, mass, ini.focus_time)
    if ini.kind == "plane_wave":
        if ini.mode is not None:
            p0 = states.commensurate_momentum(grid, ini.mode, hbar)
        else:
            k = ini.p0 * grid.box_length / (2.0 * math.pi * hbar)
            if abs(k - round(k)) > 1e-9 * max(1.0, abs(k)):
                _fail("initial.p0", "plane-wave momentum must be a multiple of 2*pi*hbar/box_length")
            p0 = ini.p0
        return states.plane_wave(grid, p0, hbar, mass)
    if ini.kind == "harmonic_eigenstate":
        return states.harmonic_eigenstate(grid, ini.n, ini.omega, hbar, mass)
    if ini.kind == "box_ground":
        return states.box_ground_state(grid, hbar, mass)
    # two_particle: Hermite orbitals, the second one kicked by p0
    if len(ini.orbitals) != 2:
        _fail("initial.orbitals", "expected two orbital indices")
    x = grid.x
    phi_a = states.harmonic_eigenstate(grid, ini.orbitals[0], ini.omega, hbar, mass, x=x)
    phi_b = states.harmonic_eigenstate(grid, ini.orbitals[1], ini.omega, hbar, mass, x=x)
    phi_b = phi_b * np.exp(1j * ini.p0 * x / hbar)
    return states.two_particle(grid, phi_a.astype(complex), phi_b, ini.symmetry, hbar, mass)


def build(sc: Scenario) -> Setup | None:
    """Grid, initial state, potential and stepping plan; ``None`` for wave-free scenarios."""
    if sc.initial is None:
        return None
    g = sc.grid
    spectral = sc.run.scheme == "split_step_spectral"
    try:
        grid = make_grid(g.dimension, g.points, g.box_length, g.boundary, spectral=spectral)
    except ValueError as exc:
        _fail("grid", str(exc))
    try:
        n_steps = n_steps_for(sc.run.t_final, sc.run.dt)
    except ValueError as exc:
        _fail("run.t_final", str(exc))
    cfg = PropagatorConfig(Scheme(sc.run.scheme), sc.run.dt, sc.run.steps_per_output)
    potential = build_potential(sc, grid)
    try:
        psi0 = build_initial(sc, grid)
    except ScenarioError:
        raise
    except ValueError as exc:
        _fail("initial", str(exc))
    return Setup(grid, psi0, potential, cfg, n_steps)


# -- running ----------------------------------------------------------------------

def versions() -> dict:
    import pydantic
    import scipy
    import yaml

    from . import __version__
    return {"hjverse": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "pydantic": pydantic.VERSION, "pyyaml": yaml.__version__,
            "python": platform.python_version()}


class Run:
    """One scenario execution; fills ``files`` and ``summary`` as it goes."""

    def __init__(self, sc: Scenario, out_dir: Path):
        self.sc = sc
        self.out = Path(out_dir)
        self.files: list[str] = []
        self.summary: dict = {}

    def _csv(self, name, header, rows):
        write_csv(self.out / name, header, rows)
        self.files.append(name)

    def _json(self, name, obj):
        write_json(self.out / name, obj)
        self.files.append(name)

    def execute(self, setup: Setup | None) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        a = self.sc.analyses
        if setup is not None:
            self._wave(setup)
        if a.uncertainty is not None and a.uncertainty.suite:
            self._uncertainty_suite()
        if a.delta_limit is not None:
            self._delta_limit()
        if a.born is not None:
            self._born()

    # wave-based analyses ---------------------------------------------------

    def _energy(self, psi, setup):
        if setup.config.scheme is Scheme.CRANK_NICOLSON:
            return stencil_energy(psi, setup.potential)
        return energy(psi, setup.potential)

    def _wave(self, setup: Setup) -> None:
        sc, a = self.sc, self.sc.analyses
        one_d = setup.grid.dimension == 1
        r_floor = a.madelung.r_floor if a.madelung else None
        want_history = a.trajectories is not None
        stepper = Stepper(setup.grid, setup.potential, setup.config, sc.physics.hbar, sc.physics.mass)
        every, n, dt = setup.config.steps_per_output, setup.n_steps, setup.config.dt
        t0 = setup.psi0.time

        outputs: list[Wavefunction] = []
        output_steps: list[int] = []
        emitted: set[int] = set()
        residuals: dict[int, float] = {}
        history = []
        prev_m = None
        psi = setup.psi0
        for k in range(n + 1):
            if k:
                psi = stepper(psi)
                psi = psi.with_values(psi.values, time=t0 + k * dt)
            m = decompose(psi, r_floor) if (r_floor is not None and one_d) else None
            if want_history:
                history.append(m)
            if m is not None and prev_m is not None:
                res = continuity_residual(prev_m, m, dt=dt).l2
                if k - 1 in emitted:
                    residuals[k - 1] = res
                if k == n:
                    residuals[k] = res
            if k % every == 0 or k == n:
                outputs.append(psi)
                output_steps.append(k)
                emitted.add(k)
            prev_m = m

        if not one_d:
            self._timeseries_2d(setup, outputs)
            return
        ensemble = None
        if a.trajectories is not None:
            ensemble = self._trajectories(history, setup)
        rows, header = [], ["time", "norm_sq", "mean_x", "mean_p", "var_x", "var_p", "width", "energy"]
        if r_floor is not None:
            header.append("continuity_l2")
        if a.uncertainty is not None:
            header += list(UNCERTAINTY_COLUMNS)
        if ensemble is not None:
            header += ["ks_distance", "order_preserved"]
            order = ensemble.order_preserved()
        for i, (k, state) in enumerate(zip(output_steps, outputs)):
            o = observables(state)
            row = [state.time, o.norm_sq, o.mean_x, o.mean_p, o.var_x, o.var_p,
                   math.sqrt(o.var_x), self._energy(state, setup)]
            if r_floor is not None:
                row.append(residuals.get(k))
            if a.uncertainty is not None:
                rep = uncertainty_report(state, r_floor if r_floor is not None else 1e-6)
                row += [getattr(rep, c) for c in UNCERTAINTY_COLUMNS]
            if ensemble is not None:
                row += [ks_distance(ensemble.paths[i], history[k]), bool(order[i])]
            rows.append(row)
        self._csv("timeseries.csv", header, rows)
        last = dict(zip(header, rows[-1]))
        self.summary.update({"final_time": last["time"], "final_width": last["width"],
                             "norm_drift": max(abs(r[1] - 1.0) for r in rows)})
        energies = [r[7] for r in rows]
        self.summary["energy_drift"] = max(abs(e - energies[0]) for e in energies)
        if r_floor is not None:
            res = [v for v in residuals.values() if v is not None]
            self.summary["continuity_l2_max"] = max(res) if res else None
        if a.classical_rays is not None:
            self._rays(decompose(setup.psi0, r_floor), setup)

    def _timeseries_2d(self, setup, outputs):
        header = ["time", "norm_sq", "energy"]
        want_x = self.sc.analyses.exchange is not None
        if want_x:
            header += ["sym_defect", "antisym_defect"]
        rows = []
        for state in outputs:
            row = [state.time, state.norm_sq, self._energy(state, setup)]
            if want_x:
                row += list(exchange_defect(state))
            rows.append(row)
        self._csv("timeseries.csv", header, rows)
        self.summary["final_time"] = rows[-1][0]
        if want_x:
            col = 4 if self.sc.initial.symmetry == "antisymmetric" else 3
            self.summary["max_exchange_defect"] = max(r[col] for r in rows)

    def _trajectories(self, history, setup) -> TrajectoryEnsemble:
        spec = self.sc.analyses.trajectories
        x0 = sample_initial(history[0], spec.count, spec.sampling, self.sc.seed)
        start = TrajectoryEnsemble.from_positions(x0, history[0].time, spec.sampling, self.sc.seed)
        ens = advect(start, history, dt=setup.config.dt, record_every=setup.config.steps_per_output)
        rows = [(t, j, x) for t, path in zip(ens.times, ens.paths) for j, x in enumerate(path)]
        self._csv("trajectories.csv", ["time", "universe", "x"], rows)
        self.summary["flagged_fraction"] = ens.flagged_fraction
        self.summary["final_ks_distance"] = ks_distance(ens.positions, history[-1])
        return ens

    def _rays(self, initial, setup) -> None:
        spec = self.sc.analyses.classical_rays
        t_final = self.sc.run.t_final if spec.t_final is None else spec.t_final
        reports, rows = [], []
        for lam in spec.lambdas:
            bundles, rep = trace_scaled(initial, setup.potential, dt=setup.config.dt, t_final=t_final,
                                        n_rays=spec.n_rays, lam=lam, launch=spec.launch,
                                        steps_per_output=setup.config.steps_per_output)
            for b in bundles:
                rows += [(lam, b.time, i, x, p) for i, (x, p) in enumerate(zip(b.positions, b.momenta))]
            entry = rep.as_dict()
            entry["lambda"] = lam
            entry["min_jacobian"] = float(min(b.jacobian.min() for b in bundles))
            entry["order_preserved"] = bool(all(np.all(np.diff(b.positions) > 0) for b in bundles))
            reports.append(entry)
        self._csv("rays.csv", ["lambda", "time", "ray", "x", "p"], rows)
        self._json("caustic.json", {"j_floor": J_FLOOR, "n_rays": spec.n_rays, "t_final": t_final,
                                    "launch": spec.launch, "reports": reports})
        self.summary["caustic_formed"] = {fmt(r["lambda"]): r["formed"] for r in reports}

    # wave-free analyses ------------------------------------------------------

    def _uncertainty_suite(self) -> None:
        hbar, mass = self.sc.physics.hbar, self.sc.physics.mass
        rows = []
        for name, psi in uncertainty_suite(hbar, mass).items():
            rep = uncertainty_report(psi)
            rows.append([name] + [getattr(rep, c) for c in UNCERTAINTY_COLUMNS]
                        + [rep.excluded_measure, rep.bound_ratio])
        self._csv("uncertainty.csv", ["state", *UNCERTAINTY_COLUMNS, "excluded_measure", "bound_ratio"], rows)
        self.summary["min_bound_ratio"] = min(r[-1] for r in rows)

    def _delta_limit(self) -> None:
        spec = self.sc.analyses.delta_limit
        rows = delta_limit_study(spec.widths, hbar=self.sc.physics.hbar, mass=self.sc.physics.mass)
        self._csv("delta_limit.csv", ["sigma", "dx2", "dp2", "hj_quantum_term", "product"],
                  [(r.sigma, r.dx2, r.dp2, r.hj_quantum_term, r.product) for r in rows])
        self.summary["scaling_exponent"] = scaling_exponent(rows)

    def _born(self) -> None:
        spec = self.sc.analyses.born
        w = TwoStateWeights(spec.p)
        hist_rows, summary_rows = [], []
        for N in spec.N:
            dist = branch_distribution(w, N)
            sim = simulate_branching(w, N, spec.n_universes, self.sc.seed)
            for r in range(N + 1):
                hist_rows.append((N, r, r / N, dist.probs[r], sim.histogram[r],
                                  sim.histogram[r] / spec.n_universes))
            f = sim.frequencies
            pq = w.p * w.q
            enum_gap = None
            if N <= MAX_ENUMERATION_N:
                enum_gap = float(np.max(np.abs(enumerate_branches(w, N) - dist.probs)))
            summary_rows.append((
                N, w.p, dist.mean_f, dist.var_f, float(moments_by_generating_function(w, N, 2)),
                float(f.mean()), float(f.var()) * N / pq if pq > 0 else None,
                math.sqrt(pq / (N * spec.n_universes)), sim.ks_distance, enum_gap))
        self._csv("born.csv", ["N", "r", "f", "probability", "count", "frequency"], hist_rows)
        self._csv("born_summary.csv",
                  ["N", "p", "mean_f", "var_f", "var_f_generating", "sim_mean_f", "sim_var_ratio",
                   "clt_sigma", "ks_distance", "enumeration_max_diff"], summary_rows)
        self.summary["born_var_ratio"] = {str(r[0]): r[6] for r in summary_rows}

    def finish(self, origin: str, overrides) -> None:
        manifest = {"scenario": self.sc.model_dump(mode="json", by_alias=True),
                    "source": origin, "overrides": list(overrides or ()),
                    "seed": self.sc.seed, "versions": versions(),
                    "files": sorted(self.files + ["summary.json"])}
        write_json(self.out / "summary.json", _plain(self.summary))
        write_json(self.out / "manifest.json", manifest)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def run_scenario(sc: Scenario, out_dir, origin: str = "", overrides=()) -> Run:
    """Build, execute and write every requested output for ``sc``."""
    setup = build(sc)
    run = Run(sc, Path(out_dir))
    run.execute(setup)
    run.finish(origin, overrides)
    return run
