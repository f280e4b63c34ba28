"""Scenario files: strict YAML schema, overrides, bundled scenarios."""
from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from pydantic import (BaseModel, ConfigDict, Field, NonNegativeFloat, PositiveFloat,
                      PositiveInt, ValidationError, field_validator, model_validator)


class ScenarioError(ValueError):
    """Config could not be parsed or validated; message names the offending field."""


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class PotentialSpec(Strict):
    kind: Literal["free", "harmonic", "soft_coulomb", "barrier", "focusing_lens", "custom"] = "free"
    omega: float = 0.0
    depth: float = 0.0
    softening: PositiveFloat = 1.0
    height: float = 0.0
    width: NonNegativeFloat = 0.0
    strength: float = 0.0
    switch_off_time: NonNegativeFloat = 0.0
    table: Optional[list] = None
    interaction: float = Field(0.0, description="soft pair repulsion strength on 2D grids")
    interaction_softening: PositiveFloat = 0.5


class PhysicsSpec(Strict):
    hbar: PositiveFloat = 1.0
    mass: PositiveFloat = 1.0
    potential: PotentialSpec = PotentialSpec()


class GridSpec(Strict):
    dimension: Literal[1, 2] = 1
    points: int = Field(ge=8)
    box_length: PositiveFloat
    boundary: Literal["periodic", "dirichlet"] = "periodic"


class InitialSpec(Strict):
    kind: Literal["gaussian", "plane_wave", "harmonic_eigenstate", "box_ground", "two_particle"]
    sigma0: PositiveFloat = 1.0
    x0: float = 0.0
    p0: float = 0.0
    focus_time: Optional[PositiveFloat] = None
    mode: Optional[int] = None
    n: int = Field(0, ge=0)
    omega: PositiveFloat = 1.0
    symmetry: Literal["product", "symmetric", "antisymmetric"] = "symmetric"
    orbitals: list[int] = [0, 1]


class RunSpec(Strict):
    scheme: Literal["split_step_spectral", "crank_nicolson"] = "split_step_spectral"
    dt: PositiveFloat
    t_final: NonNegativeFloat
    steps_per_output: PositiveInt = 1


class MadelungAnalysis(Strict):
    r_floor: float = Field(1e-6, gt=0.0, le=1e-3)


class TrajectoryAnalysis(Strict):
    count: PositiveInt = 1000
    sampling: Literal["quantile_of_R_squared", "uniform"] = "quantile_of_R_squared"


class RaysAnalysis(Strict):
    n_rays: int = Field(64, ge=16)
    lambdas: list[float] = Field([0.0, 1.0], alias="lambda")
    launch: Literal["quantile", "uniform"] = "quantile"
    t_final: Optional[NonNegativeFloat] = None

    @field_validator("lambdas", mode="before")
    @classmethod
    def _listify(cls, v):
        return v if isinstance(v, list) else [v]

    @field_validator("lambdas")
    @classmethod
    def _unit_interval(cls, v):
        for lam in v:
            if not 0.0 <= lam <= 1.0:
                raise ValueError(f"lambda {lam} outside [0, 1]")
        return v


class UncertaintyAnalysis(Strict):
    suite: bool = False


class BornAnalysis(Strict):
    p: float = Field(ge=0.0, le=1.0)
    N: list[PositiveInt] = [10, 100, 1000]
    n_universes: int = Field(100_000, ge=1000)

    @field_validator("N", mode="before")
    @classmethod
    def _listify(cls, v):
        return v if isinstance(v, list) else [v]


class DeltaLimitAnalysis(Strict):
    widths: list[PositiveFloat] = Field(min_length=2)


class ExchangeAnalysis(Strict):
    pass


class Analyses(Strict):
    madelung: Optional[MadelungAnalysis] = None
    trajectories: Optional[TrajectoryAnalysis] = None
    classical_rays: Optional[RaysAnalysis] = None
    uncertainty: Optional[UncertaintyAnalysis] = None
    born: Optional[BornAnalysis] = None
    delta_limit: Optional[DeltaLimitAnalysis] = None
    exchange: Optional[ExchangeAnalysis] = None


class Scenario(Strict):
    name: str = Field(pattern=r"^[A-Za-z_][A-Za-z0-9_]*$")
    seed: int = 0
    physics: PhysicsSpec = PhysicsSpec()
    grid: Optional[GridSpec] = None
    initial: Optional[InitialSpec] = None
    run: Optional[RunSpec] = None
    analyses: Analyses = Analyses()

    @property
    def has_wave(self) -> bool:
        return self.initial is not None

    @model_validator(mode="after")
    def _consistent(self):
        a = self.analyses
        wave_analyses = [n for n in ("madelung", "trajectories", "classical_rays", "exchange")
                         if getattr(a, n) is not None]
        if a.uncertainty is not None and not a.uncertainty.suite:
            wave_analyses.append("uncertainty")
        parts = (self.grid, self.initial, self.run)
        if any(p is not None for p in parts) and not all(p is not None for p in parts):
            raise ValueError("grid, initial and run must be given together")
        if wave_analyses and self.initial is None:
            raise ValueError(f"analyses {wave_analyses} need grid, initial and run sections")
        if self.initial is None:
            return self
        dim, kind = self.grid.dimension, self.initial.kind
        if kind == "two_particle" and dim != 2:
            raise ValueError("initial.kind two_particle needs grid.dimension 2")
        if kind != "two_particle" and dim != 1:
            raise ValueError(f"initial.kind {kind} needs grid.dimension 1")
        if kind == "box_ground" and self.grid.boundary != "dirichlet":
            raise ValueError("initial.kind box_ground needs grid.boundary dirichlet")
        if self.run.scheme == "split_step_spectral" and self.grid.boundary != "periodic":
            raise ValueError("run.scheme split_step_spectral needs grid.boundary periodic")
        one_d = [n for n in ("madelung", "trajectories", "classical_rays", "uncertainty") if n in wave_analyses]
        if dim == 2 and one_d:
            raise ValueError(f"analyses {one_d} are defined for 1D states only")
        if a.exchange is not None and kind != "two_particle":
            raise ValueError("analyses.exchange needs a two_particle initial state")
        if (a.trajectories or a.classical_rays) and a.madelung is None:
            raise ValueError("trajectories and classical_rays need analyses.madelung")
        return self


# -- loading -----------------------------------------------------------------

def bundled_names() -> list[str]:
    root = resources.files("hjverse") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def bundled_path(name: str):
    return resources.files("hjverse") / "scenarios" / f"{name}.yaml"


def _set_path(tree: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = tree
    for k in keys[:-1]:
        nxt = node.get(k)
        if nxt is None:
            nxt = node[k] = {}
        if not isinstance(nxt, dict):
            raise ScenarioError(f"{dotted}: '{k}' is not a section")
        node = nxt
    node[keys[-1]] = value


def apply_overrides(tree: dict, overrides) -> dict:
    for item in overrides or ():
        if "=" not in item:
            raise ScenarioError(f"override '{item}': expected key=value")
        key, raw = item.split("=", 1)
        _set_path(tree, key.strip(), yaml.safe_load(raw))
    return tree


def read_tree(source: Union[str, Path]) -> tuple[dict, str]:
    """YAML tree from a path or a bundled scenario name; returns (tree, origin)."""
    path = Path(source)
    if path.is_file():
        text, origin = path.read_text(), str(path)
    elif str(source) in bundled_names():
        text, origin = bundled_path(str(source)).read_text(), f"bundled:{source}"
    else:
        raise ScenarioError(f"config '{source}': no such file or bundled scenario")
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"config '{source}': YAML parse error: {str(exc).splitlines()[0]}") from None
    if not isinstance(tree, dict):
        raise ScenarioError(f"config '{source}': top level must be a mapping")
    return tree, origin


def _describe(err: ValidationError) -> str:
    e = err.errors()[0]
    loc = ".".join(str(p) for p in e["loc"]) or "<scenario>"
    msg = e["msg"].replace("\n", " ")
    if e["type"] == "extra_forbidden":
        msg = "unknown key"
    return f"{loc}: {msg}"


def validate_tree(tree: dict) -> Scenario:
    try:
        return Scenario.model_validate(tree)
    except ValidationError as err:
        raise ScenarioError(_describe(err)) from None


def load_scenario(source, overrides=()) -> Scenario:
    tree, _ = read_tree(source)
    return validate_tree(apply_overrides(tree, overrides))
