"""TOML run configuration with strict keys and hypothesis checks."""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import tomli

from .sim.params import ModelParams, ParameterError, Viscosity
from .sim.state import InitialData

MODES = ("potential-eval", "potential-verify", "analysis", "simulate")
CHECKS = ("ftest1", "concavity", "laplace", "case2")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimulationSettings:
    grid_size: int = 32
    dt: float = 0.005
    t_end: float = 0.5
    cadence: int = 1
    checkpoint_every: int = 0          # steps between checkpoints; 0 = final only
    quad_polar: int = 12
    quad_azimuthal: int = 24
    energy_tol: float = 1e-4
    entropy_tol: float = 5e-4
    audit_bumps: int = 5
    audit_refinement: bool = True


@dataclass(frozen=True)
class PotentialSettings:
    quad_polar: int = 32
    quad_azimuthal: int = 64
    tol: float = 1e-12
    grid_points: int = 50
    margin: float = 0.02
    verify_samples: int = 200


@dataclass(frozen=True)
class AnalysisSettings:
    checks: tuple = CHECKS
    samples: int = 10_000
    margins: tuple = (0.05, 0.02, 0.01, 0.005)
    gamma: tuple = (0.816496580927726, -0.408248290463863, -0.408248290463863)
    case2_k: tuple = (1, 2)
    case2_alphas: tuple = tuple(float(2**j) for j in range(10))


@dataclass(frozen=True)
class RunConfig:
    mode: str = "simulate"
    seed: int = 0
    singular_flux: bool = False
    out_dir: str = "out"
    model: ModelParams = field(default_factory=ModelParams)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    initial: InitialData = field(default_factory=InitialData)
    potential: PotentialSettings = field(default_factory=PotentialSettings)
    analysis: AnalysisSettings = field(default_factory=AnalysisSettings)


def _coerce(value, default, where):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        return tuple(value)
    return value


def _build(cls, table, where, nested=None):
    """Instantiate dataclass ``cls`` from ``table``; unknown keys are errors."""
    nested = nested or {}
    if not isinstance(table, dict):
        raise ConfigError(f"[{where}] must be a table")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(table) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")
    defaults = cls()
    kwargs = {}
    for key, value in table.items():
        if key in nested:
            kwargs[key] = nested[key](value, f"{where}.{key}")
        else:
            kwargs[key] = _coerce(value, getattr(defaults, key), f"{where}.{key}")
    return kwargs


def _model(table, where):
    kwargs = _build(ModelParams, table, where, {"viscosity": _section(Viscosity)})
    try:
        return ModelParams(**kwargs)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None


def _section(cls):
    def make(table, where):
        try:
            return cls(**_build(cls, table, where))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"[{where}]: {exc}") from None
    return make


def parse_config(text: str) -> RunConfig:
    """Parse and validate a TOML document; unset fields take their defaults."""
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"parse error: {exc}") from None
    nested = {"model": _model, "simulation": _section(SimulationSettings),
              "initial": _section(InitialData), "potential": _section(PotentialSettings),
              "analysis": _section(AnalysisSettings)}
    kwargs = _build(RunConfig, doc, "top level", nested)
    cfg = RunConfig(**kwargs)
    return validate_config(cfg)


def validate_config(cfg: RunConfig) -> RunConfig:
    if cfg.mode not in MODES:
        raise ConfigError(f"mode must be one of {', '.join(MODES)}, got {cfg.mode!r}")
    if cfg.singular_flux and cfg.model.A_minus2 <= 0:
        raise ConfigError("singular_flux = true requires model.A_minus2 > 0")
    if not cfg.singular_flux and cfg.model.A_minus2 > 0:
        raise ConfigError("model.A_minus2 > 0 selects the singular flux law; set singular_flux = true")
    s = cfg.simulation
    if s.grid_size < 4 or s.grid_size % 2:
        raise ConfigError("simulation.grid_size must be even and >= 4")
    if s.dt <= 0 or s.t_end < 0 or s.cadence < 1:
        raise ConfigError("simulation needs dt > 0, t_end >= 0 and cadence >= 1")
    if s.quad_polar < 8 or s.quad_azimuthal < 16:
        raise ConfigError("simulation quadrature orders must be at least (8, 16)")
    pt = cfg.potential
    if pt.quad_polar < 8 or pt.quad_azimuthal < 16:
        raise ConfigError("potential quadrature orders must be at least (8, 16)")
    if not 0 <= pt.margin < 1.0 / 3.0 or pt.grid_points < 2:
        raise ConfigError("potential.margin must lie in [0, 1/3) and grid_points >= 2")
    bad = [c for c in cfg.analysis.checks if c not in CHECKS]
    if bad:
        raise ConfigError(f"unknown analysis check(s): {', '.join(bad)}")
    return cfg


def with_overrides(cfg: RunConfig, *, mode=None, seed=None, out_dir=None,
                   singular_flux=None) -> RunConfig:
    """Apply command-line overrides; --singular-flux switches A_-2 to 1 if unset."""
    changes = {}
    if mode is not None:
        changes["mode"] = mode
    if seed is not None:
        changes["seed"] = seed
    if out_dir is not None:
        changes["out_dir"] = out_dir
    if singular_flux:
        changes["singular_flux"] = True
        if cfg.model.A_minus2 <= 0:
            changes["model"] = replace(cfg.model, A_minus2=1.0)
    return validate_config(replace(cfg, **changes))
