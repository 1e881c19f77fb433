"""Scenario files: JSON in, validated dataclass out."""

import json
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .em import DipoleSpec, LoadConfig
from .errors import ConfigError
from .layout import ula_layout
from .optimize import OptimizationConfig

SCHEMES = ("rca-opt", "fixed", "espar", "fully-active")


@dataclass
class EstimatorSettings:
    sparsity: int = 3
    snapshots: int = None
    n_azimuth: int = 64
    n_elevation: int = 16
    noise_variance: float = 0.0
    holdout: int = 50
    on_grid: bool = True


@dataclass
class GainMapSettings:
    coupler_index: int = 0
    resolution: int = 101


@dataclass
class PlannerSettings:
    speed: float = 0.01


@dataclass
class Scenario:
    """Everything needed to reproduce one experiment.

    Lengths are meters, powers watts. Wavelength-relative defaults are
    filled in on construction, so a saved scenario is fully explicit.
    """

    wavelength: float = 0.04
    M: int = 3
    N: int = 2
    L: int = 13
    rca_spacing: float = None
    region_half_width: float = None
    d_min: float = None
    dipole_length: float = None
    fixed_spacing: float = None
    fully_active_spacing: float = None
    large_scale_gain: float = 1e-5
    noise_power: float = 1e-11
    tx_powers: list = None
    seeds: int = 100
    seed: int = 0
    schemes: list = field(default_factory=lambda: list(SCHEMES))
    sign_convention: int = -1
    coupler_load: list = field(default_factory=lambda: [0.0, 0.0])
    load_bounds: list = field(default_factory=lambda: [-300.0, 300.0])
    optimize_mode: str = "positions"
    optimizer: dict = field(default_factory=dict)
    estimator: dict = field(default_factory=dict)
    gainmap: dict = field(default_factory=dict)
    planner: dict = field(default_factory=dict)

    def __post_init__(self):
        lam = self.wavelength
        _check(isinstance(lam, (int, float)) and lam > 0, "wavelength", "must be positive")
        defaults = {"rca_spacing": 2.0, "region_half_width": 1.0, "d_min": 0.2,
                    "dipole_length": 0.5, "fixed_spacing": 0.4, "fully_active_spacing": 0.5}
        for name, frac in defaults.items():
            if getattr(self, name) is None:
                setattr(self, name, frac * lam)
        if self.tx_powers is None:
            self.tx_powers = np.logspace(-3, 1, 10).tolist()
        self.tx_powers = [float(p) for p in self.tx_powers]
        self.optimizer = _settings(OptimizationConfig, self.optimizer, "optimizer")
        self.estimator = _settings(EstimatorSettings, self.estimator, "estimator")
        self.gainmap = _settings(GainMapSettings, self.gainmap, "gainmap")
        self.planner = _settings(PlannerSettings, self.planner, "planner")
        self.validate()

    def validate(self):
        for name in ("M", "L", "seeds"):
            _check(_is_int(getattr(self, name)) and getattr(self, name) >= 1, name, "must be an integer >= 1")
        _check(_is_int(self.N) and self.N >= 0, "N", "must be an integer >= 0")
        _check(_is_int(self.seed), "seed", "must be an integer")
        for name in ("rca_spacing", "dipole_length", "fixed_spacing", "fully_active_spacing",
                     "noise_power"):
            _check(getattr(self, name) > 0, name, "must be positive")
        for name in ("region_half_width", "d_min", "large_scale_gain"):
            _check(getattr(self, name) >= 0, name, "must be nonnegative")
        _check(self.d_min <= self.fixed_spacing, "d_min", "must not exceed fixed_spacing")
        _check(len(self.tx_powers) >= 1 and min(self.tx_powers) >= 0, "tx_powers",
               "must be a nonempty list of nonnegative powers")
        _check(set(self.schemes) <= set(SCHEMES) and len(self.schemes) > 0, "schemes",
               f"must be a nonempty subset of {list(SCHEMES)}")
        _check(self.sign_convention in (1, -1), "sign_convention", "must be +1 or -1")
        _check(len(self.coupler_load) == 2, "coupler_load", "must be [real, imag]")
        _check(len(self.load_bounds) == 2 and self.load_bounds[0] <= self.load_bounds[1],
               "load_bounds", "must be [x_min, x_max] with x_min <= x_max")
        _check(self.optimize_mode in ("positions", "loads", "joint"), "optimize_mode",
               "must be positions, loads or joint")
        est = self.estimator
        _check(est["sparsity"] >= 0, "estimator.sparsity", "must be nonnegative")
        _check(est["snapshots"] is None or est["snapshots"] >= 2 * est["sparsity"],
               "estimator.snapshots", "must be at least twice the sparsity")
        _check(self.gainmap["resolution"] >= 2, "gainmap.resolution", "must be >= 2")
        _check(0 <= self.gainmap["coupler_index"] < max(self.M * self.N, 1),
               "gainmap.coupler_index", "out of range")
        _check(self.planner["speed"] > 0, "planner.speed", "must be positive")
        try:
            self.optimizer_config()
            self.layout()
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"invalid scenario: {exc}") from exc

    # -- derived objects ---------------------------------------------------
    def spec(self):
        return DipoleSpec(self.wavelength, self.dipole_length)

    def layout(self):
        """Fixed-coupler reference layout."""
        return ula_layout(self.M, self.N, self.wavelength, self.rca_spacing,
                          self.region_half_width, self.d_min, self.fixed_spacing)

    def loads(self):
        c = complex(*self.coupler_load)
        return LoadConfig(np.full(self.M * self.N, c), self.sign_convention)

    def optimizer_config(self, seed=None):
        opts = {k: v for k, v in self.optimizer.items() if v is not None}
        if seed is not None:
            opts["seed"] = int(seed)
        try:
            return OptimizationConfig(**opts)
        except ConfigError as exc:
            raise ConfigError(f"optimizer: {exc}") from exc

    def middle_power_index(self):
        return len(self.tx_powers) // 2

    def to_dict(self):
        return asdict(self)


def _is_int(v):
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def _check(ok, name, message):
    if not ok:
        raise ConfigError(f"{name}: {message}")


def _settings(cls, given, section):
    if not isinstance(given, dict):
        raise ConfigError(f"{section}: must be an object")
    names = {f.name for f in fields(cls)}
    unknown = set(given) - names
    if unknown:
        raise ConfigError(f"{section}: unknown keys {sorted(unknown)}")
    base = {f.name: getattr(cls, f.name, None) for f in fields(cls)}
    if cls is OptimizationConfig:
        base = asdict(OptimizationConfig())
    base.update(given)
    return base


def scenario_from_dict(data):
    if not isinstance(data, dict):
        raise ConfigError("scenario must be a JSON object")
    names = {f.name for f in fields(Scenario)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown scenario keys {sorted(unknown)}")
    try:
        return Scenario(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_scenario(path):
    """Parse and validate a JSON scenario file."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return scenario_from_dict(data)


def save_scenario(scenario, path):
    with open(path, "w") as fh:
        json.dump(scenario.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
