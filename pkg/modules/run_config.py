"""
Structured run configuration.

Every field defaults from config.py. A JSON file and dotted
`section.key=value` overrides are deep-merged on top, then the tree is
rebuilt section by section so unknown keys and wrong types fail before
any computation starts.
"""
import inspect
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Union, get_args, get_origin, get_type_hints

import config
from modules.errors import ConfigurationError
from modules.grid_signal import SIGNAL_KINDS, Grid1D, SampledSignal, SignalSpec
from modules.wavefront import SectorGrid
from modules.weyl import SymbolSpec

HAMILTONIANS = ("free_particle", "harmonic_oscillator", "perturbed_oscillator")
METHODS = ("closed_form", "metaplectic", "split_step", "dyson")
SYMBOLS = ("rough_potential", "smooth_potential", "gaussian_bump", "constant")
# params belong to the kind or symbol chosen next to them
SELECTORS = {"window": "kind", "signal": "kind", "certify": "symbol"}


@dataclass(frozen=True)
class GridConfig:
    count: int = config.grid_count
    length: float = config.grid_length

    def build(self) -> Grid1D:
        return Grid1D(self.length, self.count)


@dataclass(frozen=True)
class WindowConfig:
    kind: str = config.window_kind
    params: dict = field(default_factory=lambda: dict(config.window_params))

    def spec(self) -> SignalSpec:
        return SignalSpec(self.kind, self.params)

    def build(self, grid: Grid1D) -> SampledSignal:
        return self.spec().sample(grid)


@dataclass(frozen=True)
class SignalConfig(WindowConfig):
    kind: str = config.signal_kind
    params: dict = field(default_factory=lambda: dict(config.signal_params))


@dataclass(frozen=True)
class LatticeConfig:
    radius: float = config.lattice_radius
    step: float = config.lattice_step


@dataclass(frozen=True)
class FrameConfig:
    count: int = config.frame_count
    length: float = config.frame_length
    alpha: float = config.frame_alpha
    beta: float = config.frame_beta


@dataclass(frozen=True)
class SectorConfig:
    count: int = config.sector_count
    inner_radius: float = config.sector_inner_radius
    outer_radius: Optional[float] = config.sector_outer_radius
    shells: int = config.sector_shells
    fit_shells: int = config.sector_fit_shells

    def build(self) -> SectorGrid:
        return SectorGrid(self.count, self.inner_radius, self.outer_radius, self.shells, self.fit_shells)


@dataclass(frozen=True)
class WavefrontConfig:
    """p = None selects the global wave front set."""
    p: Optional[float] = 2.0
    r: float = 1.0


@dataclass(frozen=True)
class PropagatorConfig:
    hamiltonian: str = "free_particle"
    method: str = "closed_form"
    t: float = 0.5
    steps: int = config.split_steps
    order: int = config.dyson_order
    mu: float = config.example2_mu
    scale: float = config.example2_scale


@dataclass(frozen=True)
class Example1Config:
    t: float = config.example1_t
    gabor_matrix: bool = True


@dataclass(frozen=True)
class Example2Config:
    mu: float = config.example2_mu
    t: float = config.example2_t
    r: float = config.example2_r
    scale: float = config.example2_scale
    norm_r: tuple = tuple(config.example2_norm_r)
    norm_p: tuple = tuple(config.example2_norm_p)
    gap_r: Optional[float] = None


@dataclass(frozen=True)
class CertifyConfig:
    symbol: str = "rough_potential"
    params: dict = field(default_factory=lambda: {"mu": config.example2_mu})
    s: float = config.example2_mu + 1
    tau: float = 0.5


@dataclass(frozen=True)
class OutputConfig:
    directory: str = config.output_directory
    experiment: Optional[str] = config.experiment_name
    seed: int = config.seed


@dataclass(frozen=True)
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    window: WindowConfig = field(default_factory=WindowConfig)
    signal: SignalConfig = field(default_factory=SignalConfig)
    lattice: LatticeConfig = field(default_factory=LatticeConfig)
    frame: FrameConfig = field(default_factory=FrameConfig)
    sectors: SectorConfig = field(default_factory=SectorConfig)
    wavefront: WavefrontConfig = field(default_factory=WavefrontConfig)
    propagator: PropagatorConfig = field(default_factory=PropagatorConfig)
    example1: Example1Config = field(default_factory=Example1Config)
    example2: Example2Config = field(default_factory=Example2Config)
    certify: CertifyConfig = field(default_factory=CertifyConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def __post_init__(self):
        self.validate()

    def validate(self):
        """Module preconditions that can be checked without computing anything."""
        self.grid.build()
        self.sectors.build()
        for section in (self.window, self.signal):
            if section.kind not in SIGNAL_KINDS:
                raise ConfigurationError(f"unknown signal kind '{section.kind}', expected one of {SIGNAL_KINDS}")
        if self.propagator.hamiltonian not in HAMILTONIANS:
            raise ConfigurationError(f"unknown hamiltonian '{self.propagator.hamiltonian}', expected one of {HAMILTONIANS}")
        if self.propagator.method not in METHODS:
            raise ConfigurationError(f"unknown method '{self.propagator.method}', expected one of {METHODS}")
        if self.propagator.steps < 1 or self.propagator.order < 0:
            raise ConfigurationError("propagator needs steps >= 1 and order >= 0")
        if self.certify.symbol not in SYMBOLS:
            raise ConfigurationError(f"unknown symbol '{self.certify.symbol}', expected one of {SYMBOLS}")
        try:
            inspect.signature(getattr(SymbolSpec, self.certify.symbol)).bind(**self.certify.params)
        except TypeError as error:
            raise ConfigurationError(f"symbol '{self.certify.symbol}' does not take params {self.certify.params}: {error}") from error
        if self.certify.tau not in (0.5, 1.0):
            raise ConfigurationError(f"quantization tau must be 0.5 or 1, got {self.certify.tau}")
        if self.wavefront.p is not None and self.wavefront.p < 1:
            raise ConfigurationError(f"wave front p must be >= 1, got {self.wavefront.p}")
        if self.wavefront.r <= 0:
            raise ConfigurationError(f"wave front r must be > 0, got {self.wavefront.r}")
        if self.lattice.radius <= 0 or self.lattice.step <= 0:
            raise ConfigurationError("lattice radius and step must be positive")
        if not (self.frame.alpha > 0 and self.frame.beta > 0):
            raise ConfigurationError("frame steps must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> "RunConfig":
        return _build(cls, values, "")

    @classmethod
    def load(cls, path: Union[str, Path, None] = None, overrides: list = ()) -> "RunConfig":
        """Defaults, then the JSON file at `path`, then `section.key=value` overrides."""
        values = asdict(cls())
        if path is not None:
            try:
                loaded = json.loads(Path(path).read_text())
            except (OSError, json.JSONDecodeError) as error:
                raise ConfigurationError(f"cannot read config {path}: {error}") from error
            if not isinstance(loaded, dict):
                raise ConfigurationError(f"config {path} must hold a JSON object")
            values = merge_layer(values, loaded)
        layer = {}
        for override in overrides:
            layer = deep_merge(layer, parse_override(override))
        values = merge_layer(values, layer)
        run_config = cls.from_dict(values)
        logging.debug(f"run config: {run_config.to_dict()}")
        return run_config


def deep_merge(base: dict, update: dict) -> dict:
    """Recursive merge; `params` dicts are replaced whole, never merged."""
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict) and key != "params":
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def merge_layer(values: dict, layer: dict) -> dict:
    """
    Merge one config layer. A layer that switches a section to another kind
    or symbol without giving params starts that section from empty params.
    """
    for section, selector in SELECTORS.items():
        chosen = layer.get(section)
        if not isinstance(chosen, dict) or selector not in chosen or "params" in chosen:
            continue
        if chosen[selector] != values.get(section, {}).get(selector):
            layer = deep_merge(layer, {section: {"params": {}}})
    return deep_merge(values, layer)


def parse_override(text: str) -> dict:
    """'grid.count=256' -> {'grid': {'count': 256}}; values are JSON, falling back to strings."""
    path, separator, raw = text.partition("=")
    if not separator or not path.strip():
        raise ConfigurationError(f"override '{text}' is not of the form section.key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    for key in reversed(path.strip().split(".")):
        value = {key: value}
    return value


def _build(cls, values, path: str):
    if not isinstance(values, dict):
        raise ConfigurationError(f"section '{path or 'root'}' must be an object, got {values!r}")
    hints = get_type_hints(cls)
    names = {item.name for item in fields(cls)}
    unknown = set(values) - names
    if unknown:
        raise ConfigurationError(f"unknown config keys {sorted(unknown)} in '{path or 'root'}'")
    arguments = {}
    for name, value in values.items():
        key = f"{path}.{name}" if path else name
        hint = hints[name]
        if isinstance(hint, type) and hasattr(hint, "__dataclass_fields__"):
            arguments[name] = _build(hint, value, key)
        else:
            arguments[name] = _coerce(value, hint, key)
    return cls(**arguments)


def _coerce(value, hint, key: str):
    if get_origin(hint) is Union:
        options = [option for option in get_args(hint) if option is not type(None)]
        if value is None:
            return None
        hint = options[0]
    if hint is float:
        if isinstance(value, str) and value.lower() in ("inf", "infinity", "-inf", "-infinity"):
            return float(value)
        if isinstance(value, (int, float)) and not isinstance(value, bool) and not math.isnan(value):
            return float(value)
    elif hint is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif hint is bool or hint is str or hint is dict:
        if isinstance(value, hint):
            return value
    elif hint is tuple:
        if isinstance(value, (list, tuple)):
            return tuple(_coerce(item, float, key) for item in value)
    raise ConfigurationError(f"config key '{key}' expects {getattr(hint, '__name__', hint)}, got {value!r}")
