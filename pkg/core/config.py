"""
Run configuration for semi-Markov dynamics
JSON settings file -> dataclass sections -> domain objects
"""

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from .errors import ConfigError, ValidationError
from .scenarios import HazardModel, SemiMarkovModel, lindblad_generator
from .superop import DensityMatrix, KrausMap, flip_map
from .timegrid import TimeGrid
from .waiting_time import Erlang, WaitingTimeSpec, spec_from_dict

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_FILE = "semimarkov_settings.json"
MODEL_TYPES = ("semi_markov", "hazard_tcl")


@dataclass
class GridSettings:
    """Time grid, in units of 1/rate"""
    t_end: float = 20.0
    n_points: int = 2001


@dataclass
class SolverSettings:
    """Tolerances and truncation"""
    tcl_tolerance: float = 1e-6
    nz_tolerance: float = 1e-5
    n_max: int = 64
    divisibility_stride: int = 20
    determinant_guard: float = 1e-12
    cp_tolerance: float = 1e-8


@dataclass
class MonteCarloSettings:
    """Sampling oracle"""
    trials: int = 100000
    seed: int = 12345
    streams: int = 1


@dataclass
class LoggingSettings:
    level: str = "WARNING"
    log_file: str = "semimarkov.log"


SECTIONS = {
    "grid": GridSettings,
    "solver": SolverSettings,
    "montecarlo": MonteCarloSettings,
    "logging": LoggingSettings,
}


def _complex(value: Any, path: str) -> complex:
    if isinstance(value, bool):
        raise ConfigError(f"expected a number or [re, im], got {value!r}", path)
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, list) and len(value) == 2 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        return complex(value[0], value[1])
    raise ConfigError(f"expected a number or [re, im], got {value!r}", path)


def _matrix(value: Any, dim: int, path: str) -> np.ndarray:
    if not isinstance(value, list) or len(value) != dim:
        raise ConfigError(f"expected {dim} rows", path)
    rows = []
    for i, row in enumerate(value):
        if not isinstance(row, list) or len(row) != dim:
            raise ConfigError(f"expected {dim} entries", f"{path}[{i}]")
        rows.append([_complex(x, f"{path}[{i}][{j}]") for j, x in enumerate(row)])
    return np.array(rows, dtype=complex)


def _matrix_to_json(m: np.ndarray) -> List[List[List[float]]]:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]


def _section(cls, data: Any, path: str):
    if not isinstance(data, dict):
        raise ConfigError("expected an object", path)
    known = {f.name: f for f in fields(cls)}
    values = {}
    for key, raw in data.items():
        if key not in known:
            raise ConfigError(f"unknown setting {key!r}", f"{path}.{key}")
        default = getattr(cls(), key)
        if isinstance(default, bool) or isinstance(raw, bool):
            raise ConfigError(f"unexpected boolean {raw!r}", f"{path}.{key}")
        if isinstance(default, int):
            if not isinstance(raw, int):
                raise ConfigError(f"expected an integer, got {raw!r}", f"{path}.{key}")
        elif isinstance(default, float):
            if not isinstance(raw, (int, float)):
                raise ConfigError(f"expected a number, got {raw!r}", f"{path}.{key}")
            raw = float(raw)
        elif not isinstance(raw, str):
            raise ConfigError(f"expected a string, got {raw!r}", f"{path}.{key}")
        values[key] = raw
    return cls(**values)


@dataclass
class RunConfig:
    """Complete run configuration"""
    hilbert_dim: int = 2
    kraus: List[np.ndarray] = field(default_factory=lambda: list(flip_map().operators))
    waiting_time: WaitingTimeSpec = field(default_factory=lambda: Erlang(2, 1.0))
    model: Dict[str, Any] = field(default_factory=lambda: {"type": "semi_markov"})
    initial_state: Optional[np.ndarray] = None
    grid: GridSettings = None
    solver: SolverSettings = None
    montecarlo: MonteCarloSettings = None
    logging: LoggingSettings = None

    def __post_init__(self):
        if self.grid is None:
            self.grid = GridSettings()
        if self.solver is None:
            self.solver = SolverSettings()
        if self.montecarlo is None:
            self.montecarlo = MonteCarloSettings()
        if self.logging is None:
            self.logging = LoggingSettings()
        if self.initial_state is None:
            plus = np.full(self.hilbert_dim, 1.0 / np.sqrt(self.hilbert_dim))
            self.initial_state = np.outer(plus, plus).astype(complex)

    # domain objects
    def kraus_map(self) -> KrausMap:
        try:
            return KrausMap(tuple(np.asarray(c, dtype=complex) for c in self.kraus))
        except ValidationError as e:
            raise ConfigError(str(e), "kraus") from e

    def time_grid(self) -> TimeGrid:
        try:
            return TimeGrid(self.grid.t_end, self.grid.n_points)
        except ValidationError as e:
            raise ConfigError(str(e), "grid") from e

    def rho0(self) -> DensityMatrix:
        try:
            return DensityMatrix(np.asarray(self.initial_state, dtype=complex))
        except ValidationError as e:
            raise ConfigError(str(e), "initial_state") from e

    @property
    def model_type(self) -> str:
        return self.model.get("type", "semi_markov")

    def lindblad_operators(self) -> List[np.ndarray]:
        return [np.asarray(c, dtype=complex) for c in self.model.get("lindblad", [])]

    def build_model(self):
        """SemiMarkovModel or HazardModel for the configured dynamics"""
        if self.model_type == "hazard_tcl":
            return HazardModel.from_spec(lindblad_generator(self.lindblad_operators()), self.waiting_time)
        return SemiMarkovModel.from_spec(self.kraus_map(), self.waiting_time)

    def to_dict(self) -> Dict[str, Any]:
        model = {"type": self.model_type}
        if self.model_type == "hazard_tcl":
            model["lindblad"] = [_matrix_to_json(c) for c in self.lindblad_operators()]
        data = {
            "hilbert_dim": self.hilbert_dim,
            "kraus": [_matrix_to_json(c) for c in self.kraus],
            "waiting_time": self.waiting_time.to_dict(),
            "model": model,
            "initial_state": _matrix_to_json(self.initial_state),
        }
        for name in SECTIONS:
            data[name] = asdict(getattr(self, name))
        return data


def config_from_dict(data: Any) -> RunConfig:
    """Validate a decoded JSON document

    Raises:
        ConfigError: naming the offending field
    """
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object")
    known = {"hilbert_dim", "kraus", "waiting_time", "model", "initial_state", *SECTIONS}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown setting {key!r}", key)
    dim = data.get("hilbert_dim", 2)
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise ConfigError(f"expected a positive integer, got {dim!r}", "hilbert_dim")
    kwargs: Dict[str, Any] = {"hilbert_dim": dim}
    if "kraus" in data:
        if not isinstance(data["kraus"], list) or not data["kraus"]:
            raise ConfigError("expected a non-empty list of matrices", "kraus")
        kwargs["kraus"] = [_matrix(c, dim, f"kraus[{i}]") for i, c in enumerate(data["kraus"])]
    elif dim != 2:
        raise ConfigError("required when hilbert_dim != 2", "kraus")
    if "waiting_time" in data:
        kwargs["waiting_time"] = spec_from_dict(data["waiting_time"], "waiting_time")
    if "model" in data:
        model = data["model"]
        if not isinstance(model, dict) or model.get("type", "semi_markov") not in MODEL_TYPES:
            raise ConfigError(f"expected {{'type': one of {MODEL_TYPES}}}", "model.type")
        parsed: Dict[str, Any] = {"type": model.get("type", "semi_markov")}
        if parsed["type"] == "hazard_tcl":
            ops = model.get("lindblad")
            if not isinstance(ops, list) or not ops:
                raise ConfigError("expected a non-empty list of jump operators", "model.lindblad")
            parsed["lindblad"] = [_matrix(c, dim, f"model.lindblad[{i}]") for i, c in enumerate(ops)]
        kwargs["model"] = parsed
    if "initial_state" in data:
        kwargs["initial_state"] = _matrix(data["initial_state"], dim, "initial_state")
    for name, cls in SECTIONS.items():
        if name in data:
            kwargs[name] = _section(cls, data[name], name)
    config = RunConfig(**kwargs)
    # surface invariant violations as config errors
    config.kraus_map()
    config.time_grid()
    config.rho0()
    return config


class ConfigManager:
    """Loads and saves a RunConfig as UTF-8 JSON"""

    def __init__(self, config_file: Optional[Union[str, Path]] = None):
        self.config_file = Path(config_file) if config_file else None
        self.config = RunConfig()
        if self.config_file is not None:
            self.load_settings()

    def load_settings(self) -> None:
        """Load settings from the JSON file

        Raises:
            ConfigError: missing file, malformed JSON (line/column) or invalid field
        """
        if self.config_file is None:
            return
        if not self.config_file.exists():
            raise ConfigError(f"config file not found: {self.config_file}")
        try:
            with open(self.config_file, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{self.config_file}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}")
        except (OSError, UnicodeDecodeError) as e:
            raise ConfigError(f"cannot read {self.config_file}: {e}")
        self.config = config_from_dict(data)
        logger.info("Loaded configuration from %s", self.config_file)

    def save_settings(self, path: Optional[Union[str, Path]] = None,
                      config: Optional[RunConfig] = None) -> Path:
        """Save settings (or the given config) to JSON file"""
        target = Path(path) if path else self.config_file or Path(DEFAULT_CONFIG_FILE)
        with open(target, 'w', encoding='utf-8') as f:
            json.dump((config or self.config).to_dict(), f, indent=2)
        logger.info("Saved configuration to %s", target)
        return target


# Global config instance
_config_manager = None


def get_config(config_file: Optional[Union[str, Path]] = None) -> ConfigManager:
    """Get global config manager instance, reloading when the file changes"""
    global _config_manager
    wanted = Path(config_file) if config_file else None
    if _config_manager is None or _config_manager.config_file != wanted:
        _config_manager = ConfigManager(wanted)
    return _config_manager


def reset_config() -> None:
    """Reset config manager (useful for testing)"""
    global _config_manager
    _config_manager = None
