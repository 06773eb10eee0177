"""Scenario configuration with embedded defaults."""

import math
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any

from .validation import ConfigError

ENV_PREFIX = "HAPSNOMA_"

# Config file locations (checked in order)
CONFIG_PATHS = [
    Path.home() / ".config" / "hapsnoma" / "scenario.env",  # User config (primary)
    Path.home() / ".hapsnoma.env",  # Alternative user config
]

SIC_GAP_REFERENCES = ("normalized", "noise")


def dbm_to_watts(dbm: float) -> float:
    """Convert dBm to watts."""
    return float(10.0 ** ((dbm - 30.0) / 10.0))


@dataclass
class ScenarioConfig:
    """Scenario parameters; defaults follow the reference link budget."""

    # Platform
    platform: str = "haps"
    platforms_file: str = ""

    # Cell and users
    cell_radius: float = 1000.0
    min_horizontal_distance: float = 55.0
    ring_radius: float = 50.0
    n_clusters: int = 4
    users_per_cluster: int = 2
    n_rx: int = 4
    corr_threshold: float = 0.7

    # Radio
    carrier_freq: float = 2.5e9
    kappa: float = 9.61
    omega: float = 0.16
    noise_density_dbm_hz: float = -174.0
    bandwidth_hz: float = 10e6
    quad_nodes: int = 30

    # Power allocation
    r_min: float = 2.0
    p_tol_dbm: float = 1.0
    sic_gap_reference: str = "normalized"
    p_budget_dbm: float = 40.0
    p_max_follows_budget: bool = True
    p_max_dbm: float = 40.0
    fixed_circuit_power_w: float = 0.0

    # Sweep grids
    power_grid_dbm: tuple[float, ...] = (20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0)
    qos_grid: tuple[float, ...] = (0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
    favprop_elements: int = 64
    favprop_trials: int = 10000
    favprop_step_deg: float = 5.0
    corr_elements: int = 100
    corr_distance: float = 500.0
    corr_points: int = 181

    # Monte Carlo
    seed: int = 1
    n_trials: int = 500
    workers: int = 1

    @property
    def noise_power_w(self) -> float:
        """Thermal noise power sigma^2 over the configured bandwidth."""
        return dbm_to_watts(self.noise_density_dbm_hz + 10.0 * math.log10(self.bandwidth_hz))

    @property
    def p_tol_w(self) -> float:
        return dbm_to_watts(self.p_tol_dbm)

    def p_max_w(self, p_budget_w: float) -> float:
        """P_max for a given budget; equal to it unless pinned by config."""
        return p_budget_w if self.p_max_follows_budget else dbm_to_watts(self.p_max_dbm)

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        for key, value in data.items():
            if isinstance(value, tuple):
                data[key] = list(value)
        return data

    @classmethod
    def load(cls, path: Path | None = None) -> "ScenarioConfig":
        """Load config from an explicit file or the default locations, then the environment."""
        config = cls()

        if path is not None:
            if not path.exists():
                raise ConfigError(f"Config file not found: {path}", key="config")
            config._load_from_file(path)
        else:
            source = find_config_file()
            if source is not None:
                config._load_from_file(source)

        # Environment variables override config files
        config._load_from_env()

        return config

    def _load_from_file(self, path: Path) -> None:
        """Load configuration from a key = value file."""
        with open(path, encoding="utf-8") as f:
            for lineno, raw in enumerate(f, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if line.startswith("[") and line.endswith("]"):
                    continue  # Section headers only group keys
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'", key=line)
                key, value = line.split("=", 1)
                key = key.strip()
                value = value.split(" #", 1)[0].strip().strip('"').strip("'")
                if key.lower() == "platforms_file" and value and not Path(value).is_absolute():
                    value = str(path.parent / value)  # Relative to the config file
                self._set_from_key(key, value)

    def _load_from_env(self) -> None:
        """Load configuration from HAPSNOMA_* environment variables."""
        for f in fields(self):
            value = os.environ.get(ENV_PREFIX + f.name.upper())
            if value:
                self._set_from_key(f.name, value)

    def _set_from_key(self, key: str, value: str) -> None:
        """Set attribute from key-value pair, coercing to the field's type."""
        name = key.lower()
        if name.startswith(ENV_PREFIX.lower()):
            name = name[len(ENV_PREFIX) :]
        known = {f.name for f in fields(self)}
        if name not in known:
            raise ConfigError(f"Unknown config key: {key}", key=key)

        current = getattr(self, name)
        try:
            coerced: Any
            if isinstance(current, bool):
                if value.lower() not in ("true", "1", "yes", "false", "0", "no"):
                    raise ValueError(f"not a boolean: {value}")
                coerced = value.lower() in ("true", "1", "yes")
            elif isinstance(current, int):
                coerced = int(value)
            elif isinstance(current, float):
                coerced = float(value)
            elif isinstance(current, tuple):
                coerced = tuple(float(v) for v in value.replace(";", ",").split(",") if v.strip())
            else:
                coerced = value
        except ValueError as e:
            raise ConfigError(f"Invalid value for {name}: {e}", key=name) from e
        setattr(self, name, coerced)

    def save_default_config(self, path: Path | None = None) -> Path:
        """Save this config as a commented file (default: user config directory)."""
        config_path = path or default_config_path()
        config_path.parent.mkdir(parents=True, exist_ok=True)

        def grid(values: tuple[float, ...]) -> str:
            return ", ".join(f"{v:g}" for v in values)

        content = f"""# hapsnoma scenario configuration
# Keys match ScenarioConfig fields. Environment variables HAPSNOMA_<KEY> override them.

[platform]
# haps | terrestrial | any name from platforms_file
platform = {self.platform}
platforms_file = {self.platforms_file}

[cell]
cell_radius = {self.cell_radius:g}
min_horizontal_distance = {self.min_horizontal_distance:g}
ring_radius = {self.ring_radius:g}
n_clusters = {self.n_clusters}
users_per_cluster = {self.users_per_cluster}
n_rx = {self.n_rx}
corr_threshold = {self.corr_threshold:g}

[radio]
carrier_freq = {self.carrier_freq:g}
kappa = {self.kappa:g}
omega = {self.omega:g}
noise_density_dbm_hz = {self.noise_density_dbm_hz:g}
bandwidth_hz = {self.bandwidth_hz:g}
quad_nodes = {self.quad_nodes}

[allocation]
r_min = {self.r_min:g}
p_tol_dbm = {self.p_tol_dbm:g}
# normalized: P_tol taken relative to unit noise | noise: P_tol in watts over thermal noise
sic_gap_reference = {self.sic_gap_reference}
p_budget_dbm = {self.p_budget_dbm:g}
p_max_follows_budget = {str(self.p_max_follows_budget).lower()}
p_max_dbm = {self.p_max_dbm:g}
fixed_circuit_power_w = {self.fixed_circuit_power_w:g}

[sweeps]
power_grid_dbm = {grid(self.power_grid_dbm)}
qos_grid = {grid(self.qos_grid)}
favprop_elements = {self.favprop_elements}
favprop_trials = {self.favprop_trials}
favprop_step_deg = {self.favprop_step_deg:g}
corr_elements = {self.corr_elements}
corr_distance = {self.corr_distance:g}
corr_points = {self.corr_points}

[montecarlo]
seed = {self.seed}
n_trials = {self.n_trials}
workers = {self.workers}
"""

        with open(config_path, "w", encoding="utf-8") as f:
            f.write(content)

        return config_path


def default_config_path() -> Path:
    """Where `hapsnoma config --init` writes by default."""
    return CONFIG_PATHS[0]


def find_config_file() -> Path | None:
    """First existing default config file, if any."""
    for config_path in CONFIG_PATHS:
        if config_path.exists():
            return config_path
    return None
