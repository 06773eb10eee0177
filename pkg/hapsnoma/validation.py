"""Scenario validation - fail fast before a sweep starts."""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .config import ScenarioConfig


class ConfigError(ValueError):
    """Raised when a config value is unknown, malformed or out of range."""

    def __init__(self, message: str, key: str) -> None:
        super().__init__(message)
        self.key = key


_POSITIVE_FIELDS = (
    "cell_radius",
    "ring_radius",
    "carrier_freq",
    "bandwidth_hz",
    "kappa",
    "omega",
    "corr_distance",
    "favprop_step_deg",
)

_POSITIVE_INT_FIELDS = (
    "n_clusters",
    "users_per_cluster",
    "n_rx",
    "n_trials",
    "workers",
    "favprop_elements",
    "favprop_trials",
    "corr_elements",
    "corr_points",
)


def _check_grid(name: str, values: tuple[float, ...], minimum: float | None = None) -> None:
    if not values:
        raise ConfigError(f"{name} must not be empty", key=name)
    if any(b <= a for a, b in zip(values, values[1:], strict=False)):
        raise ConfigError(f"{name} must be strictly increasing, got {list(values)}", key=name)
    if minimum is not None and values[0] < minimum:
        raise ConfigError(f"{name} values must be >= {minimum}, got {values[0]}", key=name)


def validate_scenario(config: ScenarioConfig) -> list[str]:
    """Validate a scenario and return a list of warnings.

    Raises:
        ConfigError: On the first invalid field
    """
    from .presets import PlatformPreset, UnknownPlatformError

    for name in _POSITIVE_FIELDS:
        if not getattr(config, name) > 0:
            raise ConfigError(f"{name} must be positive, got {getattr(config, name)}", key=name)
    for name in _POSITIVE_INT_FIELDS:
        if getattr(config, name) < 1:
            raise ConfigError(f"{name} must be >= 1, got {getattr(config, name)}", key=name)

    if config.min_horizontal_distance <= config.ring_radius:
        raise ConfigError(
            "min_horizontal_distance must exceed ring_radius "
            f"({config.min_horizontal_distance} <= {config.ring_radius})",
            key="min_horizontal_distance",
        )
    if config.min_horizontal_distance >= config.cell_radius:
        raise ConfigError(
            "min_horizontal_distance must be below cell_radius", key="min_horizontal_distance"
        )
    if config.corr_distance <= config.ring_radius:
        raise ConfigError("corr_distance must exceed ring_radius", key="corr_distance")
    if config.n_rx < config.n_clusters:
        raise ConfigError(
            f"n_rx ({config.n_rx}) must be >= n_clusters ({config.n_clusters}) for nulling",
            key="n_rx",
        )
    if not 0 < config.corr_threshold <= 1:
        raise ConfigError(
            f"corr_threshold must lie in (0, 1], got {config.corr_threshold}", key="corr_threshold"
        )
    if config.r_min < 0:
        raise ConfigError(f"r_min must be >= 0, got {config.r_min}", key="r_min")
    if config.fixed_circuit_power_w < 0:
        raise ConfigError("fixed_circuit_power_w must be >= 0", key="fixed_circuit_power_w")
    if config.sic_gap_reference not in ("normalized", "noise"):
        raise ConfigError(
            f"sic_gap_reference must be 'normalized' or 'noise', got {config.sic_gap_reference}",
            key="sic_gap_reference",
        )
    if config.quad_nodes < 2:
        raise ConfigError("quad_nodes must be >= 2", key="quad_nodes")

    _check_grid("power_grid_dbm", config.power_grid_dbm)
    _check_grid("qos_grid", config.qos_grid, minimum=0.0)

    platforms_file = Path(config.platforms_file) if config.platforms_file else None
    if platforms_file is not None and not platforms_file.exists():
        raise ConfigError(f"Platforms file not found: {platforms_file}", key="platforms_file")
    names = ("haps", "terrestrial") if config.platform == "both" else (config.platform,)
    try:
        for name in names:
            PlatformPreset.load(name, platforms_file)
    except UnknownPlatformError as e:
        raise ConfigError(str(e), key="platform") from e

    warnings: list[str] = []
    if config.favprop_trials < 100:
        warnings.append(f"favprop_trials={config.favprop_trials} is too few for a stable variance")
    if not config.p_max_follows_budget and max(config.power_grid_dbm) > config.p_max_dbm:
        warnings.append("power grid exceeds p_max_dbm; fractions above 1 will be allocated")
    if config.n_clusters * config.users_per_cluster > 64:
        warnings.append("more than 64 users per trial; sweeps will be slow")
    return warnings
