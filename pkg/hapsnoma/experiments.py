"""Monte Carlo harness and the sweeps behind every reported curve.

Every sweep returns a MetricSeries. Trials get their own child seeds spawned
from the scenario seed, so a HAPS run and a terrestrial run with the same
config see the same user drops, and results never depend on the worker count.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from concurrent.futures import Future, ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, TypeVar

import numpy as np
from numpy.typing import NDArray
from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn

from .channel import (
    ChannelStats,
    PathLossParams,
    build_channel_stats,
    los_steering,
    sample_channel,
)
from .clustering import ClusterAssignment, cluster_users, correlation_coefficient
from .config import ScenarioConfig, dbm_to_watts
from .geometry import ArrayGeometry, local_angles, place_user
from .linkproc import DegenerateChannelError, build_link, order_cluster
from .powalloc import (
    AllocationProblem,
    InfeasibleAllocationError,
    PowerAllocation,
    allocate_power,
    check_allocation,
)
from .presets import PlatformPreset

console = Console()

T = TypeVar("T")

# Azimuth of the fixed user in the favorable-propagation sweep
FAVPROP_FIXED_AZIMUTH = math.pi / 6


class AllocationInvariantError(RuntimeError):
    """Raised when an allocation returned by the solver breaks a constraint."""


@dataclass
class MetricSeries:
    """Named metric columns over a common x grid; None marks an infeasible point."""

    x_label: str
    x_values: list[float]
    metrics: dict[str, list[float | None]] = field(default_factory=dict)
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name, values in self.metrics.items():
            self._check_length(name, values)

    def _check_length(self, name: str, values: Sequence[float | None]) -> None:
        if len(values) != len(self.x_values):
            raise ValueError(
                f"Series '{name}' has {len(values)} values for {len(self.x_values)} x points"
            )

    def add(self, name: str, values: Sequence[float | None]) -> None:
        self._check_length(name, values)
        self.metrics[name] = list(values)

    @property
    def all_infeasible(self) -> bool:
        """True when some feasibility column exists and is zero everywhere."""
        columns = [v for k, v in self.metrics.items() if k.endswith("feasibility_fraction")]
        return bool(columns) and all(x == 0 for col in columns for x in col)


@dataclass(frozen=True)
class Scenario:
    """A config bound to one platform preset."""

    config: ScenarioConfig
    preset: PlatformPreset

    @classmethod
    def from_config(cls, config: ScenarioConfig, platform: str | None = None) -> Scenario:
        platforms_file = Path(config.platforms_file) if config.platforms_file else None
        return cls(config, PlatformPreset.load(platform or config.platform, platforms_file))

    def array(self, n_elements: int) -> ArrayGeometry:
        return ArrayGeometry.for_elements(
            n_elements,
            self.config.carrier_freq,
            orientation=self.preset.orientation,
            d_h=self.preset.d_h,
            d_v=self.preset.d_v,
        )

    @property
    def path_loss(self) -> PathLossParams:
        return PathLossParams(
            carrier_freq=self.config.carrier_freq,
            sigma_sf_los=self.preset.sigma_sf_los,
            sigma_sf_nlos=self.preset.sigma_sf_nlos,
            kappa=self.config.kappa,
            omega=self.config.omega,
            exponent=self.preset.path_loss_exponent,
        )

    def metadata(self, **extra: Any) -> dict[str, Any]:
        return {
            "platform": self.preset.name,
            "seed": self.config.seed,
            "n_trials": self.config.n_trials,
            "config": self.config.to_dict(),
            **extra,
        }


@dataclass(frozen=True)
class TrialChannels:
    """Power-independent part of one trial: clusters and ordered effective gains."""

    clusters: ClusterAssignment
    gains: NDArray[np.float64] | None  # None when nulling failed (degenerate channel)
    stats: list[ChannelStats] = field(repr=False)


# --- Building blocks ---


def draw_user_positions(
    rng: np.random.Generator, n_users: int, cell_radius: float, min_radius: float = 0.0
) -> NDArray[np.float64]:
    """Area-uniform (x, y) positions in the annulus [min_radius, cell_radius]."""
    if not 0 <= min_radius < cell_radius:
        raise ValueError(f"Need 0 <= min_radius < cell_radius, got {min_radius}, {cell_radius}")
    u = rng.random(n_users)
    radius = np.sqrt(min_radius**2 + u * (cell_radius**2 - min_radius**2))
    angle = rng.uniform(-math.pi, math.pi, n_users)
    return np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])


def trial_seeds(seed: int, n_trials: int) -> list[np.random.SeedSequence]:
    """Per-trial child seeds keyed by trial index."""
    return np.random.SeedSequence(seed).spawn(n_trials)


def draw_trial(scenario: Scenario, seed: np.random.SeedSequence | int) -> TrialChannels:
    """Place users, draw channels, cluster on LoS means and build detection links."""
    cfg = scenario.config
    rng = np.random.default_rng(seed)
    n_clusters, per_cluster = cfg.n_clusters, cfg.users_per_cluster
    geom = scenario.array(n_clusters)
    params = scenario.path_loss

    positions = draw_user_positions(
        rng, n_clusters * per_cluster, cfg.cell_radius, cfg.min_horizontal_distance
    )
    stats = [
        build_channel_stats(
            geom,
            place_user(float(x), float(y), scenario.preset.height, cfg.ring_radius),
            params,
            rng,
            allow_los=scenario.preset.allow_los,
            quad_nodes=cfg.quad_nodes,
        )
        for x, y in positions
    ]
    clusters = cluster_users(
        [s.los_mean for s in stats], cfg.corr_threshold, per_cluster, max_clusters=n_clusters
    )
    channel_seeds = rng.integers(0, 2**63 - 1, size=len(stats))

    gains = np.zeros((n_clusters, per_cluster))
    try:
        for m, members in enumerate(clusters.clusters):
            links = [
                build_link(
                    sample_channel(stats[u], cfg.n_rx, int(channel_seeds[u])).matrix, m, u
                )
                for u in members
            ]
            gains[m, : len(links)] = [link.eff_gain for link in order_cluster(links)]
    except DegenerateChannelError:
        return TrialChannels(clusters=clusters, gains=None, stats=stats)
    if np.any(gains <= 0):
        return TrialChannels(clusters=clusters, gains=None, stats=stats)
    return TrialChannels(clusters=clusters, gains=gains, stats=stats)


def solve_point(
    scenario: Scenario, gains: NDArray[np.float64], p_budget_w: float, r_min: float
) -> PowerAllocation | None:
    """Allocate one budget point; None when QoS and SIC cannot be met."""
    cfg = scenario.config
    noise = cfg.noise_power_w
    p_max = cfg.p_max_w(p_budget_w)
    p_tol = cfg.p_tol_w * noise if cfg.sic_gap_reference == "normalized" else cfg.p_tol_w
    problem = AllocationProblem(
        gains=gains,
        rho=p_max / noise,
        p_max=p_max,
        p_budget=p_budget_w,
        p_tol=p_tol,
        qos_rates=np.full_like(gains, r_min),
    )
    try:
        allocation = allocate_power(problem)
    except InfeasibleAllocationError:
        return None
    violations = check_allocation(problem, allocation)
    if violations:
        raise AllocationInvariantError("; ".join(violations))
    return allocation


def run_trials(
    fn: Callable[[int], T],
    n_trials: int,
    workers: int = 1,
    description: str = "Monte Carlo",
    show_progress: bool = False,
) -> list[T]:
    """Run fn(trial_index) for every trial and return results in trial order."""
    results: dict[int, T] = {}
    progress = Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(bar_width=20),
        TextColumn("{task.completed}/{task.total}"),
        console=console,
        transient=True,
        disable=not show_progress,
    )
    with progress:
        task = progress.add_task(description, total=n_trials)
        if workers <= 1:
            for idx in range(n_trials):
                results[idx] = fn(idx)
                progress.update(task, advance=1)
        else:
            with ThreadPoolExecutor(max_workers=workers) as executor:
                futures: dict[Future[T], int] = {
                    executor.submit(fn, idx): idx for idx in range(n_trials)
                }
                for future in as_completed(futures):
                    results[futures[future]] = future.result()
                    progress.update(task, advance=1)
    return [results[idx] for idx in range(n_trials)]


def _reduce(per_trial: list[list[float | None]], n_points: int) -> dict[str, list[float | None]]:
    """Feasible-only mean, outage-aware mean and feasibility per grid point."""
    sum_rate: list[float | None] = []
    outage: list[float | None] = []
    feasibility: list[float | None] = []
    n = len(per_trial)
    for k in range(n_points):
        values = [trial[k] for trial in per_trial]
        feasible = [v for v in values if v is not None]
        sum_rate.append(math.fsum(feasible) / len(feasible) if feasible else None)
        outage.append(math.fsum(feasible) / n if n else None)
        feasibility.append(len(feasible) / n if n else None)
    return {
        "sum_rate": sum_rate,
        "sum_rate_outage": outage,
        "feasibility_fraction": feasibility,
    }


def _allocation_sweep(
    scenario: Scenario,
    points: Sequence[tuple[float, float]],
    description: str,
    show_progress: bool,
) -> dict[str, list[float | None]]:
    """Sum rate per (budget W, r_min) point; channels are shared across points."""
    cfg = scenario.config
    seeds = trial_seeds(cfg.seed, cfg.n_trials)

    def one(idx: int) -> list[float | None]:
        trial = draw_trial(scenario, seeds[idx])
        if trial.gains is None:
            return [None] * len(points)
        out: list[float | None] = []
        for budget, r_min in points:
            allocation = solve_point(scenario, trial.gains, budget, r_min)
            out.append(None if allocation is None else allocation.sum_rate)
        return out

    per_trial = run_trials(one, cfg.n_trials, cfg.workers, description, show_progress)
    return _reduce(per_trial, len(points))


# --- Metrics ---


def energy_efficiency(sum_rate: float, p_transmit: float, p_fixed: float = 0.0) -> float:
    """Sum rate per watt of consumed power (bps/Hz/W)."""
    total = p_transmit + p_fixed
    if total <= 0:
        raise ValueError(f"Consumed power must be positive, got {total}")
    return sum_rate / total


def favorable_propagation_variance(
    stats_pair: tuple[ChannelStats, ChannelStats],
    n_elements: int,
    n_trials: int,
    seed: int | np.random.SeedSequence,
) -> float:
    """Var{h1^H h2 / sqrt(E||h1||^2 E||h2||^2)} over independent channel pairs."""
    first, second = stats_pair
    if first.n_elements != n_elements or second.n_elements != n_elements:
        raise ValueError(f"Channel statistics do not have {n_elements} elements")
    if n_trials < 100:
        raise ValueError(f"Need at least 100 trials for a variance estimate, got {n_trials}")
    seed_seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    s1, s2 = seed_seq.spawn(2)
    # Rows of a realization are independent draws
    h1 = sample_channel(first, n_trials, s1).matrix
    h2 = sample_channel(second, n_trials, s2).matrix
    z = np.sum(h1.conj() * h2, axis=1) / math.sqrt(first.mean_power * second.mean_power)
    return float(np.var(z))


# --- Sweeps ---


def run_favprop_sweep(
    scenario: Scenario, azimuths_deg: Sequence[float] | None = None
) -> MetricSeries:
    """Favorable-propagation variance while user 2 circles user 1 at a fixed distance."""
    cfg = scenario.config
    if azimuths_deg is None:
        n_steps = round(360.0 / cfg.favprop_step_deg)
        azimuths_deg = [-180.0 + k * cfg.favprop_step_deg for k in range(n_steps + 1)]
    geom = scenario.array(cfg.favprop_elements)
    params = scenario.path_loss
    rng = np.random.default_rng(cfg.seed)

    def stats_at(azimuth: float) -> ChannelStats:
        placement = place_user(
            cfg.corr_distance * math.cos(azimuth),
            cfg.corr_distance * math.sin(azimuth),
            scenario.preset.height,
            cfg.ring_radius,
        )
        # Path loss at its mean: the statistic is normalized
        return build_channel_stats(
            geom, placement, params, rng, quad_nodes=cfg.quad_nodes, shadowing=False
        )

    def variants(s: ChannelStats) -> dict[str, ChannelStats]:
        white = s.beta_nlos * np.eye(s.n_elements, dtype=np.complex128)
        return {
            "rician": replace(s, has_los=True),
            "rayleigh": replace(s, has_los=False),
            "uncorrelated": replace(s, has_los=False, covariance=white),
        }

    fixed = variants(stats_at(FAVPROP_FIXED_AZIMUTH))
    seeds = trial_seeds(cfg.seed, len(azimuths_deg))
    series = MetricSeries(
        x_label="azimuth_deg",
        x_values=list(azimuths_deg),
        metadata=scenario.metadata(n_elements=geom.n_elements, n_trials=cfg.favprop_trials),
    )
    columns: dict[str, list[float | None]] = {name: [] for name in fixed}
    for k, az in enumerate(azimuths_deg):
        swept = variants(stats_at(math.radians(az)))
        for name in fixed:
            columns[name].append(
                favorable_propagation_variance(
                    (fixed[name], swept[name]), geom.n_elements, cfg.favprop_trials, seeds[k]
                )
            )
    for name, values in columns.items():
        series.add(f"variance_{name}", values)
    return series


def correlation_sweep(
    scenario: Scenario,
    sweep_azimuths: Sequence[float] | None = None,
    fixed_azimuth: float = 0.0,
) -> MetricSeries:
    """LoS correlation between a fixed user and a user swept in azimuth, same distance."""
    cfg = scenario.config
    if sweep_azimuths is None:
        sweep_azimuths = np.linspace(-math.pi / 2, math.pi / 2, cfg.corr_points).tolist()
    geom = scenario.array(cfg.corr_elements)

    def los_vector(azimuth: float) -> NDArray[np.complex128]:
        placement = place_user(
            cfg.corr_distance * math.cos(azimuth),
            cfg.corr_distance * math.sin(azimuth),
            scenario.preset.height,
            cfg.ring_radius,
        )
        phi, theta = local_angles(geom.orientation, placement.azimuth, placement.elevation)
        # Unit gain: the coefficient is scale invariant
        return los_steering(geom, float(phi), float(theta), 1.0)

    reference = los_vector(fixed_azimuth)
    values: list[float | None] = [
        correlation_coefficient(reference, los_vector(az)) for az in sweep_azimuths
    ]
    return MetricSeries(
        x_label="azimuth_rad",
        x_values=[float(a) for a in sweep_azimuths],
        metrics={"correlation": values},
        metadata=scenario.metadata(n_elements=geom.n_elements, fixed_azimuth=fixed_azimuth),
    )


def run_sum_rate_sweep(
    scenario: Scenario,
    budget_grid_w: Sequence[float] | None = None,
    show_progress: bool = False,
) -> MetricSeries:
    """Mean sum rate versus transmit power budget."""
    cfg = scenario.config
    if budget_grid_w is None:
        budget_grid_w = [dbm_to_watts(p) for p in cfg.power_grid_dbm]
    steps = zip(budget_grid_w, budget_grid_w[1:], strict=False)
    if not budget_grid_w or any(b <= a for a, b in steps):
        raise ValueError("Budget grid must be nonempty and increasing")
    metrics = _allocation_sweep(
        scenario,
        [(b, cfg.r_min) for b in budget_grid_w],
        f"Sum rate vs power ({scenario.preset.name})",
        show_progress,
    )
    series = MetricSeries(
        x_label="p_budget_dbm",
        x_values=[10.0 * math.log10(b) + 30.0 for b in budget_grid_w],
        metadata=scenario.metadata(r_min=cfg.r_min),
    )
    series.add("p_budget_w", list(budget_grid_w))
    for name, values in metrics.items():
        series.add(name, values)
    return series


def run_qos_sweep(
    scenario: Scenario,
    r_min_grid: Sequence[float] | None = None,
    show_progress: bool = False,
) -> MetricSeries:
    """Mean sum rate versus the per-user minimum rate at a fixed budget."""
    cfg = scenario.config
    if r_min_grid is None:
        r_min_grid = list(cfg.qos_grid)
    if not r_min_grid:
        raise ValueError("QoS grid must be nonempty")
    budget = dbm_to_watts(cfg.p_budget_dbm)
    metrics = _allocation_sweep(
        scenario,
        [(budget, r) for r in r_min_grid],
        f"Sum rate vs QoS ({scenario.preset.name})",
        show_progress,
    )
    series = MetricSeries(
        x_label="r_min",
        x_values=list(r_min_grid),
        metadata=scenario.metadata(p_budget_dbm=cfg.p_budget_dbm),
    )
    for name, values in metrics.items():
        series.add(name, values)
    return series


def run_ee_sweep(
    scenario: Scenario,
    budget_grid_w: Sequence[float] | None = None,
    show_progress: bool = False,
) -> MetricSeries:
    """Energy efficiency versus transmit power budget."""
    series = run_sum_rate_sweep(scenario, budget_grid_w, show_progress)
    p_fixed = scenario.config.fixed_circuit_power_w
    budgets = series.metrics["p_budget_w"]

    def ee(rates: list[float | None]) -> list[float | None]:
        return [
            None if r is None or p is None else energy_efficiency(r, p, p_fixed)
            for r, p in zip(rates, budgets, strict=True)
        ]

    series.add("energy_efficiency", ee(series.metrics["sum_rate"]))
    series.add("energy_efficiency_outage", ee(series.metrics["sum_rate_outage"]))
    series.metadata["fixed_circuit_power_w"] = p_fixed
    return series


def merge_platform_series(by_platform: dict[str, MetricSeries]) -> MetricSeries:
    """Side-by-side columns <platform>_<metric> for runs over the same x grid."""
    first = next(iter(by_platform.values()))
    merged = MetricSeries(
        x_label=first.x_label,
        x_values=list(first.x_values),
        metadata={
            "platforms": list(by_platform),
            "seed": first.metadata.get("seed"),
            "n_trials": first.metadata.get("n_trials"),
            "config": first.metadata.get("config"),
        },
    )
    for platform, series in by_platform.items():
        if series.x_values != first.x_values:
            raise ValueError(f"Platform '{platform}' was run on a different x grid")
        for name, values in series.metrics.items():
            merged.add(f"{platform}_{name}", values)
    return merged
