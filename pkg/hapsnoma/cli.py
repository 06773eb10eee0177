"""CLI interface for the hapsnoma simulator."""

from collections.abc import Callable
from enum import Enum
from pathlib import Path
from typing import Annotated

import numpy as np
import typer
from rich.console import Console

from . import __version__
from .channel import build_channel_stats, dump_channel_stats
from .config import ScenarioConfig, default_config_path, find_config_file
from .experiments import (
    MetricSeries,
    Scenario,
    correlation_sweep,
    merge_platform_series,
    run_ee_sweep,
    run_favprop_sweep,
    run_qos_sweep,
    run_sum_rate_sweep,
)
from .geometry import GeometryError, place_user
from .presets import UnknownPlatformError, load_presets, save_default_platforms
from .report import print_series, save_series
from .validation import ConfigError, validate_scenario

console = Console()

EXIT_CONFIG_ERROR = 2
EXIT_ALL_INFEASIBLE = 3

BOTH_PLATFORMS = ("haps", "terrestrial")


class SeriesFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class DumpFormat(str, Enum):
    JSON = "json"
    BINARY = "binary"


def version_callback(value: bool) -> None:
    """Show version and exit."""
    if value:
        console.print(f"[bold]hapsnoma[/] v{__version__}")
        raise typer.Exit()


app = typer.Typer(
    name="hapsnoma",
    help="HAPS MIMO-NOMA link-level simulator. Channels → clusters → power allocation → curves.",
    add_completion=False,
    no_args_is_help=True,
)


@app.callback()
def main(
    version: Annotated[
        bool,
        typer.Option(
            "--version",
            "-V",
            callback=version_callback,
            is_eager=True,
            help="Show version and exit.",
        ),
    ] = False,
) -> None:
    """hapsnoma - correlated-channel MIMO-NOMA simulation for HAPS and terrestrial cells."""


# --- Shared options ---

ConfigOpt = Annotated[
    Path | None, typer.Option("--config", "-c", help="Scenario config file (key = value).")
]
SeedOpt = Annotated[int | None, typer.Option("--seed", help="Override the root seed.")]
TrialsOpt = Annotated[int | None, typer.Option("--trials", "-n", help="Monte Carlo trials.")]
OutOpt = Annotated[Path | None, typer.Option("--out", "-o", help="Output file.")]
FormatOpt = Annotated[SeriesFormat, typer.Option("--format", "-f", help="Output format.")]
PlatformOpt = Annotated[
    str | None,
    typer.Option("--platform", "-p", help="haps, terrestrial, both, or a custom preset."),
]
WorkersOpt = Annotated[int | None, typer.Option("--workers", "-w", help="Parallel trial workers.")]


def _load_config(
    config_path: Path | None,
    seed: int | None = None,
    trials: int | None = None,
    workers: int | None = None,
) -> ScenarioConfig:
    """Load, override and validate the scenario; exit 2 on any config problem."""
    try:
        cfg = ScenarioConfig.load(config_path)
        if seed is not None:
            cfg.seed = seed
        if trials is not None:
            cfg.n_trials = trials
            cfg.favprop_trials = max(trials, 100)
        if workers is not None:
            cfg.workers = workers
        console.print("[dim]Validating scenario...[/]")
        for warning in validate_scenario(cfg):
            console.print(f"[yellow]Warning:[/] {warning}")
    except ConfigError as e:
        console.print(f"[red]Config Error:[/] {e} [dim](key: {e.key})[/]")
        raise typer.Exit(EXIT_CONFIG_ERROR) from None
    return cfg


def _platforms(cfg: ScenarioConfig, platform: str | None) -> list[str]:
    choice = platform or cfg.platform
    return list(BOTH_PLATFORMS) if choice == "both" else [choice]


def _sweep(
    cfg: ScenarioConfig,
    platform: str | None,
    runner: Callable[[Scenario], MetricSeries],
) -> MetricSeries:
    """Run a sweep for one platform, or for both under matched seeds."""
    names = _platforms(cfg, platform)
    by_platform: dict[str, MetricSeries] = {}
    for name in names:
        try:
            scenario = Scenario.from_config(cfg, name)
        except UnknownPlatformError as e:
            console.print(f"[red]Config Error:[/] {e}")
            raise typer.Exit(EXIT_CONFIG_ERROR) from None
        console.print(f"[blue]Running[/] {name} [dim](seed {cfg.seed})[/]")
        by_platform[name] = runner(scenario)
    if len(by_platform) == 1:
        return next(iter(by_platform.values()))
    return merge_platform_series(by_platform)


def _finish(series: MetricSeries, title: str, out: Path | None, fmt: SeriesFormat) -> None:
    print_series(series, title)
    if out is not None:
        save_series(series, out, fmt.value)
    if series.all_infeasible:
        console.print("[red]Every point is infeasible[/] [dim](QoS/SIC minima exceed the budget)[/]")
        raise typer.Exit(EXIT_ALL_INFEASIBLE)


# --- Commands ---


@app.command()
def favprop(
    config: ConfigOpt = None,
    seed: SeedOpt = None,
    trials: TrialsOpt = None,
    out: OutOpt = None,
    fmt: FormatOpt = SeriesFormat.CSV,
    platform: PlatformOpt = None,
) -> None:
    """Favorable-propagation variance versus the second user's azimuth."""
    cfg = _load_config(config, seed, trials)
    console.rule("[bold]Favorable propagation[/]")
    series = _sweep(cfg, platform, run_favprop_sweep)
    _finish(series, "Favorable propagation variance", out, fmt)


@app.command("corr-sweep")
def corr_sweep(
    config: ConfigOpt = None,
    seed: SeedOpt = None,
    trials: TrialsOpt = None,
    out: OutOpt = None,
    fmt: FormatOpt = SeriesFormat.CSV,
    platform: PlatformOpt = "both",
) -> None:
    """LoS correlation of two users versus azimuth offset."""
    cfg = _load_config(config, seed, trials)
    console.rule("[bold]Correlation sweep[/]")
    series = _sweep(cfg, platform, correlation_sweep)
    _finish(series, "LoS correlation coefficient", out, fmt)


@app.command("sumrate-vs-power")
def sumrate_vs_power(
    config: ConfigOpt = None,
    seed: SeedOpt = None,
    trials: TrialsOpt = None,
    out: OutOpt = None,
    fmt: FormatOpt = SeriesFormat.CSV,
    platform: PlatformOpt = None,
    workers: WorkersOpt = None,
) -> None:
    """Mean sum rate versus transmit power budget."""
    cfg = _load_config(config, seed, trials, workers)
    console.rule("[bold]Sum rate vs transmit power[/]")
    series = _sweep(cfg, platform, lambda s: run_sum_rate_sweep(s, show_progress=True))
    _finish(series, "Sum rate (bps/Hz)", out, fmt)


@app.command("sumrate-vs-qos")
def sumrate_vs_qos(
    config: ConfigOpt = None,
    seed: SeedOpt = None,
    trials: TrialsOpt = None,
    out: OutOpt = None,
    fmt: FormatOpt = SeriesFormat.CSV,
    platform: PlatformOpt = None,
    workers: WorkersOpt = None,
) -> None:
    """Mean sum rate versus the per-user minimum rate."""
    cfg = _load_config(config, seed, trials, workers)
    console.rule("[bold]Sum rate vs minimum rate[/]")
    series = _sweep(cfg, platform, lambda s: run_qos_sweep(s, show_progress=True))
    _finish(series, "Sum rate (bps/Hz)", out, fmt)


@app.command("ee-vs-power")
def ee_vs_power(
    config: ConfigOpt = None,
    seed: SeedOpt = None,
    trials: TrialsOpt = None,
    out: OutOpt = None,
    fmt: FormatOpt = SeriesFormat.CSV,
    platform: PlatformOpt = None,
    workers: WorkersOpt = None,
) -> None:
    """Energy efficiency versus transmit power budget."""
    cfg = _load_config(config, seed, trials, workers)
    console.rule("[bold]Energy efficiency vs transmit power[/]")
    series = _sweep(cfg, platform, lambda s: run_ee_sweep(s, show_progress=True))
    _finish(series, "Energy efficiency (bps/Hz/W)", out, fmt)


@app.command()
def run(
    out: Annotated[
        Path, typer.Option("--out", "-o", help="Output directory for all series.")
    ] = Path("hapsnoma_results"),
    config: ConfigOpt = None,
    seed: SeedOpt = None,
    trials: TrialsOpt = None,
    fmt: FormatOpt = SeriesFormat.CSV,
    platform: PlatformOpt = "both",
    workers: WorkersOpt = None,
) -> None:
    """Run every experiment and write one file per series into a directory."""
    cfg = _load_config(config, seed, trials, workers)
    out.mkdir(parents=True, exist_ok=True)
    ext = fmt.value

    experiments: list[tuple[str, str, Callable[[Scenario], MetricSeries]]] = [
        ("favprop", "Favorable propagation variance", run_favprop_sweep),
        ("corr_sweep", "LoS correlation coefficient", correlation_sweep),
        (
            "sumrate_vs_power",
            "Sum rate vs transmit power",
            lambda s: run_sum_rate_sweep(s, show_progress=True),
        ),
        (
            "sumrate_vs_qos",
            "Sum rate vs minimum rate",
            lambda s: run_qos_sweep(s, show_progress=True),
        ),
        (
            "ee_vs_power",
            "Energy efficiency vs transmit power",
            lambda s: run_ee_sweep(s, show_progress=True),
        ),
    ]

    allocation_series: list[MetricSeries] = []
    for name, title, runner in experiments:
        console.rule(f"[bold]{title}[/]")
        series = _sweep(cfg, platform, runner)
        print_series(series, title)
        save_series(series, out / f"{name}.{ext}", fmt.value)
        if any(k.endswith("feasibility_fraction") for k in series.metrics):
            allocation_series.append(series)

    console.rule("[bold green]Finished[/]")
    if allocation_series and all(s.all_infeasible for s in allocation_series):
        console.print("[red]Every allocation point is infeasible[/]")
        raise typer.Exit(EXIT_ALL_INFEASIBLE)


@app.command("dump-stats")
def dump_stats(
    out: Annotated[Path, typer.Option("--out", "-o", help="Output file.")],
    x: Annotated[float, typer.Option("--x", help="User east offset (m).")] = 500.0,
    y: Annotated[float, typer.Option("--y", help="User north offset (m).")] = 0.0,
    elements: Annotated[int, typer.Option("--elements", "-m", help="Array elements M.")] = 64,
    fmt: Annotated[DumpFormat, typer.Option("--format", "-f")] = DumpFormat.JSON,
    config: ConfigOpt = None,
    seed: SeedOpt = None,
    platform: PlatformOpt = None,
) -> None:
    """Write one user's channel statistics (mean and covariance) for debugging."""
    cfg = _load_config(config, seed)
    names = _platforms(cfg, platform)
    if len(names) != 1:
        console.print("[red]Config Error:[/] dump-stats needs a single platform")
        raise typer.Exit(EXIT_CONFIG_ERROR)
    try:
        scenario = Scenario.from_config(cfg, names[0])
        placement = place_user(x, y, scenario.preset.height, cfg.ring_radius)
    except (UnknownPlatformError, GeometryError) as e:
        console.print(f"[red]Config Error:[/] {e}")
        raise typer.Exit(EXIT_CONFIG_ERROR) from None

    stats = build_channel_stats(
        scenario.array(elements),
        placement,
        scenario.path_loss,
        np.random.default_rng(cfg.seed),
        allow_los=scenario.preset.allow_los,
        quad_nodes=cfg.quad_nodes,
    )
    path = dump_channel_stats(stats, out, fmt.value)
    console.print(
        f"[green]Channel statistics saved:[/] {path} "
        f"[dim](M={stats.n_elements}, LoS={stats.has_los}, P(LoS)={stats.p_los:.3f})[/]"
    )


@app.command("config")
def config_cmd(
    show: Annotated[bool, typer.Option("--show", help="Show current configuration")] = False,
    init: Annotated[bool, typer.Option("--init", help="Create default config file")] = False,
    init_platforms: Annotated[
        bool,
        typer.Option(
            "--init-platforms",
            help="Create platforms.yaml in current directory for customization",
        ),
    ] = False,
    path: Annotated[
        Path | None, typer.Option("--path", help="Write the config here instead")
    ] = None,
) -> None:
    """
    Manage the scenario configuration.

    Config file: ~/.config/hapsnoma/scenario.env

    Examples:
        hapsnoma config --show
        hapsnoma config --init
        hapsnoma config --init-platforms
    """
    cfg = _load_config(None)

    if init:
        config_path = path or default_config_path()
        if config_path.exists():
            console.print(f"[yellow]Config already exists:[/] {config_path}")
            if not typer.confirm("Overwrite existing config?", default=False):
                console.print("[dim]Aborted. Existing config preserved.[/]")
                return
        written = cfg.save_default_config(config_path)
        console.print(f"[green]Config created:[/] {written}")
        console.print("[dim]Edit this file to customize the scenario[/]")
        return

    if init_platforms:
        platforms_path = Path.cwd() / "platforms.yaml"
        if platforms_path.exists():
            console.print(f"[yellow]Platforms file already exists:[/] {platforms_path}")
            console.print("[dim]Delete it first if you want to reset to defaults[/]")
            return
        save_default_platforms(platforms_path)
        return

    if show:
        source = find_config_file()
        if source:
            console.print(f"[bold]Current Configuration[/] [dim](from {source}):[/]\n")
        else:
            console.print("[bold]Current Configuration[/] [dim](defaults, no config file found):[/]\n")
        for key, value in cfg.to_dict().items():
            console.print(f"  [cyan]{key}[/] = {value}")

        platforms_file = Path(cfg.platforms_file) if cfg.platforms_file else None
        console.print("\n[cyan]Platforms:[/]")
        for name, preset in load_presets(platforms_file).items():
            console.print(
                f"  {name}: h={preset.height:g} m, {preset.orientation.value}, "
                f"LoS={'yes' if preset.allow_los else 'no'}, n={preset.path_loss_exponent:g}"
            )
        return

    console.print("Use --show to view config, --init to create, --init-platforms for presets")


if __name__ == "__main__":
    app()
