"""Platform preset loading (HAPS, terrestrial mast, user-defined)."""

import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Any, ClassVar

import yaml
from rich.console import Console

from .geometry import Orientation

console = Console()

# Path to embedded default presets
DEFAULT_PLATFORMS_PATH = Path(__file__).parent / "default_platforms.yaml"


class UnknownPlatformError(KeyError):
    """Raised when a platform name is not defined in the loaded presets."""

    def __init__(self, name: str, known: list[str]) -> None:
        super().__init__(name)
        self.name = name
        self.known = known

    def __str__(self) -> str:
        return f"Unknown platform '{self.name}' (known: {', '.join(self.known)})"


@dataclass(frozen=True)
class PlatformPreset:
    """Everything that differs between a HAPS and a terrestrial base station."""

    name: str
    height: float
    orientation: Orientation
    d_h: float = 0.5
    d_v: float = 0.5
    allow_los: bool = True
    path_loss_exponent: float = 2.0
    sigma_sf_los: float = 1.0
    sigma_sf_nlos: float = 20.0

    # Search paths for a presets file (in order of priority)
    SEARCH_PATHS: ClassVar[list[str]] = [
        "platforms.yaml",
        ".hapsnoma/platforms.yaml",
    ]

    @classmethod
    def load(cls, name: str, platforms_file: Path | None = None) -> "PlatformPreset":
        """Load one preset by name; see load_presets for the lookup order."""
        presets = load_presets(platforms_file)
        if name not in presets:
            raise UnknownPlatformError(name, sorted(presets))
        return presets[name]

    @classmethod
    def from_mapping(cls, name: str, data: dict[str, Any]) -> "PlatformPreset":
        return cls(
            name=name,
            height=float(data["height"]),
            orientation=Orientation(data.get("orientation", "horizontal")),
            d_h=float(data.get("d_h", 0.5)),
            d_v=float(data.get("d_v", 0.5)),
            allow_los=bool(data.get("allow_los", True)),
            path_loss_exponent=float(data.get("path_loss_exponent", 2.0)),
            sigma_sf_los=float(data.get("sigma_sf_los", 1.0)),
            sigma_sf_nlos=float(data.get("sigma_sf_nlos", 20.0)),
        )


def load_presets(platforms_file: Path | None = None) -> dict[str, PlatformPreset]:
    """
    Load all platform presets.

    Priority:
    1. Explicit platforms_file parameter
    2. platforms.yaml in current directory
    3. Embedded defaults

    Args:
        platforms_file: Optional explicit path to a presets file

    Returns:
        Mapping of preset name to PlatformPreset
    """
    # 1. Explicit file
    if platforms_file:
        if platforms_file.exists():
            return _load_from_file(platforms_file)
        console.print(f"[yellow]Platforms file not found: {platforms_file}[/]")
        console.print("[dim]Falling back to defaults[/]")

    # 2. Search in common locations
    for search_path in PlatformPreset.SEARCH_PATHS:
        path = Path.cwd() / search_path
        if path.exists():
            console.print(f"[dim]Using platforms from: {path}[/]")
            return _load_from_file(path)

    # 3. Embedded defaults
    return _load_from_file(DEFAULT_PLATFORMS_PATH)


def _load_from_file(path: Path) -> dict[str, PlatformPreset]:
    """Load presets from a YAML file, falling back to the embedded ones on error."""
    try:
        with open(path, encoding="utf-8") as f:
            data = yaml.safe_load(f)

        if not isinstance(data, dict) or not data:
            console.print(f"[yellow]Invalid platforms file format: {path}[/]")
            return _load_defaults(path)

        return {
            str(name): PlatformPreset.from_mapping(str(name), entry)
            for name, entry in data.items()
        }

    except yaml.YAMLError as e:
        console.print(f"[yellow]Error parsing platforms file: {e}[/]")
        return _load_defaults(path)
    except (KeyError, TypeError, ValueError) as e:
        console.print(f"[yellow]Invalid preset entry in {path}: {e}[/]")
        return _load_defaults(path)
    except OSError as e:
        console.print(f"[yellow]Error reading platforms file: {e}[/]")
        return _load_defaults(path)


def _load_defaults(failed: Path) -> dict[str, PlatformPreset]:
    if failed == DEFAULT_PLATFORMS_PATH:
        raise RuntimeError(f"Embedded presets are unreadable: {failed}")
    return _load_from_file(DEFAULT_PLATFORMS_PATH)


def save_default_platforms(path: Path) -> None:
    """
    Save default presets to a file for user customization.

    Args:
        path: Path to save the presets file
    """
    shutil.copy(DEFAULT_PLATFORMS_PATH, path)
    console.print(f"[green]Platform presets saved to:[/] {path}")
