"""Console-script entrypoint.

Monte Carlo commands print a banner with the run shape before numpy and
scipy are imported, so a long sweep shows feedback at once.
"""

from __future__ import annotations

import os
import sys
from importlib import metadata

_BANNER_SHOWN_ENV = "HAPSNOMA_BANNER_SHOWN"
_NO_BANNER_ENV = "HAPSNOMA_NO_BANNER"

# Commands that run trials; the others return in well under a second
MONTE_CARLO_COMMANDS = frozenset(
    {"run", "favprop", "sumrate-vs-power", "sumrate-vs-qos", "ee-vs-power"}
)


def _option_value(argv: list[str], *names: str) -> str | None:
    """Value of the last ``--name value`` or ``--name=value`` in argv."""
    found: str | None = None
    for i, arg in enumerate(argv):
        for name in names:
            if arg == name and i + 1 < len(argv):
                found = argv[i + 1]
            elif arg.startswith(f"{name}="):
                found = arg.split("=", 1)[1]
    return found


def _should_render_banner(argv: list[str]) -> bool:
    if os.environ.get(_BANNER_SHOWN_ENV) == "1" or os.environ.get(_NO_BANNER_ENV) == "1":
        return False
    if any(key.endswith("_COMPLETE") for key in os.environ):
        return False
    if not sys.stdout.isatty():
        return False
    if not argv or argv[0] not in MONTE_CARLO_COMMANDS:
        return False
    return not any(flag in argv for flag in ("--help", "-h"))


def _package_version() -> str:
    try:
        return metadata.version("hapsnoma")
    except metadata.PackageNotFoundError:
        return "dev"


def banner_lines(argv: list[str]) -> list[str]:
    """Banner rows: version, command, platform and trial count."""
    platform = _option_value(argv, "--platform", "-p") or "config"
    trials = _option_value(argv, "--trials", "-n") or "config"
    return [
        f"hapsnoma v{_package_version()}",
        f"command:  {argv[0]}",
        f"platform: {platform}",
        f"trials:   {trials}",
    ]


def _render_banner(argv: list[str]) -> None:
    rows = banner_lines(argv)
    width = max(len(row) for row in rows) + 2
    body = "\n".join(f"│ {row:<{width - 2}} │" for row in rows)
    print(f"╭{'─' * (width + 2)}╮\n{body}\n╰{'─' * (width + 2)}╯", flush=True)


def main() -> None:
    """Entry point used by the console script."""
    argv = sys.argv[1:]
    if _should_render_banner(argv):
        _render_banner(argv)
        os.environ[_BANNER_SHOWN_ENV] = "1"

    from .cli import app

    app()
