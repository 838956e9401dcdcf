"""
Shared CLI plumbing: config loading with flag overrides, logging setup,
worker resolution and the error-to-exit-code mapping.
"""

import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape

from ..errors import ConfigError, LandError, NumericalError
from ..models import ConditioningMode, RunConfig
from ..utils import atomic_write, resolve_workers

# Artifacts and summaries go to stdout, logs and errors to stderr
console = Console()
err_console = Console(stderr=True)

EXIT_CONFIG = 1
EXIT_NUMERICAL = 2

PROFILES = {
    "desk": RunConfig.desk,
    "full": RunConfig.full_scale,
}

# Reusable options shared by every command that reads a RunConfig
CONFIG_OPTION = typer.Option(None, "--config", "-c", help="JSON RunConfig file (missing sections take defaults)")
PROFILE_OPTION = typer.Option("desk", "--profile", help="Base profile when no config file is given: desk or full")
SEED_OPTION = typer.Option(None, "--seed", "-s", help="Override the global seed")
WORKERS_OPTION = typer.Option(None, "--workers", "-w", help="Worker threads (default: LAND_THREADS or CPU count)")


def setup_logging(verbose: bool = False) -> None:
    """Route library logging through a Rich handler on stderr."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=err_console, show_path=False, rich_tracebacks=False)],
        force=True,
    )


def parse_mode(value: Optional[str]) -> Optional[ConditioningMode]:
    """
    Parse a --mode flag.

    Raises:
        ConfigError: If the value is not a known mode
    """
    if value is None:
        return None
    try:
        return ConditioningMode(value)
    except ValueError:
        choices = ", ".join(m.value for m in ConditioningMode)
        raise ConfigError(f"unknown mode '{value}' (choose from {choices})")


def load_config(
    config_path: Optional[Path] = None,
    profile: str = "desk",
    seed: Optional[int] = None,
    mode: Optional[ConditioningMode] = None,
) -> RunConfig:
    """
    Effective RunConfig: file (or profile), then --seed and --mode overrides.

    Raises:
        ConfigError: If the file is invalid or the profile unknown
    """
    if config_path is not None:
        config = RunConfig.from_json_file(config_path)
    else:
        if profile not in PROFILES:
            raise ConfigError(f"unknown profile '{profile}' (choose from {', '.join(PROFILES)})")
        config = PROFILES[profile]()
    config = config.with_seed(seed)
    if mode is not None:
        config = config.with_mode(mode)
    return config


def workers(requested: Optional[int]) -> int:
    return resolve_workers(requested)


def write_json(path: Path, text: str) -> None:
    """Write a report or config atomically, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with atomic_write(path, "w") as f:
        f.write(text)
        if not text.endswith("\n"):
            f.write("\n")


def print_error(message: str) -> None:
    err_console.print(f"\n❌ Error: {escape(message)}", style="bold red")


@contextmanager
def handle_errors() -> Iterator[None]:
    """
    Map pipeline exceptions to exit codes.

    Exit 1 covers configuration, validation, shape and format problems;
    exit 2 covers numerical failures at run time.
    """
    try:
        yield
    except typer.Exit:
        raise
    except NumericalError as e:
        print_error(str(e))
        raise typer.Exit(code=EXIT_NUMERICAL)
    except (LandError, ValidationError, FileNotFoundError, ValueError) as e:
        print_error(str(e))
        raise typer.Exit(code=EXIT_CONFIG)
