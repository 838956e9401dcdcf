"""
CLI commands for inspecting the effective run configuration.
"""

from pathlib import Path
from typing import Optional

import typer

from ..models import config_hash
from ..ui import format_config_panel
from .common import CONFIG_OPTION, PROFILE_OPTION, SEED_OPTION, console, handle_errors, load_config, parse_mode, write_json

app = typer.Typer(
    name="config",
    help="Show or dump the effective configuration",
    no_args_is_help=True,
)


@app.command(name="show")
def show(
    mode: Optional[str] = typer.Option(None, "--mode", "-m", help="Override the conditioning mode"),
    config_path: Optional[Path] = CONFIG_OPTION,
    profile: str = PROFILE_OPTION,
    seed: Optional[int] = SEED_OPTION,
):
    """
    Print the effective configuration and its hash.

    Example:
        lung-diffusion config show --profile full
    """
    with handle_errors():
        config = load_config(config_path, profile, seed, parse_mode(mode))
        console.print(format_config_panel(config, config_hash(config)))


@app.command(name="dump")
def dump(
    out: Path = typer.Option(..., "--out", "-o", help="Destination JSON file"),
    mode: Optional[str] = typer.Option(None, "--mode", "-m", help="Override the conditioning mode"),
    config_path: Optional[Path] = CONFIG_OPTION,
    profile: str = PROFILE_OPTION,
    seed: Optional[int] = SEED_OPTION,
):
    """
    Write the effective configuration as JSON (a starting point for --config).

    Example:
        lung-diffusion config dump --out run.json
    """
    with handle_errors():
        config = load_config(config_path, profile, seed, parse_mode(mode))
        write_json(out, config.to_json())
        console.print(f"✅ Config written to {out} [dim]({config_hash(config)[:12]})[/dim]", style="bold green")
