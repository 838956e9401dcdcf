"""
CLI commands for procedural lung phantom datasets.
"""

from pathlib import Path
from typing import Optional

import typer

from ..data import generate_dataset
from ..models import config_hash
from ..ui import format_manifest_table, make_progress
from ..utils import DEFAULT_RUN_DIR, build_id
from .common import (
    CONFIG_OPTION,
    PROFILE_OPTION,
    SEED_OPTION,
    WORKERS_OPTION,
    console,
    handle_errors,
    load_config,
    workers,
)

app = typer.Typer(
    name="phantom",
    help="Generate procedural lung phantoms with nodule masks",
    no_args_is_help=True,
)


@app.command(name="gen")
def gen(
    n: int = typer.Option(..., "--n", "-n", min=1, help="Number of phantoms"),
    out: Path = typer.Option(DEFAULT_RUN_DIR / "phantoms", "--out", "-o", help="Output directory"),
    config_path: Optional[Path] = CONFIG_OPTION,
    profile: str = PROFILE_OPTION,
    seed: Optional[int] = SEED_OPTION,
    n_workers: Optional[int] = WORKERS_OPTION,
):
    """
    Generate N phantom volumes, label masks, sidecars and a manifest.

    Example:
        lung-diffusion phantom gen --n 32 --out runs/phantoms --seed 7
    """
    with handle_errors():
        config = load_config(config_path, profile, seed)
        console.print(f"\n[bold blue]Generating {n} phantoms[/bold blue] → [dim]{out}[/dim]")
        with make_progress(console) as progress:
            task = progress.add_task("Phantoms", total=n, status="")
            manifest = generate_dataset(
                out,
                config.data,
                n,
                config.seed,
                workers=workers(n_workers),
                config_hash=config_hash(config.data),
                build=build_id(),
                on_done=lambda record: progress.update(task, advance=1, status=record.volume_path),
            )
        console.print(format_manifest_table(manifest))
        console.print(f"\n✅ Wrote {len(manifest)} phantoms and manifest to {out}", style="bold green")
