"""
CLI commands for evaluating generated sets: fidelity (FID) and diversity (MS-SSIM).
"""

from pathlib import Path
from typing import Optional

import typer

from ..data import load_manifest
from ..metrics import fid_report, msssim_report
from ..ui import format_fid_panel, format_msssim_panel
from .common import (
    CONFIG_OPTION,
    PROFILE_OPTION,
    SEED_OPTION,
    WORKERS_OPTION,
    console,
    handle_errors,
    load_config,
    workers,
    write_json,
)

app = typer.Typer(
    name="eval",
    help="Evaluate synthetic volumes against real ones",
    no_args_is_help=True,
)


@app.command(name="fid")
def fid(
    real: Path = typer.Option(..., "--real", help="Manifest or directory of reference volumes"),
    synth: Path = typer.Option(..., "--synth", help="Manifest or directory of generated volumes"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Write the JSON report here"),
    config_path: Optional[Path] = CONFIG_OPTION,
    profile: str = PROFILE_OPTION,
    seed: Optional[int] = SEED_OPTION,
    n_workers: Optional[int] = WORKERS_OPTION,
):
    """
    Fréchet distance between feature statistics of two sets.

    Example:
        lung-diffusion eval fid --real runs/phantoms --synth runs/samples --out fid.json
    """
    with handle_errors():
        config = load_config(config_path, profile, seed)
        report = fid_report(load_manifest(real), load_manifest(synth), config, workers=workers(n_workers))
        console.print(format_fid_panel(report))
        if out is not None:
            write_json(out, report.model_dump_json(indent=2))
            console.print(f"📝 Report written to [dim]{out}[/dim]")


@app.command(name="msssim")
def msssim(
    set_path: Path = typer.Option(..., "--set", help="Manifest or directory of volumes"),
    pairs: Optional[int] = typer.Option(None, "--pairs", "-p", min=1, help="Random pairs (default: eval.pairs)"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Write the JSON report here"),
    config_path: Optional[Path] = CONFIG_OPTION,
    profile: str = PROFILE_OPTION,
    seed: Optional[int] = SEED_OPTION,
    n_workers: Optional[int] = WORKERS_OPTION,
):
    """
    Mean 3D MS-SSIM over random distinct pairs (lower = more diverse).

    Example:
        lung-diffusion eval msssim --set runs/samples --pairs 32
    """
    with handle_errors():
        config = load_config(config_path, profile, seed)
        report = msssim_report(load_manifest(set_path), config, pairs=pairs, workers=workers(n_workers))
        console.print(format_msssim_panel(report))
        if out is not None:
            write_json(out, report.model_dump_json(indent=2))
            console.print(f"📝 Report written to [dim]{out}[/dim]")
