"""
CLI commands for training the 3D VAE and reconstructing volumes with it.
"""

from pathlib import Path
from typing import Optional

import numpy as np
import typer

from ..data import load_manifest, read_volume, write_volume
from ..models import VaeLogEntry
from ..ui import format_vae_summary, make_progress
from ..utils import DEFAULT_RUN_DIR, parallel_map
from ..vae import VaeTrainer, load_vae
from ..vae.trainer import LOG_NAME
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
    name="vae",
    help="Train the 3D VAE and reconstruct volumes",
    no_args_is_help=True,
)


@app.command(name="train")
def train(
    data: Path = typer.Option(..., "--data", "-d", help="Manifest file or phantom directory"),
    out: Path = typer.Option(DEFAULT_RUN_DIR / "vae", "--out", "-o", help="Run directory for checkpoint and log"),
    resume: bool = typer.Option(False, "--resume", help="Continue from the checkpoint in --out"),
    steps: Optional[int] = typer.Option(None, "--steps", min=1, help="Override train.steps"),
    config_path: Optional[Path] = CONFIG_OPTION,
    profile: str = PROFILE_OPTION,
    seed: Optional[int] = SEED_OPTION,
    n_workers: Optional[int] = WORKERS_OPTION,
):
    """
    Train the VAE (AdamW, batch size 1) with atomic checkpoints.

    Example:
        lung-diffusion vae train --data runs/phantoms --out runs/vae
    """
    with handle_errors():
        config = load_config(config_path, profile, seed)
        total = steps or config.train.steps
        manifest = load_manifest(data)
        volumes = parallel_map(read_volume, manifest.volume_paths(), workers(n_workers))

        trainer = VaeTrainer(config)
        if resume and trainer.resume(out):
            console.print(f"[dim]Resuming from step {trainer.step}[/dim]")
        else:
            (out / LOG_NAME).unlink(missing_ok=True)
        write_json(out / "config.json", config.to_json())

        console.print(f"\n[bold blue]Training VAE on {len(volumes)} volumes[/bold blue] for {total} steps")
        with make_progress(console) as progress:
            task = progress.add_task("VAE", total=total, completed=trainer.step, status="")

            def on_step(entry: VaeLogEntry) -> None:
                progress.update(task, completed=entry.step, status=f"mae {entry.mae:.4f}")

            entries = trainer.fit(volumes, total, out, config.train.checkpoint_every, on_step)
        if entries:
            console.print(format_vae_summary(entries))
        console.print(f"\n✅ VAE checkpoint at step {trainer.step} in {out}", style="bold green")


@app.command(name="reconstruct")
def reconstruct(
    ckpt: Path = typer.Option(..., "--ckpt", help="VAE checkpoint"),
    input_path: Path = typer.Option(..., "--in", "-i", help="Input volume file"),
    out: Path = typer.Option(..., "--out", "-o", help="Output volume file"),
    config_path: Optional[Path] = CONFIG_OPTION,
    profile: str = PROFILE_OPTION,
    seed: Optional[int] = SEED_OPTION,
):
    """
    Encode a volume to its posterior mean and decode it back.

    Example:
        lung-diffusion vae reconstruct --ckpt runs/vae/vae.ckpt --in phantom_0000.vol --out recon.vol
    """
    with handle_errors():
        config = load_config(config_path, profile, seed)
        vae = load_vae(ckpt, config)
        volume = read_volume(input_path)
        recon = vae.reconstruct(volume)
        write_volume(out, recon)
        mae = float(np.abs(recon - volume).mean())
        console.print(f"✅ Reconstruction written to {out}", style="bold green")
        console.print(f"   MAE: [bold]{mae:.5f}[/bold]")
