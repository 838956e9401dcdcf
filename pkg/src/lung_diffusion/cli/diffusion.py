"""
CLI commands for training the latent diffusion U-Net.
"""

import json
from pathlib import Path
from typing import Optional

import typer

from ..conditioning import codebook
from ..data import load_manifest
from ..diffusion import DiffusionTrainer, prepare_training_data
from ..diffusion.trainer import LOG_NAME
from ..models import DiffusionLogEntry
from ..ui import format_diffusion_summary, make_progress
from ..utils import DEFAULT_RUN_DIR
from ..vae import load_vae
from .common import (
    CONFIG_OPTION,
    PROFILE_OPTION,
    SEED_OPTION,
    WORKERS_OPTION,
    console,
    handle_errors,
    load_config,
    parse_mode,
    workers,
    write_json,
)

CODEBOOK_NAME = "encoded_codebook.json"

app = typer.Typer(
    name="diffusion",
    help="Train the conditional latent diffusion U-Net",
    no_args_is_help=True,
)


@app.command(name="train")
def train(
    data: Path = typer.Option(..., "--data", "-d", help="Manifest file or phantom directory"),
    vae_ckpt: Path = typer.Option(..., "--vae-ckpt", help="Trained VAE checkpoint"),
    out: Path = typer.Option(DEFAULT_RUN_DIR / "diffusion", "--out", "-o", help="Run directory"),
    mode: Optional[str] = typer.Option(
        None, "--mode", "-m", help="uncond | nodule | nodule+lung | nodule+lung+texture"
    ),
    resume: bool = typer.Option(False, "--resume", help="Continue from the checkpoint in --out"),
    dump_encoded: bool = typer.Option(
        False, "--dump-encoded", help=f"Write the encoded mask values to {CODEBOOK_NAME}"
    ),
    steps: Optional[int] = typer.Option(None, "--steps", min=1, help="Override train.steps"),
    config_path: Optional[Path] = CONFIG_OPTION,
    profile: str = PROFILE_OPTION,
    seed: Optional[int] = SEED_OPTION,
    n_workers: Optional[int] = WORKERS_OPTION,
):
    """
    Encode the dataset with the VAE and train the U-Net with the min-SNR v-loss.

    Example:
        lung-diffusion diffusion train --data runs/phantoms --vae-ckpt runs/vae/vae.ckpt --mode nodule+lung
    """
    with handle_errors():
        config = load_config(config_path, profile, seed, parse_mode(mode))
        total = steps or config.train.steps
        n = workers(n_workers)
        manifest = load_manifest(data)
        vae = load_vae(vae_ckpt, config)
        console.print(f"[dim]Encoding {len(manifest)} volumes ({config.mode.value})...[/dim]")
        training_data = prepare_training_data(manifest, vae, config, n)

        if dump_encoded:
            payload = {
                "mode": config.mode.value,
                "codebook": codebook(config.mode) if config.mode.conditional else [],
                "observed": training_data.codebook,
            }
            write_json(out / CODEBOOK_NAME, json.dumps(payload, indent=2))
            console.print(f"📝 Encoded codebook written to [dim]{out / CODEBOOK_NAME}[/dim]")

        trainer = DiffusionTrainer(config, stats=training_data.stats)
        if resume and trainer.resume(out):
            console.print(f"[dim]Resuming from step {trainer.step}[/dim]")
        else:
            (out / LOG_NAME).unlink(missing_ok=True)
        write_json(out / "config.json", config.to_json())

        console.print(f"\n[bold blue]Training U-Net ({config.mode.value})[/bold blue] for {total} steps")
        with make_progress(console) as progress:
            task = progress.add_task("U-Net", total=total, completed=trainer.step, status="")

            def on_step(entry: DiffusionLogEntry) -> None:
                status = "skipped" if entry.skipped else f"loss {entry.loss:.4f} t={entry.t}"
                progress.update(task, completed=entry.step, status=status)

            entries = trainer.fit(training_data, total, out, config.train.checkpoint_every, on_step)
        if entries:
            console.print(format_diffusion_summary(entries))
        console.print(f"\n✅ U-Net checkpoint at step {trainer.step} in {out}", style="bold green")
