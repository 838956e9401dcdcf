"""
CLI command for sampling volumes from a trained run.
"""

from pathlib import Path
from typing import Optional

import typer

from ..data import read_mask
from ..diffusion import Generator, check_mask_for_mode, config_for_checkpoint, generate_samples, load_unet
from ..ui import format_manifest_table, make_progress
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
)


def sample(
    ckpt: Path = typer.Option(..., "--ckpt", help="U-Net checkpoint"),
    vae_ckpt: Path = typer.Option(..., "--vae-ckpt", help="VAE checkpoint"),
    mask: Optional[Path] = typer.Option(None, "--mask", help="Label mask (.msk) to condition on"),
    n: int = typer.Option(1, "--n", "-n", min=1, help="Number of samples"),
    out: Path = typer.Option(DEFAULT_RUN_DIR / "samples", "--out", "-o", help="Output directory"),
    texture_sweep: bool = typer.Option(
        False, "--texture-sweep", help="Render every sample once per nodule texture score 1-5"
    ),
    mode: Optional[str] = typer.Option(
        None, "--mode", "-m", help="Expected conditioning mode; the checkpoint sidecar decides, this only cross-checks it"
    ),
    config_path: Optional[Path] = CONFIG_OPTION,
    profile: str = PROFILE_OPTION,
    seed: Optional[int] = SEED_OPTION,
    n_workers: Optional[int] = WORKERS_OPTION,
):
    """
    Sample latents with T ancestral steps and decode them to volumes.

    Sample i uses the noise stream of seed + i, so reruns are bit-identical.
    The conditioning mode comes from the checkpoint sidecar.

    Example:
        lung-diffusion sample --ckpt runs/diffusion/unet.ckpt --vae-ckpt runs/vae/vae.ckpt \\
            --mask runs/phantoms/phantom_0000.msk --n 4 --out runs/samples
    """
    with handle_errors():
        config = config_for_checkpoint(ckpt, load_config(config_path, profile, seed), parse_mode(mode))
        labels = read_mask(mask) if mask is not None else None
        check_mask_for_mode(config.mode, labels, texture_sweep)
        unet, meta = load_unet(ckpt, config)
        vae = load_vae(vae_ckpt, config)
        generator = Generator(unet, vae, config, meta.latent_stats if meta is not None else None)

        total = n * 5 if texture_sweep else n
        console.print(f"\n[bold blue]Sampling {total} volume(s)[/bold blue] ({config.mode.value}) → [dim]{out}[/dim]")
        with make_progress(console) as progress:
            task = progress.add_task("Samples", total=total, status="")
            manifest = generate_samples(
                generator,
                out,
                n,
                labels=labels,
                sweep=texture_sweep,
                workers=workers(n_workers),
                on_done=lambda record: progress.update(task, advance=1, status=record.volume_path),
            )
        console.print(format_manifest_table(manifest, title="🧪 Samples"))
        console.print(f"\n✅ Wrote {len(manifest)} samples and manifest to {out}", style="bold green")
