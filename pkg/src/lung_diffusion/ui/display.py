"""
Rich display utilities for runs, datasets and reports.

Provides functions that build Rich tables, panels and progress bars; the
CLI prints them.
"""

from typing import Optional, Sequence

from rich.console import Console, Group
from rich.panel import Panel
from rich.progress import BarColumn, MofNCompleteColumn, Progress, SpinnerColumn, TextColumn, TimeElapsedColumn
from rich.table import Table
from rich.text import Text

from ..models import (
    DatasetManifest,
    DiffusionLogEntry,
    FidReport,
    MsSsimReport,
    RunConfig,
    VaeLogEntry,
)
from ..nn.gradcheck import GradCheckReport

# Texture score colours, non-solid (1) to solid (5)
TEXTURE_COLORS = {
    1: "bright_black",
    2: "cyan",
    3: "green",
    4: "yellow",
    5: "red",
}


def make_progress(console: Console) -> Progress:
    """Progress bar used by generation, training and sampling commands."""
    return Progress(
        SpinnerColumn(),
        TextColumn("[bold blue]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TextColumn("{task.fields[status]}"),
        TimeElapsedColumn(),
        console=console,
    )


def format_config_panel(config: RunConfig, digest: str) -> Panel:
    """
    Summary of the effective configuration.

    Args:
        config: Effective RunConfig after profile and flag overrides
        digest: Its config hash

    Returns:
        Rich Panel ready for console.print()
    """
    table = Table(show_header=False, box=None, padding=(0, 2))
    table.add_column("Key", style="bold cyan")
    table.add_column("Value")
    table.add_row("Seed", str(config.seed))
    table.add_row("Mode", config.mode.value)
    table.add_row("Volume dims", "×".join(str(d) for d in config.data.dims))
    table.add_row("VAE widths", ", ".join(str(w) for w in config.vae.widths))
    table.add_row("U-Net channels", ", ".join(str(c) for c in config.unet.channels()))
    table.add_row("Attention levels", ", ".join(str(l) for l in config.unet.resolved_attention_levels()) or "-")
    table.add_row("Timesteps", str(config.diffusion.num_timesteps))
    table.add_row("β range", f"{config.diffusion.beta_start:g} → {config.diffusion.beta_end:g}")
    table.add_row("LR (VAE / U-Net)", f"{config.train.lr_vae:g} / {config.train.lr_unet:g}")
    table.add_row("Config hash", Text(digest, style="dim"))
    return Panel(table, title="⚙️  Run configuration", border_style="cyan")


def format_manifest_table(manifest: DatasetManifest, title: str = "🫁 Dataset", limit: Optional[int] = 20) -> Table:
    """
    Table of manifest records with their nodules.

    Args:
        manifest: Dataset to show
        title: Table title
        limit: Maximum rows (None for all)
    """
    table = Table(title=title, show_header=True, header_style="bold magenta")
    table.add_column("#", style="dim", width=5)
    table.add_column("Volume", style="bold cyan")
    table.add_column("Mask", style="dim")
    table.add_column("Seed", justify="right")
    table.add_column("Nodules")

    records = manifest.records if limit is None else manifest.records[:limit]
    for i, record in enumerate(records):
        nodules = Text()
        for n, nodule in enumerate(record.nodules):
            if n:
                nodules.append(" ")
            color = TEXTURE_COLORS.get(nodule.texture, "white")
            nodules.append(f"r={nodule.radius:.1f}/T{nodule.texture}", style=color)
        table.add_row(
            str(i),
            record.volume_path,
            record.mask_path or "-",
            str(record.seed),
            nodules if record.nodules else Text("-", style="dim"),
        )
    if limit is not None and len(manifest) > limit:
        table.caption = f"... and {len(manifest) - limit} more"
    return table


def format_vae_summary(entries: Sequence[VaeLogEntry]) -> Panel:
    """First and last logged VAE losses."""
    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("Step", justify="right")
    for term in ("mae", "lpips", "adv_g", "adv_d", "kl"):
        table.add_column(term, justify="right")
    shown = list(entries[:1]) + (list(entries[-1:]) if len(entries) > 1 else [])
    for entry in shown:
        table.add_row(
            str(entry.step),
            f"{entry.mae:.4f}",
            f"{entry.lpips:.4f}",
            f"{entry.adv_g:.4f}",
            f"{entry.adv_d:.4f}",
            f"{entry.kl:.4f}",
        )
    return Panel(table, title="🧊 VAE training", border_style="blue")


def format_diffusion_summary(entries: Sequence[DiffusionLogEntry]) -> Panel:
    """Loss summary over a diffusion training run."""
    done = [e for e in entries if not e.skipped]
    skipped = len(entries) - len(done)
    lines = [Text(f"Steps trained: {len(done)}", style="bold")]
    if done:
        lines.append(Text(f"First loss: {done[0].loss:.5f}   Last loss: {done[-1].loss:.5f}"))
    if skipped:
        lines.append(Text(f"⚠️  Skipped non-finite steps: {skipped}", style="yellow"))
    return Panel(Group(*lines), title="🌫️  Diffusion training", border_style="blue")


def format_fid_panel(report: FidReport) -> Panel:
    """FID report with the ×10³ display convention."""
    body = Group(
        Text.assemble(("FID ×10³: ", "bold"), (f"{report.value_x1e3:.4f}", "bold green")),
        Text(f"FID (raw): {report.value:.6e}"),
        Text(f"Real volumes: {report.n_real}   Synthetic volumes: {report.n_synth}"),
        Text(
            f"Extractor: seed {report.extractor.seed}, widths {report.extractor.widths}, dim {report.extractor.dim}",
            style="dim",
        ),
        Text(f"Config hash: {report.config_hash}", style="dim"),
    )
    return Panel(body, title="📏 Fréchet distance", border_style="green")


def format_msssim_panel(report: MsSsimReport) -> Panel:
    """MS-SSIM diversity report (lower = more diverse)."""
    scales = ", ".join(f"{s:.4f}" for s in report.per_scale)
    body = Group(
        Text.assemble(("MS-SSIM: ", "bold"), (f"{report.value:.4f}", "bold green")),
        Text(f"Pairs: {report.pairs} of {report.n_synth} volumes (seed {report.seed})"),
        Text(f"Scales: {report.scales}   per scale: {scales}", style="dim"),
    )
    return Panel(body, title="🎲 Diversity", border_style="green")


def format_gradcheck_table(reports: Sequence[GradCheckReport]) -> Table:
    """Per-fragment worst relative error against the tolerance."""
    table = Table(title="🔬 Gradient check", show_header=True, header_style="bold magenta")
    table.add_column("Fragment", style="bold cyan")
    table.add_column("Tensors", justify="right")
    table.add_column("Max rel. error", justify="right")
    table.add_column("Worst tensor", style="dim")
    table.add_column("Status", justify="center")
    for report in reports:
        worst = max(report.checks, key=lambda c: c.max_rel_error, default=None)
        status = "[green]✓[/green]" if report.passed else "[red]✗[/red]"
        table.add_row(
            report.fragment,
            str(len(report.checks)),
            f"{report.max_rel_error:.2e}",
            worst.name if worst else "-",
            status,
        )
    return table
