"""
Lung Diffusion CLI - Main entry point

Conditional 3D latent diffusion on procedural lung phantoms: phantom
generation, VAE and U-Net training, mask-conditioned sampling and
evaluation, all driven by one JSON config and one seed.
"""

import typer

from . import __version__
from .cli import config, diffusion, evaluate, gradcheck, phantom, sample, vae
from .cli.common import console, setup_logging
from .utils import build_id

# Create main Typer app
app = typer.Typer(
    name="lung-diffusion",
    help="Desk-scale conditional 3D latent diffusion on lung phantoms",
    add_completion=False,
)

# Register subcommands
app.add_typer(phantom.app, name="phantom")
app.add_typer(vae.app, name="vae")
app.add_typer(diffusion.app, name="diffusion")
app.add_typer(evaluate.app, name="eval")
app.add_typer(config.app, name="config")

# Single commands, not groups
app.command(name="sample", help="Sample volumes from a trained U-Net and VAE")(sample.sample)
app.command(name="gradcheck", help="Run the finite-difference gradient suite")(gradcheck.gradcheck)


@app.callback()
def main(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug-level logging on stderr"),
):
    """Desk-scale conditional 3D latent diffusion on lung phantoms."""
    setup_logging(verbose)


@app.command()
def version():
    """Show version information"""
    console.print(f"[bold cyan]Lung Diffusion CLI[/bold cyan] v{__version__}")
    console.print(f"[dim]build {build_id()}[/dim]")


if __name__ == "__main__":
    app()
