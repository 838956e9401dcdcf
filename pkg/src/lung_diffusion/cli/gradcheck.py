"""
CLI command running the finite-difference gradient suite.
"""

from typing import Optional

import typer

from ..gradsuite import run_suite
from ..nn.gradcheck import DEFAULT_TOLERANCE
from ..ui import format_gradcheck_table
from .common import EXIT_NUMERICAL, console, err_console, handle_errors


def gradcheck(
    seed: int = typer.Option(0, "--seed", "-s", help="Seed for shapes, inputs and sampled entries"),
    tolerance: float = typer.Option(DEFAULT_TOLERANCE, "--tolerance", help="Pass threshold on relative error"),
    max_entries: Optional[int] = typer.Option(16, "--max-entries", help="Entries checked per tensor"),
    layers_only: bool = typer.Option(False, "--layers-only", help="Skip the VAE and U-Net fragments"),
):
    """
    Compare analytic gradients of every layer kind, the VAE and the U-Net
    against central finite differences.

    Exits with code 2 when any fragment exceeds the tolerance.

    Example:
        lung-diffusion gradcheck
    """
    with handle_errors():
        with console.status("[bold blue]Running gradient checks..."):
            reports = run_suite(seed, tolerance, max_entries, include_models=not layers_only)
        console.print(format_gradcheck_table(reports))
        failed = [r.fragment for r in reports if not r.passed]
        if failed:
            err_console.print(f"\n❌ Gradient check failed for: {', '.join(failed)}", style="bold red")
            raise typer.Exit(code=EXIT_NUMERICAL)
        console.print(f"\n✅ All {len(reports)} fragments within {tolerance:g}", style="bold green")
