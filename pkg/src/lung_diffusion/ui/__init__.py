"""
UI utilities for the lung diffusion CLI.

Provides Rich-based tables, panels and progress bars.
"""

from .display import (
    TEXTURE_COLORS,
    format_config_panel,
    format_diffusion_summary,
    format_fid_panel,
    format_gradcheck_table,
    format_manifest_table,
    format_msssim_panel,
    format_vae_summary,
    make_progress,
)

__all__ = [
    "TEXTURE_COLORS",
    "format_config_panel",
    "format_diffusion_summary",
    "format_fid_panel",
    "format_gradcheck_table",
    "format_manifest_table",
    "format_msssim_panel",
    "format_vae_summary",
    "make_progress",
]
