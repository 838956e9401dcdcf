"""Procedural lung phantoms, binary volume/mask formats and dataset manifests."""

from .io import read_mask, read_volume, write_mask, write_volume
from .manifest import MANIFEST_NAME, build_manifest, generate_dataset, load_manifest, phantom_seed
from .phantom import Phantom, generate_phantom, nodule_intensity

__all__ = [
    "read_mask",
    "read_volume",
    "write_mask",
    "write_volume",
    "MANIFEST_NAME",
    "build_manifest",
    "generate_dataset",
    "load_manifest",
    "phantom_seed",
    "Phantom",
    "generate_phantom",
    "nodule_intensity",
]
