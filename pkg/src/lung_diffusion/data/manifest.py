"""
Phantom datasets on disk: generation of volume/mask/sidecar triples and
the manifest that indexes them.
"""

import json
import logging
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from pydantic import ValidationError

from ..core import Rng
from ..errors import FormatError
from ..models.config import PhantomConfig
from ..models.records import DatasetManifest, ManifestRecord, PhantomSidecar
from ..utils import atomic_write, parallel_map
from .io import write_mask, write_volume
from .phantom import generate_phantom

logger = logging.getLogger(__name__)

VOLUME_SUFFIX = ".vol"
MASK_SUFFIX = ".msk"
SIDECAR_SUFFIX = ".json"
MANIFEST_NAME = "manifest.jsonl"


def phantom_seed(seed: int, index: int) -> int:
    """64-bit seed of the index-th phantom of a set generated from seed."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def phantom_stem(index: int) -> str:
    return f"phantom_{index:04d}"


def write_phantom(
    out_dir: Path,
    stem: str,
    config: PhantomConfig,
    seed: int,
    config_hash: Optional[str] = None,
    build: Optional[str] = None,
) -> ManifestRecord:
    """Generate one phantom from its own seed and write volume, mask and sidecar."""
    phantom = generate_phantom(config, Rng(seed).spawn("phantom"))
    out_dir = Path(out_dir)
    write_volume(out_dir / f"{stem}{VOLUME_SUFFIX}", phantom.volume)
    write_mask(out_dir / f"{stem}{MASK_SUFFIX}", phantom.mask)
    sidecar = PhantomSidecar(seed=seed, nodules=phantom.nodules, config_hash=config_hash, build_id=build)
    with atomic_write(out_dir / f"{stem}{SIDECAR_SUFFIX}", "w") as f:
        f.write(sidecar.model_dump_json(indent=2))
    return ManifestRecord(
        volume_path=f"{stem}{VOLUME_SUFFIX}",
        mask_path=f"{stem}{MASK_SUFFIX}",
        seed=seed,
        nodules=phantom.nodules,
        config_hash=config_hash,
        build_id=build,
    )


def generate_dataset(
    out_dir: Path,
    config: PhantomConfig,
    n: int,
    seed: int,
    workers: int = 1,
    config_hash: Optional[str] = None,
    build: Optional[str] = None,
    on_done: Optional[Callable[[ManifestRecord], None]] = None,
) -> DatasetManifest:
    """
    Generate n phantoms into out_dir and write its manifest.

    Each phantom has its own seed derived from (seed, index), so the set is
    identical for any worker count.

    Returns:
        DatasetManifest: Records in index order
    """
    if n < 0:
        raise ValueError(f"phantom count must be non-negative, got {n}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def task(index: int) -> ManifestRecord:
        record = write_phantom(out_dir, phantom_stem(index), config, phantom_seed(seed, index), config_hash, build)
        if on_done is not None:
            on_done(record)
        return record

    records = parallel_map(task, range(n), workers)
    manifest = DatasetManifest(records, root=out_dir)
    manifest.save(out_dir / MANIFEST_NAME)
    logger.info("Generated %d phantoms in %s", n, out_dir)
    return manifest


def build_manifest(directory: Path) -> DatasetManifest:
    """
    Index the volume/mask pairs in a directory, ordered by filename.

    Raises:
        FormatError: If volumes lack a mask (orphans are listed) or a sidecar is invalid
    """
    directory = Path(directory)
    volumes = sorted(p for p in directory.glob(f"*{VOLUME_SUFFIX}") if not p.name.startswith("."))
    orphans = [p.name for p in volumes if not p.with_suffix(MASK_SUFFIX).exists()]
    if orphans:
        raise FormatError(f"volumes without masks in {directory}: {', '.join(orphans)}")

    records = []
    for volume_path in volumes:
        sidecar_path = volume_path.with_suffix(SIDECAR_SUFFIX)
        try:
            sidecar = PhantomSidecar.model_validate(json.loads(sidecar_path.read_text(encoding="utf-8")))
        except FileNotFoundError:
            raise FormatError(f"missing sidecar {sidecar_path.name} for {volume_path.name}")
        except (json.JSONDecodeError, ValidationError) as e:
            raise FormatError(f"invalid sidecar {sidecar_path.name}: {e}")
        records.append(
            ManifestRecord(
                volume_path=volume_path.name,
                mask_path=volume_path.with_suffix(MASK_SUFFIX).name,
                seed=sidecar.seed,
                nodules=sidecar.nodules,
                config_hash=sidecar.config_hash,
                build_id=sidecar.build_id,
            )
        )
    return DatasetManifest(records, root=directory)


def load_manifest(path: Path) -> DatasetManifest:
    """
    Load a manifest file, or index a directory when given one.

    A directory containing manifest.jsonl loads that file.
    """
    path = Path(path)
    if path.is_dir():
        if (path / MANIFEST_NAME).exists():
            return DatasetManifest.load(path / MANIFEST_NAME)
        return build_manifest(path)
    return DatasetManifest.load(path)
