"""
Records describing phantom datasets on disk.

A dataset manifest is a newline-delimited JSON file, one ManifestRecord per
line; paths inside it are relative to the manifest's directory.
"""

import json
from pathlib import Path
from typing import Iterator, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..errors import FormatError
from ..utils import atomic_write


class NoduleRecord(BaseModel):
    """One spherical nodule: integer centre (z, y, x), radius in voxels, texture class."""

    model_config = ConfigDict(frozen=True)

    center: tuple[int, int, int]
    radius: float = Field(..., gt=0)
    texture: int = Field(..., ge=1, le=5, description="1 = non-solid ... 5 = solid")


class ManifestRecord(BaseModel):
    """One volume (and optionally its mask) in a dataset."""

    model_config = ConfigDict(extra="forbid")

    volume_path: str
    mask_path: Optional[str] = None
    seed: int = Field(..., ge=0)
    nodules: list[NoduleRecord] = Field(default_factory=list)
    config_hash: Optional[str] = None
    build_id: Optional[str] = None


class DatasetManifest:
    """
    Ordered records plus the directory they resolve against.

    Example:
        manifest = DatasetManifest.load(Path("phantoms/manifest.jsonl"))
        for record in manifest:
            volume = read_volume(manifest.resolve(record.volume_path))
    """

    def __init__(self, records: Optional[list[ManifestRecord]] = None, root: Optional[Path] = None):
        self.records: list[ManifestRecord] = list(records or [])
        self.root = Path(root) if root is not None else Path(".")
        seen = set()
        for record in self.records:
            if record.volume_path in seen:
                raise FormatError(f"duplicate volume path in manifest: {record.volume_path}")
            seen.add(record.volume_path)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ManifestRecord]:
        return iter(self.records)

    def __getitem__(self, index: int) -> ManifestRecord:
        return self.records[index]

    def resolve(self, relative: str) -> Path:
        return self.root / relative

    def volume_paths(self) -> list[Path]:
        return [self.resolve(r.volume_path) for r in self.records]

    @classmethod
    def load(cls, path: Path) -> "DatasetManifest":
        """
        Read a manifest; record paths resolve against its directory.

        Raises:
            FileNotFoundError: If the manifest does not exist
            FormatError: If a line is not a valid record
        """
        path = Path(path)
        records = []
        offset = 0
        with open(path, "rb") as f:
            for lineno, raw in enumerate(f, start=1):
                line = raw.strip()
                if line:
                    try:
                        records.append(ManifestRecord.model_validate(json.loads(line)))
                    except (json.JSONDecodeError, UnicodeDecodeError, ValidationError) as e:
                        raise FormatError(f"invalid manifest record on line {lineno} of {path}: {e}", offset)
                offset += len(raw)
        return cls(records, root=path.parent)

    def save(self, path: Path) -> None:
        path = Path(path)
        with atomic_write(path, "w") as f:
            for record in self.records:
                f.write(record.model_dump_json() + "\n")
        self.root = path.parent


class PhantomSidecar(BaseModel):
    """Per-phantom JSON written next to its volume and mask."""

    seed: int = Field(..., ge=0)
    nodules: list[NoduleRecord] = Field(default_factory=list)
    config_hash: Optional[str] = None
    build_id: Optional[str] = None
