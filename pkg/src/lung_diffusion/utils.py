"""
Shared runtime utilities: atomic file writes, worker pools, build identity.
"""

import json
import os
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Generator, Iterable, Optional, TypeVar

from platformdirs import user_data_dir

from . import __version__

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV_VAR = "LAND_THREADS"

# Default run directory when a command is not given --out
DEFAULT_RUN_DIR = Path(user_data_dir("lung-diffusion", appauthor=False)) / "runs"


@contextmanager
def atomic_write(path: Path, mode: str = "wb") -> Generator:
    """
    Context manager writing to a temporary sibling file, renamed into place on success.

    The target either keeps its previous content or receives the complete new
    content; a failed write never leaves a partial file behind.

    Args:
        path: Final destination
        mode: File mode ("wb" or "w")

    Yields:
        File object open on the temporary file

    Example:
        with atomic_write(Path("run/vae.ckpt")) as f:
            f.write(payload)
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    tmp_path = Path(tmp_name)
    try:
        encoding = None if "b" in mode else "utf-8"
        with os.fdopen(fd, mode, encoding=encoding) as f:
            yield f
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp_path, path)
    except BaseException:
        if tmp_path.exists():
            tmp_path.unlink()
        raise


def resolve_workers(requested: Optional[int] = None) -> int:
    """
    Worker count: explicit flag, else LAND_THREADS, else the CPU count.

    Returns:
        int: At least 1
    """
    if requested is not None:
        return max(1, requested)
    env = os.environ.get(THREADS_ENV_VAR)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"{THREADS_ENV_VAR} must be an integer, got {env!r}")
    return max(1, os.cpu_count() or 1)


def parallel_map(fn: Callable[[T], R], items: Iterable[T], workers: int = 1) -> list[R]:
    """Order-preserving map over a thread pool (sequential when workers == 1)."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def build_id() -> str:
    """git-describe-style build identifier, falling back to the package version."""
    try:
        result = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if result.returncode == 0 and result.stdout.strip():
            return f"v{__version__}-{result.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return f"v{__version__}"


def append_jsonl(path: Path, line: str) -> None:
    """Append one JSON line to a log file, creating it if needed."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as f:
        f.write(line.rstrip("\n") + "\n")


def truncate_jsonl(path: Path, max_step: int) -> int:
    """
    Drop log lines whose "step" exceeds max_step (used when resuming).

    Returns:
        int: Number of lines kept
    """
    path = Path(path)
    if not path.exists():
        return 0
    kept = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip() and json.loads(line).get("step", 0) <= max_step:
            kept.append(line)
    with atomic_write(path, "w") as f:
        f.write("".join(f"{line}\n" for line in kept))
    return len(kept)
