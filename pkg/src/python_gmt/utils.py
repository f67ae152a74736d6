"""
Utility Functions

Logging setup, artifact I/O and hashing shared by the toolkit.
"""

import csv
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from rich.console import Console
from rich.logging import RichHandler

from .exceptions import GMTInputError

logger = logging.getLogger(__name__)


def setup_logging(debug: bool = False, log_file: Optional[str] = None) -> None:
    """Setup logging configuration with Rich formatting."""

    log_level = logging.DEBUG if debug else logging.INFO

    rich_handler = RichHandler(
        console=Console(stderr=True),
        show_time=True,
        show_path=debug,
        markup=True,
        rich_tracebacks=True,
    )

    logging.basicConfig(
        level=log_level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[rich_handler],
    )

    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(log_level)
        file_formatter = logging.Formatter(
            "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
        )
        file_handler.setFormatter(file_formatter)
        logging.getLogger().addHandler(file_handler)


def as_points(x: Any, dimension: Optional[int] = None) -> np.ndarray:
    """Coerce input to a finite (n, D) float array."""
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2:
        raise GMTInputError(f"Expected points of shape (n, D), got {pts.shape}")
    if dimension is not None and pts.shape[1] != dimension:
        raise GMTInputError(
            f"Expected {dimension}-dimensional points, got {pts.shape[1]}"
        )
    if not np.all(np.isfinite(pts)):
        raise GMTInputError("Points must be finite")
    return pts


def write_points_csv(
    path: Union[str, Path], points: np.ndarray, weights: Optional[np.ndarray] = None
) -> Path:
    """Write points as CSV with header ``x0,...,xd,weight``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pts = np.asarray(points, dtype=float)
    if weights is None:
        weights = np.ones(len(pts))
    header = [f"x{k}" for k in range(pts.shape[1])] + ["weight"]

    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for p, w in zip(pts, weights):
            writer.writerow([repr(float(c)) for c in p] + [repr(float(w))])

    return path


def read_points_csv(path: Union[str, Path]) -> Tuple[np.ndarray, np.ndarray]:
    """Read a CSV written by :func:`write_points_csv`."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Point cloud file not found: {path}")

    with open(path, "r", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        rows = [list(map(float, row)) for row in reader if row]

    if header is None or not header or header[-1] != "weight":
        raise GMTInputError(f"Malformed point cloud header in {path}")
    if not rows:
        return np.zeros((0, len(header) - 1)), np.zeros(0)

    data = np.asarray(rows, dtype=float)
    return data[:, :-1], data[:, -1]


def write_rows_csv(
    path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence[Any]]
) -> Path:
    """Write a table; floats are written with ``repr`` for byte stability."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])

    return path


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def write_json(path: Union[str, Path], data: Any) -> Path:
    """Write JSON with sorted keys so identical data gives identical bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with open(path, "w") as f:
        json.dump(_jsonable(data), f, indent=2, sort_keys=True)
        f.write("\n")

    return path


def read_json(path: Union[str, Path]) -> Any:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"JSON file not found: {path}")
    with open(path, "r") as f:
        return json.load(f)


def file_sha256(path: Union[str, Path]) -> str:
    """Hex SHA-256 digest of a file."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def bundle_digest(paths: List[Path], root: Path) -> Dict[str, Any]:
    """Per-file digests plus one digest over all of them in path order."""
    files = {}
    total = hashlib.sha256()
    for p in sorted(paths):
        rel = str(p.relative_to(root))
        h = file_sha256(p)
        files[rel] = h
        total.update(rel.encode())
        total.update(h.encode())
    return {"files": files, "sha256": total.hexdigest()}


def parse_float_list(text: str) -> List[float]:
    """Parse ``"0.5,1,2"`` into floats; empty entries are rejected."""
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as e:
        raise GMTInputError(f"Cannot parse number list '{text}': {e}")
