"""Utility functions for writing run artifacts."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
import csv
from datetime import datetime
import json
from pathlib import Path
from typing import Any

import numpy as np


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def write_json(path: Path, document: Any) -> Path:
    """Write ``document`` as sorted, indented JSON; returns ``path``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(document, sort_keys=True, indent=2, default=_json_default)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def write_csv(
    path: Path,
    rows: Sequence[Mapping[str, Any]],
    fieldnames: Sequence[str] | None = None,
) -> Path:
    """Write dict rows as CSV with a header; returns ``path``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    if fieldnames is None:
        fieldnames = list(rows[0]) if rows else []
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(fieldnames))
        writer.writeheader()
        writer.writerows(rows)
    return path


def make_run_dir(root: Path, command: str, now: datetime | None = None) -> Path:
    """Create ``root/<YYYYmmdd-HHMMSS>-<command>``, suffixed when taken."""
    stamp = (now or datetime.now()).strftime("%Y%m%d-%H%M%S")
    candidate = root / f"{stamp}-{command}"
    suffix = 1
    while candidate.exists():
        suffix += 1
        candidate = root / f"{stamp}-{command}-{suffix}"
    candidate.mkdir(parents=True)
    return candidate

