"""Persistent transcript cache for judge comparisons."""

from __future__ import annotations

from datetime import datetime, timezone
import hashlib
import json
import logging
from pathlib import Path
import threading
from typing import TYPE_CHECKING, Any

from .exceptions import CacheError

if TYPE_CHECKING:
    from .judge import ComparisonQuery, ComparisonResult

_LOGGER = logging.getLogger(__name__)


def make_cache_key(
    query: ComparisonQuery,
    template_version: str,
    model_id: str,
    seed: int,
    draw: int,
) -> str:
    """Return the canonical digest identifying one comparison.

    The key covers task, label, the ordered feature pair, prompt template
    version and model id, plus the run seed and draw index so that repeated
    samples of one pair stay distinct.
    """
    document = {
        "task": query.task_description,
        "label": query.label_name,
        "a": [query.feature_a.name, query.feature_a.text],
        "b": [query.feature_b.name, query.feature_b.text],
        "template": template_version,
        "model": model_id,
        "seed": seed,
        "draw": draw,
    }
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class TranscriptCache:
    """Append-only JSON-lines cache of comparison results.

    Every line holds ``{key, winner, raw_response, latency_ms, timestamp}``.
    The file is read once at construction; later puts append and flush
    immediately so an interrupted run can be resumed.
    """

    def __init__(self, path: str | Path) -> None:
        """Open (or create) the cache file at ``path``.

        Raises:
            CacheError: A line of the existing file is not a valid record.
        """
        self.path = Path(path)
        self._lock = threading.Lock()
        self._records: dict[str, dict[str, Any]] = {}
        self.hits = 0
        self.misses = 0
        if self.path.exists():
            self._load()
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)
        _LOGGER.debug("Transcript cache %s holds %d records", self.path, len(self))

    def __len__(self) -> int:
        """Number of cached records."""
        return len(self._records)

    def _load(self) -> None:
        with self.path.open(encoding="utf-8") as handle:
            for line_number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    key = record["key"]
                    if record["winner"] not in ("A", "B"):
                        raise ValueError(f"bad winner {record['winner']!r}")
                    if not isinstance(record["raw_response"], str):
                        raise ValueError("raw_response must be text")
                except (ValueError, KeyError, TypeError) as err:
                    raise CacheError(
                        f"Corrupt cache record in {self.path}: {err}", line_number
                    ) from err
                # Later lines win, matching append order
                self._records[key] = record

    def get(self, key: str) -> ComparisonResult | None:
        """Return the cached result for ``key``, or None on a miss."""
        from .judge import ComparisonResult

        with self._lock:
            record = self._records.get(key)
            if record is None:
                self.misses += 1
                return None
            self.hits += 1
        return ComparisonResult(
            winner=record["winner"],
            raw_response=record["raw_response"],
            source="cache",
            latency_ms=float(record.get("latency_ms", 0.0)),
        )

    def put(self, key: str, result: ComparisonResult) -> None:
        """Store ``result`` under ``key`` and append it to the file."""
        record = {
            "key": key,
            "winner": result.winner,
            "raw_response": result.raw_response,
            "latency_ms": result.latency_ms,
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }
        line = json.dumps(record, sort_keys=True, ensure_ascii=False)
        with self._lock:
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")
                handle.flush()
            self._records[key] = record
