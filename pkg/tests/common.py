"""Common test utilities for the EUREKA toolkit."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Any, Sequence
from unittest.mock import Mock

import numpy as np

from eureka.data import DesignMatrix, FeatureSpec
from eureka.judge import Judge, MockOracle, PreferenceMatrix

# Five-item matrix with distinct Borda scores used across ranking tests
SYNTHETIC_NAMES = ("f0", "f1", "f2", "f3", "f4")
SYNTHETIC_MATRIX = np.array(
    [
        [0.5, 0.6, 0.7, 0.8, 0.9],
        [0.4, 0.5, 0.6, 0.7, 0.8],
        [0.3, 0.4, 0.5, 0.6, 0.7],
        [0.2, 0.3, 0.4, 0.5, 0.6],
        [0.1, 0.2, 0.3, 0.4, 0.5],
    ]
)


def synthetic_preferences() -> PreferenceMatrix:
    """The shared five-feature preference matrix."""
    return PreferenceMatrix(SYNTHETIC_NAMES, SYNTHETIC_MATRIX)


def make_judge(
    preferences: PreferenceMatrix,
    task: str = "Predict whether a room is occupied.",
    **kwargs: Any,
) -> Judge:
    """Bind a mock oracle over ``preferences`` to a task."""
    direct_noise = kwargs.pop("direct_noise", 0.0)
    return Judge(
        MockOracle(preferences, direct_noise=direct_noise),
        [FeatureSpec(name) for name in preferences.names],
        task,
        "occupancy",
        **kwargs,
    )


def make_design(
    values: Sequence[Sequence[float]] | np.ndarray,
    labels: Sequence[int] | np.ndarray,
    names: Sequence[str] | None = None,
) -> DesignMatrix:
    """Design matrix with one single-column group per column."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    names = list(names or [f"x{j}" for j in range(values.shape[1])])
    return DesignMatrix(
        values=values,
        column_labels=tuple(names),
        groups={name: (j, j + 1) for j, name in enumerate(names)},
        labels=np.asarray(labels, dtype=int),
    )


def planted_group_design(
    seed: int, n: int = 400, n_groups: int = 5, informative: int = 2
) -> DesignMatrix:
    """Groups of two columns; only group ``informative`` drives the labels."""
    rng = np.random.default_rng(seed)
    values = rng.standard_normal((n, 2 * n_groups))
    block = values[:, 2 * informative : 2 * informative + 2]
    logits = 2.0 * block[:, 0] - 1.5 * block[:, 1]
    labels = (rng.random(n) < 1.0 / (1.0 + np.exp(-logits))).astype(int)
    names = [f"g{g}" for g in range(n_groups)]
    return DesignMatrix(
        values=values,
        column_labels=tuple(f"{name}[{k}]" for name in names for k in range(2)),
        groups={name: (2 * g, 2 * g + 2) for g, name in enumerate(names)},
        labels=labels,
    )


def write_table(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]):
    """Write a CSV file with a header row."""
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def occupancy_like_rows(seed: int = 0, n: int = 200) -> list[list[Any]]:
    """Rows of a small room-occupancy style table.

    ``Light`` separates the classes almost perfectly, ``Noise`` is pure
    noise and ``Weekday`` is categorical.
    """
    rng = np.random.default_rng(seed)
    rows = []
    days = ["Mon", "Tue", "Wed", "Thu", "Fri"]
    for i in range(n):
        occupied = int(i % 3 == 0)
        light = (450.0 if occupied else 20.0) + rng.normal(0.0, 30.0)
        noise = rng.normal(0.0, 1.0)
        stamp = f"2015-02-{i:04d}"
        rows.append([stamp, round(light, 3), round(noise, 4), days[i % 5], occupied])
    return rows


OCCUPANCY_HEADER = ("date", "Light", "Noise", "Weekday", "Occupancy")


def chat_response(content: Any = "A", status_code: int = 200):
    """Create a mock chat-completions HTTP response."""
    response = Mock()
    response.status_code = status_code
    response.text = str(content)
    response.json.return_value = {"choices": [{"message": {"content": content}}]}
    return response
