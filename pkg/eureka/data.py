"""Tabular data ingestion, preprocessing and splitting."""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable, Sequence
import csv
from dataclasses import dataclass
import json
import logging
import math
from pathlib import Path
from typing import Any, Union

import numpy as np
import voluptuous as vol

from .const import DEFAULT_MISSING_TOKENS, KIND_CATEGORICAL, KIND_NUMERIC
from .exceptions import DataError, MalformedCSVError, SchemaMismatchError

_LOGGER = logging.getLogger(__name__)

Cell = Union[float, str, None]

SCHEMA_FILE_SCHEMA = vol.Schema(
    {
        vol.Required("features"): [
            {
                vol.Required("name"): vol.All(str, vol.Length(min=1)),
                vol.Required("kind"): vol.In([KIND_NUMERIC, KIND_CATEGORICAL]),
                vol.Optional("description"): vol.Any(None, str),
            }
        ],
        vol.Required("label"): vol.All(str, vol.Length(min=1)),
        vol.Required("classes"): vol.All([vol.Coerce(str)], vol.Length(min=2)),
    }
)


@dataclass(frozen=True)
class FeatureSpec:
    """A single input feature of the classification task."""

    name: str
    kind: str = KIND_NUMERIC
    description: str | None = None

    @property
    def text(self) -> str:
        """Return the description shown to a judge, falling back to the name."""
        return self.description or self.name


@dataclass(frozen=True)
class FeatureSchema:
    """Feature records, label column and the ordered label classes."""

    features: tuple[FeatureSpec, ...]
    label: str
    classes: tuple[str, ...]

    def __post_init__(self) -> None:
        """Validate schema invariants."""
        names = [feature.name for feature in self.features]
        if not names:
            raise ValueError("Schema needs at least one feature")
        if any(not name for name in names):
            raise ValueError("Feature names must be non-empty")
        if len(set(names)) != len(names):
            raise ValueError("Feature names must be unique")
        if self.label in names:
            raise ValueError(f"Label column {self.label!r} is listed as a feature")
        if len(self.classes) < 2 or len(set(self.classes)) != len(self.classes):
            raise ValueError("Schema needs at least two distinct label classes")
        for feature in self.features:
            if feature.kind not in (KIND_NUMERIC, KIND_CATEGORICAL):
                raise ValueError(f"Unknown feature kind {feature.kind!r}")

    @property
    def feature_names(self) -> tuple[str, ...]:
        """Names of the features in schema order."""
        return tuple(feature.name for feature in self.features)

    def feature(self, name: str) -> FeatureSpec:
        """Return the feature record called ``name``."""
        for feature in self.features:
            if feature.name == name:
                return feature
        raise KeyError(name)

    def to_dict(self) -> dict[str, Any]:
        """Serialize to the JSON schema-file layout."""
        return {
            "features": [
                {"name": f.name, "kind": f.kind, "description": f.description}
                for f in self.features
            ],
            "label": self.label,
            "classes": list(self.classes),
        }

    @classmethod
    def from_dict(cls, document: dict[str, Any]) -> FeatureSchema:
        """Build a schema from its JSON document form.

        Raises:
            DataError: If the document is structurally invalid.
        """
        try:
            doc = SCHEMA_FILE_SCHEMA(document)
            return cls(
                features=tuple(
                    FeatureSpec(f["name"], f["kind"], f.get("description"))
                    for f in doc["features"]
                ),
                label=doc["label"],
                classes=tuple(doc["classes"]),
            )
        except (vol.Invalid, ValueError) as err:
            raise DataError(f"Invalid feature schema: {err}") from err


def load_schema(path: str | Path) -> FeatureSchema:
    """Load a feature schema from a JSON file."""
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        raise DataError(f"Cannot read schema file {path}: {err}") from err
    return FeatureSchema.from_dict(document)


@dataclass(frozen=True)
class Dataset:
    """Raw typed table: ``n`` rows of ``d`` cells plus their labels."""

    schema: FeatureSchema
    rows: tuple[tuple[Cell, ...], ...]
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        """Validate dataset invariants."""
        if not self.rows:
            raise DataError("Dataset has no rows")
        if len(self.rows) != len(self.labels):
            raise DataError("Row and label counts differ")
        width = len(self.schema.features)
        for index, row in enumerate(self.rows):
            if len(row) != width:
                raise DataError(f"Row {index} has {len(row)} cells, expected {width}")
        unknown = set(self.labels) - set(self.schema.classes)
        if unknown:
            raise DataError(f"Labels outside schema classes: {sorted(unknown)}")

    @property
    def n_rows(self) -> int:
        """Number of rows."""
        return len(self.rows)

    def column(self, index: int) -> list[Cell]:
        """Return the cells of one feature column."""
        return [row[index] for row in self.rows]

    def subset(self, indices: Iterable[int]) -> Dataset:
        """Return the rows at ``indices`` in the given order."""
        chosen = [int(i) for i in indices]
        return Dataset(
            schema=self.schema,
            rows=tuple(self.rows[i] for i in chosen),
            labels=tuple(self.labels[i] for i in chosen),
        )


def _parse_number(token: str) -> float | None:
    try:
        value = float(token)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def _read_records(path: Path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    try:
        handle = path.open(newline="", encoding="utf-8")
    except OSError as err:
        raise DataError(f"Cannot read CSV file {path}: {err}") from err

    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader, None)
            if header is None:
                raise DataError(f"CSV file {path} has no header row")
            header = [name.strip() for name in header]
            records: list[tuple[int, list[str]]] = []
            for record in reader:
                if not record:
                    continue
                if len(record) != len(header):
                    raise MalformedCSVError(
                        f"Expected {len(header)} cells but found {len(record)}",
                        reader.line_num,
                    )
                records.append((reader.line_num, [cell.strip() for cell in record]))
        except csv.Error as err:
            raise MalformedCSVError(f"Malformed CSV: {err}", reader.line_num) from err

    if len(set(header)) != len(header):
        raise DataError(f"CSV file {path} has duplicate column names")
    if not records:
        raise DataError(f"CSV file {path} has no data rows")
    return header, records


def load_csv(
    path: str | Path,
    schema: FeatureSchema | None = None,
    *,
    label_column: str | None = None,
    exclude: Sequence[str] = (),
    missing_tokens: Sequence[str] = DEFAULT_MISSING_TOKENS,
) -> Dataset:
    """Load a CSV file into a :class:`Dataset`.

    Without a schema, the label column defaults to the last header column,
    every other non-excluded column becomes a feature, and a feature is
    numeric when all of its non-missing cells parse as numbers. With a
    schema, only the columns it names are read.

    Args:
        path: CSV file with a header row.
        schema: Optional schema fixing features, kinds and label classes.
        label_column: Label column when no schema is given.
        exclude: Columns to ignore when no schema is given (e.g. ids).
        missing_tokens: Cell values recorded as missing.

    Raises:
        MalformedCSVError: A record does not match the header arity.
        DataError: Unreadable file, no data rows, unknown label class.
    """
    path = Path(path)
    header, records = _read_records(path)
    missing = set(missing_tokens)
    position = {name: index for index, name in enumerate(header)}

    if schema is None:
        label = label_column or header[-1]
        if label not in position:
            raise DataError(f"Label column {label!r} not found in {path}")
        names = [n for n in header if n != label and n not in set(exclude)]
        features = []
        for name in names:
            cells = [rec[position[name]] for _, rec in records]
            present = [c for c in cells if c not in missing]
            numeric = bool(present) and all(
                _parse_number(c) is not None for c in present
            )
            features.append(
                FeatureSpec(name, KIND_NUMERIC if numeric else KIND_CATEGORICAL)
            )
        tokens = [rec[position[label]] for _, rec in records]
        if any(token in missing for token in tokens):
            raise DataError(f"Label column {label!r} has missing values")
        try:
            schema = FeatureSchema(
                features=tuple(features),
                label=label,
                classes=tuple(sorted(set(tokens))),
            )
        except ValueError as err:
            raise DataError(f"Cannot infer schema from {path}: {err}") from err
    else:
        absent = [
            n for n in (*schema.feature_names, schema.label) if n not in position
        ]
        if absent:
            raise SchemaMismatchError(f"Columns {absent} missing from {path}")

    classes = set(schema.classes)
    rows: list[tuple[Cell, ...]] = []
    labels: list[str] = []
    for line_number, record in records:
        token = record[position[schema.label]]
        if token not in classes:
            raise DataError(
                f"Unknown label class {token!r} on line {line_number} of {path}"
            )
        row: list[Cell] = []
        for feature in schema.features:
            cell = record[position[feature.name]]
            if cell in missing:
                row.append(None)
            elif feature.kind == KIND_NUMERIC:
                value = _parse_number(cell)
                if value is None:
                    raise DataError(
                        f"Non-numeric value {cell!r} for {feature.name!r} "
                        f"on line {line_number} of {path}"
                    )
                row.append(value)
            else:
                row.append(cell)
        rows.append(tuple(row))
        labels.append(token)

    dataset = Dataset(schema=schema, rows=tuple(rows), labels=tuple(labels))
    _LOGGER.info(
        "Loaded %d rows with %d features from %s",
        dataset.n_rows,
        len(schema.features),
        path,
    )
    return dataset


def stratified_indices(
    labels: Sequence[Any] | np.ndarray, test_fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Split row indices per class into train and test index arrays.

    Each class contributes ``round(count * test_fraction)`` rows (half-up),
    clamped so that both sides keep at least one row of the class.

    Raises:
        DataError: Bad fraction or a class with fewer than two rows.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train: list[int] = []
    test: list[int] = []
    for cls in sorted(set(labels.tolist())):
        members = np.flatnonzero(labels == cls)
        if members.size < 2:
            raise DataError(
                f"Class {cls!r} has {members.size} row(s); a stratified split "
                "needs at least 2"
            )
        n_test = int(math.floor(members.size * test_fraction + 0.5))
        n_test = min(max(n_test, 1), members.size - 1)
        shuffled = rng.permutation(members)
        test.extend(shuffled[:n_test].tolist())
        train.extend(shuffled[n_test:].tolist())
    return np.array(sorted(train), dtype=int), np.array(sorted(test), dtype=int)


def stratified_split(
    ds: Dataset, test_fraction: float, seed: int
) -> tuple[Dataset, Dataset]:
    """Split a dataset into stratified train and test parts."""
    train_idx, test_idx = stratified_indices(ds.labels, test_fraction, seed)
    _LOGGER.debug(
        "Stratified split (seed %d): %d train / %d test rows",
        seed,
        train_idx.size,
        test_idx.size,
    )
    return ds.subset(train_idx), ds.subset(test_idx)


@dataclass(frozen=True)
class NumericStats:
    """Training statistics of one numeric feature."""

    mean: float
    stddev: float
    median: float


@dataclass(frozen=True)
class CategoricalStats:
    """Training statistics of one categorical feature."""

    mode: str
    vocabulary: tuple[str, ...]


@dataclass(frozen=True)
class Preprocessor:
    """Imputation, standardization and one-hot statistics fitted on train rows."""

    schema: FeatureSchema
    numeric: dict[str, NumericStats]
    categorical: dict[str, CategoricalStats]
    n_fitted: int


def fit_preprocessor(train: Dataset) -> Preprocessor:
    """Fit preprocessing statistics on training rows.

    Numeric features get mean, population stddev and median over non-missing
    cells (even counts average the two middle values). Categorical features
    get the most frequent token (ties broken lexicographically) and the
    sorted vocabulary.

    Raises:
        DataError: A feature has no non-missing training value.
    """
    numeric: dict[str, NumericStats] = {}
    categorical: dict[str, CategoricalStats] = {}
    for index, feature in enumerate(train.schema.features):
        present = [cell for cell in train.column(index) if cell is not None]
        if not present:
            raise DataError(f"Feature {feature.name!r} has no non-missing values")
        if feature.kind == KIND_NUMERIC:
            values = np.asarray(present, dtype=float)
            numeric[feature.name] = NumericStats(
                mean=float(values.mean()),
                stddev=float(values.std()),
                median=float(np.median(values)),
            )
        else:
            counts = Counter(str(cell) for cell in present)
            mode = min(counts, key=lambda token: (-counts[token], token))
            categorical[feature.name] = CategoricalStats(
                mode=mode, vocabulary=tuple(sorted(counts))
            )
    return Preprocessor(
        schema=train.schema,
        numeric=numeric,
        categorical=categorical,
        n_fitted=train.n_rows,
    )


@dataclass(frozen=True)
class DesignMatrix:
    """Numeric encoding of a dataset with feature-to-column group bookkeeping."""

    values: np.ndarray
    column_labels: tuple[str, ...]
    groups: dict[str, tuple[int, int]]
    labels: np.ndarray
    classes: tuple[str, ...] = ("0", "1")

    def __post_init__(self) -> None:
        """Validate shape and group-partition invariants."""
        if self.values.ndim != 2:
            raise ValueError("Design matrix values must be two-dimensional")
        n, p = self.values.shape
        if self.labels.shape != (n,):
            raise ValueError("Label vector length must equal the row count")
        if len(self.column_labels) != p:
            raise ValueError("Column label count must equal the column count")
        covered = sorted(self.groups.values())
        cursor = 0
        for start, stop in covered:
            if start != cursor or stop <= start:
                raise ValueError("Feature groups must partition the columns")
            cursor = stop
        if cursor != p:
            raise ValueError("Feature groups must partition the columns")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Design matrix contains missing or non-finite values")

    @property
    def n_rows(self) -> int:
        """Number of rows."""
        return int(self.values.shape[0])

    @property
    def width(self) -> int:
        """Number of columns."""
        return int(self.values.shape[1])

    @property
    def feature_names(self) -> tuple[str, ...]:
        """Feature names ordered by column position."""
        return tuple(sorted(self.groups, key=lambda name: self.groups[name][0]))

    def group_slice(self, name: str) -> slice:
        """Column slice occupied by feature ``name``."""
        start, stop = self.groups[name]
        return slice(start, stop)

    def select(self, names: Sequence[str]) -> DesignMatrix:
        """Return the sub-matrix holding only the columns of ``names``.

        Groups are laid out in the order the names are given.
        """
        if len(set(names)) != len(names):
            raise ValueError("Selected feature names must be unique")
        blocks = []
        labels: list[str] = []
        groups: dict[str, tuple[int, int]] = {}
        cursor = 0
        for name in names:
            if name not in self.groups:
                raise KeyError(name)
            start, stop = self.groups[name]
            blocks.append(self.values[:, start:stop])
            labels.extend(self.column_labels[start:stop])
            groups[name] = (cursor, cursor + stop - start)
            cursor += stop - start
        values = np.hstack(blocks) if blocks else np.empty((self.n_rows, 0))
        return DesignMatrix(
            values=values,
            column_labels=tuple(labels),
            groups=groups,
            labels=self.labels,
            classes=self.classes,
        )

    def subset_rows(self, indices: Sequence[int] | np.ndarray) -> DesignMatrix:
        """Return the rows at ``indices``."""
        indices = np.asarray(indices, dtype=int)
        return DesignMatrix(
            values=self.values[indices],
            column_labels=self.column_labels,
            groups=dict(self.groups),
            labels=self.labels[indices],
            classes=self.classes,
        )


def transform(pp: Preprocessor, ds: Dataset) -> DesignMatrix:
    """Encode a dataset with fitted preprocessing statistics.

    Missing cells are imputed (median / mode) before encoding, numeric cells
    are standardized (zero-variance columns become zeros), and categorical
    cells are one-hot encoded over the training vocabulary; unseen tokens
    encode to an all-zero block.

    Raises:
        SchemaMismatchError: ``ds`` does not conform to the fitted schema.
    """
    if ds.schema.features != pp.schema.features or ds.schema.label != pp.schema.label:
        raise SchemaMismatchError(
            "Dataset schema differs from the schema the preprocessor was fitted on"
        )

    blocks: list[np.ndarray] = []
    column_labels: list[str] = []
    groups: dict[str, tuple[int, int]] = {}
    cursor = 0
    for index, feature in enumerate(pp.schema.features):
        cells = ds.column(index)
        if feature.kind == KIND_NUMERIC:
            stats = pp.numeric[feature.name]
            raw = np.array(
                [stats.median if cell is None else float(cell) for cell in cells]
            )
            if stats.stddev > 0:
                block = ((raw - stats.mean) / stats.stddev)[:, None]
            else:
                block = np.zeros((len(cells), 1))
            column_labels.append(feature.name)
        else:
            cat = pp.categorical[feature.name]
            lookup = {token: j for j, token in enumerate(cat.vocabulary)}
            block = np.zeros((len(cells), len(cat.vocabulary)))
            for i, cell in enumerate(cells):
                token = cat.mode if cell is None else str(cell)
                j = lookup.get(token)
                if j is not None:
                    block[i, j] = 1.0
            column_labels.extend(f"{feature.name}={t}" for t in cat.vocabulary)
        groups[feature.name] = (cursor, cursor + block.shape[1])
        cursor += block.shape[1]
        blocks.append(block)

    class_index = {cls: i for i, cls in enumerate(pp.schema.classes)}
    labels = np.array([class_index[label] for label in ds.labels], dtype=int)
    return DesignMatrix(
        values=np.hstack(blocks),
        column_labels=tuple(column_labels),
        groups=groups,
        labels=labels,
        classes=pp.schema.classes,
    )
