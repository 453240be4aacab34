"""Dataset serialization, stratified folds and feature-set views.

The on-disk format is a comma-separated UTF-8 file with a mandatory header
matching the 19-column schema exactly. Dates are ISO YYYY-MM-DD, booleans
lowercase true/false, absent car fields are empty strings. Category names
are validated comma-free at config load, so no quoting is ever needed.
"""

from __future__ import annotations

import csv
import datetime
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .synthgen import Profile

SCHEMA = (
    "id",
    "age",
    "education",
    "employment_status",
    "job",
    "monthly_income",
    "phone_model",
    "phone_purchase_date",
    "owns_car",
    "car_brand",
    "car_purchase_date",
    "home_district",
    "owns_home",
    "monthly_rent",
    "owns_credit_card",
    "monthly_subscriptions",
    "online_shopping_frequency",
    "social_media_active",
    "delinquency_FL",
)

ID_COLUMN = "id"
LABEL_COLUMN = "delinquency_FL"

BOOL_COLUMNS = ("owns_car", "owns_home", "owns_credit_card", "social_media_active")
DATE_COLUMNS = ("phone_purchase_date", "car_purchase_date")
INT_COLUMNS = ("id", "age", "online_shopping_frequency", "delinquency_FL")
FLOAT_COLUMNS = ("monthly_income", "monthly_rent", "monthly_subscriptions")
TEXT_COLUMNS = ("education", "employment_status", "job", "phone_model", "car_brand", "home_district")

DEMO_COLUMNS = (
    "age",
    "education",
    "employment_status",
    "job",
    "monthly_income",
    "home_district",
    "owns_home",
)
ALTERNATIVE_COLUMNS = (
    "phone_model",
    "phone_purchase_date",
    "owns_car",
    "car_brand",
    "car_purchase_date",
    "owns_credit_card",
    "monthly_subscriptions",
    "online_shopping_frequency",
    "social_media_active",
    "monthly_rent",
)


class DataError(ValueError):
    """Malformed dataset file or schema violation; message carries location."""


@dataclass(frozen=True)
class FeatureSet:
    name: str
    columns: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.columns:
            raise DataError(f"feature set {self.name!r}: empty column list")
        for col in self.columns:
            if col in (ID_COLUMN, LABEL_COLUMN):
                raise DataError(f"feature set {self.name!r}: {col} is not a feature")
            if col not in SCHEMA:
                raise DataError(f"feature set {self.name!r}: unknown column {col!r}")


def demo_features() -> FeatureSet:
    """Socio-demographic inputs only."""
    return FeatureSet("Demo", DEMO_COLUMNS)


def full_features() -> FeatureSet:
    """Demographics plus the ten alternative-data columns."""
    return FeatureSet("Full", DEMO_COLUMNS + ALTERNATIVE_COLUMNS)


@dataclass
class Dataset:
    """Columnar table over the fixed schema plus provenance metadata."""

    columns: dict[str, np.ndarray]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if tuple(self.columns) != SCHEMA:
            raise DataError("dataset columns must match the schema exactly")
        n = len(self.columns[ID_COLUMN])
        for name, arr in self.columns.items():
            if len(arr) != n:
                raise DataError(f"column {name}: length {len(arr)} != {n}")
        ids = self.columns[ID_COLUMN]
        if n and not np.array_equal(ids, np.arange(1, n + 1)):
            if len(np.unique(ids)) != n:
                raise DataError("duplicate id values")
            raise DataError("ids must be contiguous from 1")

    @property
    def n(self) -> int:
        return len(self.columns[ID_COLUMN])

    @property
    def labels(self) -> np.ndarray:
        return self.columns[LABEL_COLUMN]

    def same_data(self, other: "Dataset") -> bool:
        """Column-wise equality, ignoring provenance."""
        return all(
            np.array_equal(self.columns[c], other.columns[c]) for c in SCHEMA
        )


def dataset_from_profiles(profiles: list[Profile], provenance: dict | None = None) -> Dataset:
    cols: dict[str, np.ndarray] = {}
    for name in SCHEMA:
        values = [getattr(p, name) for p in profiles]
        if name in INT_COLUMNS:
            cols[name] = np.array(values, dtype=np.int64)
        elif name in FLOAT_COLUMNS:
            cols[name] = np.array(values, dtype=np.float64)
        elif name in BOOL_COLUMNS:
            cols[name] = np.array(values, dtype=bool)
        else:
            cols[name] = np.array(values, dtype=object)
    return Dataset(cols, provenance or {})


def _format_number(x: float) -> str:
    # integral floats print without the trailing .0; repr round-trips the rest
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _format_cell(name: str, value) -> str:
    if name in BOOL_COLUMNS:
        return "true" if value else "false"
    if name in DATE_COLUMNS:
        return value.isoformat() if value is not None else ""
    if name in INT_COLUMNS:
        return str(int(value))
    if name in FLOAT_COLUMNS:
        return _format_number(float(value))
    return str(value)


def write_csv(dataset: Dataset, path: str | Path) -> None:
    cols = [dataset.columns[name] for name in SCHEMA]
    lines = [",".join(SCHEMA)]
    for i in range(dataset.n):
        lines.append(",".join(_format_cell(name, col[i]) for name, col in zip(SCHEMA, cols)))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_cell(name: str, cell: str, row: int):
    try:
        if name in BOOL_COLUMNS:
            if cell == "true":
                return True
            if cell == "false":
                return False
            raise ValueError(f"expected true/false, got {cell!r}")
        if name in DATE_COLUMNS:
            if cell == "":
                return None
            return datetime.date.fromisoformat(cell)
        if name in INT_COLUMNS:
            return int(cell)
        if name in FLOAT_COLUMNS:
            return float(cell)
        return cell
    except ValueError as exc:
        raise DataError(f"row {row}, column {name}: {exc}") from None


def read_csv(path: str | Path) -> Dataset:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row is mandatory") from None
        if tuple(header) != SCHEMA:
            missing = set(SCHEMA) - set(header)
            extra = set(header) - set(SCHEMA)
            detail = []
            if missing:
                detail.append(f"missing {sorted(missing)}")
            if extra:
                detail.append(f"unexpected {sorted(extra)}")
            if not detail:
                detail.append("column order must match the schema")
            raise DataError(f"{path}: bad header ({'; '.join(detail)})")
        raw: list[list] = [[] for _ in SCHEMA]
        for row_i, row in enumerate(reader, start=1):
            if len(row) != len(SCHEMA):
                raise DataError(f"{path}: row {row_i}: expected {len(SCHEMA)} cells, got {len(row)}")
            for j, name in enumerate(SCHEMA):
                raw[j].append(_parse_cell(name, row[j], row_i))

    cols: dict[str, np.ndarray] = {}
    for j, name in enumerate(SCHEMA):
        if name in INT_COLUMNS:
            cols[name] = np.array(raw[j], dtype=np.int64)
        elif name in FLOAT_COLUMNS:
            cols[name] = np.array(raw[j], dtype=np.float64)
        elif name in BOOL_COLUMNS:
            cols[name] = np.array(raw[j], dtype=bool)
        else:
            cols[name] = np.array(raw[j], dtype=object)
    ids = cols[ID_COLUMN]
    if len(ids) and len(np.unique(ids)) != len(ids):
        dupes = ids[np.concatenate(([False], np.diff(np.sort(ids)) == 0))]
        raise DataError(f"{path}: duplicate id {int(dupes[0])}")
    return Dataset(cols, {"source": str(path)})


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray   # row index -> fold in 0..k-1
    seed: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def to_json(self) -> str:
        return json.dumps(
            {"k": self.k, "seed": self.seed, "assignments": self.assignments.tolist()}
        )


def stratified_kfold(labels, k: int, seed: int) -> FoldPlan:
    """Class-preserving fold assignment, deterministic in (labels, k, seed).

    Each class is shuffled and dealt round-robin; the negative class is dealt
    in reverse fold order so fold sizes stay within one row of each other.
    """
    y = np.asarray(labels, dtype=np.int64)
    n = len(y)
    if k < 2:
        raise ValueError("stratified_kfold: k must be >= 2")
    if n < k:
        raise ValueError("stratified_kfold: need at least k rows")
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("stratified_kfold: both classes must be present")
    rng = np.random.default_rng(seed)
    assignments = np.empty(n, dtype=np.int64)
    for j, idx in enumerate(rng.permutation(pos)):
        assignments[idx] = j % k
    for j, idx in enumerate(rng.permutation(neg)):
        assignments[idx] = k - 1 - (j % k)
    return FoldPlan(k=k, assignments=assignments, seed=seed)


@dataclass
class FeatureTable:
    """Projection of a Dataset onto a feature set; row order preserved."""

    feature_set: FeatureSet
    columns: dict[str, np.ndarray]

    @property
    def n(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def subset(self, indices: np.ndarray) -> "FeatureTable":
        return FeatureTable(
            self.feature_set, {c: v[indices] for c, v in self.columns.items()}
        )


def feature_view(dataset: Dataset, feature_set: FeatureSet) -> tuple[FeatureTable, np.ndarray]:
    """Project onto the feature set's columns; labels come back separately."""
    for col in feature_set.columns:
        if col not in dataset.columns:
            raise DataError(f"feature_view: unknown column {col!r}")
    table = FeatureTable(
        feature_set, {c: dataset.columns[c] for c in feature_set.columns}
    )
    return table, dataset.labels.copy()
