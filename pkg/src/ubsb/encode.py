"""Profile rows to numeric matrices, per model family.

Linear mode standardizes numerics and one-hot encodes categoricals with an
explicit unseen bucket per column. Tree mode keeps numerics raw and maps
categoricals to integer codes ordered by training-set frequency (descending,
ties lexicographic); unseen levels get the next code after all seen ones.
Education is an ordered categorical: tree mode encodes its fixed domain rank
instead of a frequency code. Date columns turn into whole-month ages against
a reference date inferred as the latest date seen at fit time. Category maps
and numeric statistics are learned from the fitted rows only.
"""

from __future__ import annotations

import datetime
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .config import EDUCATION_LEVELS
from .dataio import (
    BOOL_COLUMNS,
    DATE_COLUMNS,
    FLOAT_COLUMNS,
    INT_COLUMNS,
    Dataset,
    FeatureSet,
    FeatureTable,
    feature_view,
)
from .synthgen import months_between

UNSEEN = "<unseen>"
CAR_AGE_SENTINEL = -1

_DERIVED_NAME = {
    "phone_purchase_date": "phone_age_months",
    "car_purchase_date": "car_age_months",
}


def derive_date_features(
    phone_purchase_date: datetime.date,
    car_purchase_date: datetime.date | None,
    reference_date: datetime.date,
) -> tuple[int, int]:
    """Whole-month ages at reference_date; no car date maps to -1."""
    if phone_purchase_date > reference_date:
        raise ValueError(f"phone_purchase_date {phone_purchase_date} is after {reference_date}")
    phone_age = months_between(phone_purchase_date, reference_date)
    if car_purchase_date is None:
        return phone_age, CAR_AGE_SENTINEL
    if car_purchase_date > reference_date:
        raise ValueError(f"car_purchase_date {car_purchase_date} is after {reference_date}")
    return phone_age, months_between(car_purchase_date, reference_date)


@dataclass(frozen=True)
class ColumnSpec:
    name: str            # emitted name (date columns appear as *_age_months)
    source: str          # schema column the values come from
    kind: str            # numeric | boolean | categorical | date
    levels: tuple[str, ...] = ()   # categorical only, code = position
    ordinal: bool = False          # fixed-domain ordered categorical
    mean: float = 0.0              # linear-mode standardization
    std: float = 1.0


@dataclass(frozen=True)
class EncoderState:
    mode: str                      # linear | tree
    feature_set_name: str
    source_columns: tuple[str, ...]
    reference_date: datetime.date
    specs: tuple[ColumnSpec, ...]
    feature_names: tuple[str, ...]


@dataclass
class FeatureMatrix:
    values: np.ndarray             # float64, n_rows x n_cols
    names: tuple[str, ...]
    feature_set_name: str
    bin_edges: list[np.ndarray] | None = None

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]


def _column_kind(name: str) -> str:
    if name in BOOL_COLUMNS:
        return "boolean"
    if name in DATE_COLUMNS:
        return "date"
    if name in FLOAT_COLUMNS or name in INT_COLUMNS:
        return "numeric"
    return "categorical"


def _as_table(rows, feature_set: FeatureSet | None) -> FeatureTable:
    if isinstance(rows, FeatureTable):
        return rows
    if isinstance(rows, Dataset):
        if feature_set is None:
            raise ValueError("feature_set required when passing a Dataset")
        return feature_view(rows, feature_set)[0]
    raise TypeError(f"expected FeatureTable or Dataset, got {type(rows).__name__}")


def _date_ages(col: np.ndarray, reference: datetime.date) -> np.ndarray:
    # transform-time rows may postdate the fit rows; clamp instead of failing
    out = np.empty(len(col), dtype=np.float64)
    for i, d in enumerate(col):
        out[i] = CAR_AGE_SENTINEL if d is None else max(0, months_between(d, reference))
    return out


def _infer_reference_date(table: FeatureTable) -> datetime.date:
    latest = datetime.date.min
    for name in table.columns:
        if name in DATE_COLUMNS:
            for d in table.columns[name]:
                if d is not None and d > latest:
                    latest = d
    return latest if latest > datetime.date.min else datetime.date(1970, 1, 1)


def _frequency_levels(col: np.ndarray) -> tuple[str, ...]:
    counts = Counter(str(v) for v in col)
    return tuple(sorted(counts, key=lambda lv: (-counts[lv], lv)))


def fit_encoder(rows, feature_set: FeatureSet | None = None, mode: str = "tree") -> EncoderState:
    """Learn category maps, numeric statistics and the date reference from
    the supplied rows only."""
    if mode not in ("linear", "tree"):
        raise ValueError(f"unknown encoder mode {mode!r}")
    table = _as_table(rows, feature_set)
    if table.n == 0:
        raise ValueError("fit_encoder: empty training rows")
    reference = _infer_reference_date(table)

    specs: list[ColumnSpec] = []
    names: list[str] = []
    for source in table.feature_set.columns:
        kind = _column_kind(source)
        col = table.columns[source]
        if kind == "boolean":
            specs.append(ColumnSpec(source, source, kind))
            names.append(source)
        elif kind in ("numeric", "date"):
            emitted = _DERIVED_NAME.get(source, source)
            values = _date_ages(col, reference) if kind == "date" else col.astype(np.float64)
            mean = float(values.mean())
            std = float(values.std())
            specs.append(ColumnSpec(emitted, source, kind, mean=mean, std=std if std > 0 else 1.0))
            names.append(emitted)
        else:
            ordinal = source == "education"
            if mode == "tree" and ordinal:
                levels = EDUCATION_LEVELS
            elif mode == "tree":
                levels = _frequency_levels(col)
            else:
                levels = tuple(sorted({str(v) for v in col}))
            specs.append(ColumnSpec(source, source, kind, levels=levels, ordinal=ordinal))
            if mode == "linear":
                names.extend(f"{source}={lv}" for lv in levels)
                names.append(f"{source}={UNSEEN}")
            else:
                names.append(source)

    return EncoderState(
        mode=mode,
        feature_set_name=table.feature_set.name,
        source_columns=table.feature_set.columns,
        reference_date=reference,
        specs=tuple(specs),
        feature_names=tuple(names),
    )


def _codes(col: np.ndarray, levels: tuple[str, ...]) -> np.ndarray:
    index = {lv: i for i, lv in enumerate(levels)}
    unseen = len(levels)
    return np.fromiter(
        (index.get(str(v), unseen) for v in col), dtype=np.float64, count=len(col)
    )


def transform(encoder: EncoderState, rows) -> FeatureMatrix:
    table = _as_table(rows, FeatureSet(encoder.feature_set_name, encoder.source_columns))
    if tuple(table.feature_set.columns) != encoder.source_columns:
        raise ValueError(
            f"column mismatch: encoder expects {encoder.source_columns}, "
            f"got {tuple(table.feature_set.columns)}"
        )
    n = table.n
    out = np.zeros((n, len(encoder.feature_names)), dtype=np.float64)
    j = 0
    for spec in encoder.specs:
        col = table.columns[spec.source]
        if spec.kind == "boolean":
            out[:, j] = col.astype(np.float64)
            j += 1
        elif spec.kind in ("numeric", "date"):
            values = (
                _date_ages(col, encoder.reference_date)
                if spec.kind == "date"
                else col.astype(np.float64)
            )
            if encoder.mode == "linear":
                values = (values - spec.mean) / spec.std
            out[:, j] = values
            j += 1
        else:
            codes = _codes(col, spec.levels)
            if encoder.mode == "linear":
                width = len(spec.levels) + 1
                if n:
                    out[np.arange(n), j + codes.astype(np.int64)] = 1.0
                j += width
            else:
                out[:, j] = codes
                j += 1
    if not np.isfinite(out).all():
        raise ValueError("transform: non-finite values in feature matrix")
    return FeatureMatrix(out, encoder.feature_names, encoder.feature_set_name)


def build_histogram_bins(matrix: FeatureMatrix, max_bins: int = 255) -> list[np.ndarray]:
    """Per-column strictly increasing boundaries; bin(x) = #boundaries <= x.

    Columns with at most max_bins distinct values get exact (midpoint) edges,
    the rest get deduplicated quantile edges, so bin count never exceeds
    max_bins and order is preserved.
    """
    if max_bins < 2:
        raise ValueError("build_histogram_bins: max_bins must be >= 2")
    edges: list[np.ndarray] = []
    for j in range(matrix.n_cols):
        col = matrix.values[:, j]
        distinct = np.unique(col)
        if len(distinct) <= max_bins:
            boundaries = (distinct[:-1] + distinct[1:]) / 2.0
        else:
            qs = np.quantile(col, np.arange(1, max_bins) / max_bins)
            boundaries = np.unique(qs)
        edges.append(boundaries.astype(np.float64))
    return edges


def bin_matrix(matrix: FeatureMatrix, edges: list[np.ndarray]) -> np.ndarray:
    """Map values to bin ordinals per column (uint8 when bins fit)."""
    n_bins = [len(e) + 1 for e in edges]
    dtype = np.uint8 if max(n_bins) <= 256 else np.uint16
    out = np.empty(matrix.values.shape, dtype=dtype)
    for j, e in enumerate(edges):
        out[:, j] = np.searchsorted(e, matrix.values[:, j], side="right")
    return out
