"""Diverse counterfactual search and flip-frequency attribution.

Counterfactuals are edits to the ten alternative attributes of a single
record that move the model's thresholded prediction to the other side. A
seeded genetic search over edit sets scores candidates by a weighted sum of
validity hinge, MAD-normalized proximity, edit count, and (negatively) the
spread of the emerging candidate set. Demographic attributes are never
touched.

Record-level consistency is preserved during mutation: dropping car
ownership blanks the brand and purchase date, acquiring it fills them with
training-set defaults, and rent stays zero for homeowners (home ownership
itself is demographic, hence immutable).
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass, field

import numpy as np

from .dataio import (
    ALTERNATIVE_COLUMNS,
    BOOL_COLUMNS,
    DATE_COLUMNS,
    DEMO_COLUMNS,
    FLOAT_COLUMNS,
    INT_COLUMNS,
    Dataset,
    FeatureSet,
    FeatureTable,
)
from .encode import transform
from .models import TrainedModel, predict_proba
from .synthgen import months_between

N_GRID = 21  # quantile points per numeric feature in exhaustive scans


@dataclass
class CfStats:
    """Training-population summaries that anchor mutations and distances."""
    numeric_range: dict[str, tuple[float, float]]
    numeric_mad: dict[str, float]
    numeric_grid: dict[str, np.ndarray]
    cat_values: dict[str, tuple[str, ...]]
    date_grid: dict[str, list[datetime.date]]
    date_mad_months: dict[str, float]
    reference_date: datetime.date
    car_brand_default: str
    car_date_default: datetime.date


def _mad(x: np.ndarray) -> float:
    med = float(np.median(x))
    m = float(np.median(np.abs(x - med)))
    return m if m > 0 else 1.0


def build_cf_stats(dataset: Dataset) -> CfStats:
    numeric_range, numeric_mad, numeric_grid = {}, {}, {}
    cat_values, date_grid, date_mad = {}, {}, {}
    qs = np.linspace(0.0, 1.0, N_GRID)
    for col in FLOAT_COLUMNS + ("age", "online_shopping_frequency"):
        x = np.asarray(dataset.columns[col], dtype=np.float64)
        numeric_range[col] = (float(x.min()), float(x.max()))
        numeric_mad[col] = _mad(x)
        grid = np.quantile(x, qs)
        if col in INT_COLUMNS:
            grid = np.round(grid)
        numeric_grid[col] = np.unique(grid)
    for col in ("education", "employment_status", "job", "phone_model",
                "car_brand", "home_district"):
        vals = [v for v in np.unique(dataset.columns[col]) if v != ""]
        cat_values[col] = tuple(sorted(vals))
    all_dates = [d for d in dataset.columns["phone_purchase_date"] if d is not None]
    reference = max(all_dates)
    for col in DATE_COLUMNS:
        ds = sorted(d for d in dataset.columns[col] if d is not None)
        if not ds:
            date_grid[col] = []
            date_mad[col] = 1.0
            continue
        idx = np.unique(np.round(qs * (len(ds) - 1)).astype(int))
        date_grid[col] = [ds[i] for i in idx]
        ages = np.array([months_between(d, reference) for d in ds], dtype=np.float64)
        date_mad[col] = _mad(ages)
    brands = [b for b in dataset.columns["car_brand"] if b != ""]
    car_dates = sorted(d for d in dataset.columns["car_purchase_date"] if d is not None)
    return CfStats(
        numeric_range=numeric_range, numeric_mad=numeric_mad,
        numeric_grid=numeric_grid, cat_values=cat_values,
        date_grid=date_grid, date_mad_months=date_mad,
        reference_date=reference,
        car_brand_default=max(set(brands), key=brands.count) if brands else "",
        car_date_default=car_dates[len(car_dates) // 2] if car_dates else reference,
    )


@dataclass
class CfConfig:
    k: int = 4
    mutable: tuple[str, ...] = ALTERNATIVE_COLUMNS
    immutable: tuple[str, ...] = DEMO_COLUMNS
    lambda_validity: float = 2.0
    lambda_proximity: float = 0.5
    lambda_diversity: float = 0.1
    lambda_sparsity: float = 0.25
    population: int = 50
    generations: int = 100
    seed: int = 0
    threshold: float | None = None      # None: model threshold, else 0.5
    desired_positive: bool | None = None  # None: flip whichever side
    stats: CfStats | None = None

    def __post_init__(self):
        if set(self.mutable) & set(self.immutable):
            raise ValueError("mutable and immutable feature sets overlap")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        for w in (self.lambda_validity, self.lambda_proximity,
                  self.lambda_diversity, self.lambda_sparsity):
            if w < 0:
                raise ValueError("loss weights must be nonnegative")


@dataclass
class Counterfactual:
    record: dict
    changed: list[str]
    probability: float
    valid: bool
    proximity: float

    def to_obj(self) -> dict:
        rec = {k: (v.isoformat() if isinstance(v, datetime.date) else
                   (bool(v) if isinstance(v, np.bool_) else
                    (v.item() if isinstance(v, np.generic) else v)))
               for k, v in self.record.items()}
        return {"record": rec, "changed": self.changed,
                "probability": self.probability, "valid": self.valid,
                "proximity": self.proximity}


@dataclass
class CounterfactualSet:
    original: dict
    original_probability: float
    threshold: float
    candidates: list[Counterfactual] = field(default_factory=list)
    trivially_satisfied: bool = False
    exhausted: bool = False

    def to_obj(self) -> dict:
        orig = Counterfactual(self.original, [], self.original_probability, False, 0.0)
        return {"original": orig.to_obj()["record"],
                "original_probability": self.original_probability,
                "threshold": self.threshold,
                "trivially_satisfied": self.trivially_satisfied,
                "exhausted": self.exhausted,
                "candidates": [c.to_obj() for c in self.candidates]}


def _record_from_table(table: FeatureTable, i: int) -> dict:
    return {c: table.columns[c][i] for c in table.feature_set.columns}


def records_from_table(table: FeatureTable, indices) -> list[dict]:
    return [_record_from_table(table, int(i)) for i in indices]


def _table_from_records(records: list[dict], feature_set: FeatureSet) -> FeatureTable:
    cols: dict[str, np.ndarray] = {}
    for c in feature_set.columns:
        vals = [r[c] for r in records]
        if c in INT_COLUMNS:
            cols[c] = np.array(vals, dtype=np.int64)
        elif c in FLOAT_COLUMNS:
            cols[c] = np.array(vals, dtype=np.float64)
        elif c in BOOL_COLUMNS:
            cols[c] = np.array(vals, dtype=bool)
        else:
            cols[c] = np.array(vals, dtype=object)
    return FeatureTable(feature_set, cols)


def _score_records(model: TrainedModel, records: list[dict]) -> np.ndarray:
    fs = FeatureSet(model.encoder.feature_set_name, model.encoder.source_columns)
    return predict_proba(model, transform(model.encoder, _table_from_records(records, fs)))


def _mutable_for(record: dict, config: CfConfig, source_columns) -> list[str]:
    """Mutable features applicable to this record; car detail columns are
    edited only while a car is owned, rent only for renters."""
    out = []
    for c in config.mutable:
        if c not in source_columns:
            continue
        if c in ("car_brand", "car_purchase_date") and not record.get("owns_car", False):
            continue
        if c == "monthly_rent" and record.get("owns_home", False):
            continue
        out.append(c)
    return out


def _materialize(original: dict, edits: dict, stats: CfStats) -> dict:
    rec = dict(original)
    rec.update(edits)
    if rec.get("owns_car", False) and not original.get("owns_car", False):
        if rec["car_brand"] == "":
            rec["car_brand"] = stats.car_brand_default
        if rec["car_purchase_date"] is None:
            rec["car_purchase_date"] = stats.car_date_default
    if "owns_car" in rec and not rec["owns_car"]:
        rec["car_brand"] = ""
        rec["car_purchase_date"] = None
    return rec


def _distance(a: dict, b: dict, stats: CfStats, columns) -> float:
    """MAD-normalized L1 over numerics and month-ages, 0/1 over the rest."""
    d = 0.0
    for c in columns:
        va, vb = a[c], b[c]
        if c in stats.numeric_mad:
            d += abs(float(va) - float(vb)) / stats.numeric_mad[c]
        elif c in DATE_COLUMNS:
            if (va is None) != (vb is None):
                d += 1.0
            elif va is not None and va != vb:
                d += abs(months_between(va, stats.reference_date)
                         - months_between(vb, stats.reference_date)) / stats.date_mad_months[c]
        else:
            d += float(va != vb)
    return d


def _changed_columns(original: dict, candidate: dict, columns) -> list[str]:
    out = []
    for c in columns:
        va, vb = original[c], candidate[c]
        if c in DATE_COLUMNS:
            if (va is None) != (vb is None) or (va is not None and va != vb):
                out.append(c)
        elif isinstance(va, (float, np.floating)):
            if float(va) != float(vb):
                out.append(c)
        elif va != vb:
            out.append(c)
    return out


def _random_value(col: str, original: dict, stats: CfStats,
                  rng: np.random.Generator):
    if col in BOOL_COLUMNS:
        return not bool(original[col])
    if col in stats.numeric_range and col not in INT_COLUMNS:
        lo, hi = stats.numeric_range[col]
        return float(rng.uniform(lo, hi))
    if col in stats.numeric_range:
        lo, hi = stats.numeric_range[col]
        return int(rng.integers(int(lo), int(hi) + 1))
    if col in DATE_COLUMNS:
        grid = stats.date_grid[col]
        return grid[rng.integers(0, len(grid))] if grid else None
    vals = [v for v in stats.cat_values[col] if v != original[col]]
    if not vals:
        return original[col]
    return vals[rng.integers(0, len(vals))]


def generate_counterfactuals(model: TrainedModel, record: dict,
                             config: CfConfig) -> CounterfactualSet:
    """Genetic search for up to k valid, mutually diverse edit sets."""
    if config.stats is None:
        raise ValueError("CfConfig.stats is required (build_cf_stats on the training data)")
    stats = config.stats
    threshold = config.threshold
    if threshold is None:
        threshold = model.threshold if model.threshold is not None else 0.5
    p0 = float(_score_records(model, [record])[0])
    original_positive = p0 > threshold
    cset = CounterfactualSet(original=record, original_probability=p0,
                             threshold=threshold)
    if config.desired_positive is not None and original_positive == config.desired_positive:
        cset.trivially_satisfied = True
        return cset
    want_positive = not original_positive

    source_columns = model.encoder.source_columns
    mutable = _mutable_for(record, config, source_columns)
    if not mutable:
        cset.exhausted = True
        return cset

    rng = np.random.default_rng([config.seed])
    eps = 1e-9

    def new_edit(edits: dict) -> dict:
        col = mutable[rng.integers(0, len(mutable))]
        out = dict(edits)
        out[col] = _random_value(col, record, stats, rng)
        return out

    def mutate(edits: dict) -> dict:
        u = rng.random()
        if edits and u < 0.25:
            out = dict(edits)
            keys = sorted(out, key=mutable.index)
            del out[keys[rng.integers(0, len(keys))]]
            return out
        return new_edit(edits)

    def crossover(a: dict, b: dict) -> dict:
        out = {}
        for col in mutable:
            src = a if rng.random() < 0.5 else b
            if col in src:
                out[col] = src[col]
        return out

    population = [new_edit({}) for _ in range(config.population)]
    pool: dict[tuple, Counterfactual] = {}     # valid candidates, deduped
    elite_records: list[dict] = []

    for _gen in range(config.generations):
        cands = [_materialize(record, e, stats) for e in population]
        probs = _score_records(model, cands)
        losses = np.empty(len(population))
        for i, (edits, cand) in enumerate(zip(population, cands)):
            p = float(probs[i])
            hinge = max(0.0, threshold + eps - p) if want_positive \
                else max(0.0, p - threshold + eps)
            changed = _changed_columns(record, cand, source_columns)
            prox = _distance(record, cand, stats, source_columns)
            divers = (np.mean([_distance(cand, e, stats, source_columns)
                               for e in elite_records])
                      if elite_records else 0.0)
            losses[i] = (config.lambda_validity * hinge
                         + config.lambda_proximity * prox
                         + config.lambda_sparsity * len(changed)
                         - config.lambda_diversity * divers)
            valid = (p > threshold) == want_positive and p != threshold and changed
            if valid:
                key = tuple((c, str(cand[c])) for c in changed)
                cf = Counterfactual(record=cand, changed=changed,
                                    probability=p, valid=True, proximity=prox)
                prev = pool.get(key)
                if prev is None or prox < prev.proximity:
                    pool[key] = cf
        order = np.argsort(losses, kind="stable")
        n_elite = max(2, config.population // 2)
        elites = [population[i] for i in order[:n_elite]]
        elite_records = [_materialize(record, e, stats)
                         for e in elites[:max(1, config.k - 1)]]
        children = []
        while len(children) < config.population - n_elite:
            a = elites[rng.integers(0, len(elites))]
            b = elites[rng.integers(0, len(elites))]
            children.append(mutate(crossover(a, b)))
        population = elites + children

    if not pool:
        cset.exhausted = True
        return cset

    # greedy pick: best combined loss first, then maximize spread
    ranked = sorted(pool.values(),
                    key=lambda c: (config.lambda_proximity * c.proximity
                                   + config.lambda_sparsity * len(c.changed)))
    chosen: list[Counterfactual] = [ranked[0]]
    remaining = ranked[1:]
    while remaining and len(chosen) < config.k:
        def gain(c: Counterfactual) -> float:
            spread = min(_distance(c.record, ch.record, stats, source_columns)
                         for ch in chosen)
            return (config.lambda_diversity * spread
                    - config.lambda_proximity * c.proximity
                    - config.lambda_sparsity * len(c.changed))
        best_i = max(range(len(remaining)), key=lambda i: (gain(remaining[i]), -i))
        chosen.append(remaining.pop(best_i))
    cset.candidates = chosen
    return cset


def flip_frequency(sets: list[CounterfactualSet]) -> dict[str, dict[str, float]]:
    """Per-feature tally over all valid candidates: how many candidates edit
    the feature and the share of valid candidates that do."""
    total = 0
    counts: dict[str, int] = {}
    for s in sets:
        for c in s.candidates:
            if not c.valid:
                continue
            total += 1
            for col in c.changed:
                counts[col] = counts.get(col, 0) + 1
    if total == 0:
        raise ValueError("flip_frequency: no valid counterfactuals in input")
    return {col: {"count": counts.get(col, 0),
                  "share": counts.get(col, 0) / total}
            for col in sorted(set(counts))}


def _single_edit_candidates(record: dict, col: str, stats: CfStats) -> list:
    if col in BOOL_COLUMNS:
        return [not bool(record[col])]
    if col in stats.numeric_grid:
        vals = stats.numeric_grid[col]
        if col in INT_COLUMNS:
            return [int(v) for v in vals if int(v) != int(record[col])]
        return [float(v) for v in vals if float(v) != float(record[col])]
    if col in DATE_COLUMNS:
        return [d for d in stats.date_grid[col] if d != record[col]]
    return [v for v in stats.cat_values[col] if v != record[col]]


def single_edit_flip_rate(model: TrainedModel, records: list[dict],
                          config: CfConfig) -> float:
    """Fraction of records whose prediction flips under some single-field
    edit, scanning every mutable feature's full candidate grid exhaustively."""
    if config.stats is None:
        raise ValueError("CfConfig.stats is required")
    stats = config.stats
    threshold = config.threshold
    if threshold is None:
        threshold = model.threshold if model.threshold is not None else 0.5
    source_columns = model.encoder.source_columns
    flipped = 0
    for record in records:
        p0 = float(_score_records(model, [record])[0])
        side0 = p0 > threshold
        cands = []
        for col in _mutable_for(record, config, source_columns):
            for v in _single_edit_candidates(record, col, stats):
                cands.append(_materialize(record, {col: v}, stats))
        if not cands:
            continue
        probs = _score_records(model, cands)
        if np.any((probs > threshold) != side0):
            flipped += 1
    return flipped / len(records) if records else 0.0
