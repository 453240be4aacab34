"""Marginal configuration: every distribution, pool, rule and threshold the
profile generator draws from, loaded from a single TOML file.

The shipped default (``ubsb/data/default_config.toml``) describes an
Istanbul-like population: occupation/pay marginals, device tier pools, an
income-ranked district map, behavior base rates and the delinquency rule set.
"""

from __future__ import annotations

import datetime
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EDUCATION_LEVELS = ("HighSchool", "University", "MSc", "PhD")
EMPLOYMENT_STATUSES = ("Employed", "Unemployed", "Self-Employed")


class ConfigError(ValueError):
    """Raised when a marginal config fails validation; message names the key."""


@dataclass(frozen=True)
class OccupationSpec:
    title: str
    weight: float
    income_band: tuple[int, int]          # monthly TRY, inclusive
    min_education: str                    # one of EDUCATION_LEVELS
    status_weights: dict[str, float]      # over EMPLOYMENT_STATUSES


@dataclass(frozen=True)
class DeviceTier:
    name: str
    income_band: tuple[float, float]      # [lo, hi); last tier hi = inf
    models: tuple[str, ...]
    age_months: tuple[int, int]           # uniform integer, inclusive


@dataclass(frozen=True)
class CarRule:
    min_income: float
    own_prob: float
    tier: str
    brands: tuple[str, ...]
    age_months: tuple[int, int]


@dataclass(frozen=True)
class District:
    name: str
    rent_per_m2: float
    income_rank: int                      # 1 = highest-income district


@dataclass(frozen=True)
class BehaviorBand:
    income_band: tuple[float, float]
    subscription_mean: float
    subscription_sd: float
    shopping_mean: float
    shopping_sd: float
    social_media_prob: float
    credit_card_prob: float


@dataclass(frozen=True)
class LabelRuleSet:
    """Parameters of the seven delinquency rules plus label noise.

    Point values are non-negative integers; every threshold is configurable.
    ``income_median`` and ``shopping_p90`` are population statistics filled in
    during generation (or pinned explicitly for standalone rule evaluation).
    """

    unemployed_points: int = 3                 # R1
    self_employed_points: int = 1              # R1
    new_phone_max_age_months: int = 10         # R2
    new_phone_min_tier: str = "Flagship"       # R2
    new_phone_points: int = 2                  # R2
    rent_ratio_mid: float = 0.4                # R3
    rent_ratio_mid_points: int = 2             # R3
    rent_ratio_high: float = 0.6               # R3
    rent_ratio_high_points: int = 1            # R3
    heavy_shopping_points: int = 2             # R4
    subscription_ratio: float = 0.05           # R5
    subscription_points: int = 1               # R5
    no_anchor_points: int = 1                  # R6
    young_self_employed_max_age: int = 25      # R7
    young_self_employed_points: int = 1        # R7
    noise_flip_prob: float = 0.03
    calibrated_threshold: int | None = None
    income_median: float | None = None
    shopping_p90: float | None = None
    new_phone_min_tier_rank: int | None = None

    def with_stats(
        self,
        income_median: float,
        shopping_p90: float,
        new_phone_min_tier_rank: int | None = None,
    ) -> "LabelRuleSet":
        out = replace(self, income_median=income_median, shopping_p90=shopping_p90)
        if new_phone_min_tier_rank is not None:
            out = replace(out, new_phone_min_tier_rank=new_phone_min_tier_rank)
        return out

    def with_threshold(self, threshold: int) -> "LabelRuleSet":
        return replace(self, calibrated_threshold=threshold)


@dataclass(frozen=True)
class MarginalConfig:
    occupations: tuple[OccupationSpec, ...]
    education_upgrade_prob: float
    device_tiers: tuple[DeviceTier, ...]
    phone_tier_up_prob: float
    phone_tier_down_prob: float
    car_rules: tuple[CarRule, ...]
    car_tier_up_prob: float
    districts: tuple[District, ...]
    home_ownership_prob_by_income: tuple[tuple[float, float], ...]
    area_by_household_size: tuple[float, ...]   # household size 1..5 -> m^2
    rent_jitter: float                          # rent multiplier ~ U(1-j, 1+j)
    district_rank_jitter: int
    behavior_bands: tuple[BehaviorBand, ...]
    label_rules: LabelRuleSet
    target_prevalence: float
    reference_date: datetime.date
    min_wage: float
    age_range: tuple[int, int] = (18, 75)

    @property
    def flagship_tier_index(self) -> int:
        """Index of the configured 'new phone' rule tier (R2 / sanity filter)."""
        name = self.label_rules.new_phone_min_tier
        for i, tier in enumerate(self.device_tiers):
            if tier.name == name:
                return i
        return len(self.device_tiers) - 1

    @property
    def luxury_car_tier(self) -> str:
        """Tier name of the highest-threshold car rule (sanity filter)."""
        return max(self.car_rules, key=lambda r: r.min_income).tier

    def tier_index(self, tier_name: str) -> int:
        for i, tier in enumerate(self.device_tiers):
            if tier.name == tier_name:
                return i
        raise ConfigError(f"unknown device tier {tier_name!r}")

    def occupation(self, title: str) -> OccupationSpec:
        for occ in self.occupations:
            if occ.title == title:
                return occ
        raise ConfigError(f"unknown occupation {title!r}")

    def income_cdf(self, income: float) -> float:
        """Population income percentile implied by the occupation marginals.

        The configured income distribution is a weight mixture of uniform
        bands, so the CDF is analytic; this keeps district placement a pure
        per-record function (no population pass needed).
        """
        total = sum(o.weight for o in self.occupations)
        acc = 0.0
        for occ in self.occupations:
            lo, hi = occ.income_band
            if income >= hi:
                part = 1.0
            elif income <= lo:
                part = 0.0
            else:
                part = (income - lo) / (hi - lo)
            acc += occ.weight * part
        return acc / total


def default_config_path() -> Path:
    return Path(__file__).parent / "data" / "default_config.toml"


def load_config(path: str | Path | None = None) -> MarginalConfig:
    """Load and validate a MarginalConfig from TOML.

    Raises ConfigError naming the offending key (TOML syntax errors keep the
    parser's line/column anchor).
    """
    path = Path(path) if path is not None else default_config_path()
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(raw)


def _req(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return table[key]


def _band(value, where: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{where}: expected [lo, hi]")
    lo, hi = float(value[0]), float(value[1])
    return lo, hi


def config_from_dict(raw: dict) -> MarginalConfig:
    pop = _req(raw, "population", "config")
    ref = _req(pop, "reference_date", "population")
    if isinstance(ref, datetime.datetime):
        ref = ref.date()
    if not isinstance(ref, datetime.date):
        raise ConfigError("population.reference_date: expected a calendar date")

    occupations = []
    for i, occ in enumerate(_req(raw, "occupations", "config")):
        where = f"occupations[{i}]"
        band = _band(_req(occ, "income_band", where), f"{where}.income_band")
        occupations.append(
            OccupationSpec(
                title=str(_req(occ, "title", where)),
                weight=float(_req(occ, "weight", where)),
                income_band=(int(band[0]), int(band[1])),
                min_education=str(_req(occ, "min_education", where)),
                status_weights={str(k): float(v) for k, v in _req(occ, "status_weights", where).items()},
            )
        )

    phones = _req(raw, "phones", "config")
    tiers = []
    for i, t in enumerate(_req(phones, "tiers", "phones")):
        where = f"phones.tiers[{i}]"
        age = _req(t, "age_months", where)
        tiers.append(
            DeviceTier(
                name=str(_req(t, "name", where)),
                income_band=_band(_req(t, "income_band", where), f"{where}.income_band"),
                models=tuple(str(m) for m in _req(t, "models", where)),
                age_months=(int(age[0]), int(age[1])),
            )
        )

    cars = _req(raw, "cars", "config")
    car_rules = []
    for i, r in enumerate(_req(cars, "rules", "cars")):
        where = f"cars.rules[{i}]"
        age = _req(r, "age_months", where)
        car_rules.append(
            CarRule(
                min_income=float(_req(r, "min_income", where)),
                own_prob=float(_req(r, "own_prob", where)),
                tier=str(_req(r, "tier", where)),
                brands=tuple(str(b) for b in _req(r, "brands", where)),
                age_months=(int(age[0]), int(age[1])),
            )
        )

    districts = []
    for i, d in enumerate(_req(raw, "districts", "config")):
        where = f"districts[{i}]"
        districts.append(
            District(
                name=str(_req(d, "name", where)),
                rent_per_m2=float(_req(d, "rent_per_m2", where)),
                income_rank=int(_req(d, "income_rank", where)),
            )
        )

    housing = _req(raw, "housing", "config")
    ownership = tuple(
        (float(pair[0]), float(pair[1]))
        for pair in _req(housing, "ownership_prob_by_income", "housing")
    )

    bands = []
    behavior = _req(raw, "behavior", "config")
    for i, b in enumerate(_req(behavior, "bands", "behavior")):
        where = f"behavior.bands[{i}]"
        bands.append(
            BehaviorBand(
                income_band=_band(_req(b, "income_band", where), f"{where}.income_band"),
                subscription_mean=float(_req(b, "subscription_mean", where)),
                subscription_sd=float(_req(b, "subscription_sd", where)),
                shopping_mean=float(_req(b, "shopping_mean", where)),
                shopping_sd=float(_req(b, "shopping_sd", where)),
                social_media_prob=float(_req(b, "social_media_prob", where)),
                credit_card_prob=float(_req(b, "credit_card_prob", where)),
            )
        )

    labels = raw.get("labels", {})
    rules_raw = labels.get("rules", {})
    known = {f.name for f in LabelRuleSet.__dataclass_fields__.values()}  # type: ignore[attr-defined]
    unknown = set(rules_raw) - known
    if unknown:
        raise ConfigError(f"labels.rules: unknown keys {sorted(unknown)}")
    rules_kwargs = dict(rules_raw)
    rules_kwargs.setdefault("noise_flip_prob", float(labels.get("noise_flip_prob", 0.03)))
    rules = LabelRuleSet(**rules_kwargs)

    cfg = MarginalConfig(
        occupations=tuple(occupations),
        education_upgrade_prob=float(raw.get("education", {}).get("upgrade_prob", 0.15)),
        device_tiers=tuple(tiers),
        phone_tier_up_prob=float(phones.get("tier_up_prob", 0.0)),
        phone_tier_down_prob=float(phones.get("tier_down_prob", 0.0)),
        car_rules=tuple(car_rules),
        car_tier_up_prob=float(cars.get("tier_up_prob", 0.0)),
        districts=tuple(districts),
        home_ownership_prob_by_income=ownership,
        area_by_household_size=tuple(float(a) for a in _req(housing, "area_by_household_size", "housing")),
        rent_jitter=float(housing.get("rent_jitter", 0.1)),
        district_rank_jitter=int(housing.get("rank_jitter", 2)),
        behavior_bands=tuple(bands),
        label_rules=rules,
        target_prevalence=float(_req(pop, "target_prevalence", "population")),
        reference_date=ref,
        min_wage=float(_req(pop, "min_wage", "population")),
        age_range=tuple(int(a) for a in pop.get("age_range", (18, 75))),  # type: ignore[arg-type]
    )
    validate_config(cfg)
    return cfg


def _check_no_comma(name: str, where: str) -> None:
    if "," in name or "\n" in name:
        raise ConfigError(f"{where}: category name {name!r} must not contain commas or newlines")


def validate_config(cfg: MarginalConfig) -> None:
    if not cfg.occupations:
        raise ConfigError("occupations: at least one occupation required")
    if not (0.0 < cfg.target_prevalence <= 0.5):
        raise ConfigError("population.target_prevalence: must be in (0, 0.5]")
    if cfg.min_wage <= 0:
        raise ConfigError("population.min_wage: must be positive")
    lo_age, hi_age = cfg.age_range
    if not (18 <= lo_age <= hi_age <= 75):
        raise ConfigError("population.age_range: must lie within [18, 75]")
    if not (0.0 <= cfg.education_upgrade_prob <= 1.0):
        raise ConfigError("education.upgrade_prob: must be in [0, 1]")

    total_w = 0.0
    for i, occ in enumerate(cfg.occupations):
        where = f"occupations[{i}] ({occ.title})"
        _check_no_comma(occ.title, where)
        if occ.weight < 0:
            raise ConfigError(f"{where}: weight must be >= 0")
        total_w += occ.weight
        lo, hi = occ.income_band
        if lo > hi:
            raise ConfigError(f"{where}: income band min must be <= max")
        if lo < 0.5 * cfg.min_wage:
            raise ConfigError(f"{where}: income band min must be >= 0.5 * min_wage")
        if occ.min_education not in EDUCATION_LEVELS:
            raise ConfigError(f"{where}: unknown education level {occ.min_education!r}")
        sw = occ.status_weights
        if set(sw) - set(EMPLOYMENT_STATUSES):
            raise ConfigError(f"{where}: unknown employment status in status_weights")
        if any(v < 0 for v in sw.values()) or sum(sw.values()) <= 0:
            raise ConfigError(f"{where}: status weights must be >= 0 with a positive sum")
    if total_w <= 0:
        raise ConfigError("occupations: total weight must be positive")

    if not cfg.device_tiers:
        raise ConfigError("phones.tiers: at least one tier required")
    prev_hi = 0.0
    for i, tier in enumerate(cfg.device_tiers):
        where = f"phones.tiers[{i}] ({tier.name})"
        _check_no_comma(tier.name, where)
        lo, hi = tier.income_band
        if lo != prev_hi:
            raise ConfigError(f"{where}: income bands must tile [0, inf) contiguously")
        if hi <= lo:
            raise ConfigError(f"{where}: income band must have lo < hi")
        prev_hi = hi
        if not tier.models:
            raise ConfigError(f"{where}: empty model pool")
        for m in tier.models:
            _check_no_comma(m, where)
        if not (0 <= tier.age_months[0] <= tier.age_months[1]):
            raise ConfigError(f"{where}: age_months must satisfy 0 <= lo <= hi")
    if not math.isinf(prev_hi):
        raise ConfigError("phones.tiers: last tier must be open-ended (hi = inf)")
    for p, key in ((cfg.phone_tier_up_prob, "phones.tier_up_prob"),
                   (cfg.phone_tier_down_prob, "phones.tier_down_prob"),
                   (cfg.car_tier_up_prob, "cars.tier_up_prob")):
        if not (0.0 <= p <= 1.0):
            raise ConfigError(f"{key}: must be in [0, 1]")

    if not cfg.car_rules:
        raise ConfigError("cars.rules: at least one rule required")
    if cfg.car_rules[0].min_income != 0:
        raise ConfigError("cars.rules: first rule must start at min_income = 0")
    prev = -1.0
    for i, rule in enumerate(cfg.car_rules):
        where = f"cars.rules[{i}] ({rule.tier})"
        _check_no_comma(rule.tier, where)
        if rule.min_income <= prev:
            raise ConfigError(f"{where}: min_income thresholds must be strictly increasing")
        prev = rule.min_income
        if not (0.0 <= rule.own_prob <= 1.0):
            raise ConfigError(f"{where}: own_prob must be in [0, 1]")
        if not rule.brands:
            raise ConfigError(f"{where}: empty brand pool")
        for b in rule.brands:
            _check_no_comma(b, where)
        if not (0 <= rule.age_months[0] <= rule.age_months[1]):
            raise ConfigError(f"{where}: age_months must satisfy 0 <= lo <= hi")

    if not cfg.districts:
        raise ConfigError("districts: district list must be non-empty")
    ranks = sorted(d.income_rank for d in cfg.districts)
    if ranks != list(range(1, len(cfg.districts) + 1)):
        raise ConfigError("districts: income ranks must be a permutation of 1..D")
    for d in cfg.districts:
        _check_no_comma(d.name, f"districts ({d.name})")
        if d.rent_per_m2 <= 0:
            raise ConfigError(f"districts ({d.name}): rent_per_m2 must be positive")

    if len(cfg.area_by_household_size) != 5:
        raise ConfigError("housing.area_by_household_size: expected 5 areas (household sizes 1..5)")
    if any(a <= 0 for a in cfg.area_by_household_size):
        raise ConfigError("housing.area_by_household_size: areas must be positive")
    if not (0.0 <= cfg.rent_jitter < 1.0):
        raise ConfigError("housing.rent_jitter: must be in [0, 1)")
    if cfg.district_rank_jitter < 0:
        raise ConfigError("housing.rank_jitter: must be >= 0")
    if not cfg.home_ownership_prob_by_income:
        raise ConfigError("housing.ownership_prob_by_income: must be non-empty")
    if cfg.home_ownership_prob_by_income[0][0] != 0:
        raise ConfigError("housing.ownership_prob_by_income: first threshold must be 0")
    prev = -1.0
    for thr, p in cfg.home_ownership_prob_by_income:
        if thr <= prev:
            raise ConfigError("housing.ownership_prob_by_income: thresholds must increase")
        prev = thr
        if not (0.0 <= p <= 1.0):
            raise ConfigError("housing.ownership_prob_by_income: probabilities must be in [0, 1]")

    if not cfg.behavior_bands:
        raise ConfigError("behavior.bands: at least one band required")
    prev_hi = 0.0
    for i, band in enumerate(cfg.behavior_bands):
        where = f"behavior.bands[{i}]"
        lo, hi = band.income_band
        if lo != prev_hi:
            raise ConfigError(f"{where}: income bands must tile [0, inf) contiguously")
        if hi <= lo:
            raise ConfigError(f"{where}: income band must have lo < hi")
        prev_hi = hi
        if band.subscription_mean < 0 or band.shopping_mean < 0:
            raise ConfigError(f"{where}: means must be >= 0")
        if band.subscription_sd < 0 or band.shopping_sd < 0:
            raise ConfigError(f"{where}: dispersions must be >= 0")
        for p in (band.social_media_prob, band.credit_card_prob):
            if not (0.0 <= p <= 1.0):
                raise ConfigError(f"{where}: probabilities must be in [0, 1]")
    if not math.isinf(prev_hi):
        raise ConfigError("behavior.bands: last band must be open-ended (hi = inf)")

    r = cfg.label_rules
    if not (0.0 <= r.noise_flip_prob <= 0.1):
        raise ConfigError("labels.noise_flip_prob: must be in [0, 0.1]")
    for pts_name in ("unemployed_points", "self_employed_points", "new_phone_points",
                     "rent_ratio_mid_points", "rent_ratio_high_points", "heavy_shopping_points",
                     "subscription_points", "no_anchor_points", "young_self_employed_points"):
        if getattr(r, pts_name) < 0:
            raise ConfigError(f"labels.rules.{pts_name}: points must be >= 0")
    if r.calibrated_threshold is not None and r.calibrated_threshold < 1:
        raise ConfigError("labels.rules.calibrated_threshold: must be >= 1")
    if r.new_phone_min_tier not in {t.name for t in cfg.device_tiers}:
        raise ConfigError(f"labels.rules.new_phone_min_tier: unknown tier {r.new_phone_min_tier!r}")
    if not (0 < r.rent_ratio_mid <= r.rent_ratio_high):
        raise ConfigError("labels.rules: need 0 < rent_ratio_mid <= rent_ratio_high")
