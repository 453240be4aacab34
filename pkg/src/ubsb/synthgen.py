"""Synthetic resident profiles via a six-stage sampling pipeline.

Stage order per record: demographics (age, latent household size), then
job/income/employment status, education, phone, car, district/housing, and
behavioral attributes. A hard economic sanity filter rejects implausible
combinations (rejected records are redrawn from a fresh sub-stream, never
mutated), and seven configurable risk rules assign the delinquency label.

Determinism contract: record ``i`` of ``generate(config, n, seed)`` depends
only on ``(seed, i)``. Every record attempt owns an independent RNG stream
seeded with ``[seed, index, attempt]``, and each stage consumes a fixed
number of draws on every code path, so output is byte-identical regardless
of scheduling or thread count.
"""

from __future__ import annotations

import datetime
import math
from dataclasses import dataclass

import numpy as np

from .config import (
    EDUCATION_LEVELS,
    EMPLOYMENT_STATUSES,
    LabelRuleSet,
    MarginalConfig,
)


class GenerationError(RuntimeError):
    """Raised when a record cannot satisfy the sanity constraints."""


# Regeneration budget per record before generation aborts.
MAX_REGEN_ATTEMPTS = 100


@dataclass(slots=True)
class Profile:
    """One synthetic resident: the 19 emitted columns plus latent fields.

    Latents (household_size, device_tier, car_tier, risk_points, ...) drive
    generation and labeling but are never serialized.
    """

    id: int
    age: int
    education: str
    employment_status: str
    job: str
    monthly_income: float
    phone_model: str
    phone_purchase_date: datetime.date
    owns_car: bool
    car_brand: str                          # "" when owns_car is false
    car_purchase_date: datetime.date | None
    home_district: str
    owns_home: bool
    monthly_rent: float
    owns_credit_card: bool
    monthly_subscriptions: float
    online_shopping_frequency: int
    social_media_active: bool
    delinquency_FL: int
    # latent, not emitted
    household_size: int
    device_tier: str
    device_tier_rank: int
    phone_age_months: int
    car_tier: str                           # "" when owns_car is false
    risk_points: int
    noise_u: float                          # pre-drawn uniform for label noise


def months_between(earlier: datetime.date, later: datetime.date) -> int:
    """Completed calendar months from ``earlier`` to ``later``."""
    months = (later.year - earlier.year) * 12 + (later.month - earlier.month)
    if later.day < earlier.day:
        months -= 1
    return months


def _date_months_back(reference: datetime.date, months: int, day: int) -> datetime.date:
    # day is clamped to reference.day so months_between(date, reference)
    # recovers `months` exactly; callers draw day in 1..28 so it is always valid.
    total = reference.year * 12 + (reference.month - 1) - months
    year, month0 = divmod(total, 12)
    return datetime.date(year, month0 + 1, min(day, reference.day))


def _weighted_index(cdf: np.ndarray, u: float) -> int:
    return int(np.searchsorted(cdf, u * cdf[-1], side="right").clip(0, len(cdf) - 1))


def sample_job_income(
    config: MarginalConfig, rng: np.random.Generator
) -> tuple[str, str, int]:
    """Weighted occupation draw, uniform integer income in its band, then
    employment status from the occupation's own status weights."""
    weights = np.cumsum([o.weight for o in config.occupations])
    occ = config.occupations[_weighted_index(weights, rng.random())]
    lo, hi = occ.income_band
    income = int(rng.integers(lo, hi + 1))
    status_cdf = np.cumsum([occ.status_weights.get(s, 0.0) for s in EMPLOYMENT_STATUSES])
    status = EMPLOYMENT_STATUSES[_weighted_index(status_cdf, rng.random())]
    return occ.title, status, income


def assign_education(
    job: str, monthly_income: float, config: MarginalConfig, rng: np.random.Generator
) -> str:
    """Occupation's minimum credential, upgraded one level (capped at the top)
    with probability ``education_upgrade_prob``."""
    occ = config.occupation(job)
    base = EDUCATION_LEVELS.index(occ.min_education)
    u = rng.random()    # always consumed, keeps the stream aligned
    if u < config.education_upgrade_prob:
        base = min(base + 1, len(EDUCATION_LEVELS) - 1)
    return EDUCATION_LEVELS[base]


def _base_tier_index(income: float, bands: list[tuple[float, float]]) -> int:
    for i, (lo, hi) in enumerate(bands):
        if lo <= income < hi:
            return i
    return len(bands) - 1


def assign_phone(
    monthly_income: float, config: MarginalConfig, rng: np.random.Generator
) -> tuple[str, datetime.date, str]:
    """Income band picks the device tier; occasional one-sided jumps model
    aspirational upgrades and hand-me-downs. Model uniform from the tier pool,
    purchase date = reference_date minus a uniform tier-specific age."""
    tiers = config.device_tiers
    idx = _base_tier_index(monthly_income, [t.income_band for t in tiers])
    u_jump, u_pick = rng.random(), rng.random()
    if u_jump < config.phone_tier_up_prob and idx < len(tiers) - 1:
        above = range(idx + 1, len(tiers))
        idx = above[int(u_pick * len(above))]
    elif (
        config.phone_tier_up_prob <= u_jump < config.phone_tier_up_prob + config.phone_tier_down_prob
        and idx > 0
    ):
        idx = int(u_pick * idx)
    tier = tiers[idx]
    model = tier.models[int(rng.integers(0, len(tier.models)))]
    age = int(rng.integers(tier.age_months[0], tier.age_months[1] + 1))
    day = int(rng.integers(1, 29))
    return model, _date_months_back(config.reference_date, age, day), tier.name


def assign_car(
    monthly_income: float, config: MarginalConfig, rng: np.random.Generator
) -> tuple[bool, str, datetime.date | None, str]:
    """Highest income-threshold rule sets ownership probability and the base
    brand tier; a small upward jitter lets cheaper incomes hold pricier cars
    (the sanity filter rejects the extremes)."""
    rules = config.car_rules
    idx = 0
    for i, rule in enumerate(rules):
        if monthly_income >= rule.min_income:
            idx = i
    u_own, u_jump, u_pick = rng.random(), rng.random(), rng.random()
    brand_i = int(rng.integers(0, max(len(r.brands) for r in rules)))
    age_u = rng.random()
    day = int(rng.integers(1, 29))
    if u_own >= rules[idx].own_prob:
        return False, "", None, ""
    if u_jump < config.car_tier_up_prob and idx < len(rules) - 1:
        above = range(idx + 1, len(rules))
        idx = above[int(u_pick * len(above))]
    rule = rules[idx]
    brand = rule.brands[brand_i % len(rule.brands)]
    lo, hi = rule.age_months
    age = lo + int(age_u * (hi - lo + 1))
    return True, brand, _date_months_back(config.reference_date, age, day), rule.tier


def assign_district_rent(
    monthly_income: float,
    household_size: int,
    config: MarginalConfig,
    rng: np.random.Generator,
) -> tuple[str, bool, float]:
    """District rank follows the analytic income percentile with a small
    integer jitter; renters pay district median rent/m2 times the household's
    implied dwelling area times U(1-j, 1+j)."""
    by_rank = {d.income_rank: d for d in config.districts}
    n_d = len(config.districts)
    pct = config.income_cdf(monthly_income)
    target = 1 + int(math.floor((1.0 - pct) * (n_d - 1) + 0.5))
    j = config.district_rank_jitter
    jitter = int(rng.integers(-j, j + 1))
    rank = min(max(target + jitter, 1), n_d)
    district = by_rank[rank]

    prob = 0.0
    for threshold, p in config.home_ownership_prob_by_income:
        if monthly_income >= threshold:
            prob = p
    owns_home = rng.random() < prob
    u_rent = rng.random()   # consumed either way
    if owns_home:
        return district.name, True, 0.0
    area = config.area_by_household_size[household_size - 1]
    mult = 1.0 - config.rent_jitter + 2.0 * config.rent_jitter * u_rent
    return district.name, False, round(district.rent_per_m2 * area * mult, 2)


def _lognormal_exact_mean(mean: float, sd: float, z: float) -> float:
    # parameterized so E[X] = mean and SD[X] = sd exactly; degenerate sd -> mean
    if mean <= 0.0:
        return 0.0
    if sd <= 0.0:
        return mean
    sigma2 = math.log(1.0 + (sd / mean) ** 2)
    mu = math.log(mean) - 0.5 * sigma2
    return math.exp(mu + math.sqrt(sigma2) * z)


def synth_behavior(
    profile: Profile, config: MarginalConfig, rng: np.random.Generator
) -> tuple[float, int, bool, bool]:
    """Income band sets the behavioral base rates; lognormal fluctuation keeps
    spend and shopping counts non-negative with the configured mean and sd."""
    band = config.behavior_bands[
        _base_tier_index(profile.monthly_income, [b.income_band for b in config.behavior_bands])
    ]
    z_subs, z_shop = rng.standard_normal(), rng.standard_normal()
    subs = round(_lognormal_exact_mean(band.subscription_mean, band.subscription_sd, z_subs), 2)
    shopping = int(round(_lognormal_exact_mean(band.shopping_mean, band.shopping_sd, z_shop)))
    social = rng.random() < band.social_media_prob
    card = rng.random() < band.credit_card_prob
    return subs, shopping, social, card


def _require_stats(rules: LabelRuleSet) -> None:
    if rules.income_median is None or rules.shopping_p90 is None:
        raise ValueError("label rules need population stats (income_median, shopping_p90)")
    if rules.new_phone_min_tier_rank is None:
        raise ValueError("label rules need new_phone_min_tier_rank bound to the tier order")


def count_risk_points(profile: Profile, rules: LabelRuleSet) -> int:
    """Sum the points of all satisfied risk rules (no threshold, no noise)."""
    _require_stats(rules)
    pts = 0
    # R1: employment volatility
    if profile.employment_status == "Unemployed":
        pts += rules.unemployed_points
    elif profile.employment_status == "Self-Employed":
        pts += rules.self_employed_points
    # R2: brand-new high-tier phone on a below-median income
    if (
        profile.phone_age_months < rules.new_phone_max_age_months
        and profile.device_tier_rank >= rules.new_phone_min_tier_rank
        and profile.monthly_income < rules.income_median
    ):
        pts += rules.new_phone_points
    # R3: rent burden; zero income counts as an infinite ratio
    rent_ratio = (
        math.inf if profile.monthly_income <= 0
        else profile.monthly_rent / profile.monthly_income
    )
    if rent_ratio > rules.rent_ratio_mid:
        pts += rules.rent_ratio_mid_points
        if rent_ratio > rules.rent_ratio_high:
            pts += rules.rent_ratio_high_points
    # R4: shopping volume above the population p90 on a below-median income
    if (
        profile.online_shopping_frequency > rules.shopping_p90
        and profile.monthly_income < rules.income_median
    ):
        pts += rules.heavy_shopping_points
    # R5: subscription burden, same zero-income guard
    subs_ratio = (
        math.inf if profile.monthly_income <= 0
        else profile.monthly_subscriptions / profile.monthly_income
    )
    if subs_ratio > rules.subscription_ratio:
        pts += rules.subscription_points
    # R6: no financial anchor at all
    if not profile.owns_credit_card and not profile.owns_car and not profile.owns_home:
        pts += rules.no_anchor_points
    # R7: young and self-employed
    if (
        profile.age < rules.young_self_employed_max_age
        and profile.employment_status == "Self-Employed"
    ):
        pts += rules.young_self_employed_points
    return pts


def label_from_points(points: int, rules: LabelRuleSet, noise_u: float) -> int:
    if rules.calibrated_threshold is None:
        raise ValueError("label rules have no calibrated_threshold")
    label = 1 if points >= rules.calibrated_threshold else 0
    if noise_u < rules.noise_flip_prob:
        label = 1 - label
    return label


def apply_label_rules(
    profile: Profile, rules: LabelRuleSet, rng: np.random.Generator
) -> tuple[int, int]:
    """Evaluate the seven rules, threshold the points, flip with noise prob."""
    points = count_risk_points(profile, rules)
    return label_from_points(points, rules, rng.random()), points


def calibrate_threshold(
    profiles: list[Profile], rules: LabelRuleSet, target_prevalence: float
) -> int:
    """Integer threshold whose noise-free prevalence is closest to target;
    ties resolve toward the higher threshold (lower prevalence)."""
    if not profiles:
        raise ValueError("calibrate_threshold: empty profile list")
    if len(profiles) < 1000:
        raise ValueError("calibrate_threshold: need at least 1000 candidate profiles")
    points = np.array([count_risk_points(p, rules) for p in profiles])
    best_t, best_diff = 1, math.inf
    # candidates include max+1 (prevalence 0) so degenerate targets resolve
    for t in range(1, int(points.max()) + 2):
        diff = abs(float(np.mean(points >= t)) - target_prevalence)
        if diff <= best_diff:
            best_t, best_diff = t, diff
    return best_t


def sanity_filter(profile: Profile, config: MarginalConfig) -> bool:
    """True iff the profile violates no hard economic constraint."""
    low_income = profile.monthly_income <= 1.2 * config.min_wage
    if low_income and profile.owns_car and profile.car_tier == config.luxury_car_tier:
        return False
    if (
        low_income
        and profile.device_tier_rank >= config.flagship_tier_index
        and profile.phone_age_months < 12
    ):
        return False
    if profile.monthly_rent > 0.9 * profile.monthly_income:
        return False
    if profile.monthly_subscriptions > 0.3 * profile.monthly_income:
        return False
    return True


def _draw_profile(config: MarginalConfig, seed: int, index: int, attempt: int) -> Profile:
    """One full pipeline pass on the record's own stream. Every stage consumes
    a fixed number of draws regardless of branch, so streams never drift."""
    rng = np.random.default_rng([seed, index, attempt])
    lo_age, hi_age = config.age_range
    age = int(rng.integers(lo_age, hi_age + 1))
    household = int(rng.integers(1, 6))
    job, status, income = sample_job_income(config, rng)
    education = assign_education(job, income, config, rng)
    model, phone_date, tier = assign_phone(income, config, rng)
    owns_car, brand, car_date, car_tier = assign_car(income, config, rng)
    district, owns_home, rent = assign_district_rent(income, household, config, rng)
    profile = Profile(
        id=0,
        age=age,
        education=education,
        employment_status=status,
        job=job,
        monthly_income=income,
        phone_model=model,
        phone_purchase_date=phone_date,
        owns_car=owns_car,
        car_brand=brand,
        car_purchase_date=car_date,
        home_district=district,
        owns_home=owns_home,
        monthly_rent=rent,
        owns_credit_card=False,
        monthly_subscriptions=0.0,
        online_shopping_frequency=0,
        social_media_active=False,
        delinquency_FL=0,
        household_size=household,
        device_tier=tier,
        device_tier_rank=config.tier_index(tier),
        phone_age_months=months_between(phone_date, config.reference_date),
        car_tier=car_tier,
        risk_points=0,
        noise_u=1.0,
    )
    subs, shopping, social, card = synth_behavior(profile, config, rng)
    profile.monthly_subscriptions = subs
    profile.online_shopping_frequency = shopping
    profile.social_media_active = social
    profile.owns_credit_card = card
    profile.noise_u = float(rng.random())
    return profile


def _gen_record(config: MarginalConfig, seed: int, index: int) -> Profile:
    for attempt in range(MAX_REGEN_ATTEMPTS + 1):
        profile = _draw_profile(config, seed, index, attempt)
        if sanity_filter(profile, config):
            return profile
    raise GenerationError(
        f"record {index}: sanity constraints still violated after "
        f"{MAX_REGEN_ATTEMPTS} regeneration attempts"
    )


def generate_with_rules(
    config: MarginalConfig, n: int, seed: int
) -> tuple[list[Profile], LabelRuleSet]:
    """Generate ``n`` labeled profiles plus the stat-bound, calibrated rule set.

    Population statistics (income median, shopping p90) and the label
    threshold are calibrated on the first max(n, 1000) sanity-accepted
    records so small requests still see a stable population; candidates past
    ``n`` are discarded after calibration.
    """
    if n < 1:
        raise ValueError("generate: n must be >= 1")
    n_calib = max(n, 1000)
    profiles = [_gen_record(config, seed, i) for i in range(n_calib)]

    income_median = float(np.median([p.monthly_income for p in profiles]))
    shopping_p90 = float(np.quantile([p.online_shopping_frequency for p in profiles], 0.9))
    rules = config.label_rules.with_stats(
        income_median, shopping_p90, config.flagship_tier_index
    )
    threshold = calibrate_threshold(profiles, rules, config.target_prevalence)
    rules = rules.with_threshold(threshold)

    out = profiles[:n]
    for i, p in enumerate(out):
        p.id = i + 1
        p.risk_points = count_risk_points(p, rules)
        p.delinquency_FL = label_from_points(p.risk_points, rules, p.noise_u)
    return out, rules


def generate(config: MarginalConfig, n: int, seed: int) -> list[Profile]:
    """All six stages, sanity filtering with per-record regeneration, label
    calibration and noisy labeling; ids run 1..n."""
    return generate_with_rules(config, n, seed)[0]
