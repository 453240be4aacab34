"""Batch command-line surface: generate, ablate, lift, explain, validate.

Commands hand data to each other through CSV and JSON files only. Every
command writes a run manifest recording the resolved settings, seeds,
SHA-256 hashes of inputs and outputs, and a replayable command line, so a
run can be repeated and checked byte for byte.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import __version__
from .config import ConfigError, default_config_path, load_config
from .dataio import (
    DataError,
    Dataset,
    dataset_from_profiles,
    demo_features,
    feature_view,
    full_features,
    read_csv,
    write_csv,
)
from .eval.ablation import OofPredictions, run_ablation
from .eval.lift import LiftReport, lift_fixed_approval, lift_fixed_default
from .explain import (
    CfConfig,
    build_cf_stats,
    flip_frequency,
    generate_counterfactuals,
    records_from_table,
    single_edit_flip_rate,
)
from .models import FAMILIES, model_from_obj, model_to_obj
from .synthgen import generate

MANIFEST_FORMAT = 1


# ------------------------------------------------------------- file plumbing

def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _atomic_write_text(path: Path, text: str) -> None:
    # full file or nothing; a crash mid-write leaves only the .tmp behind
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _atomic_write_json(path: Path, obj) -> None:
    _atomic_write_text(path, json.dumps(obj, indent=2) + "\n")


def _sidecar(path: Path, suffix: str) -> Path:
    """train.csv -> train<suffix>, beside the original file."""
    return path.with_name(path.stem + suffix)


def write_manifest(path: Path, command: str, command_line: list[str],
                   settings: dict, seeds: dict, inputs: list[Path],
                   outputs: list[Path], started: float) -> None:
    """The manifest lists every output with its hash; `command_line` replays
    the run. Wall clock is metadata, so manifests themselves are not part of
    any byte-equality contract."""
    obj = {
        "manifest_format": MANIFEST_FORMAT,
        "tool": {"name": "ubsb", "version": __version__},
        "command": command,
        "command_line": command_line,
        "config": settings,
        "seeds": seeds,
        "input_hashes": {str(p): sha256_file(p) for p in inputs},
        "outputs": {str(p): sha256_file(p) for p in outputs},
        "wall_clock_seconds": round(time.time() - started, 3),
    }
    _atomic_write_json(path, obj)


def _resolve_threads(value: int | None) -> int:
    """--threads beats UBSB_THREADS beats 1. The cap is an upper bound on
    worker count; all kernels here are single-threaded, so results never
    depend on it."""
    if value is None:
        env = os.environ.get("UBSB_THREADS", "").strip()
        if not env:
            return 1
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(f"UBSB_THREADS: expected an integer, got {env!r}") from None
    return max(1, value)


def _fmt_num(x) -> str:
    # repr of a python float is the shortest round-trip form, stable across runs
    return repr(float(x)) if isinstance(x, float) else str(x)


# ----------------------------------------------------------------- SVG plots

_SVG_COLORS = ("#c8ccd4", "#4878a8")


def _bar_chart_svg(title: str, groups: list[str],
                   series: list[tuple[str, list[float]]],
                   lo: float = 0.0) -> str:
    """Grouped vertical bars, hand-assembled so the byte stream is a pure
    function of the inputs. `lo` pins the axis floor (AUC reads better from
    0.5 than from 0)."""
    w, h = 640, 320
    left, right, top, bottom = 56, 16, 34, 52
    pw, ph = w - left - right, h - top - bottom
    hi = max(v for _, vals in series for v in vals)
    hi = hi + 0.08 * (hi - lo) if hi > lo else lo + 1.0
    n_g, n_s = len(groups), len(series)
    slot = pw / n_g
    bar = slot / (n_s + 1)

    def y(v: float) -> float:
        return top + ph * (1.0 - (v - lo) / (hi - lo))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w} {h}" '
           f'font-family="sans-serif" font-size="11">',
           f'<text x="{w / 2:.1f}" y="18" text-anchor="middle" font-size="14">{title}</text>']
    for t in range(5):
        v = lo + (hi - lo) * t / 4
        yy = y(v)
        out.append(f'<line x1="{left}" y1="{yy:.1f}" x2="{w - right}" y2="{yy:.1f}" '
                   f'stroke="#dddddd"/>')
        out.append(f'<text x="{left - 6}" y="{yy + 4:.1f}" text-anchor="end">{v:.3f}</text>')
    for gi, g in enumerate(groups):
        x0 = left + gi * slot
        for si, (_, vals) in enumerate(series):
            bx = x0 + bar * (si + 0.5)
            by = y(vals[gi])
            out.append(f'<rect x="{bx:.1f}" y="{by:.1f}" width="{bar:.1f}" '
                       f'height="{top + ph - by:.1f}" fill="{_SVG_COLORS[si % len(_SVG_COLORS)]}"/>')
            out.append(f'<text x="{bx + bar / 2:.1f}" y="{by - 3:.1f}" text-anchor="middle" '
                       f'font-size="9">{vals[gi]:.3f}</text>')
        out.append(f'<text x="{x0 + slot / 2:.1f}" y="{h - bottom + 16}" '
                   f'text-anchor="middle">{g}</text>')
    for si, (name, _) in enumerate(series):
        lx = left + si * 110
        out.append(f'<rect x="{lx}" y="{h - 22}" width="12" height="12" '
                   f'fill="{_SVG_COLORS[si % len(_SVG_COLORS)]}"/>')
        out.append(f'<text x="{lx + 16}" y="{h - 12}">{name}</text>')
    out.append(f'<line x1="{left}" y1="{top + ph}" x2="{w - right}" y2="{top + ph}" '
               f'stroke="#333333"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _lift_chart_svg(report: LiftReport) -> str:
    """Two bars (good-approval and bad-rejection deltas per 100 screened)
    with bootstrap CI whiskers when present."""
    w, h = 420, 300
    left, top, bottom = 64, 40, 56
    pw, ph = w - left - 24, h - top - bottom
    bars = [("good approvals", report.mean_good_approvals, report.ci_good),
            ("bad rejections", report.mean_bad_rejections, report.ci_bad)]
    vals = [b[1] for b in bars]
    for _, _, ci in bars:
        if ci is not None:
            vals.extend(ci)
    lo, hi = min(0.0, min(vals)), max(0.0, max(vals))
    span = (hi - lo) or 1.0
    lo, hi = lo - 0.1 * span, hi + 0.1 * span

    def y(v: float) -> float:
        return top + ph * (1.0 - (v - lo) / (hi - lo))

    title = f"{report.policy} {report.value:g}: delta per 100 screened"
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w} {h}" '
           f'font-family="sans-serif" font-size="11">',
           f'<text x="{w / 2:.1f}" y="20" text-anchor="middle" font-size="13">{title}</text>']
    for t in range(5):
        v = lo + (hi - lo) * t / 4
        yy = y(v)
        out.append(f'<line x1="{left}" y1="{yy:.1f}" x2="{w - 24}" y2="{yy:.1f}" stroke="#dddddd"/>')
        out.append(f'<text x="{left - 6}" y="{yy + 4:.1f}" text-anchor="end">{v:.2f}</text>')
    out.append(f'<line x1="{left}" y1="{y(0.0):.1f}" x2="{w - 24}" y2="{y(0.0):.1f}" stroke="#333333"/>')
    slot = pw / len(bars)
    for i, (name, mean, ci) in enumerate(bars):
        cx = left + slot * (i + 0.5)
        bw = slot * 0.4
        y0, y1 = y(max(mean, 0.0)), y(min(mean, 0.0))
        out.append(f'<rect x="{cx - bw / 2:.1f}" y="{y0:.1f}" width="{bw:.1f}" '
                   f'height="{max(y1 - y0, 0.5):.1f}" fill="{_SVG_COLORS[1]}"/>')
        if ci is not None:
            ylo, yhi = y(ci[0]), y(ci[1])
            out.append(f'<line x1="{cx:.1f}" y1="{ylo:.1f}" x2="{cx:.1f}" y2="{yhi:.1f}" '
                       f'stroke="#222222" stroke-width="1.5"/>')
            for yy in (ylo, yhi):
                out.append(f'<line x1="{cx - 6:.1f}" y1="{yy:.1f}" x2="{cx + 6:.1f}" '
                           f'y2="{yy:.1f}" stroke="#222222" stroke-width="1.5"/>')
        out.append(f'<text x="{cx:.1f}" y="{h - bottom + 18}" text-anchor="middle">{name}</text>')
        out.append(f'<text x="{cx:.1f}" y="{h - bottom + 32}" text-anchor="middle" '
                   f'font-size="10">{mean:+.2f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ------------------------------------------------------------- validate rules

class Violation(NamedTuple):
    row: int        # record id, not file line
    rule: str
    detail: str


def dataset_violations(dataset: Dataset) -> list[Violation]:
    """Config-free sanity rules every generated dataset satisfies.

    homeowner_rent          owners pay no rent
    rent_income_share       rent at most 0.9 x monthly income
    subscription_income_share   subscriptions at most 0.3 x monthly income
    car_fields_missing / car_fields_spurious   brand and purchase date
                            present exactly when owns_car
    phone_fields_missing    phone model and purchase date always present
    income_positive         monthly income strictly positive
    negative_value          rent, subscriptions, shopping count nonnegative
    label_binary            delinquency flag is 0 or 1
    """
    c = dataset.columns
    ids = c["id"]
    out: list[Violation] = []

    def flag(mask: np.ndarray, rule: str, detail) -> None:
        for i in np.flatnonzero(mask):
            out.append(Violation(int(ids[i]), rule, detail(i)))

    income = c["monthly_income"]
    rent = c["monthly_rent"]
    subs = c["monthly_subscriptions"]
    car_date_none = np.array([d is None for d in c["car_purchase_date"]])
    phone_date_none = np.array([d is None for d in c["phone_purchase_date"]])
    brand_empty = np.array([b == "" for b in c["car_brand"]])
    model_empty = np.array([m == "" for m in c["phone_model"]])

    flag(c["owns_home"] & (rent != 0.0), "homeowner_rent",
         lambda i: f"owns_home is true but monthly_rent is {rent[i]:g}")
    flag(rent > 0.9 * income, "rent_income_share",
         lambda i: f"monthly_rent {rent[i]:g} exceeds 0.9 x income {income[i]:g}")
    flag(subs > 0.3 * income, "subscription_income_share",
         lambda i: f"monthly_subscriptions {subs[i]:g} exceeds 0.3 x income {income[i]:g}")
    flag(c["owns_car"] & (brand_empty | car_date_none), "car_fields_missing",
         lambda i: "owns_car is true but car_brand or car_purchase_date is empty")
    flag(~c["owns_car"] & (~brand_empty | ~car_date_none), "car_fields_spurious",
         lambda i: "owns_car is false but car fields are populated")
    flag(model_empty | phone_date_none, "phone_fields_missing",
         lambda i: "phone_model or phone_purchase_date is empty")
    flag(income <= 0.0, "income_positive",
         lambda i: f"monthly_income is {income[i]:g}")
    for col in ("monthly_rent", "monthly_subscriptions", "online_shopping_frequency"):
        flag(c[col] < 0, "negative_value",
             lambda i, col=col: f"{col} is {c[col][i]:g}")
    lab = c["delinquency_FL"]
    flag((lab != 0) & (lab != 1), "label_binary",
         lambda i: f"delinquency_FL is {lab[i]}")

    out.sort(key=lambda v: (v.row, v.rule))
    return out


# ------------------------------------------------------------------- commands

def _require_file(parser: argparse.ArgumentParser, flag: str, path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        parser.error(f"{flag}: no such file: {p}")
    return p


def cmd_generate(args, parser) -> int:
    started = time.time()
    if args.n < 1:
        parser.error("--n must be at least 1")
    cfg_path = _require_file(parser, "--config", args.config) if args.config \
        else default_config_path()
    config = load_config(cfg_path)

    profiles = generate(config, args.n, args.seed)
    dataset = dataset_from_profiles(
        profiles, {"config": str(cfg_path), "n": args.n, "seed": args.seed})

    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    tmp = out.with_name(out.name + ".tmp")
    write_csv(dataset, tmp)
    os.replace(tmp, out)

    threads = _resolve_threads(args.threads)
    manifest = _sidecar(out, ".manifest.json")
    write_manifest(
        manifest, "generate",
        ["generate", "--config", str(cfg_path), "--n", str(args.n),
         "--seed", str(args.seed), "--out", str(out), "--threads", str(threads)],
        {"config": str(cfg_path), "n": args.n, "seed": args.seed,
         "out": str(out), "threads": threads},
        {"seed": args.seed}, [cfg_path], [out], started)
    prevalence = float(dataset.labels.mean())
    print(f"wrote {out}: {dataset.n} records, prevalence {prevalence:.4f}")
    print(f"manifest: {manifest}")
    return 0


def _head_rows(dataset: Dataset, n: int) -> Dataset:
    # ids are contiguous from 1, so a prefix is itself a valid dataset
    cols = {name: arr[:n] for name, arr in dataset.columns.items()}
    return Dataset(cols, dict(dataset.provenance, smoke_rows=n))


def cmd_ablate(args, parser) -> int:
    started = time.time()
    data_path = _require_file(parser, "--data", args.data)
    families = args.families.split(",") if args.families else list(FAMILIES)
    for fam in families:
        if fam not in FAMILIES:
            parser.error(f"--families: unknown family name {fam!r} "
                         f"(choose from {', '.join(FAMILIES)})")
    if args.smoke:
        folds, trials = 3, 10
    else:
        folds, trials = args.folds, args.trials
    if folds < 2:
        parser.error("--folds: cross-validation needs at least 2 folds")
    if trials < 1:
        parser.error("--trials: at least 1 tuning trial is required")
    threads = _resolve_threads(args.threads)

    dataset = read_csv(data_path)
    if args.smoke and dataset.n > 10000:
        dataset = _head_rows(dataset, 10000)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    kept: dict[tuple[str, str], object] = {}

    def sink(family, variant, fold, model, threshold):
        if fold == 0:
            model.threshold = threshold
            kept[(family, variant)] = model

    report = run_ablation(dataset, families, n_folds=folds, n_trials=trials,
                          seed=args.seed, model_sink=sink)

    rows = report.csv_rows()
    header = list(rows[0].keys())
    csv_lines = [",".join(header)]
    csv_lines += [",".join(_fmt_num(r[h]) for h in header) for r in rows]
    metrics_path = out_dir / "metrics.csv"
    _atomic_write_text(metrics_path, "\n".join(csv_lines) + "\n")

    outputs = [metrics_path]
    for fr in report.results:
        p = out_dir / f"oof_{fr.family}.json"
        _atomic_write_json(p, fr.oof.to_obj())
        outputs.append(p)

    delong_path = out_dir / "delong.json"
    _atomic_write_json(delong_path, {
        fr.family: {
            "auc_demo": fr.delong.auc_a, "auc_full": fr.delong.auc_b,
            "delta": fr.delong.delta, "var_delta": fr.delong.var_delta,
            "z": fr.delong.z, "p_value": fr.delong.p_value,
            "degenerate": fr.delong.degenerate,
        } for fr in report.results})
    outputs.append(delong_path)

    for (fam, variant), model in sorted(kept.items()):
        p = out_dir / f"model_{fam}_{variant}.json"
        _atomic_write_json(p, model_to_obj(model))
        outputs.append(p)

    if args.plots:
        plot_dir = out_dir / "plots"
        plot_dir.mkdir(exist_ok=True)
        fams = [fr.family for fr in report.results]
        for metric, field, floor in (("AUC", "fold_auc", 0.5), ("F1", "fold_f1", 0.0)):
            series = [
                (v, [fr.variant(v).mean(getattr(fr.variant(v), field)) for fr in report.results])
                for v in ("Demo", "Full")
            ]
            p = plot_dir / f"{metric.lower()}.svg"
            _atomic_write_text(p, _bar_chart_svg(
                f"{metric} by family, mean over {folds} folds", fams, series, lo=floor))
            outputs.append(p)

    command_line = ["ablate", "--data", str(data_path),
                    "--families", ",".join(families),
                    "--folds", str(folds), "--trials", str(trials),
                    "--seed", str(args.seed), "--out", str(out_dir),
                    "--threads", str(threads)]
    if args.smoke:
        command_line.append("--smoke")
    if args.plots:
        command_line.append("--plots")
    write_manifest(out_dir / "manifest.json", "ablate", command_line,
                   {"data": str(data_path), "families": families,
                    "folds": folds, "trials": trials, "seed": args.seed,
                    "out": str(out_dir), "threads": threads,
                    "smoke": bool(args.smoke), "rows_used": dataset.n},
                   {"seed": args.seed}, [data_path], outputs, started)

    print(f"{'Model':<10} {'Variant':<7} {'AUC':>8} {'F1':>8} {'Prec':>8} {'Rec':>8}")
    for r in rows:
        print(f"{r['Model']:<10} {r['Variant']:<7} {r['AUC']:>8.4f} {r['F1']:>8.4f} "
              f"{r['Precision']:>8.4f} {r['Recall']:>8.4f}")
    print()
    for fr in report.results:
        print(f"{fr.family}: DeLong delta={fr.delong.delta:+.4f} p={fr.delong.p_value:.3e}")
    print(f"\nartifacts in {out_dir} ({time.time() - started:.1f}s)")
    return 0


def cmd_lift(args, parser) -> int:
    started = time.time()
    oof_path = _require_file(parser, "--oof", args.oof)
    if args.bootstrap < 0:
        parser.error("--bootstrap must be nonnegative")
    if args.approval_rate is not None:
        if not 0 < args.approval_rate <= 100:
            parser.error("--approval-rate must lie in (0, 100]")
        policy, value = "approval", args.approval_rate
    else:
        if not 0 <= args.default_rate < 100:
            parser.error("--default-rate must lie in [0, 100)")
        policy, value = "default", args.default_rate
    threads = _resolve_threads(args.threads)

    with open(oof_path, encoding="utf-8") as fh:
        oof = OofPredictions.from_obj(json.load(fh))
    if policy == "approval":
        report = lift_fixed_approval(oof, value, bootstrap_b=args.bootstrap,
                                     seed=args.seed)
    else:
        report = lift_fixed_default(oof, value, bootstrap_b=args.bootstrap,
                                    seed=args.seed)

    stem = f"lift_{oof.family}_{policy}_{value:g}"
    out = oof_path.with_name(stem + ".json")
    _atomic_write_json(out, report.to_obj())
    outputs = [out]
    if args.plots:
        p = oof_path.with_name(stem + ".svg")
        _atomic_write_text(p, _lift_chart_svg(report))
        outputs.append(p)

    command_line = ["lift", "--oof", str(oof_path),
                    "--approval-rate" if policy == "approval" else "--default-rate",
                    f"{value:g}", "--bootstrap", str(args.bootstrap),
                    "--seed", str(args.seed), "--threads", str(threads)]
    if args.plots:
        command_line.append("--plots")
    write_manifest(oof_path.with_name(stem + ".manifest.json"), "lift",
                   command_line,
                   {"oof": str(oof_path), "policy": report.policy, "value": value,
                    "bootstrap": args.bootstrap, "seed": args.seed,
                    "threads": threads},
                   {"seed": args.seed}, [oof_path], outputs, started)

    def _ci(ci):
        return f"[{ci[0]:+.3f}, {ci[1]:+.3f}]" if ci else "(no bootstrap)"

    print(f"{oof.family}, {report.policy} at {value:g}%: Full minus Demo per 100 screened")
    print(f"  good approvals: {report.mean_good_approvals:+.3f} {_ci(report.ci_good)}")
    print(f"  bad rejections: {report.mean_bad_rejections:+.3f} {_ci(report.ci_bad)}")
    if report.zero_approval_folds:
        print(f"  zero-approval folds: {report.zero_approval_folds}")
    print(f"report: {out}")
    return 0


def cmd_explain(args, parser) -> int:
    started = time.time()
    model_path = _require_file(parser, "--model", args.model)
    data_path = _require_file(parser, "--data", args.data)
    if args.records < 1:
        parser.error("--records must be at least 1")
    if args.k < 1:
        parser.error("--k must be at least 1")
    threads = _resolve_threads(args.threads)

    with open(model_path, encoding="utf-8") as fh:
        model = model_from_obj(json.load(fh))
    dataset = read_csv(data_path)
    feature_set = (full_features() if model.encoder.feature_set_name == "Full"
                   else demo_features())
    table, _ = feature_view(dataset, feature_set)

    config = CfConfig(k=args.k, seed=args.seed, stats=build_cf_stats(dataset))
    rng = np.random.default_rng(args.seed)
    n_rec = min(args.records, dataset.n)
    indices = np.sort(rng.choice(dataset.n, size=n_rec, replace=False))
    records = records_from_table(table, indices)

    sets = [generate_counterfactuals(model, rec, config) for rec in records]
    profile = flip_frequency(sets)
    edit_rate = single_edit_flip_rate(model, records, config)

    out = _sidecar(model_path, ".explain.json")
    _atomic_write_json(out, {
        "model": str(model_path),
        "record_ids": [int(dataset.columns["id"][i]) for i in indices],
        "k": args.k,
        "counterfactuals": [s.to_obj() for s in sets],
        "flip_frequency": profile,
        "single_edit_flip_rate": edit_rate,
    })

    write_manifest(_sidecar(model_path, ".explain.manifest.json"), "explain",
                   ["explain", "--model", str(model_path), "--data", str(data_path),
                    "--records", str(args.records), "--k", str(args.k),
                    "--seed", str(args.seed), "--threads", str(threads)],
                   {"model": str(model_path), "data": str(data_path),
                    "records": args.records, "k": args.k, "seed": args.seed,
                    "threads": threads},
                   {"seed": args.seed}, [model_path, data_path], [out], started)

    n_valid = sum(sum(c.valid for c in s.candidates) for s in sets)
    print(f"{n_rec} records audited, {n_valid} valid counterfactuals "
          f"(threshold from model: {sets[0].threshold:.4f})")
    for i, s in enumerate(sets[:10]):
        tag = " trivially satisfied" if s.trivially_satisfied else \
              (" exhausted" if s.exhausted else "")
        edits = sorted({c for cand in s.candidates for c in cand.changed})
        print(f"  record {int(dataset.columns['id'][indices[i]])}: "
              f"p={s.original_probability:.3f}, {len(s.candidates)} candidates"
              f"{tag}; edits: {', '.join(edits) if edits else 'none'}")
    if len(sets) > 10:
        print(f"  ... {len(sets) - 10} more in {out.name}")
    print("flip frequency (share of valid candidates touching each feature):")
    for col, row in sorted(profile.items(), key=lambda kv: -kv[1]["share"]):
        print(f"  {col:<28} {row['share']:.3f}  ({int(row['count'])})")
    print(f"single-edit flip rate: {edit_rate:.3f}")
    print(f"report: {out}")
    return 0


def cmd_validate(args, parser) -> int:
    started = time.time()
    data_path = _require_file(parser, "--data", args.data)
    threads = _resolve_threads(args.threads)
    try:
        dataset = read_csv(data_path)
    except DataError as exc:
        print(f"schema error: {exc}")
        return 1

    violations = dataset_violations(dataset)
    for v in violations:
        print(f"row {v.row}: {v.rule}: {v.detail}")
    write_manifest(_sidecar(data_path, ".validate.manifest.json"), "validate",
                   ["validate", "--data", str(data_path), "--threads", str(threads)],
                   {"data": str(data_path), "threads": threads,
                    "violations": len(violations)},
                   {}, [data_path], [], started)
    if violations:
        print(f"{len(violations)} violation(s) in {dataset.n} records")
        return 1
    print(f"no violations in {dataset.n} records")
    return 0


# --------------------------------------------------------------------- parser

def _add_threads(sp) -> None:
    sp.add_argument("--threads", type=int, default=None,
                    help="cap on worker count (default: UBSB_THREADS or 1); "
                         "results do not depend on it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ubsb",
        description="Synthetic credit-scoring bench: data generation, "
                    "Demo-vs-Full ablation, approval lift, counterfactual audits.")
    parser.add_argument("--version", action="version", version=f"ubsb {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="draw a synthetic population and write CSV")
    g.add_argument("--config", metavar="PATH", default=None,
                   help="marginals TOML (default: packaged config)")
    g.add_argument("--n", type=int, required=True, help="number of records")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", metavar="PATH", required=True, help="output CSV path")
    _add_threads(g)
    g.set_defaults(func=cmd_generate)

    a = sub.add_parser("ablate", help="Demo vs Full cross-validated study")
    a.add_argument("--data", metavar="PATH", required=True, help="dataset CSV")
    a.add_argument("--families", metavar="LIST", default=None,
                   help=f"comma-separated subset of: {', '.join(FAMILIES)}")
    a.add_argument("--folds", type=int, default=5)
    a.add_argument("--trials", type=int, default=50, help="tuning trials per fold")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out", metavar="DIR", required=True, help="artifact directory")
    a.add_argument("--smoke", action="store_true",
                   help="quick profile: first 10000 rows, 3 folds, 10 trials")
    a.add_argument("--plots", action="store_true", help="also write SVG charts")
    _add_threads(a)
    a.set_defaults(func=cmd_ablate)

    lf = sub.add_parser("lift", help="approval lift from an OOF predictions file")
    lf.add_argument("--oof", metavar="PATH", required=True,
                    help="oof_<family>.json from ablate")
    pol = lf.add_mutually_exclusive_group(required=True)
    pol.add_argument("--approval-rate", type=float, metavar="R",
                     help="approve the safest R percent")
    pol.add_argument("--default-rate", type=float, metavar="T",
                     help="largest approval set with default rate at most T percent")
    lf.add_argument("--bootstrap", type=int, default=1000, metavar="B",
                    help="stratified bootstrap resamples (0 disables CIs)")
    lf.add_argument("--seed", type=int, default=0)
    lf.add_argument("--plots", action="store_true", help="also write an SVG chart")
    _add_threads(lf)
    lf.set_defaults(func=cmd_lift)

    e = sub.add_parser("explain", help="counterfactual audit of a saved model")
    e.add_argument("--model", metavar="PATH", required=True,
                   help="model_<family>_<variant>.json from ablate")
    e.add_argument("--data", metavar="PATH", required=True, help="dataset CSV")
    e.add_argument("--records", type=int, default=100, metavar="N",
                   help="records to audit (seeded sample)")
    e.add_argument("--k", type=int, default=4, metavar="K",
                   help="counterfactuals requested per record")
    e.add_argument("--seed", type=int, default=0)
    _add_threads(e)
    e.set_defaults(func=cmd_explain)

    v = sub.add_parser("validate", help="schema and sanity report for a dataset CSV")
    v.add_argument("--data", metavar="PATH", required=True)
    _add_threads(v)
    v.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
