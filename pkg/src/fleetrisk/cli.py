"""Command-line pipeline driver.

Subcommands compose the library stages and drop their artifacts plus a
manifest into the output directory. Exit codes: 0 success, 1 data errors
(malformed or inconsistent inputs), 2 usage errors (bad flags, missing
prerequisite artifacts).

When --input is not given, commands look for a previous `synth` run's
subworkorders.csv in the output directory, so
`fleetrisk synth -o out && fleetrisk train -o out` works without
re-plumbing paths. The single --seed drives every random stage through
labeled child seeds.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import itertools
import json
import sys
from dataclasses import replace
from datetime import date, datetime, timezone
from pathlib import Path

from . import config as cfg
from .errors import FleetRiskError, UsageError
from .evaluation import (
    ChronologicalSplit,
    RandomRowSplit,
    ablation,
    separation_ratio,
    split,
    write_ablation_csv,
    write_eval_report,
    write_histogram_csv,
)
from .features import FeatureSpec, apply_scale, encode, standardize, transform
from .ingest import parse_subworkorders, write_subworkorders
from .models import fit_model, load_model, predict_proba, save_model
from .panel import PanelOptions, build_panel, load_utilization_csv, write_panel_csv
from .policy import (
    HighestRisk,
    MelSpec,
    RandomUniform,
    mel_risk,
    simulate_policy,
    trace_histograms,
    write_trace_csv,
    write_trace_histograms_csv,
)
from .synth import generate_fleet

SUBWORKORDERS_CSV = "subworkorders.csv"
UTILIZATION_CSV = "utilization.csv"
MODEL_JSON = "model.json"


class _Run:
    """Shared state for one invocation: resolved config, hashes, outputs."""

    def __init__(self, command: str, config: cfg.RunConfig):
        self.command = command
        self.config = config
        self.out_dir = Path(config.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []

    def note_input(self, path: Path) -> None:
        self.inputs[str(path)] = hashlib.sha256(path.read_bytes()).hexdigest()

    def write_text(self, name: str, text: str) -> Path:
        path = self.out_dir / name
        path.write_text(text)
        self.outputs.append(name)
        return path

    def write_bytes(self, name: str, blob: bytes) -> Path:
        path = self.out_dir / name
        path.write_bytes(blob)
        self.outputs.append(name)
        return path

    def write_manifest(self) -> None:
        manifest = {
            "command": self.command,
            "seed": self.config.seed,
            "config": cfg.config_to_dict(self.config),
            "inputs": self.inputs,
            "outputs": sorted(self.outputs),
            "created_utc": datetime.now(timezone.utc).isoformat(),
        }
        (self.out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def _input_path(run: _Run) -> Path:
    if run.config.input_csv:
        path = Path(run.config.input_csv)
        if not path.exists():
            raise UsageError(f"input CSV not found: {path}")
        return path
    fallback = run.out_dir / SUBWORKORDERS_CSV
    if fallback.exists():
        return fallback
    raise UsageError("no input CSV: pass --input or run `synth` into this output directory first")


def _utilization_path(run: _Run) -> Path | None:
    if run.config.utilization_csv:
        path = Path(run.config.utilization_csv)
        if not path.exists():
            raise UsageError(f"utilization CSV not found: {path}")
        return path
    fallback = run.out_dir / UTILIZATION_CSV
    return fallback if fallback.exists() else None


def _load_records(run: _Run):
    path = _input_path(run)
    run.note_input(path)
    return parse_subworkorders(path.read_bytes())


def _panel_options(run: _Run) -> PanelOptions:
    start = None
    if run.config.start_date is not None:
        try:
            start = date.fromisoformat(run.config.start_date)
        except ValueError:
            raise UsageError(f"start_date is not an ISO date: {run.config.start_date!r}")
    utilization = None
    sidecar = _utilization_path(run)
    if sidecar is not None:
        run.note_input(sidecar)
        try:
            utilization = load_utilization_csv(sidecar)
        except ValueError as exc:
            raise FleetRiskError(f"bad utilization sidecar: {exc}")
    return PanelOptions(
        include_scheduled=run.config.include_scheduled,
        start_date=start,
        end_week=run.config.end_week,
        gap_cap=run.config.gap_cap,
        utilization=utilization,
        default_weekly_rate=run.config.default_weekly_rate,
    )


def _build_panel(run: _Run):
    records, _errors = _load_records(run)
    return build_panel(records, _panel_options(run))


def _split_spec(run: _Run):
    if run.config.split == "random":
        return RandomRowSplit(run.config.test_fraction, seed=cfg.child_seed(run.config.seed, "split"))
    return ChronologicalSplit(run.config.test_fraction)


def _load_saved_model(run: _Run):
    path = run.out_dir / MODEL_JSON
    if not path.exists():
        raise UsageError(f"no trained model at {path}; run `train` first")
    run.note_input(path)
    return load_model(path)


def _fit_on_train(run: _Run, panel):
    train, test = split(panel, _split_spec(run))
    matrix = standardize(encode(train, cfg.feature_spec(run.config)))
    model = fit_model(run.config.model, matrix, cfg.model_hyper(run.config))
    return model, train, test


def _eval_artifacts(run: _Run, model, test_panel) -> None:
    X = transform(test_panel.rows, model.columns, model.scale)
    preds = predict_proba(model, X)
    labels = [r.repair_flag for r in test_panel.rows]
    report = separation_ratio(preds, labels)
    buf = io.StringIO()
    write_eval_report(report, buf)
    run.write_text("eval_report.json", buf.getvalue())
    for name, counts in (("histogram_true.csv", report.histogram_true), ("histogram_false.csv", report.histogram_false)):
        buf = io.StringIO()
        write_histogram_csv(counts, buf)
        run.write_text(name, buf.getvalue())


def _ablate_artifacts(run: _Run, panel) -> None:
    subsets = [FeatureSpec.of(names) for names in run.config.ablation_subsets]
    rows = ablation(panel, subsets, run.config.model, cfg.model_hyper(run.config), _split_spec(run))
    buf = io.StringIO()
    write_ablation_csv(rows, buf)
    run.write_text("ablation.csv", buf.getvalue())


def _simulate_artifacts(run: _Run, model, test_panel) -> None:
    proactive = simulate_policy(model, test_panel, HighestRisk())
    random_arm = simulate_policy(model, test_panel, RandomUniform(seed=cfg.child_seed(run.config.seed, "policy")))

    buf = io.StringIO()
    write_trace_csv(proactive, buf)
    run.write_text("policy_trace.csv", buf.getvalue())
    for name, trace in (("policy_hist_proactive.csv", proactive), ("policy_hist_random.csv", random_arm)):
        buf = io.StringIO()
        write_trace_histograms_csv(trace_histograms(trace), buf)
        run.write_text(name, buf.getvalue())

    summary = {}
    for arm, trace in (("proactive", proactive), ("random", random_arm)):
        summary[arm] = {
            "n_weeks": len(trace),
            "censored": trace.censored_count(),
            "mean_weeks_since_last_actual_service": trace.mean_weeks_since(),
            "mean_weeks_until_next_actual_service": trace.mean_weeks_until(),
        }
    run.write_text("policy_summary.json", json.dumps(summary, indent=2, sort_keys=True))


def _mel_artifacts(run: _Run, model, panel) -> None:
    if not run.config.mel_specs:
        raise UsageError("mel requires mel_specs in the config or --mel TYPE=COUNT flags")
    latest: dict[str, object] = {}
    for row in panel.rows:  # rows sorted by (asset, week): last one per asset wins
        latest[row.asset_id] = row
    by_type: dict[str, list] = {}
    for row in latest.values():
        by_type.setdefault(row.vehicle_type, []).append(row)

    results = []
    for entry in run.config.mel_specs:
        vtype = str(entry["vehicle_type"])
        mel = int(entry["mel"])
        rows = sorted(by_type.get(vtype, []), key=lambda r: r.asset_id)
        if not rows:
            raise FleetRiskError(f"no vehicles of type {vtype!r} in the panel")
        if "assigned" in entry and int(entry["assigned"]) != len(rows):
            raise FleetRiskError(
                f"mel spec for {vtype!r} says assigned={entry['assigned']} but the panel has {len(rows)}"
            )
        X = transform(rows, model.columns, model.scale)
        probs = predict_proba(model, X)
        spec = MelSpec(vehicle_type=vtype, mel=mel, assigned=len(rows))
        results.append(
            {
                "vehicle_type": vtype,
                "mel": mel,
                "assigned": len(rows),
                "risk": mel_risk(probs, spec),
            }
        )
    run.write_text("mel_risk.json", json.dumps({"specs": results}, indent=2, sort_keys=True))


def _labor_artifacts(run: _Run, records) -> None:
    """Per-vehicle weekly labor-hours series from the raw records."""
    from .panel import monday_of, week_index

    if not records:
        raise FleetRiskError("no records to report labor hours for")
    start = monday_of(min(r.approval_date for r in records))
    if run.config.start_date is not None:
        start = monday_of(date.fromisoformat(run.config.start_date))
    totals: dict[tuple[str, int], float] = {}
    for r in records:
        key = (r.asset_id, week_index(r.approval_date, start))
        totals[key] = totals.get(key, 0.0) + (r.labor_hours or 0.0)
    lines = ["asset_id,week,labor_hours"]
    for (asset_id, week), hours in sorted(totals.items()):
        lines.append(f"{asset_id},{week},{hours!r}")
    run.write_text("labor_hours.csv", "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# subcommand bodies


def _cmd_synth(run: _Run) -> int:
    csv_bytes, sidecar, truth = generate_fleet(cfg.fleet_config(run.config))
    run.write_bytes(SUBWORKORDERS_CSV, csv_bytes)
    run.write_text(UTILIZATION_CSV, sidecar)
    run.write_text("ground_truth.json", json.dumps(truth.to_dict()))
    return 0


def _cmd_ingest(run: _Run) -> int:
    records, errors = _load_records(run)
    buf = io.StringIO()
    write_subworkorders(records, buf)
    run.write_text("records.csv", buf.getvalue())
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["line", "field", "reason"])
    for e in errors:
        writer.writerow([e.line, e.field, e.reason])
    run.write_text("row_errors.csv", buf.getvalue())
    return 0


def _cmd_panel(run: _Run) -> int:
    panel = _build_panel(run)
    buf = io.StringIO()
    write_panel_csv(panel, buf)
    run.write_text("panel.csv", buf.getvalue())
    return 0


def _cmd_train(run: _Run) -> int:
    panel = _build_panel(run)
    model, _train, _test = _fit_on_train(run, panel)
    buf = io.StringIO()
    save_model(model, buf)
    run.write_text(MODEL_JSON, buf.getvalue())
    return 0


def _cmd_eval(run: _Run) -> int:
    model = _load_saved_model(run)
    panel = _build_panel(run)
    _train, test = split(panel, _split_spec(run))
    _eval_artifacts(run, model, test)
    return 0


def _cmd_ablate(run: _Run) -> int:
    panel = _build_panel(run)
    _ablate_artifacts(run, panel)
    return 0


def _cmd_simulate(run: _Run) -> int:
    model = _load_saved_model(run)
    panel = _build_panel(run)
    _train, test = split(panel, _split_spec(run))
    _simulate_artifacts(run, model, test)
    return 0


def _cmd_mel(run: _Run) -> int:
    model = _load_saved_model(run)
    panel = _build_panel(run)
    _mel_artifacts(run, model, panel)
    return 0


def _cmd_report(run: _Run) -> int:
    records, _errors = _load_records(run)
    _labor_artifacts(run, records)
    panel = build_panel(records, _panel_options(run))
    model, _train, test = _fit_on_train(run, panel)
    buf = io.StringIO()
    save_model(model, buf)
    run.write_text(MODEL_JSON, buf.getvalue())
    _eval_artifacts(run, model, test)
    _ablate_artifacts(run, panel)
    _simulate_artifacts(run, model, test)
    return 0


def _cmd_tune(run: _Run) -> int:
    panel = _build_panel(run)
    split_spec = _split_spec(run)
    train, test = split(panel, split_spec)
    spec = cfg.feature_spec(run.config)

    grid = run.config.tune_grid
    keys = sorted(grid)
    combos = list(itertools.product(*(grid[k] for k in keys))) if keys else [()]

    matrix = standardize(encode(train, spec))
    test_matrix = apply_scale(encode(test, spec, vocab=train.vocab), matrix.scale)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["params", "ratio", "mean_pred_true", "mean_pred_false"])
    best = None
    for combo in combos:
        overrides = dict(zip(keys, combo))
        trial = replace(run.config, **overrides)
        model = fit_model(trial.model, matrix, cfg.model_hyper(trial))
        report = separation_ratio(predict_proba(model, test_matrix.values), test_matrix.labels)
        writer.writerow([json.dumps(overrides, sort_keys=True), repr(report.ratio), repr(report.mean_pred_true), repr(report.mean_pred_false)])
        if best is None or report.ratio > best[1]:
            best = (overrides, report.ratio)
    run.write_text("tune_results.csv", buf.getvalue())
    run.write_text("tune_best.json", json.dumps({"params": best[0], "ratio": best[1]}, indent=2, sort_keys=True))
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "ingest": _cmd_ingest,
    "panel": _cmd_panel,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "ablate": _cmd_ablate,
    "simulate": _cmd_simulate,
    "mel": _cmd_mel,
    "report": _cmd_report,
    "tune": _cmd_tune,
}


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("-o", "--out", dest="out_dir", help="output directory (default: out)")
    parser.add_argument("--input", dest="input_csv", help="sub-work-order CSV to read")
    parser.add_argument("--utilization", dest="utilization_csv", help="utilization sidecar CSV")
    parser.add_argument("--seed", type=int, help="master seed for all random stages")
    parser.add_argument("--model", choices=("logistic", "forest", "gbt"), help="model kind")
    parser.add_argument("--features", help="comma-separated feature names")
    parser.add_argument("--split", choices=("chronological", "random"), help="train/test split kind")
    parser.add_argument("--test-fraction", dest="test_fraction", type=float, help="test share in (0,1)")
    scheduled = parser.add_mutually_exclusive_group()
    scheduled.add_argument(
        "--include-scheduled", dest="include_scheduled", action="store_true", default=None,
        help="count scheduled (preventive) visits as repair events",
    )
    scheduled.add_argument(
        "--exclude-scheduled", dest="include_scheduled", action="store_false", default=None,
        help="count only unscheduled repairs as events",
    )
    parser.add_argument("--start-date", dest="start_date", help="panel start date (ISO), overrides earliest approval")
    parser.add_argument("--end-week", dest="end_week", type=int, help="last panel week index")
    parser.add_argument("--gap-cap", dest="gap_cap", type=int, help="cap on weeks-since-last-visit")
    parser.add_argument("--l2-lambda", dest="l2_lambda", type=float, help="logistic L2 strength")
    parser.add_argument("--max-iters", dest="max_iters", type=int, help="logistic iteration cap")
    parser.add_argument("--tol", type=float, help="logistic gradient-norm stop")
    parser.add_argument("--solver", choices=("gd", "newton"), help="logistic solver")
    parser.add_argument("--n-estimators", dest="n_estimators", type=int, help="trees in forest / boosting rounds")
    parser.add_argument("--max-depth", dest="max_depth", type=int, help="tree depth cap")
    parser.add_argument("--min-leaf", dest="min_leaf", type=int, help="min rows per leaf")
    parser.add_argument("--max-features", dest="max_features", type=int, help="features tried per forest split")
    parser.add_argument("--learning-rate", dest="learning_rate", type=float, help="boosting shrinkage")
    parser.add_argument("--mel", action="append", metavar="TYPE=COUNT", help="MEL line, repeatable")
    parser.add_argument("--n-vehicles", dest="n_vehicles", type=int, help="synthetic fleet size")
    parser.add_argument("--n-weeks", dest="n_weeks", type=int, help="synthetic horizon in weeks")
    parser.add_argument("--beta0", type=float, help="synthetic baseline log-odds")
    parser.add_argument("--beta-age", dest="beta_age", type=float, help="synthetic per-week age effect")
    parser.add_argument("--beta-gap", dest="beta_gap", type=float, help="synthetic per-week gap effect")
    parser.add_argument("--beta-util", dest="beta_util", type=float, help="synthetic per-unit utilization effect")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fleetrisk",
        description="Weekly breakdown-risk pipeline: ingest, panel, models, evaluation, policy.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "synth": "generate a synthetic fleet with known hazard parameters",
        "ingest": "parse and validate a sub-work-order CSV",
        "panel": "build the weekly per-vehicle panel",
        "train": "fit a model on the train split and save it",
        "eval": "score the saved model on the test split",
        "ablate": "refit over the configured feature subsets",
        "simulate": "run the proactive-repair rollout and random baseline",
        "mel": "compute below-MEL risk per vehicle type",
        "report": "produce the full artifact set in one run",
        "tune": "grid-search hyperparameters against the split",
    }
    for name, desc in descriptions.items():
        p = sub.add_parser(name, help=desc, description=desc)
        _add_common(p)
    return parser


_OVERRIDE_KEYS = (
    "input_csv", "utilization_csv", "out_dir", "seed", "model", "split", "test_fraction",
    "include_scheduled", "start_date", "end_week", "gap_cap", "l2_lambda", "max_iters",
    "tol", "solver", "n_estimators", "max_depth", "min_leaf", "max_features", "learning_rate",
    "n_vehicles", "n_weeks", "beta0", "beta_age", "beta_gap", "beta_util",
)


def _overrides_from_args(args: argparse.Namespace) -> dict:
    overrides = {key: getattr(args, key) for key in _OVERRIDE_KEYS}
    if args.features is not None:
        overrides["features"] = [f.strip() for f in args.features.split(",") if f.strip()]
    if args.mel:
        specs = []
        for item in args.mel:
            if "=" not in item:
                raise UsageError(f"--mel expects TYPE=COUNT, got {item!r}")
            vtype, _, count = item.partition("=")
            try:
                specs.append({"vehicle_type": vtype, "mel": int(count)})
            except ValueError:
                raise UsageError(f"--mel count must be an integer, got {item!r}")
        overrides["mel_specs"] = specs
    return overrides


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        file_values = cfg.load_config_file(args.config) if args.config else {}
        config = cfg.build_run_config(file_values, _overrides_from_args(args))
        run = _Run(args.command, config)
        if args.config:
            run.note_input(Path(args.config))
        code = _COMMANDS[args.command](run)
        run.write_manifest()
        return code
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FleetRiskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
