"""Command-line surface: synth, ingest, export, train, forecast, evaluate,
gradcheck.

Every command is deterministic given its inputs and seeds and exits
nonzero on any error.  Dates are ISO (YYYY-MM-DD); ranges are written
``first:last`` with both ends inclusive.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as dt
import json
import os
import sys
import time

import numpy as np

from .cells import CellKind
from .config import load_run_config, preset
from .dataset import (
    export_csv,
    ingest_csv,
    load_store,
    save_store,
    synthetic_store,
)
from .errors import LoadcastError
from .evaluation import (
    TABLE1_COLUMNS,
    TABLE2_COLUMNS,
    GW_MIN_DAYS,
    daily_loss_series,
    evaluate_forecasts,
    gw_test,
    rank_models,
    sort_records,
)
from .gradcheck import check_cell
from .network import CELL_VARIANTS
from .serialize import load_ensemble, save_ensemble
from .preprocess import build_training_set
from .training import EnsembleModel, forecast_range, train

_POINT_METRICS = ("mape", "mdape", "iqr_ape", "rmse", "mpe", "std_pe")


def _parse_date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise LoadcastError(f"bad date {text!r}, expected YYYY-MM-DD") from None


def _parse_range(text: str):
    first, sep, last = text.partition(":")
    lo = _parse_date(first)
    hi = _parse_date(last) if sep else lo
    if hi < lo:
        raise LoadcastError(f"date range {text!r} runs backwards")
    return lo, hi


def _print_manifest(manifest, out=sys.stdout):
    for sid, entry in manifest["series"].items():
        print(f"series {sid}: {entry['hours']} hours from {entry['start']} "
              f"to {entry['end']}, {entry['missing_hours']} missing "
              f"({entry['coverage_pct']:.1f}% coverage), "
              f"{entry['gap_count']} gaps", file=out)
    print(f"total: {manifest['total_series']} series, "
          f"{manifest['total_hours']} hours", file=out)


def cmd_synth(args) -> int:
    store = synthetic_store(n_series=args.series, days=args.days,
                            start=_parse_date(args.start), seed=args.seed,
                            noise=args.noise)
    if args.csv is None and args.store is None:
        raise LoadcastError("synth needs --csv and/or --store")
    if args.csv:
        export_csv(store, args.csv)
    if args.store:
        save_store(args.store, store)
    _print_manifest(store.manifest())
    return 0


def cmd_ingest(args) -> int:
    store = ingest_csv(args.csv)
    save_store(args.store, store)
    _print_manifest(store.manifest())
    return 0


def cmd_export(args) -> int:
    export_csv(load_store(args.store), args.csv)
    return 0


def _load_config(args):
    config = load_run_config(args.config) if args.config else preset(args.preset)
    if args.cell:
        config = dataclasses.replace(
            config, model=dataclasses.replace(config.model,
                                              cell_variant=args.cell))
    return config


def cmd_train(args) -> int:
    config = _load_config(args)
    store = load_store(args.store)
    train_range = _parse_range(args.train_range) if args.train_range else None
    data = build_training_set(
        [store.get(sid) for sid in store.series_ids], train_range)

    log_lines = []

    def log(line):
        log_lines.append(line)
        print(line)

    log(f"training {config.model.cell_variant} on {len(data.by_series)} "
        f"series, {len(data)} samples, {len(config.recipe.seeds)} members")
    started = time.monotonic()
    members = []
    for seed in config.recipe.seeds:
        result = train(data, config.model, config.recipe, seed=seed,
                       loss_config=config.loss)
        for epoch, loss in enumerate(result.epoch_losses, start=1):
            log(f"member seed={seed} epoch {epoch}/{config.recipe.epochs} "
                f"loss={loss!r} lr={config.recipe.lr_at(epoch)} "
                f"batch={config.recipe.batch_at(epoch)}")
        log(f"member seed={seed} finished: {result.update_count} updates")
        members.append(result.model)
    ensemble = EnsembleModel(tuple(members))
    save_ensemble(args.out, ensemble, recipe=config.recipe,
                  loss_config=config.loss)
    log(f"wrote {args.out} after {time.monotonic() - started:.1f}s")
    if args.log:
        with open(args.log, "w", encoding="utf-8") as fh:
            fh.write("\n".join(log_lines) + "\n")
    return 0


def _forecast_records(model_path, store, series_id, lo, hi, label=None):
    ensemble, meta = load_ensemble(model_path)
    if label is None:
        label = meta["cell_variant"] or ensemble.config.cell_variant
    series = store.get(series_id)
    return forecast_range(ensemble, series, lo, hi, label=label)


def cmd_forecast(args) -> int:
    store = load_store(args.store)
    lo, hi = _parse_range(args.dates)
    records = _forecast_records(args.model, store, args.series, lo, hi)
    if not records:
        raise LoadcastError(
            f"no forecastable days for {args.series} in {args.dates}")

    rows = []
    days = []
    for rec in sort_records(records):
        start = dt.datetime.combine(rec.target_date, dt.time())
        days.append({
            "date": rec.target_date.isoformat(),
            "point": [float(v) for v in rec.point],
            "lower": [float(v) for v in rec.lower],
            "upper": [float(v) for v in rec.upper],
        })
        for hour in range(24):
            rows.append(((start + dt.timedelta(hours=hour)).isoformat(),
                         repr(float(rec.point[hour])),
                         repr(float(rec.lower[hour])),
                         repr(float(rec.upper[hour]))))

    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["timestamp", "point_mw", "lower_mw", "upper_mw"])
            writer.writerows(rows)
    if args.json:
        payload = {"series": args.series, "model": records[0].model,
                   "days": days}
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    if not args.csv and not args.json:
        print("timestamp,point_mw,lower_mw,upper_mw")
        for row in rows:
            print(",".join(row))
    print(f"forecast {args.series}: {len(records)} days, {len(rows)} rows",
          file=sys.stderr)
    return 0


def _parse_model_args(model_args):
    """``label=path`` pairs; bare paths label themselves by cell variant."""
    out = []
    for item in model_args:
        label, sep, path = item.partition("=")
        if sep:
            out.append((label, path))
        else:
            out.append((None, item))
    return out


def _mean_over_series(reports):
    merged = {}
    for name in _POINT_METRICS + ("pi_in", "pi_below", "pi_above",
                                  "winkler_normalized"):
        merged[name] = float(np.mean([getattr(r, name) for r in reports]))
    merged["pi_crossings"] = int(sum(r.pi_crossings for r in reports))
    merged["n_hours"] = int(sum(r.n_hours for r in reports))
    merged["n_days"] = int(sum(r.n_days for r in reports))
    return merged


def cmd_evaluate(args) -> int:
    store = load_store(args.store)
    if args.test_range:
        lo, hi = _parse_range(args.test_range)
    else:
        last = max(store.get(sid).end for sid in store.series_ids)
        lo, hi = dt.date(last.year, 1, 1), dt.date(last.year, 12, 31)
        print(f"test range defaulting to final calendar year "
              f"{lo.isoformat()}:{hi.isoformat()}")

    models = []
    for label, path in _parse_model_args(args.model):
        ensemble, meta = load_ensemble(path)
        if label is None:
            label = meta["cell_variant"] or ensemble.config.cell_variant
        if any(label == seen for seen, _ in models):
            raise LoadcastError(f"duplicate model label {label!r}; "
                                "use label=path to disambiguate")
        models.append((label, ensemble))

    series_by_id = {sid: store.get(sid) for sid in store.series_ids}
    records = {}
    per_series = {}
    summary = {}
    for label, ensemble in models:
        recs = []
        for sid in store.series_ids:
            recs.extend(forecast_range(ensemble, series_by_id[sid], lo, hi,
                                       label=label))
        if not recs:
            raise LoadcastError(
                f"model {label!r}: no forecastable days in the test range")
        records[label] = recs
        by_series = {}
        for sid in store.series_ids:
            sid_recs = [r for r in recs if r.series_id == sid]
            if not sid_recs:
                continue
            by_series[sid] = evaluate_forecasts(sid_recs, series_by_id,
                                                alpha=args.alpha)
        per_series[label] = by_series
        summary[label] = _mean_over_series(list(by_series.values()))

    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)

    with open(os.path.join(out_dir, "table1.csv"), "w", encoding="utf-8",
              newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TABLE1_COLUMNS)
        for label, _ in models:
            s = summary[label]
            writer.writerow([label] + [repr(s[m]) for m in _POINT_METRICS])

    with open(os.path.join(out_dir, "table2.csv"), "w", encoding="utf-8",
              newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TABLE2_COLUMNS)
        for label, _ in models:
            s = summary[label]
            writer.writerow([label, repr(s["pi_in"]), repr(s["pi_below"]),
                             repr(s["pi_above"]), repr(s["winkler_normalized"])])

    with open(os.path.join(out_dir, "per_series.csv"), "w", encoding="utf-8",
              newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "series"] + list(_POINT_METRICS)
                        + ["pi_in", "pi_below", "pi_above",
                           "winkler_normalized", "n_days"])
        for label, _ in models:
            for sid, report in per_series[label].items():
                writer.writerow(
                    [label, sid]
                    + [repr(getattr(report, m)) for m in _POINT_METRICS]
                    + [repr(report.pi_in), repr(report.pi_below),
                       repr(report.pi_above), repr(report.winkler_normalized),
                       report.n_days])

    # pairwise predictive ability on daily losses; entry (row, col) asks
    # whether the column model beats the row model
    labels = [label for label, _ in models]
    losses = {}
    for label in labels:
        dates, values = daily_loss_series(records[label], series_by_id)
        losses[label] = dict(zip(dates, values))
    common = set.intersection(*(set(losses[label]) for label in labels))
    common = sorted(common)
    matrix = {}
    for row in labels:
        matrix[row] = {}
        for col in labels:
            if row == col:
                matrix[row][col] = 1.0
                continue
            if len(common) < GW_MIN_DAYS:
                matrix[row][col] = float("nan")
                continue
            a = np.array([losses[col][d] for d in common])
            b = np.array([losses[row][d] for d in common])
            matrix[row][col] = gw_test(a, b).p_value

    with open(os.path.join(out_dir, "gw_matrix.csv"), "w", encoding="utf-8",
              newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model"] + labels)
        for row in labels:
            writer.writerow([row] + [repr(matrix[row][col])
                                     for col in labels])

    ranking = None
    if len(labels) > 1:
        ranking = rank_models(
            {label: {sid: per_series[label][sid].mape
                     for sid in per_series[label]} for label in labels})

    report = {
        "alpha": args.alpha,
        "test_range": [lo.isoformat(), hi.isoformat()],
        "gw": {
            "comparison": "p[row][col] = one-sided p that the column model "
                          "is the more accurate of the pair",
            "loss": "per-day MAE averaged across series",
            "instruments": "constant and lagged loss differential",
            "days": len(common),
            "matrix": matrix,
        },
        "models": {
            label: {
                "summary": summary[label],
                "per_series": {
                    sid: dataclasses.asdict(report_)
                    for sid, report_ in per_series[label].items()},
            } for label in labels},
    }
    if ranking is not None:
        report["ranking_by_mape"] = {
            "mean_ranks": ranking.mean_ranks,
            "first_places": ranking.first_places,
            "tied_series": ranking.tied_series,
        }
    with open(os.path.join(out_dir, "report.json"), "w",
              encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")

    for label in labels:
        s = summary[label]
        print(f"{label}: MAPE {s['mape']:.3f}  RMSE {s['rmse']:.1f}  "
              f"in-PI {s['pi_in']:.1f}%  Winkler {s['winkler_normalized']:.4f}")
    print(f"reports written to {out_dir}")
    return 0


def cmd_gradcheck(args) -> int:
    kind, connection = CELL_VARIANTS[args.cell]
    out_size = args.out_size
    if out_size is None and kind not in (CellKind.LSTM, CellKind.GRU):
        out_size = args.hidden_size
    report = check_cell(
        kind, args.input_size, args.hidden_size,
        out_size=out_size, connection=connection,
        dilation=args.dilation, steps=args.steps, seed=args.seed,
        corrupt_block=args.corrupt)
    for block in report.blocks:
        flag = "ok" if block.worst_rel_error < report.tolerance else "FAIL"
        print(f"  {block.name:24s} worst {block.worst_rel_error:.3e} "
              f"({block.checked} coords) {flag}")
    verdict = "PASS" if report.passed else "FAIL"
    print(f"{args.cell} dilation={args.dilation} steps={args.steps}: "
          f"max relative error {report.worst:.3e} "
          f"(tolerance {report.tolerance:g}) {verdict}")
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loadcast",
        description="Recurrent day-ahead load forecasting toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic hourly dataset")
    p.add_argument("--series", type=int, default=4)
    p.add_argument("--days", type=int, default=1095)
    p.add_argument("--start", default="2015-01-01")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=120.0)
    p.add_argument("--csv", help="write the dataset as CSV")
    p.add_argument("--store", help="write the dataset as a binary store")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="validate a CSV and build a store")
    p.add_argument("--csv", required=True)
    p.add_argument("--store", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("export", help="write a store back to CSV")
    p.add_argument("--store", required=True)
    p.add_argument("--csv", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("train", help="train an ensemble on a store")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--config", help="run config JSON file")
    p.add_argument("--preset", default="full", choices=("full", "desk"))
    p.add_argument("--cell", choices=sorted(CELL_VARIANTS),
                   help="override the configured cell variant")
    p.add_argument("--train-range", help="first:last target dates")
    p.add_argument("--log", help="also write the progress log to a file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("forecast", help="day-ahead forecasts for one series")
    p.add_argument("--model", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--series", required=True)
    p.add_argument("--dates", required=True, help="date or first:last range")
    p.add_argument("--csv", help="write hourly rows to this CSV")
    p.add_argument("--json", help="write per-day arrays to this JSON")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("evaluate", help="score models over a test range")
    p.add_argument("--store", required=True)
    p.add_argument("--model", action="append", required=True,
                   metavar="LABEL=PATH",
                   help="model file, repeatable; bare path labels itself")
    p.add_argument("--test-range",
                   help="first:last dates; default: final calendar year")
    p.add_argument("--alpha", type=float, default=0.1,
                   help="nominal PI miss rate")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gradcheck",
                       help="finite-difference check of one cell variant")
    p.add_argument("--cell", required=True, choices=sorted(CELL_VARIANTS))
    p.add_argument("--input-size", type=int, default=6)
    p.add_argument("--hidden-size", type=int, default=5)
    p.add_argument("--out-size", type=int, default=None)
    p.add_argument("--dilation", type=int, default=2)
    p.add_argument("--steps", type=int, default=7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corrupt", metavar="BLOCK",
                   help="corrupt one gradient block as a negative control")
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LoadcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
