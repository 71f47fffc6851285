"""Command-line pipeline: generate, prepare, train, evaluate, predict, analyze, export.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant
violation.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import DataError, SyntheticConfig, aggregate, clean, default_holidays, generate_synthetic, ingest
from .dataset import DATASET_FORMAT, DATASET_VERSION, Dataset, build_windows, sha256_file, write_windows_csv
from .evaluation import (
    BOX_VARIABLES,
    CORR_CHANNELS,
    MetricsReport,
    correlations,
    evaluate,
    persistence_baseline,
    series_boxplots,
    split_timeseries,
)
from .dataio import FusedSeries
from .features import HolidayCalendar, feature_names
from .network import ModelVariant, load_checkpoint, param_count, predict, save_checkpoint
from .optimizer import TrainConfig, TrainHistory, train

log = logging.getLogger("alstm_traffic")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")


def _echo_config(out: Path, args: argparse.Namespace, **extra) -> None:
    cfg = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func"}
    cfg.update(extra)
    cfg["version"] = __version__
    _write_json(out / f"run_config_{args.command}.json", cfg)


def _outdir(args) -> Path:
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- generate ----------------------------------------------------------------


def cmd_generate(args) -> int:
    fields = {}
    seed = 0
    if args.config:
        base, seed = SyntheticConfig.from_file(args.config)
        fields = {k: getattr(base, k) for k in ("days", "base_volume", "capacity", "noise", "holidays", "start")}
    for key in ("days", "base_volume", "capacity", "noise"):
        if getattr(args, key) is not None:
            fields[key] = getattr(args, key)
    if args.holidays:
        fields["holidays"] = HolidayCalendar.from_csv(args.holidays)
    if args.start:
        fields["start"] = dt.date.fromisoformat(args.start)
    if args.seed is not None:
        seed = args.seed
    cfg = SyntheticConfig(**fields)
    out = _outdir(args)
    series = generate_synthetic(cfg, seed)
    series.write_records_csv(out / "traffic.csv")
    (cfg.holidays or default_holidays(cfg.start, cfg.days)).to_csv(out / "holidays.csv")
    resolved = {"days": cfg.days, "base_volume": cfg.base_volume, "capacity": cfg.capacity, "noise": cfg.noise,
                "start": cfg.start.isoformat(), "seed": seed}
    _echo_config(out, args, resolved=resolved)
    print(f"wrote {len(series)} intervals x 2 directions to {out / 'traffic.csv'}")
    return EXIT_OK


# -- prepare -----------------------------------------------------------------


def cmd_prepare(args) -> int:
    out = _outdir(args)
    result = ingest(args.input)
    result.write_rejects(out / "rejects.csv")
    if result.rejects:
        rows = ", ".join(str(r.row) for r in result.rejects[:20])
        more = "" if len(result.rejects) <= 20 else f" (+{len(result.rejects) - 20} more)"
        print(f"error: {len(result.rejects)} rows violate the input schema: rows {rows}{more}; see {out / 'rejects.csv'}",
              file=sys.stderr)
        return EXIT_DATA
    if not result.records:
        raise DataError(f"{args.input} contains no data rows")
    holidays = HolidayCalendar.from_csv(args.holidays) if args.holidays else HolidayCalendar()
    series5 = clean(result.records)
    summary = series5.summary
    summary.write_csv(out / "cleaning_summary.csv")
    factor = args.interval // 5
    series = aggregate(series5, factor) if factor > 1 else series5
    windows = build_windows(series, holidays, args.encoding)
    # windows lost to gaps: every complete-history position minus those kept
    possible = max(len(series) - 5, 0)
    plan = split_timeseries(len(windows), args.splits)
    splits = []
    for s in plan.splits:
        norm = windows.fit_normalizer(*s.train)
        splits.append({"train": list(s.train), "valid": list(s.valid), "test": list(s.test),
                       "normalizer": norm.to_dict()})
    write_windows_csv(windows, out / "windows.csv")
    series.write_csv(out / "series.csv")
    holidays.to_csv(out / "holidays.csv")
    variant = ModelVariant(encoding=args.encoding, interval=args.interval)
    manifest = {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "source": Path(args.input).name,
        "source_sha256": sha256_file(args.input),
        "interval": args.interval,
        "encoding": args.encoding,
        "n_lags": 5,
        "exo_dim": variant.exo_size,
        "window_input_dim": windows.window_input_dim,
        "feature_names": feature_names(args.encoding),
        "n_intervals": len(series),
        "gap_intervals": int(series.gap.sum()),
        "n_windows": len(windows),
        "windows_lost_to_gaps": possible - len(windows),
        "split_plan": {"k": plan.k, "unit": plan.unit, "remainder": plan.remainder},
        "splits": splits,
        "cleaning": summary.to_dict(),
        "windows_sha256": sha256_file(out / "windows.csv"),
    }
    _write_json(out / "manifest.json", manifest)
    _echo_config(out, args)
    print(f"{len(windows)} windows, input dim {windows.window_input_dim}, "
          f"{manifest['windows_lost_to_gaps']} windows lost to gaps")
    return EXIT_OK


# -- train -------------------------------------------------------------------


def _selected_splits(args, ds: Dataset) -> list[int]:
    k = len(ds.manifest["splits"])
    if args.split is None:
        return list(range(1, k + 1))
    if not 1 <= args.split <= k:
        raise UsageError(f"--split must be within 1..{k}")
    return [args.split]


def cmd_train(args) -> int:
    out = _outdir(args)
    ds = Dataset.load(args.input)
    variant = ModelVariant(kind=args.model, encoding=ds.manifest["encoding"], interval=ds.manifest["interval"])
    cfg = TrainConfig(variant=variant, epochs=args.epochs, batch_size=args.batch_size, lr=args.lr, seed=args.seed,
                      clip_norm=args.clip_norm)
    handler = logging.FileHandler(out / f"train_log_{args.model}.txt", mode="w")
    handler.setFormatter(logging.Formatter("%(message)s"))
    logging.getLogger("alstm_traffic.optimizer").addHandler(handler)
    try:
        for split in _selected_splits(args, ds):
            sets = ds.split_sets(split)
            log.info("split %d", split)
            params, history = train(sets["train"], sets["valid"], cfg)
            history.to_csv(out / f"history_{args.model}_split{split}.csv")
            save_checkpoint(
                out / f"checkpoint_{args.model}_split{split}.json", params, variant,
                dataset_manifest_sha256=ds.manifest_hash, split=split, seed=args.seed,
                normalizer=ds.manifest["splits"][split - 1]["normalizer"],
                train_config={"epochs": cfg.epochs, "batch_size": cfg.batch_size, "lr": cfg.lr,
                              "clip_norm": cfg.clip_norm},
            )
            print(f"split {split}: {param_count(params)} parameters, final train MSE x1000 "
                  f"{history.train_loss[-1] * 1000:.3f}")
    finally:
        logging.getLogger("alstm_traffic.optimizer").removeHandler(handler)
        handler.close()
    _echo_config(out, args, variant=asdict(variant))
    return EXIT_OK


def _load_matching(path: Path, ds: Dataset):
    params, variant, meta = load_checkpoint(path)
    if meta.get("dataset_manifest_sha256") != ds.manifest_hash:
        raise DataError(f"refused: {path} was trained on a different dataset manifest")
    if variant.encoding != ds.manifest["encoding"] or variant.interval != ds.manifest["interval"]:
        raise DataError(f"refused: {path} expects {variant.encoding}/{variant.interval}min data")
    return params, variant, meta


def _checkpoints(dirs: list[str]) -> list[Path]:
    found = []
    for d in dirs:
        p = Path(d)
        found += sorted(p.glob("checkpoint_*.json")) if p.is_dir() else [p]
    if not found:
        raise UsageError("no checkpoints found")
    return found


# -- evaluate ----------------------------------------------------------------


def cmd_evaluate(args) -> int:
    out = _outdir(args)
    ds = Dataset.load(args.input)
    report = MetricsReport(ds.manifest["interval"], ds.manifest["encoding"])
    baseline_splits = set()
    for path in _checkpoints(args.models):
        params, variant, meta = _load_matching(path, ds)
        split = meta["split"]
        sets = ds.split_sets(split)
        for name, ws in sets.items():
            if len(ws):
                report.add(variant.kind, split, name, evaluate(params, variant, ws))
        if split not in baseline_splits:
            baseline_splits.add(split)
            for name, ws in sets.items():
                if len(ws):
                    report.add("persistence", split, name, persistence_baseline(ws))
    report.to_csv(out / "metrics.csv")
    report.to_json(out / "metrics.json")
    _echo_config(out, args)
    for m in report.models():
        print(f"{m}: test MSE x1000 average {report.average(m, 'test'):.3f}")
    return EXIT_OK


# -- predict -----------------------------------------------------------------


def _denormalized(params, variant, meta, ds: Dataset, set_name: str):
    split = meta["split"]
    s = ds.manifest["splits"][split - 1]
    ws = ds.split_sets(split)[set_name]
    norm = ds.normalizer(split)
    pred = predict(ws.lags, ws.exo, params, variant)
    actual = ds.windows.subset(*s[set_name]).target
    vol = norm.invert("volume", pred[:, 0])
    spd = norm.invert("speed", pred[:, 1])
    return ws.timestamps, actual, np.column_stack([vol, spd])


def cmd_predict(args) -> int:
    out = _outdir(args)
    ds = Dataset.load(args.input)
    for path in _checkpoints(args.models):
        params, variant, meta = _load_matching(path, ds)
        ts, actual, pred = _denormalized(params, variant, meta, ds, args.set)
        dest = out / f"predictions_{variant.kind}_split{meta['split']}_{args.set}.csv"
        with open(dest, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["timestamp", "volume_vph", "speed_kmh", "predicted_volume_vph", "predicted_speed_kmh"])
            for k in range(len(ts)):
                w.writerow([str(ts[k]), repr(float(actual[k, 0])), repr(float(actual[k, 1])),
                            repr(float(pred[k, 0])), repr(float(pred[k, 1]))])
        print(f"wrote {len(ts)} predictions to {dest}")
    _echo_config(out, args)
    return EXIT_OK


# -- analyze -----------------------------------------------------------------


def cmd_analyze(args) -> int:
    out = _outdir(args)
    root = Path(args.input)
    manifest = json.loads((root / "manifest.json").read_text())
    series = FusedSeries.read_csv(root / "series.csv", manifest["interval"])
    holidays = HolidayCalendar.from_csv(root / "holidays.csv")
    corr = correlations(series)
    with open(out / "correlations.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["", *CORR_CHANNELS])
        for name, row in zip(CORR_CHANNELS, corr):
            w.writerow([name, *("undefined" if np.isnan(x) else repr(float(x)) for x in row)])
    notes = []
    with open(out / "boxplots.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variable", "level", "min", "q1", "median", "q3", "max", "count"])
        for var in BOX_VARIABLES:
            stats, var_notes = series_boxplots(series, holidays, var)
            notes += var_notes
            for st in stats:
                w.writerow([var, st["level"], *(repr(float(st[k])) for k in ("min", "q1", "median", "q3", "max")),
                            st["count"]])
    (out / "analysis_notes.txt").write_text("".join(n + "\n" for n in notes))
    _echo_config(out, args)
    print(f"correlations and box-plot statistics written to {out}")
    return EXIT_OK


# -- export ------------------------------------------------------------------


def cmd_export(args) -> int:
    out = _outdir(args)
    ds = Dataset.load(args.input)
    with open(out / "loss_curves.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "split", "epoch", "train_mse_x1000", "valid_mse_x1000"])
        for d in args.models:
            for hist_path in sorted(Path(d).glob("history_*_split*.csv")):
                model, split = hist_path.stem.split("_")[1], hist_path.stem.rsplit("split", 1)[1]
                h = TrainHistory.from_csv(hist_path)
                for e, tr in enumerate(h.train_loss):
                    va = repr(h.valid_loss[e] * 1000) if h.valid_loss else ""
                    w.writerow([model, split, e + 1, repr(tr * 1000), va])
    for path in _checkpoints(args.models):
        params, variant, meta = _load_matching(path, ds)
        ts, actual, pred = _denormalized(params, variant, meta, ds, "test")
        tag = f"{variant.kind}_split{meta['split']}"
        with open(out / f"series_{tag}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["timestamp", "actual_volume_vph", "predicted_volume_vph", "actual_speed_kmh", "predicted_speed_kmh"])
            for k in range(len(ts)):
                w.writerow([str(ts[k]), repr(float(actual[k, 0])), repr(float(pred[k, 0])),
                            repr(float(actual[k, 1])), repr(float(pred[k, 1]))])
        with open(out / f"scatter_{tag}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["quantity", "observed", "predicted"])
            for j, q in enumerate(("volume_vph", "speed_kmh")):
                for k in range(len(ts)):
                    w.writerow([q, repr(float(actual[k, j])), repr(float(pred[k, j]))])
    _echo_config(out, args)
    print(f"plot data written to {out}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="alstm-traffic", description=__doc__.splitlines()[0])
    parser.add_argument("--verbose", "-v", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic 5-minute detector CSV")
    g.add_argument("--output", required=True)
    g.add_argument("--config", help="key = value generator config file")
    g.add_argument("--days", type=int)
    g.add_argument("--base-volume", type=float)
    g.add_argument("--capacity", type=float)
    g.add_argument("--noise", type=float)
    g.add_argument("--holidays", help="holiday calendar CSV (date,class)")
    g.add_argument("--start", help="first day, ISO date")
    g.add_argument("--seed", type=int)
    g.set_defaults(func=cmd_generate)

    p = sub.add_parser("prepare", help="clean, aggregate and window a detector CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--interval", type=int, choices=(5, 15, 30), default=15)
    p.add_argument("--encoding", choices=("cyclic", "onehot"), default="cyclic")
    p.add_argument("--holidays", help="holiday calendar CSV (date,class)")
    p.add_argument("--splits", type=int, default=3)
    p.set_defaults(func=cmd_prepare)

    t = sub.add_parser("train", help="train one model per cross-validation split")
    t.add_argument("--input", required=True, help="prepared dataset directory")
    t.add_argument("--output", required=True)
    t.add_argument("--model", choices=("lstm", "alstm"), default="alstm")
    t.add_argument("--epochs", type=int, default=100)
    t.add_argument("--batch-size", type=int, default=128)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--split", type=int, help="train only this split (1-based)")
    t.add_argument("--clip-norm", type=float, help="clip the gradient to this L2 norm")
    t.set_defaults(func=cmd_train)

    for name, func, helptext in (
        ("evaluate", cmd_evaluate, "MSE x 1000 per model, split and set"),
        ("predict", cmd_predict, "denormalized next-interval predictions"),
        ("export", cmd_export, "plot data: loss curves, series, scatter pairs"),
    ):
        e = sub.add_parser(name, help=helptext)
        e.add_argument("--input", required=True, help="prepared dataset directory")
        e.add_argument("--models", nargs="+", required=True, help="training output directories or checkpoint files")
        e.add_argument("--output", required=True)
        if name == "predict":
            e.add_argument("--set", choices=("train", "valid", "test"), default="test")
        e.set_defaults(func=func)

    a = sub.add_parser("analyze", help="correlations and box-plot statistics of a prepared dataset")
    a.add_argument("--input", required=True, help="prepared dataset directory")
    a.add_argument("--output", required=True)
    a.set_defaults(func=cmd_analyze)
    return parser


def _configure_logging(verbose: bool) -> None:
    pkg = logging.getLogger("alstm_traffic")
    pkg.setLevel(logging.INFO)
    if not any(getattr(h, "_alstm_console", False) for h in pkg.handlers):
        console = logging.StreamHandler()
        console._alstm_console = True
        console.setFormatter(logging.Formatter("%(message)s"))
        pkg.addHandler(console)
    for h in pkg.handlers:
        if getattr(h, "_alstm_console", False):
            h.setLevel(logging.INFO if verbose else logging.WARNING)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (AssertionError, FloatingPointError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
