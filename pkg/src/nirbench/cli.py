"""nirbench command line: generate, train, eval, report, bench, features.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric or training error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .datagen import Dataset, audit_correlation, generate_dataset
from .features import FEATURE_NAMES
from .foundation import ConfigError, ConfigValueError, NoiseConfig, load_config
from .metrics import ModelReport
from .neural import TrainingError
from .pipeline import (MODEL_IDS, DatasetMismatch, evaluate_model, measure_inference, read_predictions,
                       train_model, write_benchmark, write_predictions)
from .plots import bland_altman_svg, clarke_svg, linearity_svg, loss_svg, radar_svg
from .ridge import RidgeSolverError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# -- commands ---------------------------------------------------------------

def cmd_generate(args) -> Path:
    cfg = load_config(args.config, args.seed)
    if args.no_noise:
        cfg.noise = NoiseConfig(False, False, False)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    d = generate_dataset(cfg)
    path = d.write(out / "dataset.csv")
    per_channel, best = audit_correlation(d)
    _write_json(out / "audit.json", {
        "config_hash": d.config_hash,
        "dataset_hash": d.content_hash(),
        "n_samples": len(d),
        "rho": {str(int(k)): v for k, v in per_channel.items()},
        "best_abs_rho": best,
    })
    _log(f"wrote {len(d)} samples to {path} in {time.perf_counter() - t0:.2f} s; best |rho| = {best:.3f}")
    return path


def _dataset_arg(args) -> Path:
    p = Path(args.dataset) if args.dataset else Path(args.out) / "dataset.csv"
    if not p.exists():
        raise FileNotFoundError(f"dataset not found: {p}")
    return p


def _model_ids(arg: str | None) -> list[str]:
    if arg is None or arg == "all":
        return list(MODEL_IDS)
    ids = [m.strip() for m in arg.split(",") if m.strip()]
    bad = [m for m in ids if m not in MODEL_IDS]
    if bad:
        raise UsageError(f"unknown model id(s) {', '.join(bad)}; valid ids: {', '.join(MODEL_IDS)}, all")
    return ids


def cmd_train(args) -> list[Path]:
    ids = _model_ids(args.model)
    d = Dataset.read(_dataset_arg(args))
    out = Path(args.out) / "models"
    paths = []
    for mid in ids:
        t0 = time.perf_counter()
        written = train_model(d, mid, out)
        paths.extend(written.values())
        _log(f"trained {mid} in {time.perf_counter() - t0:.2f} s -> {written['model']}")
    return paths


def cmd_eval(args) -> list[ModelReport]:
    d = Dataset.read(_dataset_arg(args))
    model_dir = Path(args.models) if args.models else Path(args.out) / "models"
    ids = _model_ids(args.model)
    paths = [model_dir / f"{m}.json" for m in ids]
    missing = [str(p) for p in paths if not p.exists()]
    if missing:
        raise FileNotFoundError(f"model artifact(s) not found: {', '.join(missing)}")
    rep_dir = Path(args.out) / "reports"
    rep_dir.mkdir(parents=True, exist_ok=True)
    reports, timing = [], []
    for p in paths:
        rep, pred, ref = evaluate_model(p, d)
        reports.append(rep)
        (rep_dir / f"{rep.model}.json").write_text(rep.to_json(), encoding="utf-8")
        write_predictions(pred, ref, rep_dir / f"{rep.model}_predictions.csv")
        timing.append((rep.model, measure_inference(p, d, args.repeats)))
    write_benchmark(reports, rep_dir / "benchmark.csv")
    # wall-clock numbers vary run to run, so they live apart from the benchmark table
    with open(rep_dir / "timing.csv", "w", encoding="utf-8") as fh:
        fh.write("model,inference_ns_per_sample\n")
        for m, ns in timing:
            fh.write(f"{m},{ns:.1f}\n")
    for r in reports:
        _log(f"{r.model:>22s}  RMSE {r.rmse:6.2f}  MARD {r.mard:5.2f}%  Clarke A {r.clarke_zone_pct['A']:5.1f}%")
    return reports


def cmd_report(args) -> list[Path]:
    rep_dir = Path(args.reports) if args.reports else Path(args.out) / "reports"
    files = sorted(p for p in rep_dir.glob("*.json"))
    if not files:
        raise FileNotFoundError(f"no reports in {rep_dir}")
    reports = [ModelReport.from_dict(json.loads(p.read_text(encoding="utf-8"))) for p in files]
    order = {m: k for k, m in enumerate(MODEL_IDS)}
    reports.sort(key=lambda r: order.get(r.model, len(order)))
    fig = Path(args.out) / "figures"
    fig.mkdir(parents=True, exist_ok=True)
    written = []
    histories = {}
    model_dir = Path(args.models) if args.models else Path(args.out) / "models"
    for r in reports:
        pred, ref = read_predictions(rep_dir / f"{r.model}_predictions.csv")
        for name, svg in (("clarke", clarke_svg(ref, pred, f"Clarke error grid: {r.model}")),
                          ("bland_altman", bland_altman_svg(pred, ref, f"Bland-Altman: {r.model}")),
                          ("linearity", linearity_svg(pred, ref, f"Linearity: {r.model}"))):
            p = fig / f"{name}_{r.model}.svg"
            p.write_text(svg, encoding="utf-8")
            written.append(p)
        hist = model_dir / f"{r.model}_history.csv"
        if hist.exists():
            rows = np.genfromtxt(hist, delimiter=",", names=True)
            histories[r.model] = np.column_stack([np.atleast_1d(rows["epoch"]), np.atleast_1d(rows["val_data"])])
    p = fig / "loss_curves.svg"
    p.write_text(loss_svg(histories), encoding="utf-8")
    written.append(p)
    rows = [{"model": r.model, "rmse": r.rmse, "mard": r.mard, "clarke_a": r.clarke_zone_pct["A"],
             "within_15": r.within_15pct, "loa_width": r.bland_altman[2] - r.bland_altman[1],
             "parameters": r.param_count} for r in reports]
    p = fig / "radar.svg"
    p.write_text(radar_svg(rows), encoding="utf-8")
    written.append(p)
    _log(f"wrote {len(written)} figures to {fig}")
    return written


def cmd_bench(args) -> None:
    t0 = time.perf_counter()
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    ds = cmd_generate(args)
    args.dataset = str(ds)
    models = cmd_train(args)
    args.models = None
    cmd_eval(args)
    figs = cmd_report(args)
    out = Path(args.out)
    cfg_hash = json.loads(Path(ds).with_suffix(".json").read_text())["config_hash"]
    reports = sorted((out / "reports").glob("*"))
    manifest = {
        "tool_version": __version__,
        "config_hash": cfg_hash,
        "dataset": str(ds),
        "models": [str(p) for p in models],
        "reports": [str(p) for p in reports] + [str(p) for p in figs],
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    missing = [p for p in [manifest["dataset"]] + manifest["models"] + manifest["reports"] if not Path(p).exists()]
    if missing:
        raise FileNotFoundError(f"manifest references missing files: {missing}")
    _write_json(out / "manifest.json", manifest)
    _log(f"bench finished in {time.perf_counter() - t0:.1f} s")


def cmd_features(args) -> None:
    if not args.list:
        raise UsageError("features: pass --list to print the feature names")
    sys.stdout.write("\n".join(FEATURE_NAMES) + "\n")


# -- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nirbench", description="Synthetic NIR glucose benchmark")
    parser.add_argument("--version", action="version", version=f"nirbench {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=False, models=False):
        p.add_argument("--config", help="config file (section.key = value)")
        p.add_argument("--seed", type=int, help="root seed (overrides NIRBENCH_SEED and the config file)")
        p.add_argument("--no-noise", action="store_true", help="disable hardware, environment and physiology noise")
        p.add_argument("--out", default="nirbench_out", help="output directory")
        p.add_argument("--model", help=f"model id, comma list or 'all' ({', '.join(MODEL_IDS)})")
        if data:
            p.add_argument("--dataset", help="dataset CSV (default: <out>/dataset.csv)")
        if models:
            p.add_argument("--models", help="directory of model artifacts (default: <out>/models)")
        p.add_argument("--repeats", type=int, default=1000, help="timing repetitions for inference")
        p.add_argument("--reports", help="directory of reports (default: <out>/reports)")

    common(sub.add_parser("generate", help="simulate a dataset"))
    common(sub.add_parser("train", help="train models on the train/val splits"), data=True)
    common(sub.add_parser("eval", help="evaluate models on the test split"), data=True, models=True)
    common(sub.add_parser("report", help="write SVG figures from reports"), models=True)
    common(sub.add_parser("bench", help="generate, train all, evaluate and report"), data=True, models=True)
    f = sub.add_parser("features", help="feature name list")
    f.add_argument("--list", action="store_true", help="print the 56 feature names")
    return parser


COMMANDS = {
    "generate": cmd_generate, "train": cmd_train, "eval": cmd_eval, "report": cmd_report,
    "bench": cmd_bench, "features": cmd_features,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        _log(f"nirbench: error: {e}")
        return EXIT_USAGE
    except (TrainingError, RidgeSolverError, FloatingPointError, np.linalg.LinAlgError) as e:
        _log(f"nirbench: numeric error: {e}")
        return EXIT_NUMERIC
    except (DatasetMismatch, ConfigError, ConfigValueError, FileNotFoundError, KeyError, ValueError, OSError) as e:
        _log(f"nirbench: data error: {e}")
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
