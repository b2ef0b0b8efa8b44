"""Training, evaluation and benchmarking of the six models on a dataset.

Only the train and validation splits are read during training; the test
split is touched by ``evaluate_model`` alone.  Every model artifact
records the content hash of the dataset it was trained on.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .datagen import Dataset
from .features import (FEATURE_NAMES, ConstantFeatureError, FeatureScaler, dataset_features, env_matrix,
                       extract_batch)
from .metrics import ModelReport, evaluate
from .neural import (ARCHITECTURES, InputScaler, Network, PhysicsContext, attach_rte, count_params,
                     load_network, make_batch, make_spec, reference_scattering, save_network, time_inference,
                     train)
from .ridge import RidgeModel, fit as ridge_fit, select_lambda

EBL = "enhanced_beer_lambert"
MODEL_IDS = (EBL,) + ARCHITECTURES
PUBLISHED_PARAMS = {
    EBL: 56, "original_pinn": 163000, "optimized_pinn": 89000, "full_rte_pinn": 1340000,
    "selective_rte_pinn": 566000, "sdnn": 3713,
}
BENCH_COLUMNS = ("model", "rmse", "mard", "clarke_a", "within_15", "clarke_ab", "parameters", "published_parameters")


class DatasetMismatch(ValueError):
    pass


def _check_model(model_id: str) -> None:
    if model_id not in MODEL_IDS:
        raise KeyError(f"unknown model {model_id!r}; valid ids: {', '.join(MODEL_IDS)}")


def _noise_free(d: Dataset) -> bool:
    n = d.config.noise
    return not (n.hardware and n.environment and n.physiology)


# -- enhanced Beer-Lambert ---------------------------------------------------

def fit_ebl(d: Dataset) -> tuple[RidgeModel, dict]:
    tr, va = d.subset("train"), d.subset("val")
    Xtr, Xva = dataset_features(d, tr), dataset_features(d, va)
    try:
        scaler = FeatureScaler().fit(Xtr)
    except ConstantFeatureError:
        if not _noise_free(d):
            raise
        scaler = FeatureScaler().fit(Xtr, allow_constant=True)
    lam, scores = select_lambda((scaler.transform(Xtr), d.targets(tr)), (scaler.transform(Xva), d.targets(va)),
                                d.config.ridge.lambda_grid)
    model = ridge_fit(scaler.transform(Xtr), d.targets(tr), lam, FEATURE_NAMES, scaler.to_dict())
    return model, {"validation_rmse": {repr(k): v for k, v in scores.items()}}


def ebl_predictor(model: RidgeModel):
    scaler = FeatureScaler.from_dict(model.scaler)

    def predict(d: Dataset, samples):
        return model.predict(scaler.transform(dataset_features(d, samples)))
    return predict


# -- neural ---------------------------------------------------------------

def physics_context(d: Dataset) -> PhysicsContext:
    return PhysicsContext(np.asarray(d.reference_intensity, dtype=float),
                          d.extinction().glucose_vector(d.wavelengths), d.wavelengths)


def fit_neural(d: Dataset, arch: str):
    cfg = d.config
    tr, va = d.subset("train"), d.subset("val")
    scaler = InputScaler.fit(d.intensities(tr), [s.pmf_raw for s in tr])
    spec = make_spec(arch, cfg.neural, d.wavelengths)
    ctx = physics_context(d)
    bt, bv = make_batch(d, tr, scaler), make_batch(d, va, scaler)
    mu_s = reference_scattering(d.wavelengths, cfg.physiology)
    attach_rte(bt, spec, ctx, cfg.neural, mu_s)
    net, state = train(spec, bt, bv, ctx, cfg.neural, cfg.root_stream().derive(f"train/{arch}"))
    return net, scaler, state


def neural_predictor(net: Network, scaler: InputScaler):
    def predict(d: Dataset, samples):
        b = make_batch(d, samples, scaler)
        return net.predict(b.nir, b.pmf)
    return predict


# -- artifacts --------------------------------------------------------------

def train_model(d: Dataset, model_id: str, out_dir) -> dict[str, Path]:
    """Train one model and write its artifact (and loss history for networks)."""
    _check_model(model_id)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stamp = {"dataset_hash": d.content_hash(), "config_hash": d.config_hash}
    path = out / f"{model_id}.json"
    if model_id == EBL:
        model, info = fit_ebl(d)
        doc = model.to_dict()
        doc.update(stamp, **info)
        path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
        return {"model": path}
    net, scaler, state = fit_neural(d, model_id)
    save_network(net, path, scaler, dict(stamp, best_epoch=state.best_epoch, epochs=state.epoch))
    hist = out / f"{model_id}_history.csv"
    state.write_history(hist)
    return {"model": path, "history": hist}


def load_predictor(path, d: Dataset):
    """(model id, predictor, trainable-scalar count) with the dataset-hash guard applied."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    recorded = doc.get("dataset_hash")
    actual = d.content_hash()
    if recorded != actual:
        raise DatasetMismatch(f"{path}: model was trained on dataset {str(recorded)[:12]}..., "
                              f"refusing to evaluate on dataset {actual[:12]}...")
    if doc["model"] == EBL:
        model = RidgeModel.from_dict(doc)
        return EBL, ebl_predictor(model), model.n_params, model
    net, scaler, _ = load_network(path)
    return net.spec.arch, neural_predictor(net, scaler), net.n_params, net


def evaluate_model(path, d: Dataset) -> tuple[ModelReport, np.ndarray, np.ndarray]:
    model_id, predict, n_params, _ = load_predictor(path, d)
    te = d.subset("test")
    pred = predict(d, te)
    ref = d.targets(te)
    return evaluate(model_id, pred, ref, n_params, PUBLISHED_PARAMS[model_id]), pred, ref


def raw_predictor(model, d: Dataset, samples):
    """(function, args) predicting from raw intensity/PMF/environment arrays.

    This is the per-sample work a device would do: for the ridge model,
    feature extraction, standardisation and the dot product.
    """
    inten = d.intensities(samples)
    pmf = np.array([s.pmf_raw for s in samples], dtype=float)
    if isinstance(model, RidgeModel):
        scaler = FeatureScaler.from_dict(model.scaler)
        eps = d.extinction().glucose_vector(d.wavelengths)
        i0 = np.asarray(d.reference_intensity, dtype=float)

        def f(inten, pmf, env):
            return model.predict(scaler.transform(extract_batch(inten, i0, pmf, env, eps)))
        return f, (inten, pmf, env_matrix(samples))
    net, scaler = model

    def g(inten, pmf):
        return net.predict(scaler.nir(inten), scaler.pmf.transform(pmf))
    return g, (inten, pmf)


def measure_inference(path, d: Dataset, repeats: int = 1000) -> float:
    """Median ns/sample over ``repeats`` batch predictions on the test split."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc["model"] == EBL:
        model = RidgeModel.from_dict(doc)
    else:
        net, scaler, _ = load_network(path)
        model = (net, scaler)
    te = d.subset("test")
    f, args = raw_predictor(model, d, te)
    return time_inference(f, args, len(te), repeats)


def benchmark_row(r: ModelReport) -> list[str]:
    z = r.clarke_zone_pct
    vals = (r.rmse, r.mard, z["A"], r.within_15pct, r.clarke_ab)
    return [r.model] + [repr(round(float(v), 6)) for v in vals] + [str(r.param_count), str(r.published_param_count)]


def write_benchmark(reports: list[ModelReport], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BENCH_COLUMNS)
        for r in reports:
            w.writerow(benchmark_row(r))


def write_predictions(pred, ref, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["reference", "prediction"])
        for a, b in zip(ref, pred):
            w.writerow([repr(float(a)), repr(float(b))])


def read_predictions(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return (np.array([float(r["prediction"]) for r in rows]), np.array([float(r["reference"]) for r in rows]))


def holdout_rmse_by_model(d: Dataset, model_ids=MODEL_IDS) -> dict[str, float]:
    """Train each model in memory and return its test RMSE (used by the ordering check)."""
    te = d.subset("test")
    ref = d.targets(te)
    out = {}
    for mid in model_ids:
        if mid == EBL:
            model, _ = fit_ebl(d)
            pred = ebl_predictor(model)(d, te)
        else:
            net, scaler, _ = fit_neural(d, mid)
            pred = neural_predictor(net, scaler)(d, te)
        out[mid] = float(np.sqrt(np.mean((pred - ref) ** 2)))
    return out


__all__ = [
    "BENCH_COLUMNS", "DatasetMismatch", "EBL", "MODEL_IDS", "PUBLISHED_PARAMS", "count_params", "evaluate_model",
    "fit_ebl", "fit_neural", "holdout_rmse_by_model", "load_predictor", "measure_inference", "train_model",
    "write_benchmark",
]
