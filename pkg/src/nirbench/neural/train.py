"""Full-batch Adam training with early stopping and physics-loss balancing."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..foundation import NeuralConfig, PhysiologyConfig, RandomStream
from ..physiology import PmfScaler, scattering_coefficient
from .autodiff import Tensor
from .losses import (RteTerms, absorbances, forward_pairs, loss_beer_lambert, loss_conservation,
                     loss_data, loss_rte, rte_terms)
from .models import Network, NetworkSpec, count_params, make_spec

HISTORY_COLUMNS = ("epoch", "train_data", "train_phys", "val_data", "lambda_phys")
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
LAMBDA_BOUNDS = (1e-4, 10.0)


class TrainingError(RuntimeError):
    def __init__(self, message: str, epoch: int):
        super().__init__(f"{message} (epoch {epoch})")
        self.epoch = epoch


@dataclass
class InputScaler:
    """Standardises NIR intensities; PMF uses its own scaler."""
    nir_mean: np.ndarray
    nir_sd: np.ndarray
    pmf: PmfScaler

    @classmethod
    def fit(cls, intensities, pmf_raw) -> "InputScaler":
        x = np.asarray(intensities, dtype=float)
        sd = x.std(axis=0)
        return cls(x.mean(axis=0), np.where(sd > 0, sd, 1.0), PmfScaler().fit(pmf_raw))

    def nir(self, intensities) -> np.ndarray:
        return (np.asarray(intensities, dtype=float) - self.nir_mean) / self.nir_sd

    def to_dict(self) -> dict:
        return {"nir_mean": self.nir_mean.tolist(), "nir_sd": self.nir_sd.tolist(), "pmf": self.pmf.to_dict()}

    @classmethod
    def from_dict(cls, d) -> "InputScaler":
        return cls(np.asarray(d["nir_mean"]), np.asarray(d["nir_sd"]), PmfScaler.from_dict(d["pmf"]))


@dataclass
class Batch:
    nir: np.ndarray  # standardised (n, 4)
    pmf: np.ndarray  # standardised (n, 12)
    y: np.ndarray  # (n,) mg/dL
    intensity: np.ndarray  # (n, 4) mW
    subject: np.ndarray
    time: np.ndarray
    rte: RteTerms | None = None

    def __len__(self) -> int:
        return self.y.size


@dataclass
class PhysicsContext:
    i0: np.ndarray
    eps: np.ndarray  # glucose extinction per channel
    channels: tuple[float, ...]


def reference_scattering(wavelengths, cfg: PhysiologyConfig | None = None) -> np.ndarray:
    """Reduced scattering of a reference-age dermis, used as the slab's mu_s."""
    cfg = cfg or PhysiologyConfig()
    return np.array([scattering_coefficient(49.0, w, cfg) * (1.0 - cfg.anisotropy) for w in wavelengths])


def make_batch(d, samples, scaler: InputScaler) -> Batch:
    inten = d.intensities(samples)
    pmf = np.array([s.pmf_raw for s in samples], dtype=float)
    return Batch(scaler.nir(inten), scaler.pmf.transform(pmf), d.targets(samples), inten,
                 np.array([s.subject_id for s in samples]), np.array([s.time for s in samples], dtype=float))


def attach_rte(batch: Batch, spec: NetworkSpec, ctx: PhysicsContext, cfg: NeuralConfig,
               mu_s: np.ndarray) -> None:
    if "rte" not in spec.physics_losses:
        return
    chans = [ctx.channels.index(w) for w in spec.rte_wavelengths]
    a = absorbances(batch.intensity, ctx.i0)
    batch.rte = rte_terms(a, chans, mu_s, cfg.rte_anisotropy, cfg.rte_nodes)


def physics_loss(net: Network, spec: NetworkSpec, c_hat: Tensor, batch: Batch, ctx: PhysicsContext):
    """Sum of the active physics terms (None if there are none)."""
    total = None
    offs = net.params.get("phys.offset")
    if "beer_lambert" in spec.physics_losses:
        total = loss_beer_lambert(c_hat, batch.intensity, ctx.i0, ctx.eps, offs)
    if "rte" in spec.physics_losses:
        ch = list(batch.rte.channels)
        a = c_hat.reshape(-1, 1) * ctx.eps[ch].reshape(1, -1) + offs[np.array(ch)]
        term = loss_rte(a, batch.rte)
        total = term if total is None else total + term
    if "conservation" in spec.physics_losses:
        i, j, dt = forward_pairs(batch.subject, batch.time)
        if dt.size:
            term = loss_conservation(c_hat, i, j, dt)
            total = term if total is None else total + term
    return total


def composite_loss(net: Network, batch: Batch, ctx: PhysicsContext, lam: float):
    """(total, data, physics) tensors for one full-batch pass."""
    c_hat = net.glucose(net.forward(batch.nir, batch.pmf))
    ld = loss_data(c_hat, batch.y)
    lp = physics_loss(net, net.spec, c_hat, batch, ctx)
    total = ld if (lp is None or lam == 0) else ld + lp * lam
    return total, ld, lp


def _grad_norm(net: Network, loss: Tensor) -> float:
    net.zero_grad()
    loss.backward()
    return math.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in net.params.values()))


@dataclass
class TrainState:
    epoch: int = 0
    best_val: float = math.inf
    best_epoch: int = 0
    lambda_phys: float = 0.0
    history: list[tuple] = field(default_factory=list)
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def write_history(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(HISTORY_COLUMNS)
            for row in self.history:
                w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def adam_step(net: Network, state: TrainState, lr: float, t: int) -> None:
    b1, b2 = ADAM_BETAS
    for name, p in net.params.items():
        g = p.grad
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        mh = m / (1.0 - b1 ** t)
        vh = v / (1.0 - b2 ** t)
        p.data = p.data - lr * mh / (np.sqrt(vh) + ADAM_EPS)


def train(spec: NetworkSpec, train_batch: Batch, val_batch: Batch, ctx: PhysicsContext,
          cfg: NeuralConfig, rng: RandomStream, net: Network | None = None) -> tuple[Network, TrainState]:
    if len(train_batch) == 0 or len(val_batch) == 0:
        raise ValueError("training and validation splits must be nonempty")
    if net is None:
        net = Network.init(spec, rng.derive("init"))
        net.y_offset = float(train_batch.y.mean())
        net.y_scale = float(train_batch.y.std()) or 1.0
    state = TrainState(lambda_phys=spec.lambda_physics)
    best = net.flat()
    ratio_ema = None
    since_best = 0
    for epoch in range(1, cfg.max_epochs + 1):
        lam = state.lambda_phys
        total, ld, lp = composite_loss(net, train_batch, ctx, lam)
        if spec.dynamic_balancing and lp is not None and epoch % cfg.balance_interval == 0:
            # rescale lambda so the weighted physics gradient tracks the data gradient
            gd = _grad_norm(net, ld)
            gp = _grad_norm(net, lp)
            if gp > 0 and lam > 0:
                r = gd / (lam * gp)
                ratio_ema = r if ratio_ema is None else cfg.balance_ema * ratio_ema + (1 - cfg.balance_ema) * r
                lo, hi = LAMBDA_BOUNDS
                state.lambda_phys = min(max(lam * ratio_ema, lo), hi)
            total, ld, lp = composite_loss(net, train_batch, ctx, state.lambda_phys)
        if not np.isfinite(total.data):
            raise TrainingError("non-finite training loss", epoch)
        net.zero_grad()
        total.backward()
        adam_step(net, state, cfg.learning_rate, epoch)
        flat = net.flat()
        if not np.all(np.isfinite(flat)):
            raise TrainingError("non-finite parameters after update", epoch)
        val = float(np.mean((net.predict(val_batch.nir, val_batch.pmf) - val_batch.y) ** 2))
        if not math.isfinite(val):
            raise TrainingError("non-finite validation loss", epoch)
        state.epoch = epoch
        state.history.append((epoch, float(ld.data), float(lp.data) if lp is not None else 0.0, val,
                              state.lambda_phys))
        if val < state.best_val:
            state.best_val, state.best_epoch, best = val, epoch, flat
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break
    net.set_flat(best)
    return net, state


# -- serialisation and timing ---------------------------------------------

def save_network(net: Network, path, scaler: InputScaler | None = None, extra: dict | None = None) -> None:
    doc = {
        "model": net.spec.arch,
        "spec": net.spec.to_dict(),
        "layer_shapes": {k: list(p.data.shape) for k, p in net.params.items()},
        "params": [float(v) for v in net.flat()],
        "y_offset": net.y_offset,
        "y_scale": net.y_scale,
        "scaler": scaler.to_dict() if scaler is not None else None,
    }
    doc.update(extra or {})
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_network(path) -> tuple[Network, InputScaler | None, dict]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    spec = NetworkSpec.from_dict(doc["spec"])
    net = Network.zeros(spec)
    net.set_flat(doc["params"])
    net.y_offset, net.y_scale = doc["y_offset"], doc["y_scale"]
    scaler = InputScaler.from_dict(doc["scaler"]) if doc.get("scaler") else None
    return net, scaler, doc


def time_inference(predict, args, n_samples: int, repeats: int = 1000) -> float:
    """Median wall time per sample in nanoseconds."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    times = np.empty(repeats)
    for k in range(repeats):
        t0 = time.perf_counter_ns()
        predict(*args)
        times[k] = time.perf_counter_ns() - t0
    return float(np.median(times)) / n_samples


__all__ = [
    "Batch", "InputScaler", "PhysicsContext", "TrainState", "TrainingError", "attach_rte", "composite_loss",
    "count_params", "load_network", "make_batch", "make_spec", "reference_scattering", "save_network",
    "time_inference", "train",
]
