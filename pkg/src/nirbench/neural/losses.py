"""Data misfit and the three physics penalties.

Beer-Lambert: mean over batch and channels of (A - b - eps * c)^2 with unit
path length; the learned per-channel offset b absorbs the background
chromophores and the unknown path scale.

RTE: for each sample and selected channel a slab radiance field is solved
once with absorption equal to the measured absorbance.  The discrete
residual is affine in the absorption used to evaluate it,
R(a) = R0 + a * I, so the mean squared residual is the quadratic
s0 + 2 a s1 + a^2 s2 and the network only has to supply a = b + eps * c.

Conservation: forward differences of predicted glucose along each
subject's time-ordered measurements.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..optics import (OpticalMedium, OpticsDomainError, RadianceField, hg_slab_kernel, rte_residual,
                      sweep_slab)
from .autodiff import Tensor, as_tensor


def loss_data(pred, target) -> Tensor:
    pred = as_tensor(pred)
    target = np.asarray(target, dtype=float)
    if target.size == 0:
        raise ValueError("empty batch")
    if pred.shape != target.shape:
        raise ValueError(f"prediction shape {pred.shape} != target shape {target.shape}")
    return (pred - target).square().mean()


def absorbances(intensities, i0) -> np.ndarray:
    inten = np.asarray(intensities, dtype=float)
    if np.any(inten <= 0):
        raise OpticsDomainError("Beer-Lambert loss needs positive intensities")
    return np.log(np.asarray(i0, dtype=float) / inten)


def loss_beer_lambert(pred_glucose, intensities, i0, eps, offsets=None) -> Tensor:
    a = absorbances(intensities, i0)
    c = as_tensor(pred_glucose).reshape(-1, 1)
    model = c * np.asarray(eps, dtype=float).reshape(1, -1)
    if offsets is not None:
        model = model + offsets
    return (model - a).square().mean()


@dataclass
class RteTerms:
    s0: np.ndarray  # (n, k) mean R0^2
    s1: np.ndarray  # (n, k) mean R0 * I
    s2: np.ndarray  # (n, k) mean I^2
    channels: tuple[int, ...]

    def subset(self, idx) -> "RteTerms":
        return RteTerms(self.s0[idx], self.s1[idx], self.s2[idx], self.channels)


def rte_terms(absorb, channels, mu_s, g: float = 0.0, n_nodes: int = 21, thickness: float = 1.0) -> RteTerms:
    """Quadratic-form coefficients of the slab residual for each sample/channel.

    absorb: (n, 4) measured absorbances; mu_s: per-channel scattering (1/mm).
    """
    absorb = np.atleast_2d(np.asarray(absorb, dtype=float))
    n = absorb.shape[0]
    k = len(channels)
    s0, s1, s2 = np.zeros((n, k)), np.zeros((n, k)), np.zeros((n, k))
    for j, ch in enumerate(channels):
        mu_a = np.maximum(absorb[:, ch], 0.0) / thickness
        depth, mu, w, rad = sweep_slab(mu_a, mu_s[ch], g, thickness, n_nodes=n_nodes)
        kernel = hg_slab_kernel(g, mu, w)
        for i in range(n):
            field = RadianceField(depth, mu, w, rad[i])
            r0 = rte_residual(field, OpticalMedium(0.0, mu_s[ch], g, thickness), kernel)
            inner = rad[i][1:-1]
            s0[i, j] = np.mean(r0 * r0)
            s1[i, j] = np.mean(r0 * inner)
            s2[i, j] = np.mean(inner * inner)
    return RteTerms(s0, s1, s2, tuple(channels))


def loss_rte(absorption, terms: RteTerms) -> Tensor:
    """Mean squared slab residual at predicted absorption ``a`` (n, k)."""
    a = as_tensor(absorption)
    return (a * a * terms.s2 + a * (2.0 * terms.s1) + terms.s0).mean()


def forward_pairs(subject_ids, times) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Index pairs (i, j) of consecutive measurements of the same subject, and dt."""
    subject_ids = np.asarray(subject_ids)
    times = np.asarray(times, dtype=float)
    order = np.lexsort((times, subject_ids))
    i, j = order[:-1], order[1:]
    same = subject_ids[i] == subject_ids[j]
    return i[same], j[same], times[j[same]] - times[i[same]]


def loss_conservation(pred, i_idx, j_idx, dt, divergence: float = 0.0) -> Tensor:
    """mean (dc/dt + c * div v)^2, forward differences; div v = 0 by default."""
    c = as_tensor(pred)
    dt = np.asarray(dt, dtype=float)
    if dt.size == 0:
        raise ValueError("conservation loss needs at least one consecutive pair")
    if np.any(dt <= 0):
        raise ValueError("time steps must be positive")
    rate = (c[j_idx] - c[i_idx]) * (1.0 / dt)
    if divergence:
        rate = rate + c[i_idx] * divergence
    return rate.square().mean()


def series_conservation(series, dt: float = 1.0, divergence: float = 0.0) -> Tensor:
    """Conservation loss on a single time series sampled every ``dt`` minutes."""
    s = as_tensor(series)
    n = s.shape[0]
    if n < 3:
        raise ValueError("series needs at least 3 points")
    idx = np.arange(n - 1)
    return loss_conservation(s, idx, idx + 1, np.full(n - 1, float(dt)), divergence)
