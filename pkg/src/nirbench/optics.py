"""Optical physics: absorbance, chromophore mixing, scattering and slab RTE.

Natural logarithms throughout.  The RTE machinery works on a 1-D slab with
discrete ordinates: direction cosines are Gauss-Legendre nodes on [-1, 1]
and the solid-angle weights are the Gauss weights times 2*pi, so they sum
to 4*pi.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

CHROMOPHORES = ("glucose", "water", "hemoglobin", "lipid", "melanin")
FOUR_PI = 4.0 * math.pi


class OpticsDomainError(ValueError):
    pass


class UnknownWavelengthError(KeyError):
    pass


class GridError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Extinction table
# ---------------------------------------------------------------------------

@dataclass
class ExtinctionTable:
    wavelengths: np.ndarray
    coefficients: dict[str, np.ndarray]

    def __post_init__(self):
        self.wavelengths = np.asarray(self.wavelengths, dtype=float)
        self.coefficients = {k: np.asarray(v, dtype=float) for k, v in self.coefficients.items()}
        missing = [c for c in CHROMOPHORES if c not in self.coefficients]
        if missing:
            raise ValueError(f"extinction table missing chromophores: {missing}")
        for name, col in self.coefficients.items():
            if col.shape != self.wavelengths.shape:
                raise ValueError(f"column {name} has wrong length")
            if np.any(col < 0) or not np.all(np.isfinite(col)):
                raise ValueError(f"column {name} has negative or non-finite entries")

    @classmethod
    def from_csv(cls, path) -> "ExtinctionTable":
        with open(path, newline="", encoding="utf-8") as fh:
            return cls._from_rows(fh)

    @classmethod
    def default(cls) -> "ExtinctionTable":
        ref = resources.files("nirbench") / "data" / "extinction.csv"
        with ref.open("r", encoding="utf-8") as fh:
            return cls._from_rows(fh)

    @classmethod
    def load(cls, path: str | None) -> "ExtinctionTable":
        return cls.from_csv(path) if path else cls.default()

    @classmethod
    def _from_rows(cls, fh) -> "ExtinctionTable":
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
        reader = csv.DictReader(lines)
        expected = ["wavelength_nm", *CHROMOPHORES]
        if reader.fieldnames != expected:
            raise ValueError(f"extinction header must be {','.join(expected)}")
        rows = list(reader)
        wl = [float(r["wavelength_nm"]) for r in rows]
        coeffs = {c: [float(r[c]) for r in rows] for c in CHROMOPHORES}
        return cls(np.array(wl), {c: np.array(v) for c, v in coeffs.items()})

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["wavelength_nm", *CHROMOPHORES])
            for i, lam in enumerate(self.wavelengths):
                w.writerow([repr(float(lam))] + [repr(float(self.coefficients[c][i])) for c in CHROMOPHORES])

    def index(self, wavelength: float) -> int:
        hits = np.flatnonzero(np.isclose(self.wavelengths, wavelength, rtol=0, atol=1e-9))
        if hits.size == 0:
            raise UnknownWavelengthError(f"wavelength {wavelength} nm not in extinction table")
        return int(hits[0])

    def epsilon(self, chromophore: str, wavelength: float) -> float:
        return float(self.coefficients[chromophore][self.index(wavelength)])

    def row(self, wavelength: float) -> dict[str, float]:
        i = self.index(wavelength)
        return {c: float(self.coefficients[c][i]) for c in CHROMOPHORES}

    def glucose_vector(self, wavelengths) -> np.ndarray:
        return np.array([self.epsilon("glucose", w) for w in wavelengths])

    def water_to_glucose_ratio(self, water_fraction=0.7, glucose_mgdl=100.0) -> np.ndarray:
        """Per-wavelength ratio of typical water absorption to glucose absorption."""
        g = self.coefficients["glucose"] * glucose_mgdl
        with np.errstate(divide="ignore"):
            return np.where(g > 0, self.coefficients["water"] * water_fraction / g, np.inf)


# ---------------------------------------------------------------------------
# Media and closed-form optics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OpticalMedium:
    mu_a: float  # mm^-1
    mu_s: float  # mm^-1
    g: float
    l: float  # mm

    def __post_init__(self):
        if self.mu_a < 0 or self.mu_s < 0:
            raise OpticsDomainError("mu_a and mu_s must be nonnegative")
        if not 0.0 <= self.g < 1.0:
            raise OpticsDomainError(f"anisotropy g must be in [0, 1), got {self.g}")
        if not self.l > 0:
            raise OpticsDomainError("path length must be positive")


def absorbance(i_ref, i_meas, channel=None):
    """ln(i_ref / i_meas); works elementwise on arrays."""
    i_ref = np.asarray(i_ref, dtype=float)
    i_meas = np.asarray(i_meas, dtype=float)
    if np.any(i_ref <= 0) or np.any(i_meas <= 0):
        where = f" on channel {channel}" if channel is not None else ""
        bad = np.flatnonzero(np.atleast_1d((i_ref <= 0) | (i_meas <= 0)))
        raise OpticsDomainError(f"nonpositive intensity{where} (index {bad[:5].tolist()})")
    out = np.log(i_ref / i_meas)
    return float(out) if out.ndim == 0 else out


def mixture_absorbance(table: ExtinctionTable, concentrations: dict[str, float], l: float,
                       wavelength: float) -> float:
    row = table.row(wavelength)
    total = 0.0
    for name, c in concentrations.items():
        if c < 0:
            raise OpticsDomainError(f"negative concentration for {name}")
        total += row[name] * c
    return total * l


def reduced_scattering(m: OpticalMedium) -> float:
    return m.mu_s * (1.0 - m.g)


def hg_phase(g, cos_theta):
    """Henyey-Greenstein density normalised so that (1/2) * integral over cos = 1."""
    cos_theta = np.asarray(cos_theta, dtype=float)
    out = (1.0 - g * g) / (1.0 + g * g - 2.0 * g * cos_theta) ** 1.5
    return float(out) if out.ndim == 0 else out


def diffusion_coefficient(m: OpticalMedium) -> float:
    denom = 3.0 * (m.mu_a + reduced_scattering(m))
    if denom <= 0:
        raise OpticsDomainError("mu_a + mu_s' must be positive for the diffusion coefficient")
    return 1.0 / denom


# ---------------------------------------------------------------------------
# Slab discrete ordinates
# ---------------------------------------------------------------------------

def slab_ordinates(n_per_hemisphere: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Direction cosines and solid-angle weights (sum 4*pi)."""
    x, w = np.polynomial.legendre.leggauss(2 * n_per_hemisphere)
    return x, 2.0 * math.pi * w


def hg_slab_kernel(g: float, mu: np.ndarray, weights: np.ndarray, n_azimuth: int = 256) -> np.ndarray:
    """Azimuth-averaged HG kernel K[j, k] with sum_k w_k/(4 pi) K[j, k] = 1.

    The renormalisation makes the discrete scattering operator conserve
    energy exactly, which matters for strongly peaked g on few ordinates.
    """
    mu = np.asarray(mu, dtype=float)
    phi = np.linspace(0.0, 2.0 * math.pi, n_azimuth, endpoint=False)
    s = np.sqrt(np.clip(1.0 - mu * mu, 0.0, None))
    cos_t = (mu[:, None, None] * mu[None, :, None]
             + s[:, None, None] * s[None, :, None] * np.cos(phi)[None, None, :])
    k = hg_phase(g, np.clip(cos_t, -1.0, 1.0)).mean(axis=2)
    norm = k @ (weights / FOUR_PI)
    return k / norm[:, None]


@dataclass
class RadianceField:
    depth: np.ndarray  # (n,) mm
    mu: np.ndarray  # (m,) direction cosines
    weights: np.ndarray  # (m,) solid-angle weights
    radiance: np.ndarray  # (n, m)
    source: np.ndarray | None = None  # (n, m); None means zero

    def __post_init__(self):
        self.depth = np.asarray(self.depth, dtype=float)
        self.mu = np.asarray(self.mu, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        self.radiance = np.asarray(self.radiance, dtype=float)
        if self.source is None:
            self.source = np.zeros_like(self.radiance)
        if self.radiance.shape != (self.depth.size, self.mu.size):
            raise GridError("radiance must have shape (n_depth, n_directions)")
        if np.any(self.weights <= 0) or abs(self.weights.sum() - FOUR_PI) > 1e-9:
            raise GridError("quadrature weights must be positive and sum to 4*pi")
        if np.any(self.radiance < 0):
            raise GridError("radiance must be nonnegative")


def rte_residual(field: RadianceField, m: OpticalMedium, kernel: np.ndarray | None = None) -> np.ndarray:
    """Steady-state slab RTE residual at interior nodes, shape (n-2, m).

    mu * dI/dx + (mu_a + mu_s) I - mu_s * sum_k w_k/(4 pi) K_jk I_k - S,
    with dI/dx by central differences on a uniform depth grid.
    """
    x = field.depth
    if x.size < 3:
        raise GridError("rte_residual needs at least 3 depth points")
    h = np.diff(x)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise GridError("depth grid must be uniform")
    if kernel is None:
        kernel = hg_slab_kernel(m.g, field.mu, field.weights)
    I = field.radiance
    grad = (I[2:] - I[:-2]) / (2.0 * h[0])
    inner = I[1:-1]
    gain = inner @ (kernel * (field.weights / FOUR_PI)[None, :]).T
    return (field.mu[None, :] * grad + (m.mu_a + m.mu_s) * inner
            - m.mu_s * gain - field.source[1:-1])


def sweep_slab(mu_a, mu_s, g: float, thickness: float, n_nodes: int = 21,
               n_per_hemisphere: int = 8, inflow: float = 1.0, tol: float = 1e-12,
               max_iter: int = 2000):
    """Radiance in a slab lit by a uniform inflow on the x=0 face.

    Diamond-difference transport sweeps with source iteration on the
    in-scattering term.  ``mu_a``/``mu_s`` may be arrays of shape (B,) to
    solve B independent slabs at once; the result then has shape
    (B, n_nodes, n_directions).  The sweep runs on a grid refined enough
    to keep the diamond scheme positive and is sampled back onto
    ``n_nodes`` equispaced nodes.
    """
    mu_a = np.atleast_1d(np.asarray(mu_a, dtype=float))
    mu_s = np.broadcast_to(np.asarray(mu_s, dtype=float), mu_a.shape).copy()
    if np.any(mu_a < 0) or np.any(mu_s < 0):
        raise OpticsDomainError("mu_a and mu_s must be nonnegative")
    if n_nodes < 3:
        raise GridError("need at least 3 depth nodes")
    mu, w = slab_ordinates(n_per_hemisphere)
    kernel = hg_slab_kernel(g, mu, w)
    scat = (kernel * (w / FOUR_PI)[None, :]).T  # I @ scat -> angular gain
    sigma = mu_a + mu_s
    h_coarse = thickness / (n_nodes - 1)
    mu_min = float(np.min(np.abs(mu)))
    refine = max(1, int(math.ceil(float(sigma.max()) * h_coarse / (1.9 * mu_min))))
    n_fine = (n_nodes - 1) * refine + 1
    h = thickness / (n_fine - 1)

    B, m = mu_a.size, mu.size
    pos = mu > 0
    neg = ~pos
    amu = np.abs(mu)
    a = amu[None, :] / h - sigma[:, None] / 2.0  # (B, m)
    b = amu[None, :] / h + sigma[:, None] / 2.0
    I = np.zeros((B, n_fine, m))
    for _ in range(max_iter):
        q = mu_s[:, None, None] * (I @ scat)  # (B, n_fine, m)
        new = np.empty_like(I)
        new[:, 0, pos] = inflow
        new[:, -1, neg] = 0.0
        qa = 0.5 * (q[:, 1:, :] + q[:, :-1, :])
        for i in range(n_fine - 1):
            new[:, i + 1, pos] = (a[:, pos] * new[:, i, pos] + qa[:, i, pos]) / b[:, pos]
        for i in range(n_fine - 1, 0, -1):
            new[:, i - 1, neg] = (a[:, neg] * new[:, i, neg] + qa[:, i - 1, neg]) / b[:, neg]
        delta = np.max(np.abs(new - I))
        I = new
        if delta <= tol * max(1.0, float(np.max(np.abs(I)))):
            break
    depth = np.linspace(0.0, thickness, n_nodes)
    I = I[:, ::refine, :]
    return depth, mu, w, I
