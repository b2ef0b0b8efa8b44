"""Clinical and statistical accuracy measures for glucose predictions.

Clarke error grid zones (ref = reference, pred = prediction, mg/dL).
Boundary points go to the earlier letter.

    A  |pred - ref| <= 0.2 ref, or ref <= 70 and pred <= 70
    C  70 <= ref < 290 and pred > ref + 110
       130 < ref <= 180 and pred < 1.4 ref - 182
    D  ref < 70 and 70 < pred <= 180 and pred > 1.2 ref
       ref > 240 and 70 <= pred < 180
    E  ref > 180 and pred < 70
       ref < 70 and pred > 180
    B  everything else
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

ZONES = "ABCDE"
CLARKE_MAX = 600.0


class MetricDomainError(ValueError):
    pass


def _pair(pred, ref) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=float).ravel()
    r = np.asarray(ref, dtype=float).ravel()
    if p.shape != r.shape or p.size == 0:
        raise ValueError("pred and ref must be nonempty and of equal length")
    return p, r


def rmse(pred, ref) -> float:
    p, r = _pair(pred, ref)
    return float(np.sqrt(np.mean((p - r) ** 2)))


def mard(pred, ref) -> float:
    p, r = _pair(pred, ref)
    if np.any(r <= 0):
        raise MetricDomainError("MARD needs positive reference values")
    return float(np.mean(np.abs(p - r) / r) * 100.0)


def within_pct(pred, ref, p: float = 15.0) -> float:
    pr, r = _pair(pred, ref)
    if np.any(r <= 0):
        raise MetricDomainError("reference values must be positive")
    return float(np.mean(np.abs(pr - r) <= p / 100.0 * r) * 100.0)


def clarke_zone(ref: float, pred: float) -> str:
    if not (0 < ref <= CLARKE_MAX and 0 < pred <= CLARKE_MAX):
        raise MetricDomainError(f"Clarke grid is defined on (0, {CLARKE_MAX:g}] mg/dL, got ({ref}, {pred})")
    if abs(pred - ref) <= 0.2 * ref or (ref <= 70 and pred <= 70):
        return "A"
    if (70 <= ref < 290 and pred > ref + 110) or (130 < ref <= 180 and pred < 1.4 * ref - 182):
        return "C"
    if (ref < 70 and 70 < pred <= 180 and pred > 1.2 * ref) or (ref > 240 and 70 <= pred < 180):
        return "D"
    if (ref > 180 and pred < 70) or (ref < 70 and pred > 180):
        return "E"
    return "B"


def clarke_zones(pred, ref) -> list[str]:
    p, r = _pair(pred, ref)
    return [clarke_zone(float(a), float(b)) for a, b in zip(r, p)]


def clarke_fractions(pred, ref) -> dict[str, float]:
    """Percentage of points in each zone."""
    zones = clarke_zones(pred, ref)
    n = len(zones)
    return {z: 100.0 * zones.count(z) / n for z in ZONES}


def bland_altman(pred, ref) -> tuple[float, float, float]:
    p, r = _pair(pred, ref)
    if p.size < 2:
        raise ValueError("Bland-Altman needs at least two points")
    d = p - r
    bias = float(d.mean())
    sd = float(d.std(ddof=1))
    return bias, bias - 1.96 * sd, bias + 1.96 * sd


def linearity(pred, ref) -> tuple[float, float, float]:
    """OLS of pred on ref: (slope, intercept, Pearson r)."""
    p, r = _pair(pred, ref)
    rc = r - r.mean()
    sxx = float(rc @ rc)
    if sxx == 0:
        raise MetricDomainError("reference values have zero variance")
    pc = p - p.mean()
    slope = float(rc @ pc) / sxx
    intercept = float(p.mean() - slope * r.mean())
    syy = float(pc @ pc)
    corr = float(rc @ pc) / np.sqrt(sxx * syy) if syy > 0 else 0.0
    return slope, intercept, float(corr)


@dataclass
class ModelReport:
    model: str
    n: int
    rmse: float
    mard: float
    clarke_zone_pct: dict
    within_15pct: float
    bland_altman: tuple
    linearity: tuple
    param_count: int
    published_param_count: int | None = None

    @property
    def clarke_ab(self) -> float:
        return self.clarke_zone_pct["A"] + self.clarke_zone_pct["B"]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bland_altman"] = list(self.bland_altman)
        d["linearity"] = list(self.linearity)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d) -> "ModelReport":
        d = dict(d)
        d["bland_altman"] = tuple(d["bland_altman"])
        d["linearity"] = tuple(d["linearity"])
        return cls(**d)


def evaluate(model: str, pred, ref, param_count: int, published_param_count: int | None = None) -> ModelReport:
    p, r = _pair(pred, ref)
    # predictions outside the grid are clipped for zoning only
    pz = np.clip(p, 1.0, CLARKE_MAX)
    return ModelReport(model, int(p.size), rmse(p, r), mard(p, r), clarke_fractions(pz, r), within_pct(p, r),
                       bland_altman(p, r), linearity(p, r), int(param_count), published_param_count)
