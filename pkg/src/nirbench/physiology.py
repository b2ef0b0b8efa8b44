"""Subject anatomy and state, optical mapping, and the 12-entry PMF vector.

Population draws are uniform or triangular within fixed ranges.  The
derived quantities (perfusion, water and lipid fractions, collagen
scattering proxy) are simple linear stand-ins for the literature fits a
real tissue model would use.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .environment import EnvState, pressure_to_perfusion_delta
from .foundation import PhysiologyConfig, RandomStream
from .optics import ExtinctionTable, OpticalMedium

MELANIN_RANGE = (0.01, 0.15)
FITZPATRICK_CLASSES = 6

PMF_NAMES = (
    "age", "bmi", "melanin_fraction", "skin_thickness", "hydration_offset",
    "systolic_bp", "heart_rate", "resp_rate", "baseline_perfusion",
    "water_fraction", "lipid_fraction", "temperature",
)


def melanin_band(fitzpatrick: int) -> tuple[float, float]:
    """Disjoint sub-band of the melanin range for Fitzpatrick class 1..6."""
    if not 1 <= fitzpatrick <= FITZPATRICK_CLASSES:
        raise ValueError(f"fitzpatrick class must be 1..6, got {fitzpatrick}")
    lo, hi = MELANIN_RANGE
    width = (hi - lo) / FITZPATRICK_CLASSES
    return lo + (fitzpatrick - 1) * width, lo + fitzpatrick * width


def derived_perfusion(systolic_bp: float, heart_rate: float) -> float:
    return 0.03 * (1.0 + 0.25 * (heart_rate - 85.0) / 35.0 + 0.25 * (systolic_bp - 135.0) / 45.0)


def derived_water(bmi: float) -> float:
    return 0.72 - 0.004 * (bmi - 18.0)


def derived_lipid(bmi: float) -> float:
    return 0.04 + 0.008 * (bmi - 18.0)


@dataclass(frozen=True)
class Subject:
    age: float
    bmi: float
    fitzpatrick: int
    melanin_fraction: float
    skin_thickness: float
    hydration_offset: float
    systolic_bp: float
    heart_rate: float
    resp_rate: float

    @property
    def baseline_perfusion(self) -> float:
        return derived_perfusion(self.systolic_bp, self.heart_rate)

    @property
    def water_fraction(self) -> float:
        return derived_water(self.bmi)

    @property
    def lipid_fraction(self) -> float:
        return derived_lipid(self.bmi)

    def to_dict(self) -> dict:
        return asdict(self)


def nominal_subject() -> Subject:
    """Population-centre subject used when physiological variation is off."""
    lo, hi = melanin_band(3)
    return Subject(age=45.0, bmi=25.0, fitzpatrick=3, melanin_fraction=0.5 * (lo + hi),
                   skin_thickness=1.5, hydration_offset=0.0, systolic_bp=120.0,
                   heart_rate=70.0, resp_rate=16.0)


def sample_subject(rng: RandomStream, noise: bool = True) -> Subject:
    if not noise:
        return nominal_subject()
    age = float(rng.uniform(18.0, 80.0))
    bmi = float(rng.uniform(18.0, 40.0))
    fitz = int(rng.integers(1, FITZPATRICK_CLASSES + 1))
    mel = float(rng.uniform(*melanin_band(fitz)))
    thick = float(rng.triangular(0.5, 1.5, 4.0))
    hyd = float(rng.uniform(-0.10, 0.10))
    sbp = float(rng.uniform(90.0, 180.0))
    hr = float(rng.uniform(50.0, 120.0))
    rr = float(rng.uniform(12.0, 20.0))
    return Subject(age, bmi, fitz, mel, thick, hyd, sbp, hr, rr)


def collagen_factor(age: float) -> float:
    """Scattering scale from dermal collagen; declines with age."""
    return 1.0 - 0.004 * (age - 49.0)


def scattering_coefficient(age: float, wavelength: float, cfg: PhysiologyConfig) -> float:
    return cfg.scatter_a_per_mm * (wavelength / 1000.0) ** (-cfg.scatter_b) * collagen_factor(age)


def detour_factor(mu_s_prime: float, cfg: PhysiologyConfig) -> float:
    return min(cfg.detour_cap, 1.0 + 0.5 * mu_s_prime * cfg.detour_l0_mm)


def chromophore_concentrations(s: Subject, env: EnvState, env_effects: bool = True) -> dict[str, float]:
    """Non-glucose chromophore concentrations (volume fractions)."""
    return {
        "water": s.water_fraction * (1.0 + s.hydration_offset),
        "hemoglobin": s.baseline_perfusion * (1.0 + pressure_to_perfusion_delta(env, env_effects)),
        "lipid": s.lipid_fraction,
        "melanin": s.melanin_fraction,
    }


def subject_optics(s: Subject, env: EnvState, wavelength: float, table: ExtinctionTable,
                   cfg: PhysiologyConfig | None = None,
                   env_effects: bool = True) -> tuple[OpticalMedium, dict[str, float]]:
    cfg = cfg or PhysiologyConfig()
    conc = chromophore_concentrations(s, env, env_effects)
    row = table.row(wavelength)
    mu_a = sum(row[k] * c for k, c in conc.items())
    mu_s = scattering_coefficient(s.age, wavelength, cfg)
    mu_sp = mu_s * (1.0 - cfg.anisotropy)
    path = 2.0 * s.skin_thickness * detour_factor(mu_sp, cfg)
    return OpticalMedium(mu_a, mu_s, cfg.anisotropy, path), conc


def pmf_raw(s: Subject, env: EnvState) -> np.ndarray:
    return np.array([
        s.age, s.bmi, s.melanin_fraction, s.skin_thickness, s.hydration_offset,
        s.systolic_bp, s.heart_rate, s.resp_rate, s.baseline_perfusion,
        s.water_fraction, s.lipid_fraction, env.temperature,
    ], dtype=float)


class ScalerNotFitted(RuntimeError):
    pass


class PmfScaler:
    """Column standardiser fitted on the training split.

    Columns that are constant in training (e.g. when physiological
    variation is switched off) are centred but not scaled.
    """

    def __init__(self, mean=None, sd=None):
        self.mean = None if mean is None else np.asarray(mean, dtype=float)
        self.sd = None if sd is None else np.asarray(sd, dtype=float)

    @property
    def fitted(self) -> bool:
        return self.mean is not None

    def fit(self, raw: np.ndarray) -> "PmfScaler":
        raw = np.asarray(raw, dtype=float)
        if raw.ndim != 2 or raw.shape[1] != len(PMF_NAMES) or raw.shape[0] < 2:
            raise ValueError("PMF scaler needs an (n >= 2, 12) matrix")
        self.mean = raw.mean(axis=0)
        sd = raw.std(axis=0)
        self.sd = np.where(sd > 0, sd, 1.0)
        return self

    def transform(self, raw) -> np.ndarray:
        if not self.fitted:
            raise ScalerNotFitted("PMF scaler has not been fitted")
        return (np.asarray(raw, dtype=float) - self.mean) / self.sd

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "sd": self.sd.tolist()}

    @classmethod
    def from_dict(cls, d) -> "PmfScaler":
        return cls(d["mean"], d["sd"])


def pmf_vector(s: Subject, env: EnvState, scaler: PmfScaler) -> np.ndarray:
    return scaler.transform(pmf_raw(s, env))
