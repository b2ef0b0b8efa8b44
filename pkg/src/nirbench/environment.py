"""Environmental state and its optical/electrical perturbations."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .foundation import RandomStream
from .optics import UnknownWavelengthError

REFERENCE_PRESSURE_MBAR = 1013.0
PERFUSION_SLOPE_PER_MBAR = 1.0 / 1260.0
# Broadband W/m^2 per lux for daylight-like spectra.
IRRADIANCE_PER_LUX = 0.0079


class AmbientProfile(str, enum.Enum):
    SUN = "sun"
    FLUORESCENT = "fluorescent"
    LED = "led"


@dataclass(frozen=True)
class EnvState:
    temperature: float = 25.0  # degC
    relative_humidity: float = 45.0  # %
    pressure: float = 1013.0  # mbar
    ambient_lux: float = 0.1
    ambient_profile: AmbientProfile = AmbientProfile.LED

    def __post_init__(self):
        checks = (
            ("temperature", self.temperature, 15.0, 45.0),
            ("relative_humidity", self.relative_humidity, 30.0, 90.0),
            ("pressure", self.pressure, 950.0, 1050.0),
            ("ambient_lux", self.ambient_lux, 0.1, 1e5),
        )
        for name, v, lo, hi in checks:
            if not lo <= v <= hi:
                raise ValueError(f"{name}={v} outside [{lo}, {hi}]")
        object.__setattr__(self, "ambient_profile", AmbientProfile(self.ambient_profile))


LAB_STATE = EnvState()


def sample_environment(rng: RandomStream, noise: bool = True) -> EnvState:
    if not noise:
        return LAB_STATE
    t = float(rng.uniform(15.0, 45.0))
    rh = float(rng.uniform(30.0, 90.0))
    p = float(rng.uniform(950.0, 1050.0))
    lux = float(10.0 ** rng.uniform(-1.0, 5.0))
    profile = list(AmbientProfile)[int(rng.integers(0, 3))]
    return EnvState(t, rh, p, min(max(lux, 0.1), 1e5), profile)


def humidity_coupling(env: EnvState, enabled: bool = True) -> float:
    """Coupling factor, linear from 0.97 at 30 % RH to 1.03 at 90 % RH."""
    if not enabled:
        return 1.0
    return 1.0 + 0.001 * (env.relative_humidity - 60.0)


def pressure_to_perfusion_delta(env: EnvState, enabled: bool = True) -> float:
    if not enabled:
        return 0.0
    return (env.pressure - REFERENCE_PRESSURE_MBAR) * PERFUSION_SLOPE_PER_MBAR


@lru_cache(maxsize=1)
def ambient_weights() -> dict[tuple[str, float], float]:
    ref = resources.files("nirbench") / "data" / "ambient.csv"
    with ref.open("r", encoding="utf-8") as fh:
        rows = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    return {(r["profile"], float(r["wavelength_nm"])): float(r["weight"]) for r in csv.DictReader(rows)}


def ambient_leakage(env: EnvState, wavelength: float, optical_density: float = 2.0,
                    detector_area_mm2: float = 2.0, enabled: bool = True) -> float:
    """Ambient optical power reaching the detector, mW."""
    key = (env.ambient_profile.value, float(wavelength))
    weights = ambient_weights()
    if key not in weights:
        raise UnknownWavelengthError(f"no ambient weight for {key}")
    if not enabled or math.isinf(optical_density):
        return 0.0
    irradiance = env.ambient_lux * IRRADIANCE_PER_LUX * weights[key]  # W/m^2 in band
    watts = irradiance * detector_area_mm2 * 1e-6 * 10.0 ** (-optical_density)
    return watts * 1e3
