"""ESP32-class sensing chain: LED drift, photodiode current budget, 12-bit ADC."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .foundation import BOLTZMANN, ELECTRON_CHARGE, KELVIN_OFFSET, HardwareConfig, RandomStream

ADC_BITS = 12
ADC_MAX = 2**ADC_BITS - 1


@dataclass(frozen=True)
class LedModel:
    p0_mw: float
    wavelength: float
    age_h: float = 0.0
    flicker_sd: float = 0.001

    def __post_init__(self):
        if self.p0_mw <= 0 or self.age_h < 0 or self.flicker_sd < 0:
            raise ValueError("LedModel needs P0 > 0, age >= 0, flicker_sd >= 0")


@dataclass(frozen=True)
class PhotodiodeModel:
    responsivity: float  # A/W at this channel's wavelength
    dark_current_25: float  # A
    bandwidth: float  # Hz
    r_load: float  # ohm

    def __post_init__(self):
        if min(self.responsivity, self.dark_current_25, self.bandwidth, self.r_load) <= 0:
            raise ValueError("PhotodiodeModel fields must be positive")


@dataclass(frozen=True)
class AdcModel:
    v_ref: float
    tia_gain: float  # V/A
    inl_amplitude: float = 2.0  # codes
    offset_drift_per_degc: float = 0.0  # codes/degC
    inl_phase: float = 0.0
    resolution: int = ADC_BITS

    def __post_init__(self):
        if self.v_ref <= 0 or self.tia_gain <= 0:
            raise ValueError("AdcModel needs v_ref > 0 and tia_gain > 0")
        if self.resolution != ADC_BITS:
            raise ValueError("only 12-bit conversion is modelled")

    def inl(self, code_position):
        """Single-period sine across the code range; fixed per device."""
        return self.inl_amplitude * np.sin(2.0 * math.pi * np.asarray(code_position) / ADC_MAX
                                           + self.inl_phase)


class PhotodiodeCurrents(NamedTuple):
    signal: float
    dark: float
    shot: float
    thermal: float
    total: float


class SpectralChannelReading(NamedTuple):
    code: int
    intensity: float  # noise-free optical power at the detector, mW


@dataclass(frozen=True)
class Device:
    """One sensor: an LED/photodiode pair per channel sharing one ADC."""
    leds: tuple[LedModel, ...]
    photodiodes: tuple[PhotodiodeModel, ...]
    adc: AdcModel
    coupling: float = 1.0


def full_scale_gain(cfg: HardwareConfig) -> float:
    if cfg.tia_gain_v_per_a > 0:
        return cfg.tia_gain_v_per_a
    i_max = cfg.responsivity_a_per_w * cfg.p0_mw * 1e-3
    return cfg.v_ref / i_max


def build_device(cfg: HardwareConfig, wavelengths, rng: RandomStream | None, noise: bool = True) -> Device:
    """Draw per-device randomness (LED age, INL phase) from ``rng``."""
    if noise and rng is not None:
        age = float(rng.uniform(0.0, cfg.led_age_max_h))
        phase = float(rng.uniform(0.0, 2.0 * math.pi))
        inl_amp, drift, flicker = cfg.inl_amplitude, cfg.offset_drift_per_degc, cfg.flicker_sd
    else:
        age, phase, inl_amp, drift, flicker = 0.0, 0.0, 0.0, 0.0, 0.0
    leds = tuple(LedModel(cfg.p0_mw, float(w), age, flicker) for w in wavelengths)
    pds = tuple(PhotodiodeModel(cfg.responsivity_a_per_w, cfg.dark_current_a, cfg.bandwidth_hz, cfg.r_load_ohm)
                for _ in wavelengths)
    adc = AdcModel(cfg.v_ref, full_scale_gain(cfg), inl_amp, drift, phase)
    return Device(leds, pds, adc, cfg.coupling)


def led_power(led: LedModel, T: float, rng: RandomStream | None = None, noise: bool = True) -> float:
    """P0 [1 - 0.002 (T-25) - 0.001 t/1000 + N(0, flicker)], clamped at 0."""
    jitter = float(rng.gaussian(0.0, led.flicker_sd)) if (noise and rng is not None) else 0.0
    p = led.p0_mw * (1.0 - 0.002 * (T - 25.0) - 0.001 * led.age_h / 1000.0 + jitter)
    return max(p, 0.0)


def photodiode_currents(pd: PhotodiodeModel, p_opt_mw: float, T: float,
                        rng: RandomStream | None = None, noise: bool = True) -> PhotodiodeCurrents:
    if p_opt_mw < 0:
        raise ValueError("optical power must be nonnegative")
    i_sig = pd.responsivity * p_opt_mw * 1e-3
    i_dark = pd.dark_current_25 * math.exp(0.1 * (T - 25.0))
    if noise and rng is not None:
        sd_shot = shot_noise_sd(i_sig + i_dark, pd.bandwidth)
        sd_th = thermal_noise_sd(T, pd.bandwidth, pd.r_load)
        i_shot = float(rng.gaussian(0.0, sd_shot))
        i_th = float(rng.gaussian(0.0, sd_th))
    else:
        i_shot = i_th = 0.0
    return PhotodiodeCurrents(i_sig, i_dark, i_shot, i_th, i_sig + i_dark + i_shot + i_th)


def shot_noise_sd(current: float, bandwidth: float) -> float:
    return math.sqrt(2.0 * ELECTRON_CHARGE * current * bandwidth)


def thermal_noise_sd(T: float, bandwidth: float, r_load: float) -> float:
    return math.sqrt(4.0 * BOLTZMANN * (T + KELVIN_OFFSET) * bandwidth / r_load)


def adc_read(adc: AdcModel, i_tot: float, T: float) -> int:
    """Quantise a photocurrent; round-half-to-even, then INL and offset drift."""
    v_in = max(i_tot, 0.0) * adc.tia_gain
    ideal = float(np.rint(v_in / adc.v_ref * ADC_MAX))
    inl = float(adc.inl(min(max(ideal, 0.0), ADC_MAX)))
    offset = float(np.rint(adc.offset_drift_per_degc * (T - 25.0)))
    code = ideal + float(np.rint(inl)) + offset
    return int(min(max(code, 0.0), ADC_MAX))


def code_to_intensity(code, adc: AdcModel, responsivity: float):
    """Optical power (mW) that would produce ``code`` on an ideal chain."""
    return np.asarray(code, dtype=float) / ADC_MAX * adc.v_ref / adc.tia_gain / responsivity * 1e3


def channel_measurement(led: LedModel, pd: PhotodiodeModel, adc: AdcModel, absorbance: float,
                        coupling: float, ambient_mw: float, T: float,
                        rng: RandomStream | None = None, noise: bool = True) -> SpectralChannelReading:
    """LED -> tissue (exp(-A)) -> coupling -> + ambient -> photodiode -> ADC."""
    if absorbance < 0:
        raise ValueError("absorbance must be nonnegative")
    transmit = math.exp(-absorbance)
    p_led = led_power(led, T, rng, noise)
    p_det = p_led * transmit * coupling + ambient_mw
    currents = photodiode_currents(pd, p_det, T, rng, noise)
    code = adc_read(adc, currents.total, T)
    clean = led_power(led, T, None, False) * transmit * coupling
    return SpectralChannelReading(code, clean)
