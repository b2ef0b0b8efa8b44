"""Plasma glucose over one day (Bergman minimal model) and interstitial lag.

Event magnitudes are specified as the glucose excursion they should cause
in isolation (mg/dL).  The forcing amplitude that produces that excursion
is solved numerically against the subject's own model, so excursions stay
in their bands regardless of basal glucose.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .foundation import RandomStream

DAY_MIN = 1440
GLUCOSE_RANGE = (60.0, 400.0)
DAWN_WINDOW = (270, 360)  # 04:30-06:00
TAU_RANGE = (7.0, 15.0)


class LagRangeError(ValueError):
    pass


@dataclass(frozen=True)
class BergmanParams:
    basal: float = 110.0  # G_b, mg/dL
    p1: float = 0.02  # glucose effectiveness, 1/min
    p2: float = 0.025  # remote insulin decay, 1/min
    p3: float = 5e-6  # insulin action gain, 1/min^2 per mg/dL
    k_abs: float = 0.055  # meal absorption rate, 1/min
    k_ex: float = 0.04  # exercise uptake rate, 1/min

    def __post_init__(self):
        if min(self.p1, self.p2, self.p3, self.k_abs, self.k_ex) <= 0 or self.basal <= 0:
            raise ValueError("Bergman rates must be positive")


@dataclass(frozen=True)
class Event:
    kind: str  # "meal" | "exercise" | "dawn"
    start: int  # minute of day
    magnitude: float  # target excursion, mg/dL (positive)


@dataclass
class GlucoseTrajectory:
    t: np.ndarray
    plasma: np.ndarray
    interstitial: np.ndarray
    events: list[Event] = field(default_factory=list)
    tau: float = 10.0
    clamped: int = 0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_min", "plasma_mgdl", "interstitial_mgdl"])
            for row in zip(self.t, self.plasma, self.interstitial):
                w.writerow([int(row[0]), repr(float(row[1])), repr(float(row[2]))])


def _gamma_pulse(s: np.ndarray, k: float) -> np.ndarray:
    """Unit-area k^2 s exp(-k s) for s >= 0."""
    out = np.zeros_like(s, dtype=float)
    pos = s >= 0
    out[pos] = k * k * s[pos] * np.exp(-k * s[pos])
    return out


def _forcing(kind: str, amplitude: float, start: int, t: np.ndarray, p: BergmanParams) -> np.ndarray:
    if kind == "meal":
        return amplitude * _gamma_pulse(t - start, p.k_abs)
    if kind == "exercise":
        return -amplitude * _gamma_pulse(t - start, p.k_ex)
    if kind == "dawn":
        lo, hi = DAWN_WINDOW
        return np.where((t >= lo) & (t < hi), amplitude, 0.0)
    raise ValueError(f"unknown event kind {kind!r}")


def _integrate(p: BergmanParams, forcing: np.ndarray, g0: float) -> np.ndarray:
    """Explicit Euler, 1-min steps."""
    n = forcing.size
    out = np.empty(n)
    G, X = g0, 0.0
    gb, p1, p2, p3 = p.basal, p.p1, p.p2, p.p3
    for k in range(n):
        out[k] = G
        dG = -p1 * (G - gb) - X * G + forcing[k]
        dX = -p2 * X + p3 * (G - gb if G > gb else 0.0)
        G += dG
        X += dX
    return out


def isolated_excursion(p: BergmanParams, kind: str, amplitude: float) -> float:
    """Peak excursion from basal caused by one event alone."""
    if kind == "dawn":
        lo, hi = DAWN_WINDOW
        t = np.arange(hi + 1)
        g = _integrate(p, _forcing(kind, amplitude, lo, t, p), p.basal)
        return float(g[lo:hi].max() - g[lo - 1])
    t = np.arange(240)
    g = _integrate(p, _forcing(kind, amplitude, 0, t, p), p.basal)
    return float(g.max() - p.basal) if kind == "meal" else float(p.basal - g.min())


def forcing_amplitude(p: BergmanParams, kind: str, magnitude: float) -> float:
    """Forcing amplitude whose isolated excursion equals ``magnitude``."""
    if magnitude <= 0:
        return 0.0
    unit = isolated_excursion(p, kind, 1.0)
    guess = magnitude / unit
    if kind == "exercise":
        # no insulin feedback below basal, so the response is linear
        return guess
    f = lambda a: isolated_excursion(p, kind, a) - magnitude
    return brentq(f, 0.5 * guess, 3.0 * guess, xtol=1e-10)


def simulate_plasma(params: BergmanParams, events, rng: RandomStream | None = None,
                    n_minutes: int = DAY_MIN) -> np.ndarray:
    """Unclamped plasma glucose, one value per minute, starting at basal."""
    t = np.arange(n_minutes)
    forcing = np.zeros(n_minutes)
    for ev in events:
        if not 0 <= ev.start < n_minutes:
            raise ValueError(f"event at minute {ev.start} outside the time grid")
        forcing += _forcing(ev.kind, forcing_amplitude(params, ev.kind, ev.magnitude), ev.start, t, params)
    return _integrate(params, forcing, params.basal)


def interstitial_lag(plasma, tau: float, rng: RandomStream | None = None, noise_sd: float = 0.0) -> np.ndarray:
    """First-order lag dGi/dt = (Gp - Gi)/tau, exact for inputs held over each minute."""
    lo, hi = TAU_RANGE
    if not lo <= tau <= hi:
        raise LagRangeError(f"tau={tau} outside [{lo}, {hi}] min")
    plasma = np.asarray(plasma, dtype=float)
    alpha = 1.0 - math.exp(-1.0 / tau)
    out = np.empty_like(plasma)
    gi = plasma[0]
    for k in range(plasma.size):
        out[k] = gi
        gi += alpha * (plasma[k] - gi)
    if noise_sd > 0 and rng is not None:
        out = out + rng.gaussian(0.0, noise_sd, plasma.size)
    return out


def clamp_glucose(series: np.ndarray) -> tuple[np.ndarray, int]:
    lo, hi = GLUCOSE_RANGE
    clamped = int(np.count_nonzero((series < lo) | (series > hi)))
    return np.clip(series, lo, hi), clamped


def sample_events(rng: RandomStream) -> list[Event]:
    """Three jittered meals, exercise with p=0.3, dawn surge with p=0.5."""
    events = []
    for centre in (450, 750, 1140):  # 07:30, 12:30, 19:00
        start = int(centre + rng.integers(-45, 46))
        events.append(Event("meal", start, float(rng.uniform(40.0, 70.0))))
    if rng.random() < 0.3:
        events.append(Event("exercise", int(rng.integers(480, 1200)), float(rng.uniform(20.0, 40.0))))
    if rng.random() < 0.5:
        events.append(Event("dawn", DAWN_WINDOW[0], float(rng.uniform(10.0, 30.0))))
    return sorted(events, key=lambda e: (e.start, e.kind))


def sample_params(rng: RandomStream) -> BergmanParams:
    return BergmanParams(basal=float(rng.uniform(80.0, 140.0)))


def simulate_day(rng: RandomStream, noise: bool = True) -> GlucoseTrajectory:
    """One subject-day: draw basal glucose, events and lag, then simulate."""
    params = sample_params(rng.derive("params"))
    events = sample_events(rng.derive("events"))
    tau = float(rng.derive("tau").uniform(*TAU_RANGE))
    plasma, n1 = clamp_glucose(simulate_plasma(params, events))
    inter = interstitial_lag(plasma, tau, rng.derive("isf-noise"), 1.0 if noise else 0.0)
    inter, n2 = clamp_glucose(inter)
    return GlucoseTrajectory(np.arange(DAY_MIN), plasma, inter, events, tau, n1 + n2)


def sample_measurement_times(trajectory_or_length, n: int, rng: RandomStream, min_sep: int = 60) -> np.ndarray:
    """``n`` sorted integer minutes, pairwise at least ``min_sep`` apart.

    Uniform over feasible configurations via the gap-shrinking map: draw
    from a grid shortened by (n-1)*min_sep, sort, then re-expand.
    """
    if n < 1:
        raise ValueError("need at least one measurement time")
    length = trajectory_or_length if isinstance(trajectory_or_length, int) else len(trajectory_or_length.t)
    span = length - (n - 1) * min_sep
    if span < n:
        raise ValueError(f"cannot place {n} times {min_sep} min apart in {length} min")
    picks = np.sort(rng.generator.choice(span, size=n, replace=False))
    return picks + np.arange(n) * min_sep
