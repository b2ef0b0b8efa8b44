"""Compose the simulator layers into a dataset, split it and persist it.

Every subject draws from its own substream ("subject/<id>/..."), so the
output does not depend on generation order.  The dataset file is a CSV
with a JSON sidecar carrying the scenario config, its hash and the
reference intensities needed to turn ADC codes back into absorbances.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .environment import (AmbientProfile, EnvState, ambient_leakage, humidity_coupling,
                          sample_environment)
from .foundation import RandomStream, ScenarioConfig, config_from_dict
from .glucose import GLUCOSE_RANGE, sample_measurement_times, simulate_day
from .hardware import ADC_MAX, build_device, channel_measurement, full_scale_gain
from .optics import ExtinctionTable, mixture_absorbance
from .physiology import PMF_NAMES, pmf_raw, sample_subject, subject_optics

SPLITS = ("train", "val", "test")
FORMAT_VERSION = 1


class CorrelationUndefined(ValueError):
    pass


def _wl_tag(w: float) -> str:
    return str(int(w)) if float(w).is_integer() else repr(float(w))


@dataclass
class SpectralSample:
    subject_id: int
    time: int
    adc_codes: tuple[int, ...]
    debug_intensities: tuple[float, ...]
    env: EnvState
    pmf_raw: tuple[float, ...]
    glucose_plasma: float
    glucose_interstitial: float

    def __post_init__(self):
        if any(not 0 <= c <= ADC_MAX for c in self.adc_codes):
            raise ValueError(f"ADC code outside [0, {ADC_MAX}]")
        lo, hi = GLUCOSE_RANGE
        if not lo <= self.glucose_interstitial <= hi:
            raise ValueError(f"target glucose {self.glucose_interstitial} outside [{lo}, {hi}]")
        if len(self.pmf_raw) != len(PMF_NAMES):
            raise ValueError("pmf_raw must have 12 entries")


@dataclass
class Dataset:
    samples: list[SpectralSample]
    assignment: dict[int, str]
    config: ScenarioConfig
    reference_intensity: tuple[float, ...]  # I0 per channel, mW
    tia_gain: float
    responsivity: float
    v_ref: float
    meta: dict = field(default_factory=dict)

    @property
    def wavelengths(self) -> tuple[float, ...]:
        return tuple(self.config.wavelengths)

    @property
    def config_hash(self) -> str:
        return self.config.config_hash()

    def __len__(self) -> int:
        return len(self.samples)

    def split_of(self, s: SpectralSample) -> str:
        return self.assignment[s.subject_id]

    def subset(self, split: str) -> list[SpectralSample]:
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}")
        return [s for s in self.samples if self.assignment[s.subject_id] == split]

    def codes(self, samples=None) -> np.ndarray:
        samples = self.samples if samples is None else samples
        return np.array([s.adc_codes for s in samples], dtype=float)

    def intensities(self, samples=None) -> np.ndarray:
        """Measured optical power per channel, reconstructed from ADC codes (mW)."""
        c = self.codes(samples)
        return c / ADC_MAX * self.v_ref / self.tia_gain / self.responsivity * 1e3

    def targets(self, samples=None) -> np.ndarray:
        samples = self.samples if samples is None else samples
        return np.array([s.glucose_interstitial for s in samples], dtype=float)

    def extinction(self) -> ExtinctionTable:
        return ExtinctionTable.load(self.config.extinction_table or None)

    # -- persistence ---------------------------------------------------
    def header(self) -> list[str]:
        tags = [_wl_tag(w) for w in self.wavelengths]
        return (["subject_id", "split", "t_min"] + [f"adc_{t}" for t in tags] + [f"i0_{t}" for t in tags]
                + ["temp_c", "rh_pct", "pressure_mbar", "ambient_lux", "ambient_profile"]
                + [f"pmf_{n}" for n in PMF_NAMES] + ["glucose_plasma", "glucose_interstitial"])

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for s in self.samples:
            e = s.env
            w.writerow([s.subject_id, self.assignment[s.subject_id], s.time]
                       + list(s.adc_codes) + [repr(float(v)) for v in s.debug_intensities]
                       + [repr(e.temperature), repr(e.relative_humidity), repr(e.pressure),
                          repr(e.ambient_lux), e.ambient_profile.value]
                       + [repr(float(v)) for v in s.pmf_raw]
                       + [repr(float(s.glucose_plasma)), repr(float(s.glucose_interstitial))])
        return buf.getvalue()

    def content_hash(self) -> str:
        return hashlib.sha256(self.csv_text().encode()).hexdigest()

    def sidecar(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "config_hash": self.config_hash,
            "dataset_hash": self.content_hash(),
            "reference_intensity_mw": list(self.reference_intensity),
            "tia_gain_v_per_a": self.tia_gain,
            "responsivity_a_per_w": self.responsivity,
            "v_ref": self.v_ref,
            "meta": self.meta,
        }

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.csv_text(), encoding="utf-8")
        sidecar_path(path).write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")
        return path

    @classmethod
    def read(cls, path) -> "Dataset":
        path = Path(path)
        side = json.loads(sidecar_path(path).read_text(encoding="utf-8"))
        cfg = config_from_dict(side["config"])
        n_wl = len(cfg.wavelengths)
        samples, assignment = [], {}
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            head = next(reader)
            for row in reader:
                k = 3
                sid, split, t = int(row[0]), row[1], int(row[2])
                codes = tuple(int(v) for v in row[k:k + n_wl]); k += n_wl
                dbg = tuple(float(v) for v in row[k:k + n_wl]); k += n_wl
                env = EnvState(float(row[k]), float(row[k + 1]), float(row[k + 2]), float(row[k + 3]),
                               AmbientProfile(row[k + 4])); k += 5
                pmf = tuple(float(v) for v in row[k:k + len(PMF_NAMES)]); k += len(PMF_NAMES)
                samples.append(SpectralSample(sid, t, codes, dbg, env, pmf, float(row[k]), float(row[k + 1])))
                assignment[sid] = split
        d = cls(samples, assignment, cfg, tuple(side["reference_intensity_mw"]),
                side["tia_gain_v_per_a"], side["responsivity_a_per_w"], side["v_ref"], side.get("meta", {}))
        if head != d.header():
            raise ValueError(f"{path}: unexpected CSV header")
        return d


def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def reference_intensities(cfg: ScenarioConfig) -> tuple[float, ...]:
    """Noise-free full-power intensity per channel (zero absorbance, lab conditions)."""
    return tuple(cfg.hardware.p0_mw * cfg.hardware.coupling for _ in cfg.wavelengths)


def split_counts(n: int, fractions) -> list[int]:
    """Largest-remainder apportionment of ``n`` subjects; ties go to the earlier split."""
    fractions = [float(f) for f in fractions]
    if n < len(fractions):
        raise ValueError(f"cannot split {n} subjects into {len(fractions)} splits")
    if any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("split fractions must be nonnegative and sum to 1")
    quotas = [n * f for f in fractions]
    counts = [int(np.floor(q + 1e-12)) for q in quotas]
    order = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return counts


def split_dataset(subject_ids, fractions, rng: RandomStream) -> dict[int, str]:
    ids = sorted(set(int(s) for s in subject_ids))
    counts = split_counts(len(ids), fractions)
    perm = rng.permutation(len(ids))
    out, k = {}, 0
    for name, c in zip(SPLITS, counts):
        for j in perm[k:k + c]:
            out[ids[int(j)]] = name
        k += c
    return out


def _subject_samples(cfg: ScenarioConfig, table: ExtinctionTable, sid: int) -> list[SpectralSample]:
    noise = cfg.noise
    rng = cfg.root_stream().derive(f"subject/{sid}")
    subject = sample_subject(rng.derive("anatomy"), noise.physiology)
    traj = simulate_day(rng.derive("glucose"), noise.physiology)
    times = sample_measurement_times(traj, cfg.measurements_per_subject, rng.derive("times"))
    device = build_device(cfg.hardware, cfg.wavelengths, rng.derive("hardware"), noise.hardware)
    out = []
    for k, t in enumerate(times):
        mrng = rng.derive(f"measurement/{k}")
        env = sample_environment(mrng.derive("environment"), noise.environment)
        g_isf = float(traj.interstitial[t])
        coupling = humidity_coupling(env, noise.environment) * device.coupling
        codes, clean = [], []
        for ch, wl in enumerate(cfg.wavelengths):
            medium, conc = subject_optics(subject, env, wl, table, cfg.physiology, noise.environment)
            conc = dict(conc, glucose=g_isf)
            a = mixture_absorbance(table, conc, medium.l, wl)
            amb = ambient_leakage(env, wl, cfg.environment.optical_density,
                                  cfg.environment.detector_area_mm2, noise.environment)
            r = channel_measurement(device.leds[ch], device.photodiodes[ch], device.adc, a, coupling, amb,
                                    env.temperature, mrng.derive(f"channel/{ch}"), noise.hardware)
            codes.append(r.code)
            clean.append(r.intensity)
        out.append(SpectralSample(sid, int(t), tuple(codes), tuple(clean), env,
                                  tuple(float(v) for v in pmf_raw(subject, env)),
                                  float(traj.plasma[t]), g_isf))
    return out


def generate_dataset(cfg: ScenarioConfig, workers: int = 1) -> Dataset:
    cfg.validate()
    table = ExtinctionTable.load(cfg.extinction_table or None)
    ids = range(cfg.n_subjects)
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as pool:
            groups = list(pool.map(lambda i: _subject_samples(cfg, table, i), ids))
    else:
        groups = [_subject_samples(cfg, table, i) for i in ids]
    samples = sorted((s for g in groups for s in g), key=lambda s: (s.subject_id, s.time))
    assignment = split_dataset(ids, cfg.split_fractions, cfg.root_stream().derive("split"))
    return Dataset(samples, assignment, cfg, reference_intensities(cfg), full_scale_gain(cfg.hardware),
                   cfg.hardware.responsivity_a_per_w, cfg.hardware.v_ref)


def audit_correlation(d: Dataset) -> tuple[dict[float, float], float]:
    """Pearson rho between glucose and -log intensity per channel, plus best |rho|."""
    if len(d) < 10:
        raise ValueError("correlation audit needs at least 10 samples")
    y = d.targets()
    if np.ptp(y) == 0:
        raise CorrelationUndefined("glucose has zero variance")
    inten = d.intensities()
    out = {}
    for ch, wl in enumerate(d.wavelengths):
        if np.any(inten[:, ch] <= 0):
            raise CorrelationUndefined(f"channel {_wl_tag(wl)} nm has zero intensity readings")
        x = -np.log(inten[:, ch])
        if np.ptp(x) == 0:
            raise CorrelationUndefined(f"channel {_wl_tag(wl)} nm has zero variance")
        out[wl] = float(np.corrcoef(x, y)[0, 1])
    return out, max(abs(v) for v in out.values())


def load_dataset(path: str | os.PathLike) -> Dataset:
    return Dataset.read(path)
