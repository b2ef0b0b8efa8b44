"""Enhanced Beer-Lambert feature vector (56 entries) and its standardiser.

Layout, by 1-based position:

    1-4    I_k / I0_k
    5-8    A_k = ln(I0_k / I_k)
    9-14   A_i - A_j for channel pairs i < j
    15-18  A_k ** 2
    19-24  A_i * A_j for i < j
    25-28  w_k * (t/3 + P/3 + M/3) * A_k, w_k = glucose extinction / its maximum
    29-40  the 12 raw PMF entries
    41-44  temperature, humidity, pressure, ln(ambient lux)
    45-48  t_skin * A_k
    49-52  melanin * A_k
    53-56  A_k * (1 + 0.002 (T - 25))

t, P and M are raw skin thickness (mm), baseline perfusion and melanin
fraction.  Everything is computed in batch; a single sample is a batch of one.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .optics import OpticsDomainError
from .physiology import PMF_NAMES

N_CHANNELS = 4
N_FEATURES = 56
COMPOSITE_ALPHA = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)  # skin, perfusion, melanin
_PAIRS = tuple(combinations(range(N_CHANNELS), 2))
_I_THICK = PMF_NAMES.index("skin_thickness")
_I_PERF = PMF_NAMES.index("baseline_perfusion")
_I_MEL = PMF_NAMES.index("melanin_fraction")
ENV_NAMES = ("temp_c", "rh_pct", "pressure_mbar", "ln_ambient_lux")


def feature_names(wavelengths=(850, 940, 1050, 1150)) -> tuple[str, ...]:
    tags = [str(int(w)) for w in wavelengths]
    if len(tags) != N_CHANNELS:
        raise ValueError("the feature layout is defined for four channels")
    names = [f"norm_i_{t}" for t in tags]
    names += [f"abs_{t}" for t in tags]
    names += [f"diff_{tags[i]}_{tags[j]}" for i, j in _PAIRS]
    names += [f"abs_sq_{t}" for t in tags]
    names += [f"prod_{tags[i]}_{tags[j]}" for i, j in _PAIRS]
    names += [f"pmf_composite_{t}" for t in tags]
    names += [f"pmf_{n}" for n in PMF_NAMES]
    names += [f"env_{n}" for n in ENV_NAMES]
    names += [f"thickness_abs_{t}" for t in tags]
    names += [f"melanin_abs_{t}" for t in tags]
    names += [f"temp_comp_abs_{t}" for t in tags]
    assert len(names) == N_FEATURES
    return tuple(names)


FEATURE_NAMES = feature_names()


def composite_weights(glucose_eps) -> np.ndarray:
    eps = np.asarray(glucose_eps, dtype=float)
    top = np.max(np.abs(eps))
    return eps / top if top > 0 else np.zeros_like(eps)


def extract_batch(intensity, i0, pmf_raw, env, glucose_eps) -> np.ndarray:
    """Feature matrix for ``n`` samples.

    intensity: (n, 4) measured optical power; i0: (4,) reference power;
    pmf_raw: (n, 12); env: (n, 4) as temperature, RH, pressure, lux.
    """
    inten = np.atleast_2d(np.asarray(intensity, dtype=float))
    pmf = np.atleast_2d(np.asarray(pmf_raw, dtype=float))
    env = np.atleast_2d(np.asarray(env, dtype=float))
    i0 = np.asarray(i0, dtype=float)
    if inten.shape[1] != N_CHANNELS or pmf.shape[1] != len(PMF_NAMES) or env.shape[1] != 4:
        raise ValueError("expected (n, 4) intensities, (n, 12) PMF and (n, 4) environment")
    if np.any(inten <= 0) or np.any(i0 <= 0):
        raise OpticsDomainError("feature extraction needs positive intensities")
    if np.any(env[:, 3] <= 0):
        raise OpticsDomainError("ambient lux must be positive")
    n = inten.shape[0]
    out = np.empty((n, N_FEATURES))
    a = np.log(i0 / inten)
    ii, jj = np.array(_PAIRS).T
    thick, perf, mel = pmf[:, _I_THICK:_I_THICK + 1], pmf[:, _I_PERF:_I_PERF + 1], pmf[:, _I_MEL:_I_MEL + 1]
    al = COMPOSITE_ALPHA
    comp = al[0] * thick + al[1] * perf + al[2] * mel
    t = env[:, 0:1]
    out[:, 0:4] = inten / i0
    out[:, 4:8] = a
    out[:, 8:14] = a[:, ii] - a[:, jj]
    out[:, 14:18] = a * a
    out[:, 18:24] = a[:, ii] * a[:, jj]
    out[:, 24:28] = composite_weights(glucose_eps) * comp * a
    out[:, 28:40] = pmf
    out[:, 40:43] = env[:, 0:3]
    out[:, 43] = np.log(env[:, 3])
    out[:, 44:48] = thick * a
    out[:, 48:52] = mel * a
    out[:, 52:56] = a * (1.0 + 0.002 * (t - 25.0))
    return out


def env_matrix(samples) -> np.ndarray:
    return np.array([(s.env.temperature, s.env.relative_humidity, s.env.pressure, s.env.ambient_lux)
                     for s in samples], dtype=float)


def extract_features(sample, i0, glucose_eps, intensity=None) -> np.ndarray:
    """56 features for one sample; ``intensity`` defaults to its noise-free debug values."""
    inten = sample.debug_intensities if intensity is None else intensity
    return extract_batch([inten], i0, [sample.pmf_raw], env_matrix([sample]), glucose_eps)[0]


def dataset_features(d, samples=None) -> np.ndarray:
    """Features for dataset samples, using intensities recovered from the ADC codes."""
    samples = d.samples if samples is None else samples
    eps = d.extinction().glucose_vector(d.wavelengths)
    return extract_batch(d.intensities(samples), d.reference_intensity,
                         [s.pmf_raw for s in samples], env_matrix(samples), eps)


class ConstantFeatureError(ValueError):
    pass


class FeatureScaler:
    """Per-feature standardiser fitted on the training split.

    By default a constant training column is an error.  ``allow_constant``
    centres such columns and leaves their scale at 1, which is what a
    noise-free dataset (fixed subject, lab environment) needs.
    """

    def __init__(self, mean=None, sd=None, names=FEATURE_NAMES):
        self.mean = None if mean is None else np.asarray(mean, dtype=float)
        self.sd = None if sd is None else np.asarray(sd, dtype=float)
        self.names = tuple(names)

    @property
    def fitted(self) -> bool:
        return self.mean is not None

    def fit(self, X, allow_constant: bool = False) -> "FeatureScaler":
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[0] < 2:
            raise ValueError("scaler needs at least two training rows")
        mean = X.mean(axis=0)
        sd = X.std(axis=0)
        const = sd <= 1e-12 * np.maximum(1.0, np.abs(mean))
        if np.any(const):
            if not allow_constant:
                bad = [self.names[i] if i < len(self.names) else str(i) for i in np.flatnonzero(const)]
                raise ConstantFeatureError(f"constant feature(s) in training data: {', '.join(bad[:8])}")
            sd = np.where(const, 1.0, sd)
        self.mean, self.sd = mean, sd
        return self

    def transform(self, X) -> np.ndarray:
        if not self.fitted:
            raise RuntimeError("feature scaler has not been fitted")
        return (np.asarray(X, dtype=float) - self.mean) / self.sd

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "sd": self.sd.tolist()}

    @classmethod
    def from_dict(cls, d) -> "FeatureScaler":
        return cls(d["mean"], d["sd"])


def fit_scaler(X, allow_constant: bool = False) -> FeatureScaler:
    return FeatureScaler().fit(X, allow_constant)


def apply_scaler(scaler: FeatureScaler, X) -> np.ndarray:
    return scaler.transform(X)
