"""Random streams, physical constants and scenario configuration.

Every stochastic draw in the package comes from a :class:`RandomStream`
addressed by a text label such as ``"subject/17/hardware"``.  The label is
hashed into a numpy ``SeedSequence`` spawn key, so a stream depends only on
``(root_seed, label)`` and never on the order in which streams are created.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import typing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ELECTRON_CHARGE = 1.602176634e-19  # C
BOLTZMANN = 1.380649e-23  # J/K
SPEED_OF_LIGHT_VACUUM = 299.792458  # mm/ns
KELVIN_OFFSET = 273.15

SEED_ENV_VAR = "NIRBENCH_SEED"


@dataclass(frozen=True)
class PhysicalConstants:
    electron_charge: float = ELECTRON_CHARGE
    boltzmann: float = BOLTZMANN
    refractive_index: float = 1.4

    @property
    def speed_of_light_in_tissue(self) -> float:
        """mm/ns"""
        return SPEED_OF_LIGHT_VACUUM / self.refractive_index


CONSTANTS = PhysicalConstants()


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------

def _label_key(label: str) -> tuple[int, ...]:
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=16).digest()
    return tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))


class RandomStream:
    """Deterministic stream of random draws addressed by ``(root_seed, label)``.

    Deriving never consumes draws from the parent.  Drawing mutates the
    underlying generator, so a stream has a single owner.
    """

    __slots__ = ("root_seed", "label", "_gen")

    def __init__(self, root_seed: int, label: str = ""):
        if not 0 <= int(root_seed) < 2**64:
            raise ValueError(f"root_seed must be a 64-bit unsigned integer, got {root_seed}")
        self.root_seed = int(root_seed)
        self.label = label
        seq = np.random.SeedSequence(entropy=self.root_seed, spawn_key=_label_key(label))
        self._gen = np.random.Generator(np.random.PCG64(seq))

    def __repr__(self) -> str:
        return f"RandomStream(root_seed={self.root_seed}, label={self.label!r})"

    def derive(self, label: str) -> "RandomStream":
        return derive_stream(self, label)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def gaussian(self, mean=0.0, sd=1.0, size=None):
        z = self._gen.standard_normal(size)
        return mean + sd * z

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def triangular(self, left, mode, right, size=None):
        return self._gen.triangular(left, mode, right, size)

    def permutation(self, n):
        return self._gen.permutation(n)

    def random(self, size=None):
        return self._gen.random(size)


def derive_stream(root: RandomStream, label: str) -> RandomStream:
    """Child stream whose label path is ``root.label + "/" + label``."""
    if not label:
        raise ValueError("substream label must be nonempty")
    path = f"{root.label}/{label}" if root.label else label
    return RandomStream(root.root_seed, path)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

class ConfigError(ValueError):
    """Malformed config text; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class ConfigValueError(ValueError):
    """A config value violates an invariant; carries the field name."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass
class NoiseConfig:
    hardware: bool = True
    environment: bool = True
    physiology: bool = True


@dataclass
class HardwareConfig:
    p0_mw: float = 5.0
    responsivity_a_per_w: float = 0.5
    dark_current_a: float = 2e-9
    bandwidth_hz: float = 1e3
    r_load_ohm: float = 1e6
    v_ref: float = 3.3
    # 0 means: full scale maps to the unattenuated LED photocurrent
    tia_gain_v_per_a: float = 0.0
    inl_amplitude: float = 2.0
    offset_drift_per_degc: float = 0.1
    flicker_sd: float = 0.001
    led_age_max_h: float = 5000.0
    coupling: float = 1.0


@dataclass
class EnvironmentConfig:
    optical_density: float = 2.0
    detector_area_mm2: float = 2.0


@dataclass
class PhysiologyConfig:
    scatter_a_per_mm: float = 20.0
    scatter_b: float = 1.3
    anisotropy: float = 0.9
    detour_l0_mm: float = 1.0
    detour_cap: float = 5.0


@dataclass
class RidgeConfig:
    lambda_grid: tuple[float, ...] = (1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3)


@dataclass
class NeuralConfig:
    learning_rate: float = 1e-3
    max_epochs: int = 2000
    patience: int = 100
    lambda_physics: float = 0.01
    balance_interval: int = 10
    balance_ema: float = 0.9
    rte_nodes: int = 21
    rte_anisotropy: float = 0.0


@dataclass
class ScenarioConfig:
    seed: int = 20250101
    n_subjects: int = 80
    measurements_per_subject: int = 3
    split_fractions: tuple[float, ...] = (0.6, 0.2, 0.2)
    wavelengths: tuple[float, ...] = (850.0, 940.0, 1050.0, 1150.0)
    extinction_table: str = ""
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    hardware: HardwareConfig = field(default_factory=HardwareConfig)
    environment: EnvironmentConfig = field(default_factory=EnvironmentConfig)
    physiology: PhysiologyConfig = field(default_factory=PhysiologyConfig)
    ridge: RidgeConfig = field(default_factory=RidgeConfig)
    neural: NeuralConfig = field(default_factory=NeuralConfig)

    def validate(self) -> "ScenarioConfig":
        if self.n_subjects < 1:
            raise ConfigValueError("scenario.n_subjects", "must be >= 1")
        if self.measurements_per_subject < 1:
            raise ConfigValueError("scenario.measurements_per_subject", "must be >= 1")
        fr = self.split_fractions
        if len(fr) != 3 or any(f < 0 for f in fr):
            raise ConfigValueError("scenario.split_fractions", "need three nonnegative fractions")
        if abs(sum(fr) - 1.0) > 1e-9:
            raise ConfigValueError("scenario.split_fractions", f"fractions sum to {sum(fr)!r}, not 1")
        wl = self.wavelengths
        if not wl:
            raise ConfigValueError("scenario.wavelengths", "must be nonempty")
        if any(b <= a for a, b in zip(wl, wl[1:])):
            raise ConfigValueError("scenario.wavelengths", "must be strictly increasing")
        if any(not 700.0 <= w <= 1300.0 for w in wl):
            raise ConfigValueError("scenario.wavelengths", "must lie in [700, 1300] nm")
        if not 0 <= self.seed < 2**64:
            raise ConfigValueError("scenario.seed", "must be a 64-bit unsigned integer")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def root_stream(self) -> RandomStream:
        return RandomStream(self.seed)


_SECTIONS = {
    "noise": "noise",
    "hardware": "hardware",
    "environment": "environment",
    "physiology": "physiology",
    "ridge": "ridge",
    "neural": "neural",
}


def _coerce(raw: str, tp, name: str, line: int):
    origin = typing.get_origin(tp)
    try:
        if tp is bool:
            low = raw.strip().lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if tp is int:
            return int(raw.strip())
        if tp is float:
            return float(raw.strip())
        if tp is str:
            return raw.strip()
        if origin is tuple:
            (inner, _) = typing.get_args(tp)
            parts = [p for p in raw.split(",") if p.strip()]
            return tuple(inner(p.strip()) for p in parts)
    except ValueError:
        raise ConfigError(f"cannot parse {name} = {raw.strip()!r}", line) from None
    raise ConfigError(f"unsupported type for {name}", line)


def _set_key(cfg: ScenarioConfig, key: str, raw: str, line: int) -> None:
    section, _, name = key.rpartition(".")
    if section == "scenario" or section == "":
        target = cfg
    elif section in _SECTIONS:
        target = getattr(cfg, _SECTIONS[section])
    else:
        raise ConfigError(f"unknown section {section!r}", line)
    hints = typing.get_type_hints(type(target))
    if name not in hints or dataclasses.is_dataclass(hints[name]):
        raise ConfigError(f"unknown key {key!r}", line)
    setattr(target, name, _coerce(raw, hints[name], key, line))


def parse_config(text: str) -> ScenarioConfig:
    """Parse ``section.key = value`` lines; absent keys keep defaults."""
    cfg = ScenarioConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected 'key = value', got {stripped!r}", lineno)
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError("empty key", lineno)
        _set_key(cfg, key, raw, lineno)
    return cfg.validate()


def load_config(path: str | os.PathLike | None = None, seed: int | None = None) -> ScenarioConfig:
    """Load a config file (or defaults when ``path`` is None).

    Seed precedence: explicit ``seed`` argument, then ``NIRBENCH_SEED``,
    then the file.
    """
    if path is None:
        cfg = ScenarioConfig()
    else:
        text = Path(path).read_text(encoding="utf-8")
        cfg = parse_config(text)
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None and seed is None:
        try:
            seed = int(env_seed)
        except ValueError:
            raise ConfigValueError(SEED_ENV_VAR, f"not an integer: {env_seed!r}") from None
    if seed is not None:
        cfg.seed = int(seed)
    return cfg.validate()


def dump_config(cfg: ScenarioConfig) -> str:
    """Render a config in the same key-value format ``parse_config`` reads."""
    lines = []

    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, tuple):
            return ", ".join(repr(x) for x in v)
        if isinstance(v, float):
            return repr(v)
        return str(v)

    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if dataclasses.is_dataclass(v):
            for sub in dataclasses.fields(v):
                lines.append(f"{f.name}.{sub.name} = {fmt(getattr(v, sub.name))}")
        else:
            lines.append(f"scenario.{f.name} = {fmt(v)}")
    return "\n".join(lines) + "\n"


def config_from_dict(d: dict) -> ScenarioConfig:
    cfg = ScenarioConfig()
    hints = typing.get_type_hints(ScenarioConfig)
    for k, v in d.items():
        if dataclasses.is_dataclass(hints.get(k)):
            sub = getattr(cfg, k)
            sub_hints = typing.get_type_hints(type(sub))
            for sk, sv in v.items():
                setattr(sub, sk, tuple(sv) if typing.get_origin(sub_hints[sk]) is tuple else sv)
        else:
            setattr(cfg, k, tuple(v) if typing.get_origin(hints[k]) is tuple else v)
    return cfg.validate()
