"""The five network architectures and their parameter containers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..foundation import NeuralConfig, RandomStream
from .autodiff import Tensor, concat

ARCHITECTURES = ("original_pinn", "optimized_pinn", "full_rte_pinn", "selective_rte_pinn", "sdnn")
N_NIR = 4
N_PMF = 12


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class NetworkSpec:
    arch: str
    nir_widths: tuple[int, ...] = (N_NIR, 32, 64, 32)
    pmf_widths: tuple[int, ...] = (N_PMF, 16, 32, 16)
    head_widths: tuple[int, ...] = (48, 128, 64, 1)
    use_residual: bool = False
    use_attention: bool = False
    physics_losses: tuple[str, ...] = ()
    lambda_physics: float = 0.01
    rte_wavelengths: tuple[float, ...] = ()
    dynamic_balancing: bool = False

    @property
    def is_pinn(self) -> bool:
        return self.arch != "sdnn"

    def to_dict(self) -> dict:
        return {
            "arch": self.arch, "nir_widths": list(self.nir_widths), "pmf_widths": list(self.pmf_widths),
            "head_widths": list(self.head_widths), "use_residual": self.use_residual,
            "use_attention": self.use_attention, "physics_losses": list(self.physics_losses),
            "lambda_physics": self.lambda_physics, "rte_wavelengths": list(self.rte_wavelengths),
            "dynamic_balancing": self.dynamic_balancing,
        }

    @classmethod
    def from_dict(cls, d) -> "NetworkSpec":
        return cls(d["arch"], tuple(d["nir_widths"]), tuple(d["pmf_widths"]), tuple(d["head_widths"]),
                   d["use_residual"], d["use_attention"], tuple(d["physics_losses"]), d["lambda_physics"],
                   tuple(d["rte_wavelengths"]), d["dynamic_balancing"])


def make_spec(arch: str, cfg: NeuralConfig | None = None,
              wavelengths=(850.0, 940.0, 1050.0, 1150.0)) -> NetworkSpec:
    cfg = cfg or NeuralConfig()
    lam = cfg.lambda_physics
    wl = tuple(float(w) for w in wavelengths)
    if arch == "original_pinn":
        return NetworkSpec(arch, physics_losses=("beer_lambert",), lambda_physics=lam)
    if arch == "optimized_pinn":
        return NetworkSpec(arch, use_residual=True, use_attention=True,
                           physics_losses=("beer_lambert", "conservation"), lambda_physics=lam,
                           dynamic_balancing=True)
    if arch == "full_rte_pinn":
        return NetworkSpec(arch, physics_losses=("beer_lambert", "rte"), lambda_physics=lam,
                           rte_wavelengths=wl)
    if arch == "selective_rte_pinn":
        sel = tuple(w for w in wl if w in (1050.0, 1150.0))
        return NetworkSpec(arch, physics_losses=("beer_lambert", "rte"), lambda_physics=lam,
                           rte_wavelengths=sel)
    if arch == "sdnn":
        return NetworkSpec(arch, nir_widths=(), pmf_widths=(), head_widths=(N_NIR + N_PMF, 64, 64, 32, 1),
                           lambda_physics=0.0)
    raise ValueError(f"unknown architecture {arch!r}; valid: {', '.join(ARCHITECTURES)}")


def _layer_shapes(spec: NetworkSpec) -> list[tuple[str, tuple[int, ...]]]:
    """Ordered (name, shape) of every trainable array."""
    out = []

    def dense(prefix, widths):
        for k, (a, b) in enumerate(zip(widths, widths[1:])):
            out.append((f"{prefix}.{k}.W", (a, b)))
            out.append((f"{prefix}.{k}.b", (b,)))

    if spec.use_attention:
        out.append(("attn.w", (N_NIR,)))
        out.append(("attn.b", (N_NIR,)))
    for prefix, widths in (("nir", spec.nir_widths), ("pmf", spec.pmf_widths)):
        if not widths:
            continue
        if spec.use_residual:
            # entry layer, then one residual block width -> 2*width -> width
            w = widths[1]
            dense(f"{prefix}.in", widths[:2])
            dense(f"{prefix}.res", (w,) + tuple(widths[2:-1]) + (widths[-1],))
        else:
            dense(prefix, widths)
    dense("head", spec.head_widths)
    if spec.is_pinn:
        out.append(("phys.offset", (N_NIR,)))
    return out


def count_params(spec: NetworkSpec) -> int:
    return int(sum(math.prod(s) for _, s in _layer_shapes(spec)))


@dataclass
class Network:
    spec: NetworkSpec
    params: dict[str, Tensor]
    y_offset: float = 0.0
    y_scale: float = 1.0
    meta: dict = field(default_factory=dict)

    @classmethod
    def init(cls, spec: NetworkSpec, rng: RandomStream) -> "Network":
        """Glorot-uniform weights, zero biases and attention, zero physics offsets."""
        params = {}
        for name, shape in _layer_shapes(spec):
            if name.endswith(".W"):
                lim = math.sqrt(6.0 / (shape[0] + shape[1]))
                val = rng.uniform(-lim, lim, shape)
            else:
                val = np.zeros(shape)
            params[name] = Tensor(val, requires_grad=True)
        return cls(spec, params)

    @classmethod
    def zeros(cls, spec: NetworkSpec) -> "Network":
        return cls(spec, {n: Tensor(np.zeros(s), requires_grad=True) for n, s in _layer_shapes(spec)})

    @property
    def n_params(self) -> int:
        return int(sum(p.data.size for p in self.params.values()))

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def flat(self) -> np.ndarray:
        return np.concatenate([p.data.ravel() for p in self.params.values()])

    def set_flat(self, v) -> None:
        v = np.asarray(v, dtype=float)
        if v.size != self.n_params:
            raise ShapeError(f"expected {self.n_params} parameters, got {v.size}")
        k = 0
        for p in self.params.values():
            n = p.data.size
            p.data = v[k:k + n].reshape(p.data.shape).copy()
            k += n

    def _dense(self, prefix: str, h: Tensor, n_layers: int, final_linear: bool) -> Tensor:
        for k in range(n_layers):
            h = h @ self.params[f"{prefix}.{k}.W"] + self.params[f"{prefix}.{k}.b"]
            if not (final_linear and k == n_layers - 1):
                h = h.relu()
        return h

    def _branch(self, prefix: str, x: Tensor, widths) -> Tensor:
        if not self.spec.use_residual:
            return self._dense(prefix, x, len(widths) - 1, False)
        h = self._dense(f"{prefix}.in", x, 1, False)
        return h + self._dense(f"{prefix}.res", h, len(widths) - 2, True)

    def attention(self, nir) -> Tensor:
        """Per-sample spectral weights softmax(w * x + b) over the channels."""
        x = nir if isinstance(nir, Tensor) else Tensor(nir)
        return (x * self.params["attn.w"] + self.params["attn.b"]).softmax(axis=-1)

    def forward(self, nir, pmf) -> Tensor:
        """Standardised network output z, shape (n,)."""
        nir = np.atleast_2d(np.asarray(nir, dtype=float))
        pmf = np.atleast_2d(np.asarray(pmf, dtype=float))
        if nir.shape[1] != N_NIR or pmf.shape[1] != N_PMF or nir.shape[0] != pmf.shape[0]:
            raise ShapeError(f"expected (n, {N_NIR}) NIR and (n, {N_PMF}) PMF inputs, "
                             f"got {nir.shape} and {pmf.shape}")
        spec = self.spec
        x = Tensor(nir)
        if spec.arch == "sdnn":
            h = concat([x, Tensor(pmf)], axis=1)
        else:
            if spec.use_attention:
                # scaled so equal weights leave the input unchanged
                x = x * (self.attention(x) * float(N_NIR))
            h = concat([self._branch("nir", x, spec.nir_widths),
                        self._branch("pmf", Tensor(pmf), spec.pmf_widths)], axis=1)
        h = self._dense("head", h, len(spec.head_widths) - 1, True)
        return h.reshape(-1)

    def glucose(self, z: Tensor) -> Tensor:
        return z * self.y_scale + self.y_offset

    def predict(self, nir, pmf) -> np.ndarray:
        """Predicted glucose in mg/dL (no graph is built)."""
        saved = {k: p.requires_grad for k, p in self.params.items()}
        for p in self.params.values():
            p.requires_grad = False
        try:
            return self.glucose(self.forward(nir, pmf)).data.copy()
        finally:
            for k, p in self.params.items():
                p.requires_grad = saved[k]
