"""Closed-form ridge regression on standardised features.

The bias is handled by centring y and is not penalised:

    w = (X^T X + lam I)^-1 X^T (y - ybar),    b = ybar

This is the minimiser of ||y - Xw - b||^2 + lam ||w||^2 when the columns
of X have zero mean.  Dividing the data term by n (a mean-squared loss)
only rescales lam by n.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg


class RidgeSolverError(np.linalg.LinAlgError):
    pass


class NotFittedError(RuntimeError):
    pass


@dataclass
class RidgeModel:
    weights: np.ndarray | None = None
    bias: float = 0.0
    lam: float = 0.0
    feature_names: tuple[str, ...] = ()
    scaler: dict = field(default_factory=dict)

    @property
    def fitted(self) -> bool:
        return self.weights is not None

    @property
    def n_params(self) -> int:
        if not self.fitted:
            raise NotFittedError("ridge model has not been fitted")
        return int(self.weights.size) + 1

    def predict(self, X) -> np.ndarray:
        if not self.fitted:
            raise NotFittedError("ridge model has not been fitted")
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.weights.size:
            raise ValueError(f"expected {self.weights.size} columns, got {X.shape[-1]}")
        return X @ self.weights + self.bias

    def to_dict(self) -> dict:
        return {
            "model": "enhanced_beer_lambert",
            "feature_names": list(self.feature_names),
            "weights": [float(v) for v in self.weights],
            "bias": float(self.bias),
            "lambda": float(self.lam),
            "scaler": self.scaler,
        }

    @classmethod
    def from_dict(cls, d) -> "RidgeModel":
        return cls(np.asarray(d["weights"], dtype=float), float(d["bias"]), float(d["lambda"]),
                   tuple(d.get("feature_names", ())), d.get("scaler", {}))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "RidgeModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def solve_ridge(X, y, lam: float) -> tuple[np.ndarray, float]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] < 2:
        raise ValueError("need an (n >= 2, p) design and n targets")
    ybar = float(y.mean())
    yc = y - ybar
    A = X.T @ X + lam * np.eye(X.shape[1])
    rhs = X.T @ yc
    try:
        c = linalg.cho_factor(A, lower=False, check_finite=True)
        w = linalg.cho_solve(c, rhs)
        if np.linalg.cond(A) < 1e12:
            return w, ybar
    except linalg.LinAlgError:
        pass
    # poorly conditioned: rank-revealing least squares on the augmented system
    if lam == 0 and np.linalg.matrix_rank(X) < X.shape[1]:
        raise RidgeSolverError("normal equations are singular at lambda = 0; use lambda > 0")
    aug = np.vstack([X, np.sqrt(lam) * np.eye(X.shape[1])])
    w, *_ = np.linalg.lstsq(aug, np.concatenate([yc, np.zeros(X.shape[1])]), rcond=None)
    return w, ybar


def fit(X, y, lam: float, feature_names=(), scaler=None) -> RidgeModel:
    w, b = solve_ridge(X, y, lam)
    return RidgeModel(w, b, float(lam), tuple(feature_names), scaler or {})


def predict(m: RidgeModel, X) -> np.ndarray:
    return m.predict(X)


def rmse(pred, ref) -> float:
    d = np.asarray(pred, dtype=float) - np.asarray(ref, dtype=float)
    return float(np.sqrt(np.mean(d * d)))


def select_lambda(train, val, grid) -> tuple[float, dict[float, float]]:
    """Grid point with the lowest validation RMSE; ties go to the larger lambda."""
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("lambda grid is empty")
    Xt, yt = train
    Xv, yv = val
    scores = {}
    for lam in grid:
        scores[lam] = rmse(fit(Xt, yt, lam).predict(Xv), yv)
    best = min(scores.values())
    return max(lam for lam, s in scores.items() if s == best), scores
