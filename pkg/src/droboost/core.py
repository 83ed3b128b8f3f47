"""Shared domain types: datasets, ensembles, margin losses and the empirical inner product.

Every function is represented by its vector of values on the training rows, so
two learners that agree on the data are indistinguishable here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np


class DroBoostError(Exception):
    """Base class for errors raised by this package."""


class DataError(DroBoostError):
    """Malformed or inconsistent input data."""


class DimensionError(DroBoostError, ValueError):
    """A learner or vector does not match the data it is applied to."""


class SolverError(DroBoostError):
    """A numerical routine failed to converge or to bracket a root."""


class LossOverflowError(SolverError):
    """A loss evaluation left the representable floating point range."""


# exp(700) is close to the largest finite double
EXP_MARGIN_FLOOR = -700.0


class Dataset:
    """Immutable feature matrix with labels in {-1, +1}."""

    __slots__ = ("_X", "_y")

    def __init__(self, features, labels):
        X = np.array(features, dtype=np.float64, copy=True)
        y = np.array(labels, dtype=np.float64, copy=True)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise DataError(f"features must be a 2-d matrix, got shape {X.shape}")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise DataError(f"labels of shape {y.shape} do not match {X.shape[0]} rows")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError("dataset needs at least one row and one feature")
        if not np.all((y == 1.0) | (y == -1.0)):
            raise DataError("labels must be exactly -1 or +1")
        if not np.all(np.isfinite(X)):
            raise DataError("features must be finite")
        X.setflags(write=False)
        y.setflags(write=False)
        self._X = X
        self._y = y

    @property
    def features(self) -> np.ndarray:
        return self._X

    @property
    def labels(self) -> np.ndarray:
        return self._y

    @property
    def N(self) -> int:
        return self._X.shape[0]

    @property
    def d(self) -> int:
        return self._X.shape[1]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.intp)
        return Dataset(self._X[rows], self._y[rows])

    def __len__(self):
        return self.N

    def __repr__(self):
        pos = int(np.sum(self._y > 0))
        return f"Dataset(N={self.N}, d={self.d}, positives={pos})"


class WeakLearner(Protocol):
    n_features: int

    def predict_many(self, X: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class Ensemble:
    """F = sum_t alpha_t f_t, stored as an ordered tuple of (alpha, learner)."""

    terms: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple((float(a), f) for a, f in self.terms))

    def __len__(self):
        return len(self.terms)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([a for a, _ in self.terms], dtype=np.float64)

    @property
    def learners(self) -> list:
        return [f for _, f in self.terms]

    def append(self, alpha: float, learner) -> "Ensemble":
        return Ensemble(self.terms + ((alpha, learner),))

    def __add__(self, other: "Ensemble") -> "Ensemble":
        return Ensemble(self.terms + other.terms)

    def scaled(self, c: float) -> "Ensemble":
        return Ensemble(tuple((c * a, f) for a, f in self.terms))

    def evaluate(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.zeros(X.shape[0])
        for alpha, learner in self.terms:
            if learner.n_features != X.shape[1]:
                raise DimensionError(
                    f"learner expects {learner.n_features} features, data has {X.shape[1]}"
                )
            out += alpha * learner.predict_many(X)
        return out

    def predict(self, X) -> np.ndarray:
        """Hard labels with sgn(0) = +1."""
        return np.where(self.evaluate(X) >= 0.0, 1.0, -1.0)


def evaluate_margins(ensemble: Ensemble, data: Dataset) -> np.ndarray:
    """Return m with m[i] = Y_i * F(X_i)."""
    return data.labels * ensemble.evaluate(data.features)


@dataclass(frozen=True)
class LossSpec:
    """Margin loss phi(Y * F(X)); ``kind`` is ``"exponential"`` or ``"logistic"``."""

    kind: str = "exponential"

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}; expected one of {sorted(LOSS_KINDS)}")

    def phi(self, margins) -> np.ndarray:
        m = np.asarray(margins, dtype=np.float64)
        if self.kind == "exponential":
            if np.any(m < EXP_MARGIN_FLOOR):
                raise LossOverflowError(
                    f"exponential loss out of range: margin {float(np.min(m)):.6g} < {EXP_MARGIN_FLOOR}"
                )
            return np.exp(-m)
        return np.logaddexp(0.0, -m)

    def phi_prime(self, margins) -> np.ndarray:
        m = np.asarray(margins, dtype=np.float64)
        if self.kind == "exponential":
            if np.any(m < EXP_MARGIN_FLOOR):
                raise LossOverflowError(
                    f"exponential loss out of range: margin {float(np.min(m)):.6g} < {EXP_MARGIN_FLOOR}"
                )
            return -np.exp(-m)
        # -1 / (1 + e^m), written to avoid overflow for large |m|
        return -0.5 * (1.0 - np.tanh(0.5 * m))


LOSS_KINDS = {"exponential", "logistic"}
LOSS_ALIASES = {"exp": "exponential", "exponential": "exponential", "logistic": "logistic"}


def loss_spec(name: str) -> LossSpec:
    try:
        return LossSpec(LOSS_ALIASES[name])
    except KeyError:
        raise ValueError(f"unknown loss {name!r}") from None


def loss_vector(spec: LossSpec, margins) -> np.ndarray:
    """Per-point losses L_i(F) = phi(m_i)."""
    m = np.asarray(margins, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise ValueError("margins must be finite")
    return spec.phi(m)


def inner_product(f_values, g_values) -> float:
    """<f, g> = (1/N) sum_i f_i g_i over the data points."""
    f = np.asarray(f_values, dtype=np.float64)
    g = np.asarray(g_values, dtype=np.float64)
    if f.shape != g.shape or f.ndim != 1:
        raise DimensionError(f"length mismatch: {f.shape} vs {g.shape}")
    return float(np.dot(f, g) / f.shape[0])


def empirical_norm(f_values) -> float:
    return float(np.sqrt(inner_product(f_values, f_values)))
