"""Worst-case reweighting of the data over a KL ball around the uniform weights.

Solves

    max  sum_i w_i L_i   s.t.  w in simplex,  -(1/N) sum_i log(N w_i) <= delta

through its one-dimensional dual.  The maximiser has the form
w_i proportional to -1/(L_i + beta) for a scalar beta < -max_i L_i, and beta is
the unique root of ``psi``.

Internally the root is searched in the gap ``t = -beta - max_i L_i > 0``.  With
``d_i = max L - L_i`` the shifted denominators ``u_i = d_i + t`` are formed
without cancellation even when beta is large.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import SolverError

# spreads below this are treated as constant losses
CONSTANT_SPREAD = 1e-12
PSI_TOL = 1e-12
WIDTH_TOL = 1e-14
MAX_ITER = 200
MAX_EXPANSIONS = 200
BOUNDARY_EPS = 1e-9


@dataclass(frozen=True)
class KlBall:
    delta: float
    N: int

    def __post_init__(self):
        if not (self.delta >= 0.0) or not math.isfinite(self.delta):
            raise ValueError(f"KL radius must be a finite number >= 0, got {self.delta}")
        if self.N < 1:
            raise ValueError("support size must be >= 1")

    def contains(self, weights, tol: float = 1e-8) -> bool:
        w = np.asarray(weights, dtype=np.float64)
        return w.shape == (self.N,) and kl_divergence(w) <= self.delta + tol


@dataclass(frozen=True)
class WorstCase:
    """Solution of the inner maximisation.

    ``beta_star`` is NaN when the degenerate branch (constant losses or a zero
    radius) returned the uniform weights without a root search.
    """

    weights: np.ndarray
    beta_star: float
    achieved_kl: float
    objective: float
    iterations: int = 0

    @property
    def degenerate(self) -> bool:
        return math.isnan(self.beta_star)


def kl_divergence(weights) -> float:
    """D(P || P_N) = -(1/N) sum_i log(N w_i); ``inf`` if any weight is zero."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty vector")
    if np.any(w < 0.0):
        raise ValueError("weights must be nonnegative")
    if abs(float(np.sum(w)) - 1.0) > 1e-9:
        raise ValueError(f"weights must sum to 1, got {float(np.sum(w))!r}")
    if np.any(w == 0.0):
        return math.inf
    N = w.size
    return float(-np.mean(np.log(N * w)))


def _psi_gap(t: float, d: np.ndarray, delta: float) -> float:
    # psi as a function of the gap t; increasing in t
    inv = 1.0 / (d + t)
    return delta + float(np.mean(np.log(inv))) - math.log(float(np.mean(inv)))


def _psi_gap_and_slope(t: float, d: np.ndarray, delta: float):
    inv = 1.0 / (d + t)
    m1 = float(np.mean(inv))
    m2 = float(np.mean(inv * inv))
    value = delta + float(np.mean(np.log(inv))) - math.log(m1)
    return value, m2 / m1 - m1


def psi(beta: float, losses, delta: float) -> float:
    """Dual function whose root gives the worst-case weights.

    Defined for ``beta < -max(losses)``.  Equals ``delta - KL(w(beta))`` where
    ``w(beta)_i`` is proportional to ``-1/(L_i + beta)``.
    """
    L = np.asarray(losses, dtype=np.float64)
    top = float(np.max(L))
    if not beta < -top:
        raise ValueError(f"beta={beta!r} outside the domain beta < {-top!r}")
    inv = -1.0 / (L + beta)
    return delta + float(np.mean(np.log(inv))) - math.log(float(np.mean(inv)))


def weights_at(beta: float, losses) -> np.ndarray:
    """w(beta)_i = (L_i + beta)^-1 / sum_k (L_k + beta)^-1."""
    L = np.asarray(losses, dtype=np.float64)
    inv = 1.0 / (L + beta)
    return inv / np.sum(inv)


def _uniform(L: np.ndarray) -> WorstCase:
    N = L.size
    w = np.full(N, 1.0 / N)
    return WorstCase(weights=w, beta_star=math.nan, achieved_kl=0.0, objective=float(np.mean(L)))


def _bracket(d: np.ndarray, delta: float, scale: float):
    lo = BOUNDARY_EPS * scale
    f_lo = _psi_gap(lo, d, delta)
    k = 0
    while f_lo >= 0.0:
        if k >= MAX_EXPANSIONS:
            raise SolverError("could not bracket the dual root near the domain boundary")
        lo *= 0.5
        f_lo = _psi_gap(lo, d, delta)
        k += 1
    hi = scale
    f_hi = _psi_gap(hi, d, delta)
    k = 0
    while f_hi <= 0.0:
        if k >= MAX_EXPANSIONS:
            raise SolverError("could not bracket the dual root away from the domain boundary")
        lo, f_lo = hi, f_hi
        hi *= 2.0
        f_hi = _psi_gap(hi, d, delta)
        k += 1
    return lo, hi


def solve_worst_case(losses, delta: float) -> WorstCase:
    """Worst-case weights over the KL ball of radius ``delta``.

    Newton's method on the dual root, safeguarded by bisection inside a sign
    bracket.  Constant losses or ``delta == 0`` give the uniform weights.
    """
    L = np.asarray(losses, dtype=np.float64)
    if L.ndim != 1 or L.size == 0:
        raise ValueError("losses must be a non-empty vector")
    if not np.all(np.isfinite(L)):
        raise SolverError("losses must be finite")
    KlBall(float(delta), L.size)
    top = float(np.max(L))
    spread = top - float(np.min(L))
    if delta == 0.0 or spread < CONSTANT_SPREAD:
        return _uniform(L)

    d = top - L
    lo, hi = _bracket(d, delta, max(1.0, spread))

    # Newton steps in the gap t, falling back to bisection (geometric while the
    # bracket spans orders of magnitude) whenever the step leaves [lo, hi].
    t = math.sqrt(lo * hi)
    iterations = 0
    for iterations in range(1, MAX_ITER + 1):
        value, slope = _psi_gap_and_slope(t, d, delta)
        if abs(value) < PSI_TOL:
            break
        if value < 0.0:
            lo = t
        else:
            hi = t
        if hi - lo < WIDTH_TOL * (1.0 + top + hi):
            break
        step = t - value / slope if slope > 0.0 else math.nan
        if lo < step < hi:
            t = step
        elif hi > 4.0 * lo:
            t = math.sqrt(lo * hi)
        else:
            t = 0.5 * (lo + hi)
    else:
        raise SolverError(f"dual root search did not converge in {MAX_ITER} iterations")

    inv = 1.0 / (d + t)
    w = inv / np.sum(inv)
    beta = -top - t
    return WorstCase(
        weights=w,
        beta_star=beta,
        achieved_kl=float(-np.mean(np.log(L.size * w))),
        objective=float(np.dot(w, L)),
        iterations=iterations,
    )


def robust_loss(losses, delta: float) -> float:
    return solve_worst_case(losses, delta).objective
