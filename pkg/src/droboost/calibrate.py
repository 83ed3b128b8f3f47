"""Choosing the KL radius from the empirical-likelihood chi-square limit.

If 2N R_N converges to chi^2_T, the radius that covers the optimal predictor
with asymptotic probability ``confidence`` is the chi^2_T quantile over 2N.
``epl_value`` computes R_N itself through its Lagrange dual, for diagnostics
and for checking the limit by simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DroBoostError, LossSpec

SERIES_MAX_TERMS = 10_000
CF_MAX_TERMS = 10_000
EPS = 1e-15
TINY = 1e-300


class EplUndefinedError(DroBoostError):
    """Zero is not inside the convex hull of the moment rows."""


@dataclass(frozen=True)
class CalibrationSpec:
    confidence: float = 0.9
    T: int = 30
    N: int = 0

    def __post_init__(self):
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie strictly between 0 and 1")
        if int(self.T) < 1:
            raise ValueError("T must be >= 1")
        if int(self.N) < 0:
            raise ValueError("N must be >= 0")


def _gamma_series(a: float, x: float) -> float:
    # P(a, x) by its power series; converges quickly for x < a + 1
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(SERIES_MAX_TERMS):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_continued_fraction(a: float, x: float) -> float:
    # Q(a, x) by the Legendre continued fraction, modified Lentz evaluation
    b = x + 1.0 - a
    c = 1.0 / TINY
    d = 1.0 / b
    h = d
    for i in range(1, CF_MAX_TERMS):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < TINY:
            d = TINY
        c = b + an / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_lower_gamma(a: float, x: float) -> float:
    """P(a, x) = gamma(a, x) / Gamma(a)."""
    if a <= 0.0:
        raise ValueError("a must be positive")
    if x <= 0.0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_continued_fraction(a, x)


def chi2_cdf(q: float, T: int) -> float:
    return regularized_lower_gamma(0.5 * T, 0.5 * q)


def chi2_quantile(T: int, p: float) -> float:
    """q with P(chi^2_T <= q) = p, by bisection to 1e-10 absolute."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p!r}")
    if int(T) < 1:
        raise ValueError("T must be >= 1")
    lo, hi = 0.0, T + 40.0 * math.sqrt(T) + 100.0
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if chi2_cdf(mid, T) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def select_delta(spec: CalibrationSpec) -> float:
    """KL radius chi2_quantile(T, confidence) / (2N)."""
    if spec.N < 1:
        raise ValueError("N must be >= 1 to select a radius")
    return chi2_quantile(spec.T, spec.confidence) / (2.0 * spec.N)


@dataclass(frozen=True)
class EplResult:
    value: float
    lam: np.ndarray
    weights: np.ndarray
    iterations: int


def epl_solve(moments, tol: float = 1e-12, max_iter: int = 100) -> EplResult:
    """Minimal KL divergence from P_N to a reweighting with zero mean moments.

    Damped Newton on the convex dual -(1/N) sum_i log(1 + lam . M_i); the
    weights are w_i = 1 / (N (1 + lam . M_i)).
    """
    M = np.asarray(moments, dtype=np.float64)
    if M.ndim == 1:
        M = M[:, None]
    N, T = M.shape
    if T > N:
        raise ValueError(f"need T <= N, got T={T}, N={N}")
    if not np.all(np.isfinite(M)):
        raise ValueError("moments must be finite")
    if T == 1 and not (M.min() < 0.0 < M.max()) and np.any(M != 0.0):
        raise EplUndefinedError("EPL undefined at this F: zero is outside the convex hull of the moments")

    scale = max(1.0, float(np.sqrt(np.mean(M * M))))
    lam = np.zeros(T)
    denom = np.ones(N)
    obj = 0.0
    it = 0
    for it in range(1, max_iter + 1):
        R = M / denom[:, None]
        grad = -R.mean(axis=0)
        if np.max(np.abs(grad)) < tol * scale:
            break
        H = R.T @ R / N
        try:
            step = -np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(H, grad, rcond=None)[0]
        slope = float(grad @ step)
        s = 1.0
        for _ in range(60):
            new_lam = lam + s * step
            new_denom = 1.0 + M @ new_lam
            if np.all(new_denom > 1e-12):
                new_obj = -float(np.mean(np.log(new_denom)))
                # slack of a few ulps so steps at rounding level are accepted
                if new_obj <= obj + 1e-4 * s * slope + 1e-15 * (1.0 + abs(obj)):
                    break
            s *= 0.5
        else:
            # rounding stalls the Armijo test only when already at the optimum
            if np.max(np.abs(grad)) < 1e-8 * scale:
                break
            raise EplUndefinedError("EPL undefined at this F: dual Newton step could not make progress")
        lam, denom, obj = new_lam, new_denom, new_obj
        if np.linalg.norm(lam) > 1e12:
            raise EplUndefinedError("EPL undefined at this F: dual multiplier diverges")
    else:
        raise EplUndefinedError(f"EPL undefined at this F: dual Newton did not converge in {max_iter} iterations")

    w = 1.0 / (N * denom)
    if abs(float(np.sum(w)) - 1.0) > 1e-6:
        raise EplUndefinedError("EPL undefined at this F: recovered weights do not form a distribution")
    return EplResult(value=float(np.mean(np.log(denom))), lam=lam, weights=w, iterations=it)


def epl_value(moments) -> float:
    """R_N, the empirical profile likelihood of the moment condition."""
    return epl_solve(moments).value


def basis_moments(ensemble, data, spec: LossSpec) -> np.ndarray:
    """Rows M_i = phi'(m_i) Y_i f_t(X_i), one column per distinct basis learner."""
    margins = data.labels * ensemble.evaluate(data.features)
    dphi = spec.phi_prime(margins) * data.labels
    cols = []
    seen = set()
    for learner in ensemble.learners:
        key = learner.key() if hasattr(learner, "key") else id(learner)
        if key in seen:
            continue
        seen.add(key)
        cols.append(dphi * learner.predict_many(data.features))
    if not cols:
        return np.zeros((data.N, 0))
    return np.column_stack(cols)
