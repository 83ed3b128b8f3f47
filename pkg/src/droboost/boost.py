"""Distributionally robust boosting by functional subgradient descent.

Each round alternates between

1. the worst-case weights for the current margins (``solve_worst_case``),
2. the subgradient representer of the robust loss at those weights,
3. a tree fitted to the negative representer,
4. a line search for the step, after which the term is appended.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .calibrate import CalibrationSpec, select_delta
from .core import (
    Dataset,
    DimensionError,
    Ensemble,
    LossOverflowError,
    LossSpec,
    SolverError,
    evaluate_margins,
)
from .learners import Tree, TreeConfig, fit_projection
from .worstcase import WorstCase, solve_worst_case

log = logging.getLogger(__name__)

EXACT_ROBUST = "exact_robust"
FIXED_WEIGHTS = "fixed_weights"
# per-round radius that makes the worst case reproduce AdaBoost's reweighting
ADABOOST_SCHEDULE = "adaboost"

GOLDEN = 0.5 * (math.sqrt(5.0) - 1.0)


@dataclass(frozen=True)
class TrainConfig:
    """Training options.

    ``delta`` is a radius >= 0, a ``CalibrationSpec`` resolved against the
    training size, or ``"adaboost"`` for the per-round radius under which the
    worst-case weights are AdaBoost's.
    """

    delta: Union[float, str, CalibrationSpec] = 0.0
    loss: str = "exponential"
    tree: TreeConfig = field(default_factory=TreeConfig)
    max_iters: int = 100
    line_search: str = EXACT_ROBUST
    line_search_tol: float = 1e-6
    line_search_max_evals: int = 100
    max_expansions: int = 30
    initial_step: float = 1e-3
    stall_tolerance: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.line_search not in (EXACT_ROBUST, FIXED_WEIGHTS):
            raise ValueError(f"unknown line search {self.line_search!r}")
        if min(self.line_search_tol, self.stall_tolerance, self.initial_step) <= 0.0:
            raise ValueError("tolerances must be > 0")
        if isinstance(self.delta, str):
            if self.delta != ADABOOST_SCHEDULE:
                raise ValueError(f"unknown delta directive {self.delta!r}")
        elif not isinstance(self.delta, CalibrationSpec):
            if not (float(self.delta) >= 0.0):
                raise ValueError("delta must be >= 0")
        LossSpec(self.loss)

    @property
    def loss_spec(self) -> LossSpec:
        return LossSpec(self.loss)

    def resolve_delta(self, n: int):
        if isinstance(self.delta, CalibrationSpec):
            return select_delta(CalibrationSpec(self.delta.confidence, self.delta.T, n))
        if isinstance(self.delta, str):
            return self.delta
        return float(self.delta)


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    robust_loss: float
    empirical_loss: float
    kl: float
    beta: float
    alpha: float
    delta: float
    learner: str


@dataclass
class TrainTrace:
    records: list = field(default_factory=list)
    delta: Union[float, str] = 0.0
    stop_reason: str = ""
    # worst-case weights after each record, filled when train(keep_weights=True)
    weights: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)

    @property
    def robust_losses(self) -> np.ndarray:
        return self.column("robust_loss")


def adaboost_delta(margins) -> float:
    """Radius at which the worst case over losses -exp(m) has root beta = 0.

    Equals the KL divergence of the weights exp(-m_i) / sum_k exp(-m_k), namely
    log(mean(exp(-m))) + mean(m).
    """
    m = np.asarray(margins, dtype=np.float64)
    shift = float(np.min(m))
    # log-mean-exp written around the smallest margin to stay finite
    lme = -shift + math.log(float(np.mean(np.exp(-(m - shift)))))
    return max(lme + float(np.mean(m)), 0.0)


def robust_gradient(margins, labels, spec: LossSpec, weights) -> np.ndarray:
    """Representer g of the weighted loss gradient under <.,.>_{D_N}.

    g_i = N * w_i * phi'(m_i) * Y_i, so that <g, h> is the derivative of
    sum_i w_i phi(m_i + eps * Y_i h_i) at eps = 0.
    """
    m = np.asarray(margins, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if not (m.shape == y.shape == w.shape) or m.ndim != 1:
        raise DimensionError("margins, labels and weights must have equal length")
    dphi = spec.phi_prime(m)
    if not np.all(np.isfinite(dphi)):
        raise SolverError("loss derivative is not finite")
    return m.size * w * dphi * y


def _worst_case(spec: LossSpec, margins: np.ndarray, delta) -> WorstCase:
    if delta == ADABOOST_SCHEDULE:
        return solve_worst_case(-np.exp(margins), adaboost_delta(margins))
    return solve_worst_case(spec.phi(margins), delta)


def _robust_objective(spec, margins, step, delta):
    def objective(alpha):
        try:
            return solve_worst_case(spec.phi(margins + alpha * step), delta).objective
        except LossOverflowError:
            return math.inf
    return objective


def _golden_search(objective, tol, max_evals, initial_step, max_expansions):
    f0 = objective(0.0)
    evals = 1
    a = 0.0
    b = initial_step
    fb = objective(b)
    evals += 1
    best = (f0, 0.0) if f0 <= fb else (fb, b)
    if fb < f0:
        # double until the objective rises
        c, fc = 2.0 * b, objective(2.0 * b)
        evals += 1
        k = 0
        while fc < fb and k < max_expansions and evals < max_evals:
            a, b, fb = b, c, fc
            c = 2.0 * c
            fc = objective(c)
            evals += 1
            k += 1
        if fc < fb:
            return (c if fc < f0 else 0.0), evals
        best = min(best, (fb, b))
        lo, hi = a, c
    else:
        lo, hi = 0.0, b

    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = objective(x1), objective(x2)
    evals += 2
    while hi - lo > tol and evals < max_evals:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = objective(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = objective(x2)
        evals += 1
    best = min(best, (f1, x1), (f2, x2))
    fbest, xbest = best
    return (xbest if fbest < f0 else 0.0), evals


def _weighted_slope(spec, weights, margins, step):
    def slope(alpha):
        try:
            return float(np.dot(weights, spec.phi_prime(margins + alpha * step) * step))
        except LossOverflowError:
            return math.inf
    return slope


def _slope_bisection(slope, initial_step, max_expansions):
    """Root of the derivative of a convex function on [0, inf)."""
    if not slope(0.0) < 0.0:
        return 0.0
    lo, hi = 0.0, initial_step
    k = 0
    while slope(hi) < 0.0:
        lo, hi = hi, 2.0 * hi
        k += 1
        if k > max_expansions:
            return lo
    # bisection down to adjacent floating point numbers
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if slope(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _step_size(spec, margins, step, config: TrainConfig, delta, weights):
    if config.line_search == FIXED_WEIGHTS or delta == ADABOOST_SCHEDULE:
        return _slope_bisection(
            _weighted_slope(spec, weights, margins, step), config.initial_step, config.max_expansions
        )
    alpha, _ = _golden_search(
        _robust_objective(spec, margins, step, delta),
        config.line_search_tol,
        config.line_search_max_evals,
        config.initial_step,
        config.max_expansions,
    )
    return alpha


def line_search(data: Dataset, ensemble: Ensemble, direction: Tree, config: TrainConfig,
                weights=None) -> float:
    """Step alpha >= 0 along F + alpha * direction.

    With ``exact_robust`` the objective is the robust loss, re-solving the
    worst case at every trial step (golden-section search after doubling from
    ``initial_step``).  With ``fixed_weights`` it is sum_i w_i L_i at the
    weights of the current ensemble (or ``weights`` when given); this objective
    is smooth and convex, so its derivative is bisected to full precision.
    """
    spec = config.loss_spec
    delta = config.resolve_delta(data.N)
    margins = evaluate_margins(ensemble, data)
    step = data.labels * direction.predict_many(data.features)
    if weights is None and (config.line_search == FIXED_WEIGHTS or delta == ADABOOST_SCHEDULE):
        weights = _worst_case(spec, margins, delta).weights
    if delta == ADABOOST_SCHEDULE:
        margins = np.zeros_like(margins)
    return _step_size(spec, margins, step, config, delta, weights)


def _describe(learner: Optional[Tree]) -> str:
    if learner is None:
        return "-"
    if learner.n_nodes == 1:
        return f"leaf({learner.value[0]:+g})"
    return f"x{learner.feature[0]}<={learner.threshold[0]:.6g}/nodes={learner.n_nodes}"


def train(data: Dataset, config: TrainConfig, keep_weights: bool = False):
    """Run robust boosting; returns ``(ensemble, trace)``.

    With ``delta == "adaboost"`` the weights at each round come from the
    worst case over losses -exp(m_i) with radius ``adaboost_delta(m)``, and the
    gradient and step are taken for the new term alone under those weights,
    so the reweighting carries the current ensemble.
    """
    spec = config.loss_spec
    delta = config.resolve_delta(data.N)
    y = data.labels
    margins = np.zeros(data.N)
    ensemble = Ensemble()
    trace = TrainTrace(delta=delta)

    def record(t, wc, alpha, learner):
        losses = spec.phi(margins)
        robust = float(np.dot(wc.weights, losses))
        d = adaboost_delta(margins) if delta == ADABOOST_SCHEDULE else delta
        trace.records.append(
            TraceRecord(t, robust, float(np.mean(losses)), wc.achieved_kl, wc.beta_star, alpha, d, _describe(learner))
        )
        if keep_weights:
            trace.weights.append(wc.weights.copy())

    wc = _worst_case(spec, margins, delta)
    record(0, wc, 0.0, None)
    trace.stop_reason = "max_iters"

    for t in range(1, config.max_iters + 1):
        try:
            if delta == ADABOOST_SCHEDULE:
                base = np.zeros(data.N)
            else:
                base = margins
            g = robust_gradient(base, y, spec, wc.weights)
            learner = fit_projection(data, -g, config.tree)
            step = y * learner.predict_many(data.features)
            alpha = _step_size(spec, base, step, config, delta, wc.weights)
            if alpha <= 0.0:
                trace.stop_reason = "no_descent"
                break
            previous = trace.records[-1]
            margins = margins + alpha * step
            ensemble = ensemble.append(alpha, learner)
            wc = _worst_case(spec, margins, delta)
        except SolverError as exc:
            raise SolverError(f"iteration {t}: {exc}") from exc
        record(t, wc, alpha, learner)
        if delta == ADABOOST_SCHEDULE:
            improvement = previous.empirical_loss - trace.records[-1].empirical_loss
            scale = max(1.0, abs(previous.empirical_loss))
        else:
            improvement = previous.robust_loss - trace.records[-1].robust_loss
            scale = max(1.0, abs(previous.robust_loss))
        if improvement < config.stall_tolerance * scale:
            trace.stop_reason = "stalled"
            break
    log.debug("trained %d terms, stop=%s", len(ensemble), trace.stop_reason)
    return ensemble, trace
