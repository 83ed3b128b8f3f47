"""Discrete AdaBoost with the same tree learners, used as a baseline."""

from __future__ import annotations

import math

import numpy as np

from .core import Dataset, DataError, Ensemble
from .learners import TreeConfig, fit_projection

# step assigned when a learner classifies every weighted point correctly
PERFECT_ALPHA = 10.0


def train_adaboost(data: Dataset, tree: TreeConfig, rounds: int):
    """Freund-Schapire AdaBoost.

    Returns ``(ensemble, weights)`` where ``weights[t]`` is the distribution
    used to fit learner ``t + 1`` (so ``weights[0]`` is uniform), plus the
    distribution after the last round.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    y = data.labels
    if np.all(y == y[0]):
        raise DataError("AdaBoost needs both classes in the training data")
    N = data.N
    w = np.full(N, 1.0 / N)
    history = [w.copy()]
    ensemble = Ensemble()
    for _ in range(rounds):
        learner = fit_projection(data, N * w * y, tree)
        pred = learner.predict_many(data.features)
        err = float(np.sum(w[pred != y]))
        if err >= 0.5:
            break
        if err <= 0.0:
            ensemble = ensemble.append(PERFECT_ALPHA, learner)
            break
        alpha = 0.5 * math.log((1.0 - err) / err)
        ensemble = ensemble.append(alpha, learner)
        w = w * np.exp(-alpha * y * pred)
        w = w / np.sum(w)
        history.append(w.copy())
    return ensemble, history
