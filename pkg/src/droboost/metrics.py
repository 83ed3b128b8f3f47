"""Classification metrics in the form of the credit-default comparison table.

The two rate names follow that table literally: ``false_negative_rate`` is
P(pred = +1 | true = +1) and ``true_positive_rate`` is P(pred = -1 | true = -1),
even though conventional naming would differ.
"""

from __future__ import annotations

import math

import numpy as np

METRIC_NAMES = ("accuracy", "false_negative_rate", "true_positive_rate", "avg_exp_loss")
METRIC_LABELS = {
    "accuracy": "Accuracy P(Y_true = Y_pred)",
    "false_negative_rate": "False Negative Rate P(pred=1 | true=1)",
    "true_positive_rate": "True Positive Rate P(pred=-1 | true=-1)",
    "avg_exp_loss": "Average Exponential Loss",
}


def _conditional(pred, truth, p, t) -> float:
    mask = truth == t
    if not np.any(mask):
        return math.nan
    return float(np.mean(pred[mask] == p))


def classification_metrics(scores, labels) -> dict:
    """Metrics from real-valued scores F(x); predictions use sgn(0) = +1."""
    F = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    pred = np.where(F >= 0.0, 1.0, -1.0)
    return {
        "n": int(y.size),
        "accuracy": float(np.mean(pred == y)),
        "false_negative_rate": _conditional(pred, y, 1.0, 1.0),
        "true_positive_rate": _conditional(pred, y, -1.0, -1.0),
        "avg_exp_loss": float(np.mean(np.exp(-y * F))),
    }


def format_kv(metrics: dict) -> str:
    return "\n".join(f"{k}={metrics[k]!r}" if isinstance(metrics[k], float) else f"{k}={metrics[k]}"
                     for k in ("n",) + METRIC_NAMES)


def format_table(metrics: dict) -> str:
    width = max(len(v) for v in METRIC_LABELS.values())
    return "\n".join(f"{METRIC_LABELS[k]:<{width}}  {metrics[k]:.4f}" for k in METRIC_NAMES)
