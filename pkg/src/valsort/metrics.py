"""Evaluation metrics over credibility vectors: top-N accuracy and Kendall's tau."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .problem import ValidationError


def ranking_order(sigma) -> np.ndarray:
    """Class indices (0-based) by descending credibility, ties by ascending index.

    The single tie-break rule shared by metrics and the class-performance
    measures.
    """
    sigma = np.asarray(sigma, dtype=float).ravel()
    return np.lexsort((np.arange(sigma.size), -sigma))


def ranking_positions(sigma) -> np.ndarray:
    """1-based position of each class in the tie-broken descending ranking."""
    order = ranking_order(sigma)
    positions = np.empty(order.size, dtype=int)
    positions[order] = np.arange(1, order.size + 1)
    return positions


def accuracy_at_n(actual, predicted, n: int) -> float:
    """Overlap fraction of the top-n classes of the two rankings."""
    actual = np.asarray(actual, dtype=float).ravel()
    predicted = np.asarray(predicted, dtype=float).ravel()
    q = actual.size
    if not 1 <= n <= q:
        raise ValidationError(f"N must lie in 1..{q}, got {n}")
    top_a = set(ranking_order(actual)[:n].tolist())
    top_p = set(ranking_order(predicted)[:n].tolist())
    return len(top_a & top_p) / n


def kendalls_tau(actual, predicted) -> float:
    """2(n_c - n_d) / (q(q-1)) over class pairs.

    A pair tied in either credibility vector counts as neither concordant nor
    discordant, so heavy ties cap the attainable coefficient below 1.
    """
    actual = np.asarray(actual, dtype=float).ravel()
    predicted = np.asarray(predicted, dtype=float).ravel()
    q = actual.size
    if q < 2:
        raise ValidationError("Kendall's tau needs at least two classes")
    da = np.sign(actual[:, None] - actual[None, :])
    dp = np.sign(predicted[:, None] - predicted[None, :])
    prod = da * dp
    iu = np.triu_indices(q, k=1)
    n_c = int(np.sum(prod[iu] > 0))
    n_d = int(np.sum(prod[iu] < 0))
    return 2.0 * (n_c - n_d) / (q * (q - 1))


@dataclass
class MetricsReport:
    """Mean metrics plus (optionally retained) per-alternative values."""

    mean_accuracy: dict[int, float]
    mean_kendall_tau: float
    per_accuracy: list[dict[int, float]] = field(default_factory=list)
    per_kendall_tau: list[float] = field(default_factory=list)
    card_pf: list[float] | None = None
    ord_pf: list[float] | None = None


def evaluate_predictions(actual: np.ndarray, predicted: np.ndarray, *, keep_per_alternative: bool = False) -> MetricsReport:
    """Accuracy@N for N = 1..q and Kendall's tau over matched sigma rows."""
    actual = np.asarray(actual, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if actual.shape != predicted.shape:
        raise ValidationError(f"shape mismatch: {actual.shape} vs {predicted.shape}")
    q = actual.shape[1]
    per_acc = [
        {n: accuracy_at_n(a, p, n) for n in range(1, q + 1)} for a, p in zip(actual, predicted)
    ]
    per_tau = [kendalls_tau(a, p) for a, p in zip(actual, predicted)]
    mean_acc = {n: float(np.mean([row[n] for row in per_acc])) for n in range(1, q + 1)}
    return MetricsReport(
        mean_accuracy=mean_acc,
        mean_kendall_tau=float(np.mean(per_tau)),
        per_accuracy=per_acc if keep_per_alternative else [],
        per_kendall_tau=per_tau if keep_per_alternative else [],
    )
