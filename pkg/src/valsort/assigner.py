"""Assignment of non-reference alternatives: per-class consistency statistics,
crisp assignment at their argmin, and softmax valued assignment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import FittedModel, evaluate_values
from .problem import InsufficientDataError, SortingProblem

TIE_TOL = 1e-9  # classes within this of the minimum share the crisp assignment


@dataclass(frozen=True)
class GammaProfile:
    gamma: np.ndarray
    value: float


@dataclass(frozen=True)
class AssignmentResult:
    crisp: np.ndarray
    soft: np.ndarray
    gamma: GammaProfile

    @property
    def crisp_class(self) -> int:
        """1-based class index; ties resolve to the lowest class."""
        return int(np.argmax(self.crisp)) + 1


def gamma_matrix(ref_sigma: np.ndarray, ref_values: np.ndarray, target_values) -> np.ndarray:
    """Per-class assignment costs for each target value.

    Row b, column r holds the sum over reference alternatives of
    below-mass * (U(a) - U(b)) + own-mass * |U(a) - U(b)| - above-mass * (U(a) - U(b)),
    where the masses split sigma(a) against class r.
    """
    target_values = np.atleast_1d(np.asarray(target_values, dtype=float))
    m, q = ref_sigma.shape
    below = np.concatenate((np.zeros((m, 1)), np.cumsum(ref_sigma, axis=1)[:, :-1]), axis=1)
    above = 1.0 - below - ref_sigma
    net = below - above  # (m, q)
    lin_coef = ref_values @ net  # (q,)
    lin_slope = net.sum(axis=0)  # (q,)
    abs_part = np.abs(ref_values[None, :] - target_values[:, None]) @ ref_sigma  # (N, q)
    return lin_coef[None, :] - np.outer(target_values, lin_slope) + abs_part


def gamma_profile(model: FittedModel, problem: SortingProblem, row) -> GammaProfile:
    """Assignment-cost profile of one performance row against the reference set."""
    if problem.n_ref == 0:
        raise InsufficientDataError("gamma profile needs a nonempty reference set")
    ref_values = evaluate_values(model, problem.ref_performances)
    value = float(evaluate_values(model, np.atleast_2d(row))[0])
    gamma = gamma_matrix(problem.ref_sigma, ref_values, [value])[0]
    return GammaProfile(gamma=gamma, value=value)


def assign_crisp(gamma) -> np.ndarray:
    """One-hot at the unique cost minimizer, uniform over the tie set otherwise."""
    g = gamma.gamma if isinstance(gamma, GammaProfile) else np.asarray(gamma, dtype=float)
    tie = g <= g.min() + TIE_TOL
    sigma = np.zeros_like(g)
    sigma[tie] = 1.0 / tie.sum()
    return sigma


def assign_soft(gamma) -> np.ndarray:
    """Softmax of the negated costs, shifted by the minimum for overflow safety."""
    g = gamma.gamma if isinstance(gamma, GammaProfile) else np.asarray(gamma, dtype=float)
    e = np.exp(-(g - g.min()))
    return e / e.sum()


def soft_assignments(gammas, n_ref: int) -> np.ndarray:
    """Scaled softmax over rows of assignment costs (see predict_soft)."""
    gammas = np.atleast_2d(np.asarray(gammas, dtype=float))
    return _soft_rows(gammas, scale=float(n_ref))


def _soft_rows(gammas: np.ndarray, scale: float = 1.0) -> np.ndarray:
    shifted = (gammas - gammas.min(axis=1, keepdims=True)) / scale
    e = np.exp(-shifted)
    return e / e.sum(axis=1, keepdims=True)


def predict_soft(model: FittedModel, problem: SortingProblem, rows) -> np.ndarray:
    """Softmax valued assignments for arbitrary performance rows (vectorized).

    The assignment costs grow linearly with the reference count, so the
    softmax is taken over the per-reference mean cost; otherwise it saturates
    to one-hot for any real-sized reference set and the valued assignment
    carries no information.
    """
    ref_values = evaluate_values(model, problem.ref_performances)
    values = evaluate_values(model, rows)
    gammas = gamma_matrix(problem.ref_sigma, ref_values, values)
    return _soft_rows(gammas, scale=float(problem.n_ref))


def predict_reference_soft(model: FittedModel, problem: SortingProblem) -> np.ndarray:
    """Soft predictions for the reference alternatives themselves (self terms vanish)."""
    return predict_soft(model, problem, problem.ref_performances)


def batch_assign(model: FittedModel, problem: SortingProblem) -> list[AssignmentResult]:
    """Assign every test alternative; checks that crisp classes are monotone in U(b)."""
    if problem.n_test == 0:
        return []
    if problem.n_ref == 0:
        raise InsufficientDataError("assignment needs a nonempty reference set")
    ref_values = evaluate_values(model, problem.ref_performances)
    values = evaluate_values(model, problem.test_performances)
    gammas = gamma_matrix(problem.ref_sigma, ref_values, values)
    soft = _soft_rows(gammas, scale=float(problem.n_ref))
    results = []
    for gamma, value, soft_row in zip(gammas, values, soft):
        profile = GammaProfile(gamma=gamma, value=float(value))
        results.append(
            AssignmentResult(crisp=assign_crisp(profile), soft=soft_row, gamma=profile)
        )
    order = np.argsort(values, kind="stable")
    classes = np.array([results[i].crisp_class for i in order])
    if np.any(np.diff(classes) < 0):
        raise RuntimeError("crisp assignments are not monotone in the comprehensive value")
    return results
