"""Pairwise credibility coefficients and the learning-data assembly.

For a pair of reference alternatives the credibility triple (d_succ, d_eq,
d_prec) gives the probabilities that the first is assigned better than, equal
to, or worse than the second, derived from their credibility vectors.  These
feed the linear coefficient c and the column matrix Y of the fitting problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import ModelSpec, feature_matrix
from .problem import InsufficientDataError, SortingProblem, ValidationError, one_hot, validate_sigma


@dataclass(frozen=True)
class CredibilityTriple:
    d_succ: float
    d_eq: float
    d_prec: float

    def as_array(self) -> np.ndarray:
        return np.array([self.d_succ, self.d_eq, self.d_prec])


def credibility_triple(sigma_i, sigma_j) -> CredibilityTriple:
    """Credibility degrees for 'better than', 'same class', 'worse than'.

    Exact double sums of sigma_s(a_i) * sigma_r(a_j) over s > r, s == r and
    s < r respectively.
    """
    si = validate_sigma(sigma_i, where="sigma_i")
    sj = validate_sigma(sigma_j, where="sigma_j")
    if si.size != sj.size:
        raise ValidationError(f"class counts differ: {si.size} vs {sj.size}")
    below = np.concatenate(([0.0], np.cumsum(sj)[:-1]))  # mass of a_j strictly below class s
    above = 1.0 - below - sj
    return CredibilityTriple(
        d_succ=float(si @ below),
        d_eq=float(si @ sj),
        d_prec=float(si @ above),
    )


def pair_objective_xi(model, sigma_i, sigma_j, row_i, row_j) -> float:
    """Pairwise fitting loss xi weighting value difference by the credibility triple."""
    from .models import evaluate_value

    triple = credibility_triple(sigma_i, sigma_j)
    diff = evaluate_value(model, row_i) - evaluate_value(model, row_j)
    return -triple.d_succ * diff + triple.d_eq * abs(diff) + triple.d_prec * diff


def _pairwise_coefficients(sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All-pairs D_succ / D_eq / D_prec matrices from the (m, q) sigma matrix."""
    below = np.concatenate((np.zeros((sigma.shape[0], 1)), np.cumsum(sigma, axis=1)[:, :-1]), axis=1)
    above = 1.0 - below - sigma
    d_succ = sigma @ below.T
    d_eq = sigma @ sigma.T
    d_prec = sigma @ above.T
    return d_succ, d_eq, d_prec


@dataclass(frozen=True)
class LearningData:
    """Assembled fitting data: linear coefficient c, Y columns, and pair bookkeeping.

    Y keeps one column per unordered pair (i < j) with d_eq > 0; the column is
    d_eq * (V(a_i) - V(a_j)).  Pairs with d_eq == 0 contribute nothing to the
    L1 term and are dropped.
    """

    c: np.ndarray
    y: np.ndarray
    pair_index: np.ndarray  # (n_cols, 2) reference indices of retained pairs
    d_eq: np.ndarray  # retained pair weights
    features: np.ndarray  # (m, p) reference feature matrix


def assemble_learning_data(problem: SortingProblem, spec: ModelSpec) -> LearningData:
    """Build (c, Y) over all reference pairs i < j."""
    m = problem.n_ref
    if m < 2:
        raise InsufficientDataError("need at least two reference alternatives")
    features = feature_matrix(spec, problem.ref_performances)
    d_succ, d_eq, d_prec = _pairwise_coefficients(problem.ref_sigma)
    w = d_prec - d_succ
    # sum over i<j of w_ij (V_i - V_j) collapses to V' (row sums of w), w antisymmetric
    c = features.T @ w.sum(axis=1)

    iu, ju = np.triu_indices(m, k=1)
    weights = d_eq[iu, ju]
    keep = weights > 0.0
    iu, ju, weights = iu[keep], ju[keep], weights[keep]
    y = ((features[iu] - features[ju]) * weights[:, None]).T
    return LearningData(
        c=c,
        y=y,
        pair_index=np.column_stack((iu, ju)),
        d_eq=weights,
        features=features,
    )


def make_valued_examples(crisp_classes, spread: float, q: int) -> np.ndarray:
    """Valued assignment vectors from crisp classes.

    The actual class keeps 1 - spread credibility; the remainder splits equally
    between the existing adjacent classes (all of it to the single neighbor at
    the boundary).
    """
    if not 0.0 <= spread < 1.0:
        raise ValidationError(f"spread must lie in [0, 1), got {spread}")
    classes = np.asarray(crisp_classes, dtype=int).ravel()
    if classes.size and (classes.min() < 1 or classes.max() > q):
        raise ValidationError("class index outside 1..q")
    sigma = np.zeros((classes.size, q))
    for i, cls in enumerate(classes):
        if spread == 0.0 or q == 1:
            sigma[i] = one_hot(cls, q)
            continue
        neighbors = [c for c in (cls - 1, cls + 1) if 1 <= c <= q]
        sigma[i, cls - 1] = 1.0 - spread
        for c in neighbors:
            sigma[i, c - 1] = spread / len(neighbors)
    return sigma
