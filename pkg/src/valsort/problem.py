"""Shared problem data: criterion scales, credibility vectors, sorting instances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Credibility vectors summing to 1 within this tolerance are renormalized;
# anything further off is rejected.
SIGMA_TOL = 1e-9


class ValidationError(ValueError):
    """Input data violates a documented schema or invariant."""


class RangeError(ValidationError):
    """Performance value falls outside the criterion scale."""


class UnknownLevelError(ValidationError):
    """General-monotone model queried at a level outside its characteristic grid."""


class InsufficientDataError(ValidationError):
    """Operation requires more reference alternatives than provided."""


@dataclass(frozen=True)
class CriterionScale:
    """Bounded performance interval of one criterion on the internal gain scale.

    Cost criteria are negated at ingestion, so alpha < beta always holds and
    larger is better.  `direction` records the original orientation so loaders
    and renderers can map back to user units.
    """

    name: str
    alpha: float
    beta: float
    direction: str = "gain"

    def __post_init__(self):
        if self.direction not in ("gain", "cost"):
            raise ValidationError(f"criterion {self.name}: direction must be 'gain' or 'cost'")
        if not (np.isfinite(self.alpha) and np.isfinite(self.beta)):
            raise ValidationError(f"criterion {self.name}: scale bounds must be finite")
        if not self.alpha < self.beta:
            raise ValidationError(
                f"criterion {self.name}: alpha ({self.alpha}) must be below beta ({self.beta})"
            )

    @property
    def span(self) -> float:
        return self.beta - self.alpha


def one_hot(cls_index: int, q: int) -> np.ndarray:
    """Crisp credibility vector for a 1-based class index."""
    if not 1 <= cls_index <= q:
        raise ValidationError(f"class index {cls_index} outside 1..{q}")
    sigma = np.zeros(q)
    sigma[cls_index - 1] = 1.0
    return sigma


def validate_sigma(sigma, q: int | None = None, *, where: str = "sigma") -> np.ndarray:
    """Validate one credibility vector, renormalizing when the sum is within tolerance.

    Raises ValidationError for negative entries, a wrong length, or a sum
    further than SIGMA_TOL from 1.
    """
    arr = np.asarray(sigma, dtype=float).ravel()
    if q is not None and arr.size != q:
        raise ValidationError(f"{where}: expected {q} credibility degrees, got {arr.size}")
    if arr.size == 0:
        raise ValidationError(f"{where}: empty credibility vector")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{where}: non-finite credibility degree")
    if np.any(arr < -SIGMA_TOL):
        raise ValidationError(f"{where}: negative credibility degree {arr.min()}")
    arr = np.maximum(arr, 0.0)
    total = arr.sum()
    if abs(total - 1.0) > SIGMA_TOL:
        raise ValidationError(f"{where}: credibility degrees sum to {total}, expected 1")
    return arr / total


def validate_sigma_matrix(sigma, q: int, *, where: str = "sigma") -> np.ndarray:
    """Row-wise validate_sigma for an (m, q) matrix."""
    mat = np.asarray(sigma, dtype=float)
    if mat.ndim != 2 or mat.shape[1] != q:
        raise ValidationError(f"{where}: expected shape (m, {q}), got {mat.shape}")
    if mat.shape[0] == 0:
        return mat
    return np.vstack([validate_sigma(row, q, where=f"{where}[{i}]") for i, row in enumerate(mat)])


@dataclass(frozen=True)
class SortingProblem:
    """A multiple-criteria sorting instance.

    Reference alternatives carry valued assignments; test alternatives are to
    be classified (their sigma, when present, is used only for evaluation).
    Performances are on the internal gain scale.
    """

    scales: tuple[CriterionScale, ...]
    q: int
    ref_ids: tuple[str, ...]
    ref_performances: np.ndarray
    ref_sigma: np.ndarray
    test_ids: tuple[str, ...] = ()
    test_performances: np.ndarray | None = None
    test_sigma: np.ndarray | None = None
    ground_truth: object | None = None

    def __post_init__(self):
        n = len(self.scales)
        if self.q < 2:
            raise ValidationError("need at least two classes")
        ref_perf = np.asarray(self.ref_performances, dtype=float)
        if ref_perf.ndim != 2 or ref_perf.shape[1] != n:
            raise ValidationError(f"reference performances must be (m, {n}), got {ref_perf.shape}")
        if len(self.ref_ids) != ref_perf.shape[0]:
            raise ValidationError("reference ids and performance rows disagree in length")
        sigma = validate_sigma_matrix(self.ref_sigma, self.q, where="reference sigma")
        if sigma.shape[0] != ref_perf.shape[0]:
            raise ValidationError("reference sigma rows and performance rows disagree in length")
        object.__setattr__(self, "ref_performances", ref_perf)
        object.__setattr__(self, "ref_sigma", sigma)
        object.__setattr__(self, "ref_ids", tuple(str(i) for i in self.ref_ids))

        if self.test_performances is None:
            test_perf = np.zeros((0, n))
        else:
            test_perf = np.asarray(self.test_performances, dtype=float)
            if test_perf.ndim != 2 or test_perf.shape[1] != n:
                raise ValidationError(f"test performances must be (m, {n}), got {test_perf.shape}")
        if len(self.test_ids) != test_perf.shape[0]:
            raise ValidationError("test ids and performance rows disagree in length")
        object.__setattr__(self, "test_performances", test_perf)
        object.__setattr__(self, "test_ids", tuple(str(i) for i in self.test_ids))
        if self.test_sigma is not None:
            tsig = validate_sigma_matrix(self.test_sigma, self.q, where="test sigma")
            if tsig.shape[0] != test_perf.shape[0]:
                raise ValidationError("test sigma rows and performance rows disagree in length")
            object.__setattr__(self, "test_sigma", tsig)

    @property
    def n_criteria(self) -> int:
        return len(self.scales)

    @property
    def n_ref(self) -> int:
        return self.ref_performances.shape[0]

    @property
    def n_test(self) -> int:
        return self.test_performances.shape[0]

    def subset_refs(self, indices) -> "SortingProblem":
        """New problem keeping only the selected reference alternatives."""
        idx = np.asarray(indices, dtype=int)
        return SortingProblem(
            scales=self.scales,
            q=self.q,
            ref_ids=tuple(self.ref_ids[i] for i in idx),
            ref_performances=self.ref_performances[idx],
            ref_sigma=self.ref_sigma[idx],
            test_ids=self.test_ids,
            test_performances=self.test_performances,
            test_sigma=self.test_sigma,
            ground_truth=self.ground_truth,
        )


def scales_from_performances(names, performances, directions=None) -> tuple[CriterionScale, ...]:
    """Observed min/max scales for gain-converted performance columns."""
    perf = np.asarray(performances, dtype=float)
    directions = directions or ["gain"] * perf.shape[1]
    scales = []
    for j, name in enumerate(names):
        col = perf[:, j]
        scales.append(CriterionScale(name, float(col.min()), float(col.max()), directions[j]))
    return tuple(scales)
