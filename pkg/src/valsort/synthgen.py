"""Synthetic ground truths and datasets.

Random general monotone value functions come from a growth-rate recurrence:
each new marginal-value slope is the previous one scaled by (1 + delta) with
delta uniform on [-rho, rho], then everything is normalized so trade-off
weights sum to one.  Crisp classes follow value quantiles; valued examples
spread credibility onto adjacent classes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .credibility import make_valued_examples
from .models import FittedModel, ModelKind, ModelSpec, evaluate_values, linear_spec
from .problem import CriterionScale, SortingProblem, ValidationError


@dataclass(frozen=True)
class GeneratorConfig:
    n_criteria: int = 6
    n_alternatives: int = 500
    q: int = 5
    levels: int = 30
    kind: str = "general"  # ground-truth family: "linear" or "general"
    rho_gen: float = 0.25
    weights: tuple[float, ...] | None = None
    spread: float = 0.0
    seed: int = 0
    train_fraction: float = 0.7
    occupancy: tuple[int, ...] | None = None

    def __post_init__(self):
        if not 0.0 <= self.rho_gen <= 1.0:
            raise ValidationError("rho_gen must lie in [0, 1]")
        if self.kind not in ("linear", "general"):
            raise ValidationError("ground-truth kind must be 'linear' or 'general'")
        if self.levels < 2 or self.n_criteria < 1 or self.q < 2:
            raise ValidationError("degenerate generator configuration")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValidationError("train_fraction must lie in (0, 1)")
        if self.kind == "linear":
            w = self.weights or tuple([1.0 / self.n_criteria] * self.n_criteria)
            w = tuple(float(x) for x in w)
            if len(w) != self.n_criteria or abs(sum(w) - 1.0) > 1e-9 or min(w) < 0:
                raise ValidationError("weights must be a nonnegative vector summing to 1")
            object.__setattr__(self, "weights", w)


def _unit_scales(n: int) -> tuple[CriterionScale, ...]:
    return tuple(CriterionScale(f"g{j + 1}", 0.0, 1.0) for j in range(n))


def random_monotone_value_function(
    scales, grids, rho_gen: float, rng: np.random.Generator
) -> FittedModel:
    """Ground-truth GENERAL model on the given characteristic grids.

    Per criterion: zero at the worst level, a positive random first marginal
    value, then the slope recurrence; marginal values are normalized jointly so
    the trade-off weights sum to 1.
    """
    theta_blocks = []
    for grid in grids:
        grid = np.asarray(grid, dtype=float)
        u = np.zeros(grid.size)
        first = float(rng.uniform())
        while first == 0.0:
            first = float(rng.uniform())
        u[1] = first
        slope = u[1] / (grid[1] - grid[0])
        for k in range(2, grid.size):
            delta = float(rng.uniform(-rho_gen, rho_gen))
            slope = max((1.0 + delta) * slope, 0.0)
            u[k] = u[k - 1] + slope * (grid[k] - grid[k - 1])
        theta_blocks.append(u)
    total = sum(block[-1] for block in theta_blocks)
    theta = np.concatenate([block / total for block in theta_blocks])
    spec = ModelSpec(ModelKind.GENERAL, tuple(scales), tuple(np.asarray(g, float) for g in grids))
    return FittedModel(spec, theta, 1.0, 1.0)


def assign_by_quantiles(values, q: int, occupancy=None) -> np.ndarray:
    """Crisp classes from sorting by value: the best block goes to class q.

    occupancy gives class sizes (index 0 -> class 1); default splits as evenly
    as possible, extra members going to the best classes.  Value ties keep
    input order.
    """
    values = np.asarray(values, dtype=float).ravel()
    m = values.size
    if m == 0:
        raise ValidationError("cannot assign an empty value list")
    if occupancy is None:
        sizes = [len(chunk) for chunk in np.array_split(np.arange(m), q)]
    else:
        sizes = [int(c) for c in occupancy]
        if len(sizes) != q or sum(sizes) != m or min(sizes) < 0:
            raise ValidationError(f"occupancy must be {q} nonnegative counts summing to {m}")
        sizes = sizes[::-1]  # occupancy is per class 1..q; blocks run best-first
    order = np.argsort(-values, kind="stable")
    classes = np.empty(m, dtype=int)
    start = 0
    for block, size in enumerate(sizes):
        classes[order[start : start + size]] = q - block
        start += size
    return classes


def stratified_split(classes, fraction: float, rng: np.random.Generator):
    """Index split preserving per-class counts within rounding of the fraction."""
    classes = np.asarray(classes, dtype=int).ravel()
    train, test = [], []
    for cls in np.unique(classes):
        members = np.flatnonzero(classes == cls)
        members = members[rng.permutation(members.size)]
        n_train = int(round(fraction * members.size))
        train.extend(members[:n_train].tolist())
        test.extend(members[n_train:].tolist())
    return np.array(sorted(train), dtype=int), np.array(sorted(test), dtype=int)


def make_dataset(config: GeneratorConfig) -> SortingProblem:
    """Seeded synthetic sorting problem with the ground-truth model attached.

    Performances are drawn uniformly from a fixed per-criterion level grid,
    classes follow ground-truth value quantiles, and the reference/test split
    is stratified at the configured fraction.
    """
    rng = np.random.default_rng(config.seed)
    scales = _unit_scales(config.n_criteria)
    grids = [np.linspace(0.0, 1.0, config.levels) for _ in range(config.n_criteria)]

    level_idx = rng.integers(0, config.levels, size=(config.n_alternatives, config.n_criteria))
    performances = grids[0][level_idx]

    if config.kind == "linear":
        truth = FittedModel(linear_spec(scales), np.array(config.weights), 1.0, 1.0)
    else:
        truth = random_monotone_value_function(scales, grids, config.rho_gen, rng)

    values = evaluate_values(truth, performances)
    classes = assign_by_quantiles(values, config.q, config.occupancy)
    sigma = make_valued_examples(classes, config.spread, config.q)

    train_idx, test_idx = stratified_split(classes, config.train_fraction, rng)
    ids = [f"a{i + 1}" for i in range(config.n_alternatives)]
    return SortingProblem(
        scales=scales,
        q=config.q,
        ref_ids=tuple(ids[i] for i in train_idx),
        ref_performances=performances[train_idx],
        ref_sigma=sigma[train_idx],
        test_ids=tuple(ids[i] for i in test_idx),
        test_performances=performances[test_idx],
        test_sigma=sigma[test_idx],
        ground_truth=truth,
    )
