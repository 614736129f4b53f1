"""Ground-truth generators, quantile assignment, stratified splitting."""

import numpy as np
import pytest

from valsort.models import ModelKind, evaluate_values
from valsort.problem import ValidationError
from valsort.synthgen import (
    GeneratorConfig,
    assign_by_quantiles,
    make_dataset,
    random_monotone_value_function,
    stratified_split,
)

from helpers import unit_scales


def test_zero_complexity_gives_linear_marginals():
    rng = np.random.default_rng(0)
    grids = [np.linspace(0, 1, 12) for _ in range(3)]
    truth = random_monotone_value_function(unit_scales(3), grids, 0.0, rng)
    for grid, sl in zip(truth.spec.grids, truth.spec.block_slices()):
        u = truth.theta[sl]
        slopes = np.diff(u) / np.diff(grid)
        assert slopes == pytest.approx(np.full(grid.size - 1, slopes[0]))


def test_full_complexity_slope_ratios_bounded():
    rng = np.random.default_rng(1)
    grids = [np.linspace(0, 1, 20)]
    truth = random_monotone_value_function(unit_scales(1), grids, 1.0, rng)
    u = truth.theta
    slopes = np.diff(u) / np.diff(grids[0])
    ratios = slopes[1:] / slopes[:-1]
    assert np.all(ratios >= 0.0) and np.all(ratios <= 2.0)


def test_generator_normalization_and_monotonicity():
    rng = np.random.default_rng(2)
    for _ in range(20):
        n = int(rng.integers(1, 5))
        grids = [np.sort(rng.choice(np.linspace(0, 1, 50), size=8, replace=False)) for _ in range(n)]
        grids = [g if g.size >= 2 else np.array([0.0, 1.0]) for g in grids]
        truth = random_monotone_value_function(
            [type(unit_scales(1)[0])(f"g{j}", float(g[0]), float(g[-1])) for j, g in enumerate(grids)],
            grids,
            float(rng.uniform(0, 1)),
            rng,
        )
        total = sum(truth.theta[sl][-1] for sl in truth.spec.block_slices())
        assert total == pytest.approx(1.0, abs=1e-12)
        for sl in truth.spec.block_slices():
            assert np.all(np.diff(truth.theta[sl]) >= -1e-15)


def test_assign_by_quantiles_basic():
    values = np.arange(10, dtype=float)
    classes = assign_by_quantiles(values, 2)
    assert np.all(classes[:5] == 1) and np.all(classes[5:] == 2)


def test_assign_by_quantiles_equal_blocks():
    rng = np.random.default_rng(3)
    values = rng.uniform(size=500)
    classes = assign_by_quantiles(values, 5)
    assert [int((classes == c).sum()) for c in range(1, 6)] == [100] * 5
    # the best block really holds the largest values
    assert values[classes == 5].min() >= values[classes == 4].max()


def test_assign_by_quantiles_constant_values_stable():
    values = np.zeros(6)
    classes = assign_by_quantiles(values, 3)
    assert classes.tolist() == [3, 3, 2, 2, 1, 1]  # input order decides


def test_assign_by_quantiles_occupancy():
    values = np.arange(6, dtype=float)
    classes = assign_by_quantiles(values, 2, occupancy=(4, 2))
    assert (classes == 1).sum() == 4 and (classes == 2).sum() == 2
    with pytest.raises(ValidationError):
        assign_by_quantiles(values, 2, occupancy=(1, 2))


def test_stratified_split_proportions():
    rng = np.random.default_rng(4)
    classes = np.repeat([1, 2, 3, 4, 5], 100)
    train, test = stratified_split(classes, 0.7, rng)
    assert train.size + test.size == 500
    for cls in range(1, 6):
        n_train = int((classes[train] == cls).sum())
        assert abs(n_train - 70) <= 1


def test_make_dataset_deterministic():
    config = GeneratorConfig(n_criteria=3, n_alternatives=40, q=3, levels=10,
                             kind="general", rho_gen=0.5, spread=0.2, seed=42)
    p1 = make_dataset(config)
    p2 = make_dataset(config)
    assert np.array_equal(p1.ref_performances, p2.ref_performances)
    assert np.array_equal(p1.ref_sigma, p2.ref_sigma)
    assert np.array_equal(p1.test_performances, p2.test_performances)
    assert np.array_equal(p1.ground_truth.theta, p2.ground_truth.theta)
    assert p1.ref_ids == p2.ref_ids


def test_make_dataset_linear_truth():
    weights = (0.4, 0.1, 0.2, 0.05, 0.05, 0.2)
    config = GeneratorConfig(n_criteria=6, n_alternatives=50, q=5, levels=10,
                             kind="linear", weights=weights, spread=0.0, seed=0)
    problem = make_dataset(config)
    assert problem.ground_truth.spec.kind == ModelKind.LINEAR
    assert problem.ground_truth.theta == pytest.approx(weights)
    # classes really follow value quantiles
    values = evaluate_values(problem.ground_truth, problem.ref_performances)
    classes = np.argmax(problem.ref_sigma, axis=1) + 1
    order = np.argsort(values)
    assert np.all(np.diff(classes[order]) >= 0)


def test_make_dataset_spread_support():
    config = GeneratorConfig(n_criteria=2, n_alternatives=30, q=5, levels=8,
                             kind="general", rho_gen=0.3, spread=0.2, seed=1)
    problem = make_dataset(config)
    sigma = np.vstack([problem.ref_sigma, problem.test_sigma])
    classes = np.argmax(sigma, axis=1) + 1
    for row, cls in zip(sigma, classes):
        nonzero = np.flatnonzero(row > 0)
        if cls in (1, 5):
            assert nonzero.size == 2
        else:
            assert nonzero.size == 3
        assert row[cls - 1] == pytest.approx(0.8)


def test_generator_config_validation():
    with pytest.raises(ValidationError):
        GeneratorConfig(rho_gen=1.5)
    with pytest.raises(ValidationError):
        GeneratorConfig(kind="cubic")
    with pytest.raises(ValidationError):
        GeneratorConfig(kind="linear", n_criteria=2, weights=(0.9, 0.3))
