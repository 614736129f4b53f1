"""Assignment-cost profiles, crisp/soft assignment, batch monotonicity."""

import numpy as np
import pytest

from valsort.assigner import (
    assign_crisp,
    assign_soft,
    batch_assign,
    gamma_matrix,
    gamma_profile,
    predict_soft,
)
from valsort.learner import Hyperparams, admm_fit
from valsort.models import linear_spec, make_spec
from valsort.problem import InsufficientDataError, SortingProblem, one_hot

from helpers import crisp_problem_from_rows, random_sigma, small_problem, unit_scales


def _single_ref_problem(u_ref, sigma_ref, q):
    # one criterion on [0,1]; alternative value equals its performance
    return SortingProblem(
        scales=unit_scales(1),
        q=q,
        ref_ids=("a",),
        ref_performances=np.array([[u_ref]]),
        ref_sigma=np.array([sigma_ref]),
    )


def _identity_model():
    return __import__("valsort").FittedModel(linear_spec(unit_scales(1)), np.array([1.0]), 1.0, 0.0)


def test_gamma_single_crisp_reference():
    model = _identity_model()
    problem = _single_ref_problem(0.5, one_hot(2, 3), 3)
    profile = gamma_profile(model, problem, [0.7])
    assert profile.value == pytest.approx(0.7)
    assert profile.gamma == pytest.approx([0.2, 0.2, -0.2])


def test_gamma_zero_difference():
    model = _identity_model()
    problem = _single_ref_problem(0.5, one_hot(2, 3), 3)
    profile = gamma_profile(model, problem, [0.5])
    assert profile.gamma == pytest.approx([0.0, 0.0, 0.0], abs=1e-12)


def test_gamma_symmetric_references_prefer_middle():
    model = _identity_model()
    problem = SortingProblem(
        scales=unit_scales(1),
        q=3,
        ref_ids=("a", "b"),
        ref_performances=np.array([[0.2], [0.8]]),
        ref_sigma=np.vstack([one_hot(1, 3), one_hot(3, 3)]),
    )
    profile = gamma_profile(model, problem, [0.5])
    assert profile.gamma[1] < profile.gamma[0]
    assert profile.gamma[1] < profile.gamma[2]


def test_gamma_requires_references():
    model = _identity_model()
    problem = _single_ref_problem(0.5, one_hot(2, 3), 3)
    empty = problem.subset_refs([])
    with pytest.raises(InsufficientDataError):
        gamma_profile(model, empty, [0.5])


def test_assign_crisp_cases():
    assert assign_crisp(np.array([0.2, 0.2, -0.2])) == pytest.approx([0.0, 0.0, 1.0])
    assert assign_crisp(np.array([1.0, 1.0, 1.0])) == pytest.approx([1 / 3] * 3)
    assert assign_crisp(np.array([0.1, 0.1, 0.5])) == pytest.approx([0.5, 0.5, 0.0])


def test_assign_soft_cases():
    soft = assign_soft(np.array([0.2, 0.2, -0.2]))
    assert soft == pytest.approx([0.2864, 0.2864, 0.4272], abs=1e-4)
    assert assign_soft(np.array([3.0, 3.0])) == pytest.approx([0.5, 0.5])
    stable = assign_soft(np.array([1000.0, 0.0]))
    assert stable[1] == pytest.approx(1.0)
    assert stable[0] >= 0.0


def test_assign_soft_shift_invariance_and_sum():
    rng = np.random.default_rng(0)
    for _ in range(100):
        gamma = rng.normal(size=5) * rng.uniform(1, 100)
        soft = assign_soft(gamma)
        assert soft.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(soft > 0)
        shifted = assign_soft(gamma + 17.3)
        assert shifted == pytest.approx(soft, abs=1e-12)
        assert np.argmax(soft) == np.argmin(gamma)


def _p2_objective(sigma_b, ref_sigma, ref_values, u_b):
    """Direct evaluation of the assignment program's objective at sigma_b."""
    total = 0.0
    q = len(sigma_b)
    for sig_a, u_a in zip(ref_sigma, ref_values):
        diff = u_a - u_b
        for s in range(q):
            for r in range(q):
                if s < r:
                    total += sig_a[s] * sigma_b[r] * diff
                elif s == r:
                    total += sig_a[s] * sigma_b[r] * abs(diff)
                else:
                    total -= sig_a[s] * sigma_b[r] * diff
    return total


def test_gamma_equals_objective_at_one_hot():
    rng = np.random.default_rng(1)
    for _ in range(100):
        m, q = int(rng.integers(2, 8)), int(rng.integers(2, 6))
        ref_sigma = np.vstack([random_sigma(rng, q) for _ in range(m)])
        ref_values = rng.uniform(size=m)
        u_b = float(rng.uniform())
        gammas = gamma_matrix(ref_sigma, ref_values, [u_b])[0]
        for r in range(q):
            direct = _p2_objective(one_hot(r + 1, q), ref_sigma, ref_values, u_b)
            assert gammas[r] == pytest.approx(direct, abs=1e-10)


def test_vertex_optimality_against_interior_points():
    rng = np.random.default_rng(2)
    for _ in range(20):
        m, q = int(rng.integers(2, 6)), int(rng.integers(2, 5))
        ref_sigma = np.vstack([random_sigma(rng, q) for _ in range(m)])
        ref_values = rng.uniform(size=m)
        u_b = float(rng.uniform())
        gammas = gamma_matrix(ref_sigma, ref_values, [u_b])[0]
        crisp = assign_crisp(gammas)
        vertex_min = gammas.min()
        for _ in range(50):
            interior = random_sigma(rng, q)
            h = _p2_objective(interior, ref_sigma, ref_values, u_b)
            assert vertex_min <= h + 1e-10
        # the crisp support is exactly the argmin set
        support = np.flatnonzero(crisp > 0)
        assert set(support) == set(np.flatnonzero(gammas <= vertex_min + 1e-9))


def test_batch_assign_empty_and_order():
    problem = small_problem(seed=3, m=12, n=2, q=3, spread=0.2)
    spec = make_spec("linear", problem.scales)
    report = admm_fit(problem, spec, Hyperparams(c1=1.0))
    results = batch_assign(report.model, problem)
    assert len(results) == problem.n_test
    no_test = SortingProblem(
        scales=problem.scales,
        q=problem.q,
        ref_ids=problem.ref_ids,
        ref_performances=problem.ref_performances,
        ref_sigma=problem.ref_sigma,
    )
    assert batch_assign(report.model, no_test) == []


def test_batch_assign_monotone_in_value():
    # crisp classes should be non-decreasing when sorted by comprehensive value
    for seed in range(5):
        problem = small_problem(seed=seed, m=20, n=2, q=4, spread=0.1)
        spec = make_spec("linear", problem.scales)
        report = admm_fit(problem, spec, Hyperparams(c1=10.0))
        results = batch_assign(report.model, problem)  # raises on violation
        values = [r.gamma.value for r in results]
        classes = [r.crisp_class for r in results]
        order = np.argsort(values)
        assert np.all(np.diff(np.array(classes)[order]) >= 0)


def test_predict_soft_matches_per_row_profile():
    # the batch path applies the softmax to per-reference mean costs
    problem = small_problem(seed=5, m=14, n=2, q=3, spread=0.2)
    spec = make_spec("linear", problem.scales)
    model = admm_fit(problem, spec, Hyperparams(c1=1.0)).model
    rows = problem.test_performances[:4]
    batch = predict_soft(model, problem, rows)
    for row, soft in zip(rows, batch):
        profile = gamma_profile(model, problem, row)
        assert soft == pytest.approx(assign_soft(profile.gamma / problem.n_ref), abs=1e-12)
        assert np.argmax(soft) == np.argmin(profile.gamma)
