"""Credibility triples, the pairwise loss, learning-data assembly."""

import numpy as np
import pytest

from valsort.credibility import (
    assemble_learning_data,
    credibility_triple,
    make_valued_examples,
    pair_objective_xi,
)
from valsort.models import FittedModel, build_feature_map, linear_spec
from valsort.problem import InsufficientDataError, ValidationError, one_hot

from helpers import crisp_problem_from_rows, random_sigma, unit_scales


def test_disjoint_crisp_pair_is_certain():
    t = credibility_triple(one_hot(2, 5), one_hot(1, 5))
    assert (t.d_succ, t.d_eq, t.d_prec) == (1.0, 0.0, 0.0)


def test_identical_one_hot_pair():
    t = credibility_triple(one_hot(3, 5), one_hot(3, 5))
    assert (t.d_succ, t.d_eq, t.d_prec) == (0.0, 1.0, 0.0)


def test_valued_pair_enumeration():
    t = credibility_triple([0.5, 0.5], [0.5, 0.5])
    assert t.d_succ == pytest.approx(0.25)
    assert t.d_eq == pytest.approx(0.5)
    assert t.d_prec == pytest.approx(0.25)


def test_triple_dimension_mismatch():
    with pytest.raises(ValidationError):
        credibility_triple([1.0, 0.0], [1.0, 0.0, 0.0])


def _triple_direct(si, sj):
    q = len(si)
    succ = sum(si[s] * sj[r] for s in range(q) for r in range(q) if s > r)
    eq = sum(si[s] * sj[s] for s in range(q))
    prec = sum(si[s] * sj[r] for s in range(q) for r in range(q) if s < r)
    return succ, eq, prec


def test_triple_properties_random():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        q = int(rng.integers(2, 7))
        si, sj = random_sigma(rng, q), random_sigma(rng, q)
        t = credibility_triple(si, sj)
        assert t.d_succ + t.d_eq + t.d_prec == pytest.approx(1.0, abs=1e-12)
        assert 0.0 <= min(t.d_succ, t.d_eq, t.d_prec)
        swapped = credibility_triple(sj, si)
        assert swapped.d_succ == pytest.approx(t.d_prec, abs=1e-12)
        assert swapped.d_eq == pytest.approx(t.d_eq, abs=1e-12)
        assert swapped.d_prec == pytest.approx(t.d_succ, abs=1e-12)
        direct = _triple_direct(si, sj)
        assert t.as_array() == pytest.approx(direct, abs=1e-12)


def test_property_1_disjoint_supports():
    # support of sigma_i entirely above support of sigma_j
    rng = np.random.default_rng(1)
    for _ in range(50):
        q = int(rng.integers(3, 7))
        split = int(rng.integers(1, q))
        hi = np.zeros(q)
        hi[split:] = rng.uniform(0.1, 1.0, size=q - split)
        hi /= hi.sum()
        lo = np.zeros(q)
        lo[:split] = rng.uniform(0.1, 1.0, size=split)
        lo /= lo.sum()
        t = credibility_triple(hi, lo)
        assert t.as_array() == pytest.approx([1.0, 0.0, 0.0], abs=1e-12)


def test_property_2_uniform_window():
    # equal distributions uniform over a window of width k give d_eq = 1/k,
    # strictly increasing as the window narrows
    q = 6
    last = 0.0
    for width in range(q, 0, -1):
        sigma = np.zeros(q)
        sigma[:width] = 1.0 / width
        t = credibility_triple(sigma, sigma)
        assert t.d_eq == pytest.approx(1.0 / width, abs=1e-12)
        assert t.d_eq > last
        last = t.d_eq


# -------------------------------------------------------------------------- xi

def test_xi_zero_for_equal_values():
    model = FittedModel(linear_spec(unit_scales(2)), np.array([0.5, 0.5]), 1.0, 0.0)
    row = [0.3, 0.7]
    assert pair_objective_xi(model, [0.2, 0.8], [0.9, 0.1], row, row) == pytest.approx(0.0)


def test_xi_single_surviving_term():
    model = FittedModel(linear_spec(unit_scales(1)), np.array([1.0]), 1.0, 0.0)
    # crisp better-vs-worse, value gap 0.3
    val = pair_objective_xi(model, one_hot(2, 2), one_hot(1, 2), [0.8], [0.5])
    assert val == pytest.approx(-0.3)


def test_xi_hand_mixed_triple():
    model = FittedModel(linear_spec(unit_scales(1)), np.array([1.0]), 1.0, 0.0)
    val = pair_objective_xi(model, [0.5, 0.5], [0.5, 0.5], [0.7], [0.5])
    assert val == pytest.approx(0.1)


def test_xi_symmetry_random():
    rng = np.random.default_rng(2)
    model = FittedModel(linear_spec(unit_scales(3)), np.array([0.2, 0.3, 0.5]), 1.0, 0.0)
    for _ in range(100):
        q = 4
        si, sj = random_sigma(rng, q), random_sigma(rng, q)
        ri, rj = rng.uniform(size=3), rng.uniform(size=3)
        assert pair_objective_xi(model, si, sj, ri, rj) == pytest.approx(
            pair_objective_xi(model, sj, si, rj, ri), abs=1e-12
        )


# -------------------------------------------------------------------- assembly

def test_assembly_two_crisp_distinct():
    rows = np.array([[0.9, 0.8], [0.1, 0.2]])
    problem = crisp_problem_from_rows(rows, [2, 1], 2)
    spec = linear_spec(problem.scales)
    data = assemble_learning_data(problem, spec)
    v_better = build_feature_map(spec, rows[0])
    v_worse = build_feature_map(spec, rows[1])
    assert data.y.shape == (2, 0)
    assert data.c == pytest.approx(-(v_better - v_worse))


def test_assembly_two_identical_crisp():
    rows = np.array([[0.9, 0.8], [0.1, 0.2]])
    problem = crisp_problem_from_rows(rows, [2, 2], 2)
    spec = linear_spec(problem.scales)
    data = assemble_learning_data(problem, spec)
    assert data.c == pytest.approx(np.zeros(2))
    assert data.y.shape == (2, 1)
    assert data.d_eq == pytest.approx([1.0])
    v0 = build_feature_map(spec, rows[0])
    v1 = build_feature_map(spec, rows[1])
    assert data.y[:, 0] == pytest.approx(v0 - v1)


def test_assembly_matches_per_pair_oracle():
    # three alternatives with the 90%-10% pattern, checked pair by pair
    rng = np.random.default_rng(3)
    rows = rng.uniform(size=(3, 2))
    sigma = make_valued_examples([1, 2, 3], 0.1, 3)
    problem = crisp_problem_from_rows(rows, [1, 2, 3], 3)
    problem = problem.__class__(
        scales=problem.scales, q=3, ref_ids=problem.ref_ids,
        ref_performances=rows, ref_sigma=sigma,
    )
    spec = linear_spec(problem.scales)
    data = assemble_learning_data(problem, spec)

    from valsort.credibility import credibility_triple as triple

    features = [build_feature_map(spec, r) for r in rows]
    c_direct = np.zeros(spec.dim)
    y_cols = []
    for i in range(3):
        for j in range(i + 1, 3):
            t = triple(sigma[i], sigma[j])
            c_direct += (t.d_prec - t.d_succ) * (features[i] - features[j])
            if t.d_eq > 0:
                y_cols.append(t.d_eq * (features[i] - features[j]))
    assert data.c == pytest.approx(c_direct, abs=1e-12)
    assert data.y == pytest.approx(np.array(y_cols).T, abs=1e-12)


def test_assembly_requires_two_refs():
    rows = np.array([[0.5, 0.5]])
    problem = crisp_problem_from_rows(rows, [1], 2)
    with pytest.raises(InsufficientDataError):
        assemble_learning_data(problem, linear_spec(problem.scales))


# --------------------------------------------------------- valued construction

def test_make_valued_examples_interior():
    sigma = make_valued_examples([3], 0.1, 5)
    assert sigma[0] == pytest.approx([0.0, 0.05, 0.9, 0.05, 0.0])


def test_make_valued_examples_boundary():
    sigma = make_valued_examples([1], 0.1, 5)
    assert sigma[0] == pytest.approx([0.9, 0.1, 0.0, 0.0, 0.0])
    sigma = make_valued_examples([5], 0.1, 5)
    assert sigma[0] == pytest.approx([0.0, 0.0, 0.0, 0.1, 0.9])


def test_make_valued_examples_zero_spread_is_one_hot():
    sigma = make_valued_examples([2, 4], 0.0, 4)
    assert sigma[0] == pytest.approx(one_hot(2, 4))
    assert sigma[1] == pytest.approx(one_hot(4, 4))


def test_make_valued_examples_rejects_bad_input():
    with pytest.raises(ValidationError):
        make_valued_examples([0], 0.1, 3)
    with pytest.raises(ValidationError):
        make_valued_examples([1], 1.0, 3)
