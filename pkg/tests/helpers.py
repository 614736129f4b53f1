"""Shared fixtures-by-function for the test suite."""

from __future__ import annotations

import numpy as np

from valsort.credibility import make_valued_examples
from valsort.models import build_base_constraints, uniform_feasible_theta
from valsort.problem import CriterionScale, SortingProblem
from valsort.qp import QpProblem, solve_qp
from valsort.synthgen import GeneratorConfig, make_dataset


def unit_scales(n):
    return tuple(CriterionScale(f"g{j + 1}", 0.0, 1.0) for j in range(n))


def small_problem(seed=0, *, m=16, n=3, q=3, levels=8, spread=0.2, kind="general", rho_gen=0.5):
    """Small seeded synthetic sorting problem."""
    config = GeneratorConfig(
        n_criteria=n,
        n_alternatives=m,
        q=q,
        levels=levels,
        kind=kind,
        rho_gen=rho_gen,
        spread=spread,
        seed=seed,
    )
    return make_dataset(config)


def crisp_problem_from_rows(rows, classes, q, scales=None):
    rows = np.asarray(rows, dtype=float)
    scales = scales or unit_scales(rows.shape[1])
    sigma = make_valued_examples(classes, 0.0, q)
    return SortingProblem(
        scales=tuple(scales),
        q=q,
        ref_ids=tuple(f"a{i}" for i in range(rows.shape[0])),
        ref_performances=rows,
        ref_sigma=sigma,
    )


def random_feasible_theta(spec, rng):
    """A feasible parameter vector near a random target (projection QP)."""
    target = rng.normal(size=spec.dim)
    cons = build_base_constraints(spec)
    sol = solve_qp(QpProblem(np.eye(spec.dim), -target, cons))
    assert sol.status.value == "optimal", sol.status
    return sol.theta


def random_sigma(rng, q):
    raw = rng.uniform(size=q)
    return raw / raw.sum()


def numeric_prox(v, kappa):
    """Numeric minimizer of kappa |z| + (z - v)^2 / 2, independent of the
    shrinkage formula.

    Ternary search localizes the minimum; because the objective is exactly
    quadratic away from zero, a three-point parabola fit then recovers the
    minimizer to ~1e-12 (plain ternary search stalls at sqrt(eps)).
    """

    def f(z):
        return kappa * abs(z) + 0.5 * (z - v) ** 2

    lo, hi = v - 2 * kappa - 1.0, v + 2 * kappa + 1.0
    for _ in range(80):
        m1 = lo + (hi - lo) / 3
        m2 = hi - (hi - lo) / 3
        if f(m1) <= f(m2):
            hi = m2
        else:
            lo = m1
    t = 0.5 * (lo + hi)
    d = 1e-4

    def vertex(center):
        fl, fc, fr = f(center - d), f(center), f(center + d)
        denom = fl - 2 * fc + fr
        if denom <= 0:
            return center
        return center - 0.5 * d * (fr - fl) / denom

    if t > 2 * d:
        candidates = [vertex(t)]
    elif t < -2 * d:
        candidates = [vertex(t)]
    else:
        candidates = [0.0, vertex(3 * d), vertex(-3 * d)]
    return min(candidates, key=f)


def feasibility_violation(spec_constraints, theta):
    eq = (
        float(np.max(np.abs(spec_constraints.a_eq @ theta - spec_constraints.b_eq)))
        if spec_constraints.a_eq.shape[0]
        else 0.0
    )
    ineq = (
        max(0.0, float(np.max(spec_constraints.a_in @ theta - spec_constraints.b_in)))
        if spec_constraints.a_in.shape[0]
        else 0.0
    )
    return max(eq, ineq)
