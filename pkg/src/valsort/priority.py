"""Class-priority performance adjustment.

Measures per-class cardinal/ordinal error of the fitted model, scores each
class's credible consistency (linear in theta), and iteratively improves the
scores in priority order: a prefix search over feasible ascent directions, a
ratio-test line search, and a complexity-capped acceptance loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assigner import predict_soft
from .metrics import ranking_positions
from .models import (
    FittedModel,
    LinearConstraintSet,
    build_base_constraints,
    build_complexity_form,
    feature_matrix,
)
from .problem import SortingProblem, ValidationError
from .qp import SolveStatus, SolverError, solve_lp

ACTIVE_TOL = 1e-8  # inequality rows this close to tight join the tangent cone
SLOPE_TOL = 1e-10  # a prefix counts as improvable only above this max-min slope
LAMBDA_MAX = 1e3
ZERO_STEP_TOL = 1e-12

TERMINATE_ZERO_DIRECTION = "zero_direction"
TERMINATE_ZERO_STEP = "zero_step"
TERMINATE_COMPLEXITY_CAP = "complexity_cap"
TERMINATE_ITERATION_CAP = "iteration_cap"
TERMINATE_VALIDATION_STOP = "validation_stop"


@dataclass(frozen=True)
class ClassPerformance:
    card_pf: np.ndarray
    ord_pf: np.ndarray


def class_performance(actual_sigma, predicted_sigma) -> ClassPerformance:
    """Per-class mean credibility gap and mean normalized rank-position distance."""
    actual = np.asarray(actual_sigma, dtype=float)
    predicted = np.asarray(predicted_sigma, dtype=float)
    if actual.shape != predicted.shape:
        raise ValidationError(f"shape mismatch: {actual.shape} vs {predicted.shape}")
    q = actual.shape[1]
    card = np.mean(np.abs(actual - predicted), axis=0)
    pos_a = np.vstack([ranking_positions(row) for row in actual])
    pos_p = np.vstack([ranking_positions(row) for row in predicted])
    ordv = np.mean(np.abs(pos_a - pos_p), axis=0) / (q - 1)
    return ClassPerformance(card_pf=card, ord_pf=ordv)


@dataclass(frozen=True)
class ConsistencyScores:
    values: np.ndarray  # (q,)
    gradients: np.ndarray  # (q, dim)


def class_consistency_scores(model: FittedModel, problem: SortingProblem) -> ConsistencyScores:
    """Credible-consistency score per class and its (constant) gradient in theta.

    The score sums, over ordered reference pairs, the credibility-weighted
    value advantages of a class's members over lower classes and deficits
    against higher ones; linearity in theta makes the gradient exact.
    """
    features = feature_matrix(model.spec, problem.ref_performances)
    values = features @ model.theta
    sigma = problem.ref_sigma
    mass = sigma.sum(axis=0)  # per-class credibility mass
    val_mass = sigma.T @ values
    grad_mass = sigma.T @ features  # (q, dim)

    below = np.concatenate(([0.0], np.cumsum(mass)[:-1]))
    above = mass.sum() - below - mass
    val_below = np.concatenate(([0.0], np.cumsum(val_mass)[:-1]))
    val_above = val_mass.sum() - val_below - val_mass
    grad_cum = np.cumsum(grad_mass, axis=0)
    grad_below = np.vstack((np.zeros(grad_mass.shape[1]), grad_cum[:-1]))
    grad_above = grad_cum[-1] - grad_below - grad_mass

    o_values = val_mass * (below - above) + mass * (val_above - val_below)
    o_grads = grad_mass * (below - above)[:, None] + mass[:, None] * (grad_above - grad_below)
    return ConsistencyScores(values=o_values, gradients=o_grads)


def validate_priority(tau, q: int) -> tuple[int, ...]:
    tau = tuple(int(t) for t in tau)
    if sorted(tau) != list(range(1, q + 1)):
        raise ValidationError(f"priority ranking must be a permutation of 1..{q}, got {tau}")
    return tau


def tangent_cone(constraints: LinearConstraintSet, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Equality rows and active inequality rows restricting a feasible direction."""
    slack = constraints.b_in - constraints.a_in @ theta
    active = constraints.a_in[slack <= ACTIVE_TOL]
    return constraints.a_eq, active


def find_ascent_direction(
    gradients: np.ndarray,
    tau,
    theta: np.ndarray,
    constraints: LinearConstraintSet,
) -> tuple[np.ndarray | None, int, float]:
    """Longest priority prefix with a common strict-ascent direction.

    The priority chain forces the selected classes to form a prefix of tau, so
    the search tries prefix lengths q..1, each as an LP maximizing the minimum
    slope over the prefix subject to the tangent cone and a unit box on the
    direction.  Returns (direction, prefix length, max-min slope), or
    (None, 0, 0.0) when no prefix admits strict ascent.
    """
    q = gradients.shape[0]
    tau = validate_priority(tau, q)
    dim = theta.size
    a_eq_cone, a_act = tangent_cone(constraints, theta)

    n_eq = a_eq_cone.shape[0]
    a_eq = np.zeros((n_eq, dim + 1))
    a_eq[:, :dim] = a_eq_cone
    b_eq = np.zeros(n_eq)

    static_rows = []
    if a_act.shape[0]:
        act = np.zeros((a_act.shape[0], dim + 1))
        act[:, :dim] = a_act
        static_rows.append(act)
    box = np.zeros((2 * dim, dim + 1))
    box[:dim, :dim] = np.eye(dim)
    box[dim:, :dim] = -np.eye(dim)
    static_rows.append(box)
    static = np.vstack(static_rows)
    static_rhs = np.concatenate((np.zeros(a_act.shape[0]), np.ones(2 * dim)))

    cost = np.zeros(dim + 1)
    cost[dim] = -1.0  # maximize t

    for k in range(q, 0, -1):
        prefix = [tau[s] - 1 for s in range(k)]
        rows = np.zeros((k, dim + 1))
        rows[:, :dim] = -gradients[prefix]
        rows[:, dim] = 1.0
        a_in = np.vstack((rows, static))
        b_in = np.concatenate((np.zeros(k), static_rhs))
        sol = solve_lp(cost, LinearConstraintSet(a_eq=a_eq, b_eq=b_eq, a_in=a_in, b_in=b_in))
        if sol.status != SolveStatus.OPTIMAL:
            raise SolverError(f"ascent-direction LP failed with status {sol.status.value}")
        t_star = -sol.objective
        if t_star >= SLOPE_TOL:
            return sol.theta[:dim], k, float(t_star)
    return None, 0, 0.0


def line_search(
    theta: np.ndarray,
    direction: np.ndarray,
    constraints: LinearConstraintSet,
    *,
    lambda_max: float = LAMBDA_MAX,
) -> tuple[float, bool]:
    """Largest feasible step along the direction (exact ratio test).

    The selected classes' combined score is linear in the step with positive
    slope, so the maximizer is the last feasible point.  Returns (step,
    capped); capped means no inequality row blocks and the configured ceiling
    applied.
    """
    if np.max(np.abs(constraints.a_eq @ direction), initial=0.0) > 1e-7:
        raise SolverError("direction leaves the equality manifold")
    along = constraints.a_in @ direction
    slack = constraints.b_in - constraints.a_in @ theta
    blocking = along > 1e-12
    if not np.any(blocking):
        return lambda_max, True
    ratios = np.maximum(slack[blocking], 0.0) / along[blocking]
    lam = float(ratios.min())
    if lam > lambda_max:
        return lambda_max, True
    return lam, False


@dataclass
class AdjustmentStep:
    iteration: int
    prefix_len: int
    t_star: float
    step: float
    capped: bool
    omega_before: float
    omega_after: float
    o_values: list[float]
    card_pf: list[float]
    ord_pf: list[float]
    accepted: bool

    def record(self) -> dict:
        return {
            "iteration": self.iteration,
            "prefix_len": self.prefix_len,
            "t_star": self.t_star,
            "step": self.step,
            "capped": self.capped,
            "omega_before": self.omega_before,
            "omega_after": self.omega_after,
            "o_values": self.o_values,
            "card_pf": self.card_pf,
            "ord_pf": self.ord_pf,
            "accepted": self.accepted,
        }


@dataclass
class AdjustmentTrace:
    omega_initial: float
    steps: list[AdjustmentStep] = field(default_factory=list)
    termination: str = TERMINATE_ITERATION_CAP

    @property
    def accepted_steps(self) -> list[AdjustmentStep]:
        return [s for s in self.steps if s.accepted]

    def records(self) -> list[dict]:
        out = [s.record() for s in self.steps]
        out.append({"termination": self.termination, "omega_initial": self.omega_initial})
        return out


def adjust(
    model: FittedModel,
    problem: SortingProblem,
    tau,
    zeta: float | None = 0.2,
    *,
    max_iterations: int = 100,
    validation_fraction: float | None = None,
    seed: int = 0,
    lambda_max: float = LAMBDA_MAX,
) -> tuple[FittedModel, AdjustmentTrace]:
    """Iteratively improve per-class consistency in priority order.

    With a fixed zeta the loop stops once an update would push the complexity
    above (1 + zeta) times its initial value (the update is rejected).  With
    validation_fraction set, a held-out share of the reference set is monitored
    instead: the loop stops when the mean cardinal error of the two
    top-priority classes stops improving on it.
    """
    tau = validate_priority(tau, problem.q)
    if zeta is None and validation_fraction is None:
        raise ValidationError("either zeta or validation_fraction must be given")
    if zeta is not None and zeta <= 0:
        raise ValidationError("zeta must be positive")

    if validation_fraction:
        rng = np.random.default_rng(seed)
        perm = rng.permutation(problem.n_ref)
        n_val = max(1, int(round(validation_fraction * problem.n_ref)))
        val_idx, fit_idx = perm[:n_val], perm[n_val:]
        if fit_idx.size < 2:
            raise ValidationError("validation split leaves too few reference alternatives")
        work = problem.subset_refs(np.sort(fit_idx))
        val_rows = problem.ref_performances[np.sort(val_idx)]
        val_sigma = problem.ref_sigma[np.sort(val_idx)]
    else:
        work = problem
        val_rows = val_sigma = None

    form = build_complexity_form(model.spec, model.c1, model.c2)
    constraints = build_base_constraints(model.spec)
    scores = class_consistency_scores(model, work)  # gradients are constant in theta
    gradients = scores.gradients

    theta = model.theta.copy()
    omega_initial = form.value(theta)
    trace = AdjustmentTrace(omega_initial=omega_initial)

    top_two = [tau[0] - 1] + ([tau[1] - 1] if problem.q > 1 else [])

    def snapshot(current_theta):
        m = model.with_theta(current_theta)
        predicted = predict_soft(m, work, work.ref_performances)
        perf = class_performance(work.ref_sigma, predicted)
        o_vals = gradients @ current_theta
        return perf, o_vals

    def validation_error(current_theta):
        m = model.with_theta(current_theta)
        predicted = predict_soft(m, work, val_rows)
        perf = class_performance(val_sigma, predicted)
        return float(np.mean(perf.card_pf[top_two]))

    best_val = validation_error(theta) if validation_fraction else None

    for it in range(1, max_iterations + 1):
        direction, prefix_len, t_star = find_ascent_direction(gradients, tau, theta, constraints)
        if direction is None:
            trace.termination = TERMINATE_ZERO_DIRECTION
            break
        lam, capped = line_search(theta, direction, constraints, lambda_max=lambda_max)
        if lam <= ZERO_STEP_TOL:
            trace.termination = TERMINATE_ZERO_STEP
            break
        candidate = theta + lam * direction
        omega_before = form.value(theta)
        omega_after = form.value(candidate)
        if zeta is not None and omega_after > (1.0 + zeta) * omega_initial:
            perf, o_vals = snapshot(theta)
            trace.steps.append(
                AdjustmentStep(
                    iteration=it,
                    prefix_len=prefix_len,
                    t_star=t_star,
                    step=lam,
                    capped=capped,
                    omega_before=omega_before,
                    omega_after=omega_after,
                    o_values=[float(v) for v in o_vals],
                    card_pf=[float(v) for v in perf.card_pf],
                    ord_pf=[float(v) for v in perf.ord_pf],
                    accepted=False,
                )
            )
            trace.termination = TERMINATE_COMPLEXITY_CAP
            break
        theta = candidate
        perf, o_vals = snapshot(theta)
        trace.steps.append(
            AdjustmentStep(
                iteration=it,
                prefix_len=prefix_len,
                t_star=t_star,
                step=lam,
                capped=capped,
                omega_before=omega_before,
                omega_after=omega_after,
                o_values=[float(v) for v in o_vals],
                card_pf=[float(v) for v in perf.card_pf],
                ord_pf=[float(v) for v in perf.ord_pf],
                accepted=True,
            )
        )
        if validation_fraction:
            current = validation_error(theta)
            if current >= best_val:
                trace.termination = TERMINATE_VALIDATION_STOP
                break
            best_val = current
    else:
        trace.termination = TERMINATE_ITERATION_CAP

    return model.with_theta(theta), trace
