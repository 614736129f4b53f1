"""Dense convex quadratic programming.

solve_qp minimizes 0.5 x'Px + q'x subject to A_eq x = b_eq and A_in x <= b_in
with a primal-dual interior-point method (Mehrotra predictor-corrector, dense
linear algebra).  solve_lp covers the P = 0 case through the HiGHS simplex
backend, which additionally reports unboundedness reliably.

Problem sizes here are a few hundred variables at most.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg
import scipy.optimize

from .models import LinearConstraintSet
from .problem import ValidationError

_KKT_REG = 1e-10  # static diagonal regularization; spline rows can be rank-deficient


class SolverError(RuntimeError):
    """A subproblem solve failed in a way the caller cannot recover from."""


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITERATIONS = "max_iterations"


@dataclass(frozen=True)
class QpProblem:
    p: np.ndarray
    q: np.ndarray
    constraints: LinearConstraintSet

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        q = np.asarray(self.q, dtype=float).ravel()
        if p.shape != (q.size, q.size):
            raise ValidationError(f"P must be ({q.size}, {q.size}), got {p.shape}")
        if not np.allclose(p, p.T, atol=1e-10):
            raise ValidationError("P must be symmetric")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)


@dataclass(frozen=True)
class QpSolution:
    theta: np.ndarray
    objective: float
    status: SolveStatus
    kkt_residual: float
    eq_duals: np.ndarray
    in_duals: np.ndarray
    iterations: int

    def require_optimal(self, context: str = "solve") -> "QpSolution":
        if self.status != SolveStatus.OPTIMAL:
            raise SolverError(f"{context}: solver returned status {self.status.value}")
        return self


def _independent_eq_rows(a_eq: np.ndarray, b_eq: np.ndarray):
    """Drop linearly dependent equality rows; None signals an inconsistent system."""
    if a_eq.shape[0] == 0:
        return a_eq, b_eq
    r = scipy.linalg.qr(a_eq.T, mode="r", pivoting=True)
    rr, piv = r[0], r[1]
    diag = np.abs(np.diag(rr)) if rr.size else np.array([])
    scale = diag[0] if diag.size and diag[0] > 0 else 1.0
    rank = int(np.sum(diag > 1e-12 * max(1.0, scale)))
    if rank == a_eq.shape[0]:
        return a_eq, b_eq
    sol, *_ = np.linalg.lstsq(a_eq, b_eq, rcond=None)
    if np.max(np.abs(a_eq @ sol - b_eq)) > 1e-8 * (1.0 + np.max(np.abs(b_eq), initial=0.0)):
        return None, None
    keep = np.sort(piv[:rank])
    return a_eq[keep], b_eq[keep]


def _kkt_residual(p, q, a_eq, b_eq, a_in, b_in, x, y, z):
    r_d = p @ x + q
    if a_eq.shape[0]:
        r_d = r_d + a_eq.T @ y
    if a_in.shape[0]:
        r_d = r_d + a_in.T @ z
    pieces = [np.max(np.abs(r_d), initial=0.0)]
    if a_eq.shape[0]:
        pieces.append(np.max(np.abs(a_eq @ x - b_eq)))
    if a_in.shape[0]:
        slack = b_in - a_in @ x
        pieces.append(max(0.0, float(np.max(-slack))))
        pieces.append(float(np.max(np.abs(z * slack))))
    return float(max(pieces))


def _solve_equality_qp(p, q, a_eq, b_eq, max_iterations):
    """Direct KKT solve when there are no inequality rows."""
    nx, me = q.size, a_eq.shape[0]
    kkt = np.zeros((nx + me, nx + me))
    kkt[:nx, :nx] = p + _KKT_REG * np.eye(nx)
    if me:
        kkt[:nx, nx:] = a_eq.T
        kkt[nx:, :nx] = a_eq
        kkt[nx:, nx:] = -_KKT_REG * np.eye(me)
    rhs = np.concatenate((-q, b_eq))
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    x, y = sol[:nx], sol[nx:]
    resid = _kkt_residual(p, q, a_eq, b_eq, np.zeros((0, nx)), np.zeros(0), x, y, np.zeros(0))
    status = SolveStatus.OPTIMAL if resid <= 1e-6 else SolveStatus.UNBOUNDED
    return QpSolution(
        theta=x,
        objective=float(0.5 * x @ p @ x + q @ x),
        status=status,
        kkt_residual=resid,
        eq_duals=y,
        in_duals=np.zeros(0),
        iterations=1,
    )


def _polish(p, q, a_eq, b_eq, a_in, b_in, x, y, z, s):
    """Active-set refinement of a converged interior-point iterate.

    Solves the KKT system restricted to the (apparently) active rows; accepted
    only when it is feasible and strictly improves the KKT residual.
    """
    nx = q.size
    active = np.flatnonzero((z >= s) | (s <= 1e-8))
    a_act = a_in[active]
    stacked_a = np.vstack((a_eq, a_act)) if a_eq.shape[0] else a_act
    stacked_b = np.concatenate((b_eq, b_in[active]))
    red_a, red_b = _independent_eq_rows(stacked_a, stacked_b)
    if red_a is None:
        return None
    me = red_a.shape[0]
    kkt = np.zeros((nx + me, nx + me))
    kkt[:nx, :nx] = p + _KKT_REG * np.eye(nx)
    if me:
        kkt[:nx, nx:] = red_a.T
        kkt[nx:, :nx] = red_a
        kkt[nx:, nx:] = -_KKT_REG * np.eye(me)
    try:
        sol = np.linalg.solve(kkt, np.concatenate((-q, red_b)))
    except np.linalg.LinAlgError:
        return None
    x_new = sol[:nx]
    # recover duals for the original row order via least squares on stationarity
    rows = np.vstack((a_eq, a_act)).T if (a_eq.shape[0] or a_act.shape[0]) else np.zeros((nx, 0))
    duals, *_ = np.linalg.lstsq(rows, -(p @ x_new + q), rcond=None)
    y_new = duals[: a_eq.shape[0]]
    z_new = np.zeros(a_in.shape[0])
    z_new[active] = duals[a_eq.shape[0] :]
    if np.any(z_new < -1e-9):
        return None
    z_new = np.maximum(z_new, 0.0)
    if a_in.shape[0] and np.max(a_in @ x_new - b_in) > 1e-9:
        return None
    if a_eq.shape[0] and np.max(np.abs(a_eq @ x_new - b_eq)) > 1e-9:
        return None
    return x_new, y_new, z_new


class PreparedQp:
    """A QP with fixed quadratic term and constraints, solvable for varying q.

    Factors the q-independent setup (equality-row rank reduction, starting
    point, scale estimates) out of the solve so repeated calls, as in the
    alternating-direction theta-step, skip it.
    """

    def __init__(self, p, constraints: LinearConstraintSet, *, tol: float = 1e-10,
                 max_iterations: int = 200):
        self.p = np.asarray(p, dtype=float)
        self.tol = tol
        self.max_iterations = max_iterations
        self.a_eq, self.b_eq = _independent_eq_rows(constraints.a_eq, constraints.b_eq)
        self.inconsistent = self.a_eq is None
        self.a_in, self.b_in = constraints.a_in, constraints.b_in
        if self.inconsistent:
            return
        if self.a_eq.shape[0]:
            self.x0 = np.linalg.lstsq(self.a_eq, self.b_eq, rcond=None)[0]
        else:
            self.x0 = np.zeros(self.p.shape[0])
        self.b_scale = 1.0 + max(
            np.max(np.abs(self.b_eq), initial=0.0), np.max(np.abs(self.b_in), initial=0.0)
        )
        self.p_scale = float(np.max(np.abs(self.p), initial=0.0))

    def solve(self, q) -> QpSolution:
        q = np.asarray(q, dtype=float).ravel()
        nx = q.size
        if self.inconsistent:
            return QpSolution(
                theta=np.zeros(nx),
                objective=np.inf,
                status=SolveStatus.INFEASIBLE,
                kkt_residual=np.inf,
                eq_duals=np.zeros(0),
                in_duals=np.zeros(0),
                iterations=0,
            )
        p, a_eq, b_eq, a_in, b_in = self.p, self.a_eq, self.b_eq, self.a_in, self.b_in
        me, mi = a_eq.shape[0], a_in.shape[0]
        if mi == 0:
            return _solve_equality_qp(p, q, a_eq, b_eq, self.max_iterations)

        x = self.x0.copy()
        s = np.maximum(b_in - a_in @ x, 1.0)
        z = np.ones(mi)
        y = np.zeros(me)
        b_scale = self.b_scale
        # dual residuals carry round-off proportional to the quadratic term
        q_scale = 1.0 + np.max(np.abs(q), initial=0.0) + self.p_scale
        tol, max_iterations = self.tol, self.max_iterations

        best = None
        for it in range(1, max_iterations + 1):
            r_d = p @ x + q + a_in.T @ z + (a_eq.T @ y if me else 0.0)
            r_eq = (a_eq @ x - b_eq) if me else np.zeros(0)
            r_in = a_in @ x + s - b_in
            mu = float(z @ s) / mi
            obj = float(0.5 * x @ p @ x + q @ x)

            pri_feas = max(np.max(np.abs(r_eq), initial=0.0), float(np.max(np.abs(r_in))))
            dual_feas = float(np.max(np.abs(r_d)))
            gap_ok = mu <= tol * (1.0 + abs(obj))
            if pri_feas <= 1e-9 * b_scale and dual_feas <= 1e-8 * q_scale and gap_ok:
                resid = _kkt_residual(p, q, a_eq, b_eq, a_in, b_in, x, y, z)
                polished = _polish(p, q, a_eq, b_eq, a_in, b_in, x, y, z, s)
                if polished is not None:
                    xp, yp, zp = polished
                    resid_p = _kkt_residual(p, q, a_eq, b_eq, a_in, b_in, xp, yp, zp)
                    if resid_p < resid:
                        x, y, z, resid = xp, yp, zp, resid_p
                        obj = float(0.5 * x @ p @ x + q @ x)
                return QpSolution(x, obj, SolveStatus.OPTIMAL, resid, y, z, it)
            if best is None or pri_feas + mu < best[0]:
                best = (pri_feas + mu, x.copy(), y.copy(), z.copy(), obj)

            # divergence checks
            if np.max(np.abs(x)) > 1e13 or obj < -1e15:
                status = (
                    SolveStatus.UNBOUNDED
                    if pri_feas <= 1e-6 * b_scale
                    else SolveStatus.INFEASIBLE
                )
                resid = _kkt_residual(p, q, a_eq, b_eq, a_in, b_in, x, y, z)
                return QpSolution(x, obj, status, resid, y, z, it)
            if np.max(z) > 1e13:
                resid = _kkt_residual(p, q, a_eq, b_eq, a_in, b_in, x, y, z)
                return QpSolution(x, obj, SolveStatus.INFEASIBLE, resid, y, z, it)

            d = z / s
            w = p + (a_in.T * d) @ a_in + _KKT_REG * np.eye(nx)
            kkt = np.zeros((nx + me, nx + me))
            kkt[:nx, :nx] = w
            if me:
                kkt[:nx, nx:] = a_eq.T
                kkt[nx:, :nx] = a_eq
                kkt[nx:, nx:] = -_KKT_REG * np.eye(me)
            try:
                factor = scipy.linalg.lu_factor(kkt)
            except (np.linalg.LinAlgError, ValueError):
                break

            def newton_step(rc):
                rhs = np.concatenate((-r_d + a_in.T @ (rc / s) - a_in.T @ (d * r_in), -r_eq))
                sol = scipy.linalg.lu_solve(factor, rhs)
                dx = sol[:nx]
                dy = sol[nx:]
                ds = -r_in - a_in @ dx
                dz = -(rc + z * ds) / s
                return dx, dy, ds, dz

            def max_step(v, dv):
                neg = dv < 0
                if not np.any(neg):
                    return 1.0
                return min(1.0, float(np.min(-v[neg] / dv[neg])))

            # predictor
            dx_a, dy_a, ds_a, dz_a = newton_step(z * s)
            alpha_a = min(max_step(s, ds_a), max_step(z, dz_a))
            mu_aff = float((z + alpha_a * dz_a) @ (s + alpha_a * ds_a)) / mi
            sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0

            # corrector
            rc = z * s + ds_a * dz_a - sigma * mu
            dx, dy, ds, dz = newton_step(rc)
            alpha = 0.99 * min(max_step(s, ds), max_step(z, dz))
            alpha = min(1.0, alpha)
            x = x + alpha * dx
            y = y + alpha * dy if me else y
            s = np.maximum(s + alpha * ds, 1e-14)
            z = np.maximum(z + alpha * dz, 1e-14)

        # cap hit: classify using the best iterate
        _, x, y, z, obj = best if best is not None else (0.0, x, y, z, float("nan"))
        r_eq = (a_eq @ x - b_eq) if me else np.zeros(0)
        pri_feas = max(
            np.max(np.abs(r_eq), initial=0.0),
            max(0.0, float(np.max(a_in @ x - b_in))),
        )
        resid = _kkt_residual(p, q, a_eq, b_eq, a_in, b_in, x, y, z)
        status = SolveStatus.MAX_ITERATIONS
        if pri_feas > 1e-6 * b_scale:
            status = SolveStatus.INFEASIBLE
        return QpSolution(
            x, float(0.5 * x @ p @ x + q @ x), status, resid, y, z, max_iterations
        )


def solve_qp(problem: QpProblem, *, tol: float = 1e-10, max_iterations: int = 200) -> QpSolution:
    """Interior-point solve of a dense convex QP.

    Returns status OPTIMAL with KKT residuals within tolerance, or a
    diagnostic status (INFEASIBLE / UNBOUNDED / MAX_ITERATIONS) with the best
    iterate found.  Deterministic for identical inputs.
    """
    return PreparedQp(
        problem.p, problem.constraints, tol=tol, max_iterations=max_iterations
    ).solve(problem.q)


def solve_lp(c, constraints: LinearConstraintSet, *, max_iterations: int = 20000) -> QpSolution:
    """Minimize c'x subject to the constraint set (the P = 0 case).

    Backed by HiGHS, which detects infeasibility and unboundedness exactly;
    duals are recovered from the constraint marginals.
    """
    c = np.asarray(c, dtype=float).ravel()
    a_eq = constraints.a_eq if constraints.a_eq.shape[0] else None
    b_eq = constraints.b_eq if constraints.a_eq.shape[0] else None
    a_in = constraints.a_in if constraints.a_in.shape[0] else None
    b_in = constraints.b_in if constraints.a_in.shape[0] else None
    res = scipy.optimize.linprog(
        c,
        A_ub=a_in,
        b_ub=b_in,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=(None, None),
        method="highs",
        options={"maxiter": max_iterations},
    )
    status_map = {
        0: SolveStatus.OPTIMAL,
        1: SolveStatus.MAX_ITERATIONS,
        2: SolveStatus.INFEASIBLE,
        3: SolveStatus.UNBOUNDED,
    }
    status = status_map.get(res.status, SolveStatus.MAX_ITERATIONS)
    nx = c.size
    x = np.asarray(res.x, dtype=float) if res.x is not None else np.zeros(nx)
    eq_duals = (
        -np.asarray(res.eqlin.marginals, dtype=float)
        if a_eq is not None and status == SolveStatus.OPTIMAL
        else np.zeros(0 if a_eq is None else a_eq.shape[0])
    )
    in_duals = (
        -np.asarray(res.ineqlin.marginals, dtype=float)
        if a_in is not None and status == SolveStatus.OPTIMAL
        else np.zeros(0 if a_in is None else a_in.shape[0])
    )
    p0 = np.zeros((nx, nx))
    resid = (
        _kkt_residual(
            p0,
            c,
            constraints.a_eq,
            constraints.b_eq,
            constraints.a_in,
            constraints.b_in,
            x,
            eq_duals,
            in_duals,
        )
        if status == SolveStatus.OPTIMAL
        else np.inf
    )
    return QpSolution(
        theta=x,
        objective=float(c @ x) if status == SolveStatus.OPTIMAL else np.inf,
        status=status,
        kkt_residual=resid,
        eq_duals=eq_duals,
        in_duals=in_duals,
        iterations=int(getattr(res, "nit", 0) or 0),
    )


def dual_objective(problem: QpProblem, solution: QpSolution) -> float:
    """Lagrangian dual value at the returned multipliers (weak-duality checks)."""
    x = solution.theta
    quad = float(0.5 * x @ problem.p @ x)
    val = -quad
    if solution.eq_duals.size:
        val -= float(problem.constraints.b_eq @ solution.eq_duals)
    if solution.in_duals.size:
        val -= float(problem.constraints.b_in @ solution.in_duals)
    return val
