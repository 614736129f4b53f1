"""Additive value models as a shared linear form U(a) = theta . V(a).

Four marginal-value families (linear, piecewise-linear, cubic-spline, general
monotone) share the same machinery: a feature map V(a), a linear constraint
system enforcing monotonicity and normalization, and a quadratic complexity
form used for regularization.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .problem import (
    CriterionScale,
    RangeError,
    UnknownLevelError,
    ValidationError,
)

# Tolerance for snapping a performance onto a scale endpoint or a grid level
# before declaring it out of range / unknown (CSV round-trip robustness).
_SNAP_REL = 1e-9


class ModelKind(str, Enum):
    LINEAR = "linear"
    PIECEWISE_LINEAR = "piecewise_linear"
    SPLINE = "spline"
    GENERAL = "general"


@dataclass(frozen=True)
class ModelSpec:
    """Value-model family plus the per-criterion grids fixing the theta layout.

    grids[j] holds, per criterion, the breakpoints x_j^0..x_j^gamma_j
    (equal-length sub-intervals for PIECEWISE_LINEAR / SPLINE) or the sorted
    distinct characteristic levels (GENERAL).  For LINEAR the grid is just
    (alpha_j, beta_j).
    """

    kind: ModelKind
    scales: tuple[CriterionScale, ...]
    grids: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.grids) != len(self.scales):
            raise ValidationError("one grid per criterion required")
        grids = []
        for scale, grid in zip(self.scales, self.grids):
            g = np.asarray(grid, dtype=float)
            if g.ndim != 1 or g.size < 2:
                raise ValidationError(f"criterion {scale.name}: grid needs at least 2 points")
            if np.any(np.diff(g) <= 0):
                raise ValidationError(f"criterion {scale.name}: grid must be strictly increasing")
            if abs(g[0] - scale.alpha) > _SNAP_REL * max(1.0, abs(scale.alpha)) or abs(
                g[-1] - scale.beta
            ) > _SNAP_REL * max(1.0, abs(scale.beta)):
                raise ValidationError(f"criterion {scale.name}: grid must span [alpha, beta]")
            grids.append(g)
        object.__setattr__(self, "grids", tuple(grids))
        object.__setattr__(self, "scales", tuple(self.scales))

    @property
    def n_criteria(self) -> int:
        return len(self.scales)

    def block_sizes(self) -> list[int]:
        """Number of theta entries per criterion, in layout order."""
        out = []
        for grid in self.grids:
            intervals = grid.size - 1
            if self.kind == ModelKind.LINEAR:
                out.append(1)
            elif self.kind == ModelKind.PIECEWISE_LINEAR:
                out.append(intervals)
            elif self.kind == ModelKind.SPLINE:
                out.append(4 * intervals)
            else:
                out.append(grid.size)
        return out

    def block_slices(self) -> list[slice]:
        sizes = self.block_sizes()
        offsets = np.concatenate(([0], np.cumsum(sizes)))
        return [slice(int(offsets[j]), int(offsets[j + 1])) for j in range(len(sizes))]

    @property
    def dim(self) -> int:
        return int(sum(self.block_sizes()))

    def gammas(self) -> list[int]:
        """Sub-interval counts (PIECEWISE_LINEAR / SPLINE layouts)."""
        return [g.size - 1 for g in self.grids]


def linear_spec(scales) -> ModelSpec:
    grids = tuple(np.array([s.alpha, s.beta]) for s in scales)
    return ModelSpec(ModelKind.LINEAR, tuple(scales), grids)


def _equal_grids(scales, gammas) -> tuple[np.ndarray, ...]:
    if isinstance(gammas, int):
        gammas = [gammas] * len(scales)
    if len(gammas) != len(scales):
        raise ValidationError("one gamma per criterion required")
    grids = []
    for s, gamma in zip(scales, gammas):
        if gamma < 1:
            raise ValidationError(f"criterion {s.name}: gamma must be >= 1")
        grids.append(np.linspace(s.alpha, s.beta, int(gamma) + 1))
    return tuple(grids)


def piecewise_spec(scales, gammas) -> ModelSpec:
    return ModelSpec(ModelKind.PIECEWISE_LINEAR, tuple(scales), _equal_grids(scales, gammas))


def spline_spec(scales, gammas) -> ModelSpec:
    return ModelSpec(ModelKind.SPLINE, tuple(scales), _equal_grids(scales, gammas))


def general_spec(scales, performances) -> ModelSpec:
    """GENERAL spec whose grids are the distinct observed values per criterion.

    The observed extremes become the scale bounds: the characteristic grid is
    the model's whole domain (values beyond it clamp during evaluation).
    """
    perf = np.asarray(performances, dtype=float)
    if perf.ndim != 2 or perf.shape[1] != len(scales):
        raise ValidationError("performances must be (m, n) matching the scales")
    grids, narrowed = [], []
    for j, s in enumerate(scales):
        levels = np.unique(perf[:, j])
        if levels.size < 2:
            raise ValidationError(f"criterion {s.name}: needs at least 2 distinct levels")
        grids.append(levels)
        narrowed.append(CriterionScale(s.name, float(levels[0]), float(levels[-1]), s.direction))
    return ModelSpec(ModelKind.GENERAL, tuple(narrowed), tuple(grids))


def make_spec(kind, scales, *, gammas=None, performances=None) -> ModelSpec:
    kind = ModelKind(kind)
    if kind == ModelKind.LINEAR:
        return linear_spec(scales)
    if kind == ModelKind.PIECEWISE_LINEAR:
        return piecewise_spec(scales, gammas if gammas is not None else 2)
    if kind == ModelKind.SPLINE:
        return spline_spec(scales, gammas if gammas is not None else 2)
    if performances is None:
        raise ValidationError("GENERAL spec requires observed performances")
    return general_spec(scales, performances)


@dataclass(frozen=True)
class LinearConstraintSet:
    """Equality rows a_eq.theta = b_eq and inequality rows a_in.theta <= b_in."""

    a_eq: np.ndarray
    b_eq: np.ndarray
    a_in: np.ndarray
    b_in: np.ndarray

    def __post_init__(self):
        a_eq = np.atleast_2d(np.asarray(self.a_eq, dtype=float))
        a_in = np.atleast_2d(np.asarray(self.a_in, dtype=float))
        object.__setattr__(self, "a_eq", a_eq)
        object.__setattr__(self, "a_in", a_in)
        object.__setattr__(self, "b_eq", np.asarray(self.b_eq, dtype=float).ravel())
        object.__setattr__(self, "b_in", np.asarray(self.b_in, dtype=float).ravel())
        if self.a_eq.shape[0] != self.b_eq.size or self.a_in.shape[0] != self.b_in.size:
            raise ValidationError("constraint rows and right-hand sides disagree")

    @property
    def dim(self) -> int:
        return self.a_eq.shape[1] if self.a_eq.size else self.a_in.shape[1]


@dataclass(frozen=True)
class ComplexityForm:
    """Symmetric PSD matrix h with multipliers folded in: Omega(theta) = theta' h theta."""

    h: np.ndarray
    c1: float
    c2: float

    def value(self, theta: np.ndarray) -> float:
        theta = np.asarray(theta, dtype=float)
        return float(theta @ self.h @ theta)


@dataclass(frozen=True)
class FittedModel:
    """A value model ready for evaluation: spec, flat parameter vector, multipliers."""

    spec: ModelSpec
    theta: np.ndarray
    c1: float = 1.0
    c2: float = 1.0

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).ravel()
        if theta.size != self.spec.dim:
            raise ValidationError(
                f"theta has {theta.size} entries, spec layout needs {self.spec.dim}"
            )
        object.__setattr__(self, "theta", theta)

    def with_theta(self, theta) -> "FittedModel":
        return replace(self, theta=np.asarray(theta, dtype=float))


def _locate_interval(grid: np.ndarray, x: float) -> int:
    """0-based sub-interval index; values equal to an interior breakpoint go left."""
    k = int(np.searchsorted(grid, x, side="left")) - 1
    return min(max(k, 0), grid.size - 2)


def _check_range(scale: CriterionScale, x: float) -> float:
    snap = _SNAP_REL * max(1.0, abs(scale.alpha), abs(scale.beta))
    if x < scale.alpha - snap or x > scale.beta + snap:
        raise RangeError(
            f"criterion {scale.name}: performance {x} outside [{scale.alpha}, {scale.beta}]"
        )
    return min(max(x, scale.alpha), scale.beta)


def build_feature_map(spec: ModelSpec, row, *, interpolate_general: bool = False) -> np.ndarray:
    """Feature vector V(a) for one performance row, in the spec's theta layout.

    For GENERAL, a value off the characteristic grid raises UnknownLevelError
    unless interpolate_general is set, in which case the marginal value is a
    linear blend of the two nearest characteristic points (clamped outside the
    grid range).
    """
    row = np.asarray(row, dtype=float).ravel()
    if row.size != spec.n_criteria:
        raise ValidationError(f"expected {spec.n_criteria} performances, got {row.size}")
    v = np.zeros(spec.dim)
    for j, (scale, grid, sl) in enumerate(zip(spec.scales, spec.grids, spec.block_slices())):
        x = row[j]
        if spec.kind == ModelKind.GENERAL and interpolate_general:
            x = min(max(x, scale.alpha), scale.beta)
        else:
            x = _check_range(scale, x)
        if spec.kind == ModelKind.LINEAR:
            v[sl.start] = (x - scale.alpha) / scale.span
        elif spec.kind == ModelKind.PIECEWISE_LINEAR:
            k = _locate_interval(grid, x)
            v[sl.start : sl.start + k] = 1.0
            v[sl.start + k] = (x - grid[k]) / (grid[k + 1] - grid[k])
        elif spec.kind == ModelKind.SPLINE:
            k = _locate_interval(grid, x)
            off = sl.start + 4 * k
            v[off : off + 4] = (1.0, x, x * x, x * x * x)
        else:
            idx = int(np.searchsorted(grid, x))
            snap = _SNAP_REL * max(1.0, abs(x))
            for cand in (idx - 1, idx):
                if 0 <= cand < grid.size and abs(grid[cand] - x) <= snap:
                    v[sl.start + cand] = 1.0
                    break
            else:
                if not interpolate_general:
                    raise UnknownLevelError(
                        f"criterion {scale.name}: value {x} not a characteristic level"
                    )
                k = _locate_interval(grid, x)
                t = (x - grid[k]) / (grid[k + 1] - grid[k])
                v[sl.start + k] = 1.0 - t
                v[sl.start + k + 1] = t
    return v


def feature_matrix(spec: ModelSpec, rows, *, interpolate_general: bool = False) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    return np.vstack(
        [build_feature_map(spec, r, interpolate_general=interpolate_general) for r in rows]
    ) if rows.shape[0] else np.zeros((0, spec.dim))


def evaluate_value(model: FittedModel, row) -> float:
    """Comprehensive value U(a) = theta . V(a)."""
    return float(model.theta @ build_feature_map(model.spec, row, interpolate_general=True))


def evaluate_values(model: FittedModel, rows) -> np.ndarray:
    return feature_matrix(model.spec, rows, interpolate_general=True) @ model.theta


def build_base_constraints(spec: ModelSpec) -> LinearConstraintSet:
    """The monotonicity/normalization constraint system for the spec's family."""
    p = spec.dim
    slices = spec.block_slices()
    eq_rows, eq_rhs, in_rows, in_rhs = [], [], [], []

    def _eq(row, rhs):
        eq_rows.append(row)
        eq_rhs.append(rhs)

    def _le(row, rhs):
        in_rows.append(row)
        in_rhs.append(rhs)

    if spec.kind in (ModelKind.LINEAR, ModelKind.PIECEWISE_LINEAR):
        _eq(np.ones(p), 1.0)
        for i in range(p):
            row = np.zeros(p)
            row[i] = -1.0
            _le(row, 0.0)
    elif spec.kind == ModelKind.GENERAL:
        total = np.zeros(p)
        for grid, sl in zip(spec.grids, slices):
            anchor = np.zeros(p)
            anchor[sl.start] = 1.0
            _eq(anchor, 0.0)
            total[sl.stop - 1] = 1.0
            for k in range(grid.size - 1):
                row = np.zeros(p)
                row[sl.start + k] = 1.0
                row[sl.start + k + 1] = -1.0
                _le(row, 0.0)
        _eq(total, 1.0)
    else:
        def poly(x):
            return np.array([1.0, x, x * x, x * x * x])

        def dpoly(x):
            return np.array([0.0, 1.0, 2.0 * x, 3.0 * x * x])

        def ddpoly(x):
            return np.array([0.0, 0.0, 2.0, 6.0 * x])

        total = np.zeros(p)
        for grid, sl in zip(spec.grids, slices):
            gamma = grid.size - 1
            # continuity of value / first / second derivative at interior breakpoints
            for k in range(1, gamma):
                x = grid[k]
                for basis in (poly, dpoly, ddpoly):
                    row = np.zeros(p)
                    row[sl.start + 4 * (k - 1) : sl.start + 4 * k] = basis(x)
                    row[sl.start + 4 * k : sl.start + 4 * (k + 1)] -= basis(x)
                    _eq(row, 0.0)
            # value and slope non-negative at every breakpoint (piece k covers x^k,
            # piece 1 also covers x^0)
            for k in range(gamma + 1):
                piece = max(k, 1)
                x = grid[k]
                for basis in (poly, dpoly):
                    row = np.zeros(p)
                    row[sl.start + 4 * (piece - 1) : sl.start + 4 * piece] = -basis(x)
                    _le(row, 0.0)
            anchor = np.zeros(p)
            anchor[sl.start : sl.start + 4] = poly(grid[0])
            _eq(anchor, 0.0)
            total[sl.stop - 4 : sl.stop] = poly(grid[-1])
        _eq(total, 1.0)

    return LinearConstraintSet(
        a_eq=np.array(eq_rows).reshape(len(eq_rows), p),
        b_eq=np.array(eq_rhs),
        a_in=np.array(in_rows).reshape(len(in_rows), p),
        b_in=np.array(in_rhs),
    )


def build_complexity_form(spec: ModelSpec, c1: float, c2: float = 0.0) -> ComplexityForm:
    """Quadratic complexity form for the spec's family, multipliers folded in.

    LINEAR uses only c1 (the paper-style single multiplier C); the other
    families require both c1 (trade-off weight term) and c2 (shape term).
    """
    if c1 <= 0:
        raise ValidationError("complexity multiplier c1 must be positive")
    if spec.kind != ModelKind.LINEAR and c2 <= 0:
        raise ValidationError("complexity multiplier c2 must be positive")
    p = spec.dim
    h = np.zeros((p, p))
    slices = spec.block_slices()

    if spec.kind == ModelKind.LINEAR:
        h[np.diag_indices(p)] = c1
    elif spec.kind == ModelKind.PIECEWISE_LINEAR:
        for scale, grid, sl in zip(spec.scales, spec.grids, slices):
            gamma = grid.size - 1
            h[sl, sl] += c1  # (sum of deltas)^2 expands to an all-ones block
            kappa = gamma / scale.span
            for t in range(gamma - 1):
                row = np.zeros(p)
                row[sl.start + t] = -kappa
                row[sl.start + t + 1] = kappa
                h += c2 * np.outer(row, row)
    elif spec.kind == ModelKind.GENERAL:
        for grid, sl in zip(spec.grids, slices):
            row = np.zeros(p)
            row[sl.stop - 1] = 1.0
            h += c1 * np.outer(row, row)
            for k in range(1, grid.size - 1):
                left = 1.0 / (grid[k] - grid[k - 1])
                right = 1.0 / (grid[k + 1] - grid[k])
                row = np.zeros(p)
                row[sl.start + k - 1] = left
                row[sl.start + k] = -(left + right)
                row[sl.start + k + 1] = right
                h += c2 * np.outer(row, row)
    else:
        for grid, sl in zip(spec.grids, slices):
            gamma = grid.size - 1
            beta = grid[-1]
            row = np.zeros(p)
            row[sl.stop - 4 : sl.stop] = (1.0, beta, beta * beta, beta**3)
            h += c1 * np.outer(row, row)
            # integral of (2*s2 + 6*s3*x)^2 over each piece, expanded in closed form
            for k in range(gamma):
                xl, xr = grid[k], grid[k + 1]
                span1 = xr - xl
                span2 = xr * xr - xl * xl
                span3 = xr**3 - xl**3
                i2 = sl.start + 4 * k + 2
                i3 = i2 + 1
                h[i2, i2] += c2 * 4.0 * span1
                h[i2, i3] += c2 * 6.0 * span2
                h[i3, i2] += c2 * 6.0 * span2
                h[i3, i3] += c2 * 12.0 * span3

    return ComplexityForm(h=h, c1=float(c1), c2=float(c2))


def complexity_value(model: FittedModel) -> float:
    """Omega of a fitted model with its own multipliers."""
    return build_complexity_form(model.spec, model.c1, model.c2).value(model.theta)


def uniform_feasible_theta(spec: ModelSpec) -> np.ndarray:
    """The uniform model: equal trade-off weights, linear marginals. Feasible for all kinds."""
    n = spec.n_criteria
    theta = np.zeros(spec.dim)
    for scale, grid, sl in zip(spec.scales, spec.grids, spec.block_slices()):
        if spec.kind == ModelKind.LINEAR:
            theta[sl.start] = 1.0 / n
        elif spec.kind == ModelKind.PIECEWISE_LINEAR:
            gamma = grid.size - 1
            theta[sl] = 1.0 / (n * gamma)
        elif spec.kind == ModelKind.GENERAL:
            theta[sl] = (grid - grid[0]) / (n * (grid[-1] - grid[0]))
        else:
            slope = 1.0 / (n * scale.span)
            for k in range(grid.size - 1):
                off = sl.start + 4 * k
                theta[off] = -scale.alpha * slope
                theta[off + 1] = slope
    return theta


def marginal_values(model: FittedModel, j: int, xs) -> np.ndarray:
    """Marginal value u_j at the given performance levels (vectorized)."""
    xs = np.asarray(xs, dtype=float).ravel()
    spec = model.spec
    scale, grid, sl = spec.scales[j], spec.grids[j], spec.block_slices()[j]
    block = model.theta[sl]
    out = np.zeros_like(xs)
    for i, x in enumerate(xs):
        if spec.kind == ModelKind.LINEAR:
            out[i] = block[0] * (x - scale.alpha) / scale.span
        elif spec.kind == ModelKind.PIECEWISE_LINEAR:
            k = _locate_interval(grid, x)
            frac = (x - grid[k]) / (grid[k + 1] - grid[k])
            out[i] = block[:k].sum() + frac * block[k]
        elif spec.kind == ModelKind.SPLINE:
            k = _locate_interval(grid, x)
            s = block[4 * k : 4 * (k + 1)]
            out[i] = s[0] + s[1] * x + s[2] * x * x + s[3] * x**3
        else:
            x = min(max(x, grid[0]), grid[-1])
            out[i] = float(np.interp(x, grid, block))
    return out


def marginal_slope(model: FittedModel, j: int, xs) -> np.ndarray:
    """du_j/dx at the given levels (SPLINE analytic derivative)."""
    if model.spec.kind != ModelKind.SPLINE:
        raise ValidationError("analytic slope only defined for spline models")
    xs = np.asarray(xs, dtype=float).ravel()
    grid = model.spec.grids[j]
    block = model.theta[model.spec.block_slices()[j]]
    out = np.zeros_like(xs)
    for i, x in enumerate(xs):
        k = _locate_interval(grid, x)
        s = block[4 * k : 4 * (k + 1)]
        out[i] = s[1] + 2.0 * s[2] * x + 3.0 * s[3] * x * x
    return out


def spline_slope_violation(model: FittedModel, *, grid_points: int = 64) -> list[int]:
    """Criteria whose fitted spline dips below slope -1e-8 on a dense check grid."""
    offenders = []
    for j, grid in enumerate(model.spec.grids):
        worst = np.inf
        for k in range(grid.size - 1):
            xs = np.linspace(grid[k], grid[k + 1], grid_points)
            worst = min(worst, float(marginal_slope(model, j, xs).min()))
        if worst < -1e-8:
            offenders.append(j)
    return offenders


def render_marginals(model: FittedModel, samples_per_interval: int = 32) -> list[tuple[np.ndarray, np.ndarray]]:
    """Sampled (x, u_j(x)) curves per criterion.

    GENERAL models render as the polyline through their characteristic points;
    the other families are sampled per sub-interval.
    """
    curves = []
    for j, grid in enumerate(model.spec.grids):
        if model.spec.kind == ModelKind.GENERAL:
            xs = grid.copy()
        else:
            parts = [
                np.linspace(grid[k], grid[k + 1], samples_per_interval + 1)[:-1]
                for k in range(grid.size - 1)
            ]
            xs = np.concatenate(parts + [grid[-1:]])
        curves.append((xs, marginal_values(model, j, xs)))
    return curves
