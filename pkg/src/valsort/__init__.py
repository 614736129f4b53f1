"""Additive value-function sorting models learned from valued assignment examples."""

from .assigner import (
    AssignmentResult,
    GammaProfile,
    assign_crisp,
    assign_soft,
    batch_assign,
    gamma_profile,
    predict_reference_soft,
    predict_soft,
)
from .credibility import (
    CredibilityTriple,
    assemble_learning_data,
    credibility_triple,
    make_valued_examples,
    pair_objective_xi,
)
from .learner import (
    CvResult,
    FitReport,
    Hyperparams,
    admm_fit,
    cross_validate,
    direct_fit,
    fit_model,
    soft_threshold,
)
from .metrics import MetricsReport, accuracy_at_n, evaluate_predictions, kendalls_tau
from .models import (
    ComplexityForm,
    FittedModel,
    LinearConstraintSet,
    ModelKind,
    ModelSpec,
    build_base_constraints,
    build_complexity_form,
    build_feature_map,
    complexity_value,
    evaluate_value,
    evaluate_values,
    general_spec,
    linear_spec,
    make_spec,
    piecewise_spec,
    render_marginals,
    spline_spec,
    uniform_feasible_theta,
)
from .priority import (
    AdjustmentTrace,
    ClassPerformance,
    adjust,
    class_consistency_scores,
    class_performance,
    find_ascent_direction,
    line_search,
)
from .problem import (
    CriterionScale,
    InsufficientDataError,
    RangeError,
    SortingProblem,
    UnknownLevelError,
    ValidationError,
    one_hot,
    validate_sigma,
)
from .qp import QpProblem, QpSolution, SolverError, SolveStatus, solve_lp, solve_qp
from .synthgen import (
    GeneratorConfig,
    assign_by_quantiles,
    make_dataset,
    random_monotone_value_function,
    stratified_split,
)

__version__ = "0.1.0"
