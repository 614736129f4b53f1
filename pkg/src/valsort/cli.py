"""Command-line surface: generate / fit / assign / adjust / evaluate / cv.

Exit codes: 0 success, 1 validation error (bad files, bad arguments),
2 solver failure.  All randomness is seeded, so reruns with the same seed
produce byte-identical output files.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import io as vio
from .assigner import assign_crisp, gamma_matrix, soft_assignments
from .learner import (
    DEFAULT_MULTIPLIER_GRID,
    FULL_MULTIPLIER_GRID,
    Hyperparams,
    cross_validate,
    fit_model,
)
from .metrics import evaluate_predictions
from .models import ModelKind, evaluate_values
from .priority import adjust, class_performance
from .problem import ValidationError
from .qp import SolverError
from .synthgen import GeneratorConfig, make_dataset


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip() != "")
    except ValueError:
        raise ValidationError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip() != "")
    except ValueError:
        raise ValidationError(f"expected a comma-separated list of integers, got {text!r}") from None


def cmd_generate(args) -> int:
    config = GeneratorConfig(
        n_criteria=args.n,
        n_alternatives=args.m,
        q=args.q,
        levels=args.levels,
        kind=args.kind,
        rho_gen=args.rho_gen,
        weights=_float_list(args.weights) if args.weights else None,
        spread=args.spread,
        seed=args.seed,
        train_fraction=args.train_fraction,
    )
    problem = make_dataset(config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = [s.name for s in problem.scales]
    vio.write_criteria_config(out / "criteria.json", problem.scales, problem.q)
    vio.write_performances(out / "reference_performances.csv", problem.ref_ids, names,
                           problem.ref_performances)
    vio.write_assignments(out / "reference_assignments.csv", problem.ref_ids,
                          sigma=problem.ref_sigma)
    vio.write_performances(out / "test_performances.csv", problem.test_ids, names,
                           problem.test_performances)
    vio.write_assignments(out / "test_assignments.csv", problem.test_ids,
                          sigma=problem.test_sigma)
    truth = problem.ground_truth
    vio.save_model(out / "ground_truth.json", truth,
                   evaluate_values(truth, problem.ref_performances), problem.ref_sigma)
    print(f"wrote dataset ({problem.n_ref} reference, {problem.n_test} test) to {out}")
    return 0


def cmd_fit(args) -> int:
    problem = vio.load_problem(args.performances, args.assignments, args.criteria)
    kind = ModelKind(args.kind)
    cv_result = None
    if args.cv:
        grid = FULL_MULTIPLIER_GRID if args.full_grid else DEFAULT_MULTIPLIER_GRID
        c1_grid = _float_list(args.c1_grid) if args.c1_grid else grid
        c2_grid = _float_list(args.c2_grid) if args.c2_grid else None
        gamma_grid = _int_list(args.gamma_grid) if args.gamma_grid else None
        cv_result = cross_validate(
            problem, kind, c1_grid=c1_grid, c2_grid=c2_grid, gamma_grid=gamma_grid,
            k=args.folds, seed=args.seed,
        )
        hyper = cv_result.best
        gamma = cv_result.best_gamma
    else:
        if args.c1 is None:
            raise ValidationError("either --c1 or --cv is required")
        if kind != ModelKind.LINEAR and args.c2 is None:
            raise ValidationError(f"--c2 is required for the {kind.value} family")
        hyper = Hyperparams(
            c1=args.c1,
            c2=args.c2 if args.c2 is not None else 0.0,
            rho_admm=args.rho_admm,
            eps_abs=args.eps_abs,
            eps_rel=args.eps_rel,
            max_admm_iterations=args.max_iterations,
        )
        gamma = args.gamma
    report = fit_model(problem, kind, hyper, gammas=gamma, method=args.method)
    ref_values = evaluate_values(report.model, problem.ref_performances)
    vio.save_model(args.out, report.model, ref_values, problem.ref_sigma)
    if args.report:
        payload = {
            "objective": report.objective,
            "iterations": report.iterations,
            "primal_residual": report.primal_residual,
            "dual_residual": report.dual_residual,
            "converged": report.converged,
            "method": report.method,
            "gammas": report.gammas,
            "refinement_rounds": report.refinement_rounds,
            "hyperparams": {
                "c1": hyper.c1, "c2": hyper.c2, "rho_admm": hyper.rho_admm,
                "eps_abs": hyper.eps_abs, "eps_rel": hyper.eps_rel,
                "max_admm_iterations": hyper.max_admm_iterations,
            },
            "cv_table": cv_result.table if cv_result else None,
        }
        Path(args.report).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    if not report.converged:
        print("warning: iteration cap reached before the residual targets", file=sys.stderr)
    print(f"fitted {kind.value} model (objective {report.objective:.6g}, "
          f"{report.iterations} iterations) -> {args.out}")
    return 0


def _internalize(bundle, names, perf):
    model_names = [s.name for s in bundle.model.spec.scales]
    if names != model_names:
        raise ValidationError(f"performance columns {names} do not match model criteria {model_names}")
    internal = perf.copy()
    for j, s in enumerate(bundle.model.spec.scales):
        if s.direction == "cost":
            internal[:, j] = -internal[:, j]
    return internal


def cmd_assign(args) -> int:
    bundle = vio.load_model(args.model)
    ids, names, perf = vio.read_performances(args.performances)
    internal = _internalize(bundle, names, perf)
    values = evaluate_values(bundle.model, internal)
    gammas = gamma_matrix(bundle.ref_sigma, bundle.ref_values, values)
    soft = soft_assignments(gammas, bundle.ref_values.size) if len(ids) else np.zeros((0, gammas.shape[1]))
    classes = [int(np.argmax(assign_crisp(g))) + 1 for g in gammas]
    vio.write_assignments(args.out, ids, sigma=soft, classes=classes, crisp_column=True)
    print(f"assigned {len(ids)} alternatives -> {args.out}")
    return 0


def cmd_adjust(args) -> int:
    bundle = vio.load_model(args.model)
    problem = vio.load_problem(args.performances, args.assignments, args.criteria)
    tau = _int_list(args.priority)
    if args.zeta is None and args.validation_fraction is None:
        raise ValidationError("either --zeta or --validation-fraction is required")
    adjusted, trace = adjust(
        bundle.model,
        problem,
        tau,
        zeta=args.zeta,
        max_iterations=args.max_iterations,
        validation_fraction=args.validation_fraction,
        seed=args.seed,
    )
    ref_values = evaluate_values(adjusted, problem.ref_performances)
    vio.save_model(args.out, adjusted, ref_values, problem.ref_sigma)
    if args.trace:
        vio.write_trace(args.trace, trace.records())
    print(f"adjustment finished after {len(trace.accepted_steps)} accepted iterations "
          f"({trace.termination}) -> {args.out}")
    return 0


def _infer_q(path) -> int | None:
    with Path(path).open(newline="") as fh:
        header = next(csv.reader(fh), [])
    sigma_cols = [name for name in header if name.startswith("sigma_")]
    return len(sigma_cols) or None


def cmd_evaluate(args) -> int:
    q = args.q or _infer_q(args.actual) or _infer_q(args.predicted)
    if not q:
        raise ValidationError("--q is required when both files carry crisp classes")
    actual = vio.read_assignments(args.actual, q)
    predicted = vio.read_assignments(args.predicted, q)
    shared = [aid for aid in actual if aid in predicted]
    if not shared:
        raise ValidationError("no common alternative ids between the two files")
    act = np.vstack([actual[a] for a in shared])
    pred = np.vstack([predicted[a] for a in shared])
    report = evaluate_predictions(act, pred)
    payload = {
        "alternatives": len(shared),
        "mean_accuracy": {str(n): v for n, v in report.mean_accuracy.items()},
        "mean_kendall_tau": report.mean_kendall_tau,
    }
    if args.pf:
        perf = class_performance(act, pred)
        payload["card_pf"] = [float(v) for v in perf.card_pf]
        payload["ord_pf"] = [float(v) for v in perf.ord_pf]
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def cmd_cv(args) -> int:
    problem = vio.load_problem(args.performances, args.assignments, args.criteria)
    kind = ModelKind(args.kind)
    grid = FULL_MULTIPLIER_GRID if args.full_grid else DEFAULT_MULTIPLIER_GRID
    c1_grid = _float_list(args.c1_grid) if args.c1_grid else grid
    c2_grid = _float_list(args.c2_grid) if args.c2_grid else None
    gamma_grid = _int_list(args.gamma_grid) if args.gamma_grid else None
    result = cross_validate(
        problem, kind, c1_grid=c1_grid, c2_grid=c2_grid, gamma_grid=gamma_grid,
        k=args.folds, seed=args.seed,
    )
    payload = {
        "best": {"c1": result.best.c1, "c2": result.best.c2, "gamma": result.best_gamma},
        "table": result.table,
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="valsort",
        description="Fit, apply and adjust additive value-function sorting models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a seeded synthetic dataset")
    gen.add_argument("--out-dir", required=True)
    gen.add_argument("--kind", choices=["linear", "general"], default="general")
    gen.add_argument("--m", type=int, default=500)
    gen.add_argument("--n", type=int, default=6)
    gen.add_argument("--q", type=int, default=5)
    gen.add_argument("--levels", type=int, default=30)
    gen.add_argument("--spread", type=float, default=0.0)
    gen.add_argument("--rho-gen", type=float, default=0.25)
    gen.add_argument("--weights", help="comma-separated trade-off weights for a linear truth")
    gen.add_argument("--train-fraction", type=float, default=0.7)
    gen.add_argument("--seed", type=int, default=0)
    gen.set_defaults(func=cmd_generate)

    fit = sub.add_parser("fit", help="fit a value model from reference data")
    fit.add_argument("--performances", required=True)
    fit.add_argument("--assignments", required=True)
    fit.add_argument("--criteria", required=True)
    fit.add_argument("--kind", required=True,
                     choices=[k.value for k in ModelKind])
    fit.add_argument("--c1", type=float)
    fit.add_argument("--c2", type=float)
    fit.add_argument("--gamma", type=int)
    fit.add_argument("--cv", action="store_true", help="pick hyperparameters by cross-validation")
    fit.add_argument("--folds", type=int, default=5)
    fit.add_argument("--full-grid", action="store_true",
                     help="search the full 10^-8..5x10^8 multiplier grid")
    fit.add_argument("--c1-grid")
    fit.add_argument("--c2-grid")
    fit.add_argument("--gamma-grid")
    fit.add_argument("--rho-admm", type=float, default=1.0)
    fit.add_argument("--eps-abs", type=float, default=1e-6)
    fit.add_argument("--eps-rel", type=float, default=1e-4)
    fit.add_argument("--max-iterations", type=int, default=5000)
    fit.add_argument("--method", choices=["admm", "direct"], default="admm")
    fit.add_argument("--out", required=True)
    fit.add_argument("--report")
    fit.add_argument("--seed", type=int, default=0)
    fit.set_defaults(func=cmd_fit)

    asg = sub.add_parser("assign", help="assign alternatives with a fitted model")
    asg.add_argument("--model", required=True)
    asg.add_argument("--performances", required=True)
    asg.add_argument("--out", required=True)
    asg.add_argument("--seed", type=int, default=0)
    asg.set_defaults(func=cmd_assign)

    adj = sub.add_parser("adjust", help="adjust class performance along a priority ranking")
    adj.add_argument("--model", required=True)
    adj.add_argument("--performances", required=True)
    adj.add_argument("--assignments", required=True)
    adj.add_argument("--criteria", required=True)
    adj.add_argument("--priority", required=True, help="comma-separated classes, highest priority first")
    adj.add_argument("--zeta", type=float)
    adj.add_argument("--validation-fraction", type=float)
    adj.add_argument("--max-iterations", type=int, default=100)
    adj.add_argument("--out", required=True)
    adj.add_argument("--trace")
    adj.add_argument("--seed", type=int, default=0)
    adj.set_defaults(func=cmd_adjust)

    ev = sub.add_parser("evaluate", help="score predictions against actual assignments")
    ev.add_argument("--actual", required=True)
    ev.add_argument("--predicted", required=True)
    ev.add_argument("--q", type=int)
    ev.add_argument("--pf", action="store_true", help="include per-class CardPf/OrdPf")
    ev.add_argument("--out")
    ev.add_argument("--seed", type=int, default=0)
    ev.set_defaults(func=cmd_evaluate)

    cv = sub.add_parser("cv", help="cross-validation grid search")
    cv.add_argument("--performances", required=True)
    cv.add_argument("--assignments", required=True)
    cv.add_argument("--criteria", required=True)
    cv.add_argument("--kind", required=True, choices=[k.value for k in ModelKind])
    cv.add_argument("--folds", type=int, default=5)
    cv.add_argument("--full-grid", action="store_true")
    cv.add_argument("--c1-grid")
    cv.add_argument("--c2-grid")
    cv.add_argument("--gamma-grid")
    cv.add_argument("--out")
    cv.add_argument("--seed", type=int, default=0)
    cv.set_defaults(func=cmd_cv)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if exc.code is not None else 0
        return 0 if code == 0 else 1
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
