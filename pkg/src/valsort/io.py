"""File formats: performance/assignment CSVs, criteria config, model files.

Schemas are fixed so pipelines are byte-reproducible:
  performances.csv  header id,g1,...,gn
  assignments.csv   header id,class (1-based crisp) or id,sigma_1,...,sigma_q
                    (an extra class column alongside sigma columns is allowed
                    and ignored on read)
  criteria.json     {"q": int, "criteria": [{"name", "direction", "alpha"?, "beta"?}]}
  model.json        self-describing: kind, grids, multipliers, theta, plus the
                    reference values/sigma the assignment step needs

Floats are written with repr, which round-trips exactly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .models import FittedModel, ModelKind, ModelSpec
from .problem import (
    CriterionScale,
    SortingProblem,
    ValidationError,
    one_hot,
    validate_sigma,
)

MODEL_FORMAT = "valsort-model"
MODEL_VERSION = 1


def _fmt(x: float) -> str:
    return repr(float(x))


def read_performances(path) -> tuple[list[str], list[str], np.ndarray]:
    """Returns (ids, criterion names, raw performance matrix)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        if not header or header[0] != "id" or len(header) < 2:
            raise ValidationError(f"{path}: expected header id,g1,...,gn")
        names = header[1:]
        ids, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValidationError(f"{path}:{lineno}: expected {len(header)} columns")
            ids.append(row[0])
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-numeric performance") from None
    if len(set(ids)) != len(ids):
        raise ValidationError(f"{path}: duplicate alternative ids")
    return ids, names, np.array(rows, dtype=float).reshape(len(ids), len(names))


def read_assignments(path, q: int) -> dict[str, np.ndarray]:
    """Map id -> validated credibility vector (crisp classes become one-hot)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        if not header or header[0] != "id":
            raise ValidationError(f"{path}: first column must be id")
        sigma_cols = [i for i, name in enumerate(header) if name.startswith("sigma_")]
        crisp = not sigma_cols
        if crisp and header[1:] != ["class"]:
            raise ValidationError(f"{path}: expected id,class or id,sigma_1,...,sigma_{q}")
        if not crisp:
            expected = [f"sigma_{s}" for s in range(1, q + 1)]
            if [header[i] for i in sigma_cols] != expected:
                raise ValidationError(f"{path}: sigma columns must be sigma_1..sigma_{q}")
        out: dict[str, np.ndarray] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValidationError(f"{path}:{lineno}: expected {len(header)} columns")
            aid = row[0]
            if aid in out:
                raise ValidationError(f"{path}:{lineno}: duplicate id {aid}")
            try:
                if crisp:
                    cls = int(row[1])
                    if not 1 <= cls <= q:
                        raise ValidationError(
                            f"{path}:{lineno}: class {cls} outside 1..{q}"
                        )
                    out[aid] = one_hot(cls, q)
                else:
                    values = [float(row[i]) for i in sigma_cols]
                    out[aid] = validate_sigma(values, q, where=f"{path}:{lineno}")
            except ValidationError:
                raise
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-numeric entry") from None
    return out


def read_criteria_config(path) -> tuple[int, list[dict]]:
    path = Path(path)
    try:
        config = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(config, dict) or "criteria" not in config or "q" not in config:
        raise ValidationError(f"{path}: expected keys 'q' and 'criteria'")
    q = int(config["q"])
    entries = config["criteria"]
    for entry in entries:
        if entry.get("direction", "gain") not in ("gain", "cost"):
            raise ValidationError(f"{path}: direction must be gain or cost")
    return q, entries


def load_problem(performances_path, assignments_path, criteria_path) -> SortingProblem:
    """Assemble a SortingProblem from the three files.

    Rows with an assignment become reference alternatives (in performance-file
    order); the remaining rows are the test set.  Cost criteria are negated so
    internal scales are gain-type.
    """
    q, entries = read_criteria_config(criteria_path)
    ids, names, perf = read_performances(performances_path)
    if len(entries) != len(names):
        raise ValidationError(
            f"criteria config lists {len(entries)} criteria, performances file has {len(names)}"
        )
    config_names = [e.get("name", names[j]) for j, e in enumerate(entries)]
    if config_names != names:
        raise ValidationError(
            f"criteria config names {config_names} do not match header {names}"
        )
    assignments = read_assignments(assignments_path, q)
    missing = set(assignments) - set(ids)
    if missing:
        raise ValidationError(f"assignments reference unknown ids: {sorted(missing)[:5]}")

    internal = perf.copy()
    scales = []
    for j, entry in enumerate(entries):
        direction = entry.get("direction", "gain")
        if direction == "cost":
            internal[:, j] = -internal[:, j]
        lo = entry.get("alpha")
        hi = entry.get("beta")
        if direction == "cost":
            lo, hi = (None if hi is None else -float(hi)), (None if lo is None else -float(lo))
        alpha = float(lo) if lo is not None else float(internal[:, j].min())
        beta = float(hi) if hi is not None else float(internal[:, j].max())
        scales.append(CriterionScale(names[j], alpha, beta, direction))

    ref_mask = np.array([aid in assignments for aid in ids])
    ref_ids = [aid for aid in ids if aid in assignments]
    if len(ref_ids) == 0:
        raise ValidationError("no reference alternatives: assignments file matched nothing")
    test_ids = [aid for aid, keep in zip(ids, ref_mask) if not keep]
    return SortingProblem(
        scales=tuple(scales),
        q=q,
        ref_ids=tuple(ref_ids),
        ref_performances=internal[ref_mask],
        ref_sigma=np.vstack([assignments[aid] for aid in ref_ids]),
        test_ids=tuple(test_ids),
        test_performances=internal[~ref_mask],
        test_sigma=None,
    )


def write_performances(path, ids, names, performances) -> None:
    performances = np.asarray(performances, dtype=float)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id"] + list(names))
        for aid, row in zip(ids, performances):
            writer.writerow([aid] + [_fmt(v) for v in row])


def write_assignments(path, ids, sigma=None, classes=None, *, crisp_column=False) -> None:
    """Write either crisp classes, sigma columns, or both (class + sigma)."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if sigma is None:
            writer.writerow(["id", "class"])
            for aid, cls in zip(ids, classes):
                writer.writerow([aid, int(cls)])
            return
        sigma = np.asarray(sigma, dtype=float)
        q = sigma.shape[1]
        header = ["id"] + (["class"] if crisp_column else []) + [f"sigma_{s}" for s in range(1, q + 1)]
        writer.writerow(header)
        for i, aid in enumerate(ids):
            row = [aid]
            if crisp_column:
                row.append(int(classes[i]))
            row.extend(_fmt(v) for v in sigma[i])
            writer.writerow(row)


def write_criteria_config(path, scales, q: int) -> None:
    entries = []
    for s in scales:
        alpha, beta = s.alpha, s.beta
        if s.direction == "cost":
            alpha, beta = -s.beta, -s.alpha  # back to user units
        entries.append({"name": s.name, "direction": s.direction, "alpha": alpha, "beta": beta})
    payload = {"q": q, "criteria": entries}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


@dataclass(frozen=True)
class ModelBundle:
    """A fitted model plus the reference statistics assignment needs."""

    model: FittedModel
    ref_values: np.ndarray
    ref_sigma: np.ndarray


def save_model(path, model: FittedModel, ref_values, ref_sigma) -> None:
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": model.spec.kind.value,
        "criteria": [
            {
                "name": s.name,
                "alpha": s.alpha,
                "beta": s.beta,
                "direction": s.direction,
                "grid": list(map(float, grid)),
            }
            for s, grid in zip(model.spec.scales, model.spec.grids)
        ],
        "multipliers": {"c1": model.c1, "c2": model.c2},
        "theta": list(map(float, model.theta)),
        "reference": {
            "values": list(map(float, np.asarray(ref_values, dtype=float))),
            "sigma": [list(map(float, row)) for row in np.asarray(ref_sigma, dtype=float)],
        },
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_model(path) -> ModelBundle:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    if payload.get("format") != MODEL_FORMAT:
        raise ValidationError(f"{path}: not a {MODEL_FORMAT} file")
    scales = tuple(
        CriterionScale(e["name"], float(e["alpha"]), float(e["beta"]), e.get("direction", "gain"))
        for e in payload["criteria"]
    )
    grids = tuple(np.array(e["grid"], dtype=float) for e in payload["criteria"])
    spec = ModelSpec(ModelKind(payload["kind"]), scales, grids)
    model = FittedModel(
        spec,
        np.array(payload["theta"], dtype=float),
        float(payload["multipliers"]["c1"]),
        float(payload["multipliers"]["c2"]),
    )
    ref = payload["reference"]
    return ModelBundle(
        model=model,
        ref_values=np.array(ref["values"], dtype=float),
        ref_sigma=np.array(ref["sigma"], dtype=float).reshape(len(ref["sigma"]), -1),
    )


def write_trace(path, records) -> None:
    with Path(path).open("w") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
