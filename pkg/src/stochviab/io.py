"""File formats: model JSON, value/policy/kernel/trajectory CSV, estimates.

The model file is strict JSON with the exact field names documented in the
README; unknown fields are rejected.  Numeric CSV cells use 17 significant
digits, which round-trips IEEE doubles exactly; rows are emitted in a fixed
order (stage ascending, then state index) so identical inputs produce
byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .dp import ArgmaxPolicy, ValueFunction
from .kernel import FeedbackPolicy, KernelSlice
from .mc import ProbabilityEstimate
from .model import (
    ConstraintSets,
    ControlMap,
    DisturbanceLaw,
    ExprDynamics,
    Model,
    ModelError,
    StateSpace,
    TableDynamics,
    TimeGrid,
)

__all__ = [
    "ModelFormatError",
    "load_model",
    "save_model",
    "model_to_dict",
    "model_from_dict",
    "write_value_csv",
    "read_value_csv",
    "write_argmax_csv",
    "write_policy_csv",
    "write_kernel_csv",
    "write_trajectories_csv",
    "format_estimate",
]

PathLike = Union[str, Path]


class ModelFormatError(ModelError):
    """A model file violates the documented schema."""


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _require_keys(obj: dict, where: str, required: set[str], optional: set[str] = frozenset()):
    if not isinstance(obj, dict):
        raise ModelFormatError(f"{where}: expected an object")
    missing = required - obj.keys()
    if missing:
        raise ModelFormatError(f"{where}: missing field(s) {sorted(missing)}")
    unknown = obj.keys() - required - optional
    if unknown:
        raise ModelFormatError(f"{where}: unknown field(s) {sorted(unknown)}")


def model_from_dict(doc: dict) -> Model:
    _require_keys(doc, "model", {"time", "states", "controls", "noise", "dynamics", "constraints"})

    _require_keys(doc["time"], "time", {"t0", "T"})
    time = TimeGrid(int(doc["time"]["t0"]), int(doc["time"]["T"]))

    _require_keys(doc["states"], "states", {"dim", "points"})
    points = np.asarray(doc["states"]["points"], dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    if points.ndim != 2 or points.shape[1] != int(doc["states"]["dim"]):
        raise ModelFormatError(
            f"states: points of shape {points.shape} do not match dim {doc['states']['dim']}"
        )
    states = StateSpace(points)

    _require_keys(doc["controls"], "controls", {"mode", "lists"})
    cmode = doc["controls"]["mode"]
    if cmode == "shared":
        controls = ControlMap.shared(doc["controls"]["lists"], states.n_points)
    elif cmode == "per_state":
        controls = ControlMap.per_state(doc["controls"]["lists"], states.n_points)
    else:
        raise ModelFormatError(f"controls: unknown mode {cmode!r}")

    _require_keys(doc["noise"], "noise", {"support", "probs"})
    noise = DisturbanceLaw(
        np.asarray(doc["noise"]["support"], dtype=np.float64),
        np.asarray(doc["noise"]["probs"], dtype=np.float64),
    )

    _require_keys(doc["dynamics"], "dynamics", {"mode", "body"})
    dmode = doc["dynamics"]["mode"]
    if dmode == "expr":
        dynamics = ExprDynamics.parse(
            doc["dynamics"]["body"], (states.dim, controls.dim, noise.dim)
        )
    elif dmode == "table":
        u_max = _max_controls(controls, states.n_points, time)
        dynamics = TableDynamics.from_nested(
            doc["dynamics"]["body"], states.n_points, u_max, noise.n_atoms, time.steps
        )
    else:
        raise ModelFormatError(f"dynamics: unknown mode {dmode!r}")

    constraints = _constraints_from_dict(doc["constraints"])
    return Model(time, states, controls, noise, dynamics, constraints)


def _max_controls(controls: ControlMap, m: int, time: TimeGrid) -> int:
    best = 1
    for x in range(m):
        best = max(best, controls.admissible(time.t0, x).shape[0])
    return best


def _constraints_from_dict(doc: dict) -> ConstraintSets:
    _require_keys(doc, "constraints", {"mode"}, {"stationary", "per_stage"})
    mode = doc["mode"]
    if mode not in ("set", "box"):
        raise ModelFormatError(f"constraints: unknown mode {mode!r}")
    has_stat = "stationary" in doc
    has_per = "per_stage" in doc
    if has_stat == has_per:
        raise ModelFormatError("constraints: exactly one of stationary/per_stage required")

    def to_payload(entry):
        if mode == "set":
            return [int(i) for i in entry]
        _require_keys(entry, "constraints box", {"lower", "upper"})
        return (entry["lower"], entry["upper"])

    if has_stat:
        return ConstraintSets(mode, stationary=to_payload(doc["stationary"]))
    return ConstraintSets(mode, per_stage=tuple(to_payload(e) for e in doc["per_stage"]))


def model_to_dict(model: Model) -> dict:
    if model.controls.kind == "shared":
        controls = {"mode": "shared", "lists": model.controls.data.tolist()}
    elif model.controls.kind == "per_state":
        controls = {"mode": "per_state", "lists": [a.tolist() for a in model.controls.data]}
    else:
        raise ModelFormatError(
            "the model file format stores shared or per_state controls only"
        )

    if isinstance(model.dynamics, ExprDynamics):
        dynamics = {"mode": "expr", "body": list(model.dynamics.sources)}
    else:
        m = model.states.n_points
        body = []
        for k in range(model.time.steps):
            row = []
            for x in range(m):
                n_u = model.controls.admissible(model.time.t0 + k, x).shape[0]
                per_u = []
                for u in range(n_u):
                    ints = [
                        -1 if int(v) == m else int(v)
                        for v in model.dynamics.table[k, x, u, :]
                    ]
                    per_u.append(ints)
                row.append(per_u)
            body.append(row)
        dynamics = {"mode": "table", "body": body}

    cons = model.constraints
    if cons.kind == "set":
        if cons.stationary is not None:
            constraints = {"mode": "set", "stationary": list(cons.stationary)}
        else:
            constraints = {"mode": "set", "per_stage": [list(p) for p in cons.per_stage]}
    else:
        def box(payload):
            lo, hi = payload
            return {"lower": lo.tolist(), "upper": hi.tolist()}

        if cons.stationary is not None:
            constraints = {"mode": "box", "stationary": box(cons.stationary)}
        else:
            constraints = {"mode": "box", "per_stage": [box(p) for p in cons.per_stage]}

    return {
        "time": {"t0": model.time.t0, "T": model.time.T},
        "states": {"dim": model.states.dim, "points": model.states.points.tolist()},
        "controls": controls,
        "noise": {
            "support": model.noise.support.tolist(),
            "probs": model.noise.probs.tolist(),
        },
        "dynamics": dynamics,
        "constraints": constraints,
    }


def load_model(path: PathLike) -> Model:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ModelFormatError(f"{path}: not valid JSON: {err}") from None
    return model_from_dict(doc)


def save_model(model: Model, path: PathLike) -> None:
    doc = model_to_dict(model)
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


# --- value function CSV ---


def _coord_header(dim: int, prefix: str = "x") -> list[str]:
    return [f"{prefix}{i + 1}" for i in range(dim)]


def write_value_csv(vf: ValueFunction, path: PathLike) -> None:
    """One row per (stage, non-sink state); the sink always carries value 0."""
    dim = vf.points.shape[1]
    lines = [",".join(["t", "state_index", *_coord_header(dim), "value"])]
    for k in range(vf.table.shape[0]):
        t = vf.t0 + k
        for x in range(vf.n_states):
            coords = [_fmt(c) for c in vf.points[x]]
            lines.append(",".join([str(t), str(x), *coords, _fmt(vf.table[k, x])]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_value_csv(path: PathLike) -> ValueFunction:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln]
    if not lines:
        raise ModelFormatError(f"{path}: empty value file")
    header = lines[0].split(",")
    if header[:2] != ["t", "state_index"] or header[-1] != "value" or len(header) < 4:
        raise ModelFormatError(f"{path}: unexpected value header {lines[0]!r}")
    dim = len(header) - 3

    rows = []
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != len(header):
            raise ModelFormatError(f"{path}: line {i}: {len(parts)} fields, expected {len(header)}")
        rows.append((int(parts[0]), int(parts[1]),
                     [float(c) for c in parts[2:2 + dim]], float(parts[-1])))

    stages = sorted({r[0] for r in rows})
    m = max(r[1] for r in rows) + 1
    t0, T = stages[0], stages[-1]
    if stages != list(range(t0, T + 1)):
        raise ModelFormatError(f"{path}: stages are not contiguous")

    points = np.zeros((m, dim))
    table = np.zeros((T - t0 + 1, m + 1))
    seen = np.zeros((T - t0 + 1, m), dtype=bool)
    for t, x, coords, value in rows:
        points[x] = coords
        table[t - t0, x] = value
        seen[t - t0, x] = True
    if not seen.all():
        raise ModelFormatError(f"{path}: missing (stage, state) rows")
    return ValueFunction(t0, T, points, table)


# --- policy / kernel / trajectory CSV ---


def _control_rows(model: Model, k: int, x: int) -> np.ndarray:
    return model.controls.admissible(model.time.t0 + k, x)


def write_argmax_csv(model: Model, argmax: ArgmaxPolicy, path: PathLike) -> None:
    """One row per maximizing control: t, state, slot, control coordinates."""
    dim = model.controls.dim
    lines = [",".join(["t", "state_index", "control_index", *_coord_header(dim, "u")])]
    steps = argmax.mask.shape[0]
    for k in range(steps):
        for x in range(model.states.n_points):
            ctrls = _control_rows(model, k, x)
            for j in np.nonzero(argmax.mask[k, x])[0]:
                coords = [_fmt(c) for c in ctrls[j]]
                lines.append(",".join([str(argmax.t0 + k), str(x), str(int(j)), *coords]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_policy_csv(model: Model, policy: FeedbackPolicy, path: PathLike) -> None:
    """One row per (stage, non-sink state) with the selected control."""
    dim = model.controls.dim
    lines = [",".join(["t", "state_index", "control_index", *_coord_header(dim, "u")])]
    for k in range(model.time.steps):
        for x in range(model.states.n_points):
            j = int(policy.choice[k, x])
            coords = [_fmt(c) for c in _control_rows(model, k, x)[j]]
            lines.append(",".join([str(policy.t0 + k), str(x), str(j), *coords]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_kernel_csv(slices: Iterable[KernelSlice], points: np.ndarray,
                     path: PathLike) -> None:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    lines = [",".join(["t", "beta", "state_index", *_coord_header(pts.shape[1])])]
    for sl in slices:
        for x in sl.members:
            coords = [_fmt(c) for c in pts[x]]
            lines.append(",".join([str(sl.t), _fmt(sl.beta), str(x), *coords]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_trajectories_csv(model: Model, states: np.ndarray, controls: np.ndarray,
                           success: np.ndarray, path: PathLike) -> None:
    """Sample paths, one row per (sample, stage).

    Sink rows leave the coordinate cells empty; terminal rows leave the
    control cell empty (no control acts at stage T).
    """
    m = model.states.n_points
    dim = model.states.dim
    t0 = model.time.t0
    steps = model.time.steps
    header = ",".join(["sample", "t", "state_index", *_coord_header(dim), "control_index", "success"])
    chunks = [header]
    empty_coords = [""] * dim
    for s in range(states.shape[0]):
        flag = str(int(success[s]))
        for k in range(steps + 1):
            x = int(states[s, k])
            coords = empty_coords if x == m else [_fmt(c) for c in model.states.points[x]]
            ctrl = "" if k == steps else str(int(controls[s, k]))
            chunks.append(",".join([str(s), str(t0 + k), str(x), *coords, ctrl, flag]))
    Path(path).write_text("\n".join(chunks) + "\n", encoding="utf-8")


def format_estimate(est: ProbabilityEstimate) -> str:
    """The single-line report: mean n ci_low ci_high seed."""
    return f"{_fmt(est.mean)} {est.n} {_fmt(est.ci_low)} {_fmt(est.ci_high)} {est.seed}"
