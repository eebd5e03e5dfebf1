"""Dense index tables compiled from a model for the array kernels.

Everything the solvers touch per inner iteration lives in flat numpy arrays:
successor indices, admissible control counts, constraint membership, and the
disturbance pmf/cdf.  The sink occupies the last state row; its single dummy
control loops back to itself, so closed-loop walks never branch on it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as _expr
from .model import ExprDynamics, Model, ModelError, TableDynamics, project_to_grid


@dataclass(frozen=True, eq=False)
class Tables:
    t0: int
    T: int
    n_states: int  # non-sink count; sink index equals n_states
    n_ctrl: np.ndarray  # int64 (steps, n_total)
    next_state: np.ndarray  # int64 (steps, n_total, u_max, W)
    member: np.ndarray  # bool (steps + 1, n_total)
    probs: np.ndarray  # float64 (W,)
    cdf: np.ndarray  # float64 (W,)

    @property
    def steps(self) -> int:
        return self.T - self.t0

    @property
    def sink(self) -> int:
        return self.n_states

    @property
    def u_max(self) -> int:
        return self.next_state.shape[2]

    @property
    def n_atoms(self) -> int:
        return self.next_state.shape[3]


def build_tables(model: Model) -> Tables:
    time, states = model.time, model.states
    m = states.n_points
    n_total = m + 1
    steps = time.steps
    n_atoms = model.noise.n_atoms

    n_ctrl = np.ones((steps, n_total), dtype=np.int64)
    counts = []
    for k in range(steps):
        row = [model.controls.admissible(time.t0 + k, x) for x in range(m)]
        counts.append(row)
        for x in range(m):
            n_ctrl[k, x] = row[x].shape[0]
    u_max = max(1, int(n_ctrl.max()))

    nxt = np.full((steps, n_total, u_max, n_atoms), m, dtype=np.int64)
    if isinstance(model.dynamics, TableDynamics):
        tab = model.dynamics.table
        if tab.shape[2] > u_max:
            u_max = tab.shape[2]
            nxt = np.full((steps, n_total, u_max, n_atoms), m, dtype=np.int64)
        nxt[:, :, : tab.shape[2], :] = tab
        nxt[:, m, :, :] = m  # absorbing sink regardless of stored row
    else:
        _fill_expr_table(model, nxt, counts)

    member = model.constraints.membership_matrix(time, states)
    member[:, m] = False

    probs = model.noise.probs.astype(np.float64, copy=True)
    return Tables(
        t0=time.t0,
        T=time.T,
        n_states=m,
        n_ctrl=n_ctrl,
        next_state=nxt,
        member=member,
        probs=probs,
        cdf=np.cumsum(probs),
    )


def _fill_expr_table(model: Model, nxt: np.ndarray, counts: list) -> None:
    dyn: ExprDynamics = model.dynamics
    states = model.states
    noise = model.noise
    n, p, q = model.dims
    steps = model.time.steps

    for k in range(steps):
        t_abs = model.time.t0 + k
        for x in range(states.n_points):
            coords = states.points[x]
            ctrls = counts[k][x]
            for j in range(ctrls.shape[0]):
                u_vec = ctrls[j]
                for i in range(noise.n_atoms):
                    w_vec = noise.support[i]
                    bindings = _bindings(t_abs, coords, u_vec, w_vec, n, p, q)
                    point = np.empty(n)
                    for c, ast in enumerate(dyn.asts):
                        try:
                            point[c] = _expr.evaluate(ast, bindings)
                        except _expr.EvalError as err:
                            raise ModelError(
                                f"dynamics evaluation failed at (t={t_abs}, x={x}, "
                                f"u={j}, w={i}): {err}"
                            ) from err
                    nxt[k, x, j, i] = project_to_grid(states, point)


def _bindings(t, coords, u_vec, w_vec, n, p, q) -> dict[str, float]:
    b = {"t": float(t)}
    for i in range(n):
        b[f"x{i + 1}"] = float(coords[i])
    for i in range(p):
        b[f"u{i + 1}"] = float(u_vec[i]) if i < len(u_vec) else 0.0
    for i in range(q):
        b[f"w{i + 1}"] = float(w_vec[i])
    if n == 1:
        b["x"] = b["x1"]
    if p == 1:
        b["u"] = b["u1"]
    if q == 1:
        b["w"] = b["w1"]
    return b
