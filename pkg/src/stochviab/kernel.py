"""Viability kernels as level sections of the value function, and feedback
policies selected from the maximizer sets.

A state belongs to the kernel at stage t and confidence beta exactly when
V(t, x) >= beta; the comparison is exact, with no tolerance, because the
level-section characterization is an if-and-only-if.  Feedback synthesis
reduces the abstract measurable-selection step to an explicit tie-break rule
on the finite maximizer sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .dp import ArgmaxPolicy, PolicyError, ValueFunction, evaluate_policy
from .model import Model, ModelError

__all__ = [
    "KernelSlice",
    "FeedbackPolicy",
    "kernel_slice",
    "viable_feedback_check",
    "select_feedback",
]

TieBreak = Union[str, Sequence[int]]


@dataclass(frozen=True, eq=False)
class KernelSlice:
    """States whose value at stage ``t`` reaches at least ``beta``."""

    t: int
    beta: float
    members: tuple[int, ...]


def kernel_slice(valuefn: ValueFunction, t: int, beta: float) -> KernelSlice:
    """Level section {x : V(t, x) >= beta}; the sink is never a member."""
    if not (0.0 < beta <= 1.0):
        raise ModelError(f"beta must lie in (0, 1], got {beta}")
    row = valuefn.table[valuefn.stage_index(t), : valuefn.n_states]
    members = tuple(int(x) for x in np.nonzero(row >= beta)[0])
    return KernelSlice(t, float(beta), members)


@dataclass(frozen=True, eq=False)
class FeedbackPolicy:
    """One admissible control slot per (stage, state).

    ``choice[k, x]`` indexes the admissible control list at ``(t0 + k, x)``;
    the sink row is a dummy.  Instances are immutable and safe to share.
    """

    t0: int
    T: int
    choice: np.ndarray  # int64 (steps, m + 1)

    def choose(self, t: int, x: int) -> int:
        if not (self.t0 <= t < self.T):
            raise ModelError(f"stage {t} outside [{self.t0}, {self.T - 1}]")
        return int(self.choice[t - self.t0, x])

    @classmethod
    def from_array(cls, model: Model, choice: np.ndarray) -> "FeedbackPolicy":
        tab = model.tables
        arr = np.asarray(choice, dtype=np.int64)
        if arr.shape != (tab.steps, tab.n_states + 1):
            raise PolicyError(
                f"choice shape {arr.shape}, expected {(tab.steps, tab.n_states + 1)}"
            )
        return cls(tab.t0, tab.T, arr.copy())

    @classmethod
    def from_function(cls, model: Model, fn: Callable[[int, int], int]) -> "FeedbackPolicy":
        """Materialize ``fn(t, x) -> control slot`` over all stages and states."""
        tab = model.tables
        choice = np.zeros((tab.steps, tab.n_states + 1), dtype=np.int64)
        for k in range(tab.steps):
            for x in range(tab.n_states):
                choice[k, x] = int(fn(tab.t0 + k, x))
        return cls(tab.t0, tab.T, choice)

    @classmethod
    def constant(cls, model: Model, control: Sequence[float]) -> "FeedbackPolicy":
        """The policy applying one fixed control vector everywhere.

        Fails where that vector is not in the admissible list.
        """
        want = np.asarray(control, dtype=np.float64).reshape(-1)
        tab = model.tables

        def find(t: int, x: int) -> int:
            lst = model.controls.admissible(t, x)
            hits = np.nonzero(np.all(lst == want, axis=1))[0]
            if hits.size == 0:
                raise PolicyError(
                    f"control {want.tolist()} not admissible at (t={t}, x={x})"
                )
            return int(hits[0])

        return cls.from_function(model, find)


def select_feedback(argmax: ArgmaxPolicy, tie_break: TieBreak = "smallest"
                    ) -> FeedbackPolicy:
    """One selection from the maximizer sets, resolved by ``tie_break``.

    ``tie_break`` is ``"smallest"`` (default), ``"largest"``, or a preference
    list of control slots tried in order (falling back to the smallest member
    when none of the preferred slots maximizes).  Where the maximizer set is
    empty -- states outside the constraint set, or inside it with value 0 --
    the first admissible control is used so that simulation never blocks;
    the achieved probability there is 0 under any choice.
    """
    steps, n_total, _ = argmax.mask.shape
    choice = np.zeros((steps, n_total), dtype=np.int64)
    prefs: Sequence[int] | None = None
    if not isinstance(tie_break, str):
        prefs = [int(j) for j in tie_break]
    elif tie_break not in ("smallest", "largest"):
        raise ModelError(f"unknown tie_break rule {tie_break!r}")

    for k in range(steps):
        for x in range(n_total):
            slots = np.nonzero(argmax.mask[k, x])[0]
            if slots.size == 0:
                choice[k, x] = 0
            elif prefs is not None:
                pick = next((j for j in prefs if argmax.mask[k, x, j]), None)
                choice[k, x] = int(slots[0]) if pick is None else pick
            elif tie_break == "largest":
                choice[k, x] = int(slots[-1])
            else:
                choice[k, x] = int(slots[0])
    return FeedbackPolicy(argmax.t0, argmax.T, choice)


def viable_feedback_check(model: Model, valuefn: ValueFunction,
                          policy: FeedbackPolicy, t0: int, x0: int,
                          beta: float) -> bool:
    """Whether ``policy`` meets confidence ``beta`` from (t0, x0).

    Decided by exact policy evaluation, so this is the membership test for
    the set of viable feedbacks; ``valuefn`` only pins the expected stage
    range.
    """
    if not (valuefn.t0 <= t0 <= valuefn.T):
        raise ModelError(f"stage {t0} outside [{valuefn.t0}, {valuefn.T}]")
    achieved = evaluate_policy(model, policy).value(t0, x0)
    return achieved >= beta
