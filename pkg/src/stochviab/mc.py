"""Scenario sampling, closed-loop simulation, and success-probability
estimation with Wilson confidence intervals.

All randomness is counter-based (:mod:`stochviab._rng`): a scenario is a pure
function of its seed, and sample ``i`` of an estimation run uses a child seed
derived from ``(base_seed, i)``.  Estimates are therefore order-independent,
parallelizable, and reproducible bit for bit.  The terminal-stage disturbance
never enters the dynamics or the success criterion, so scenarios store one
draw per transition only.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass

import numpy as np

from . import _kernels, _rng
from .dp import _policy_choice_array
from .kernel import FeedbackPolicy
from .model import DisturbanceLaw, Model, ModelError

__all__ = [
    "Scenario",
    "Trajectory",
    "ProbabilityEstimate",
    "sample_scenario",
    "simulate",
    "simulate_batch",
    "estimate_probability",
    "wilson_interval",
]

Z95 = statistics.NormalDist().inv_cdf(0.975)


@dataclass(frozen=True, eq=False)
class Scenario:
    """Disturbance indices drawn for each transition t0..T-1."""

    draws: np.ndarray  # int64 (steps,)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Closed-loop path: states x(t0..T), control slots u(t0..T-1), and the
    scenario that produced them.  ``success`` is 1 exactly when every visited
    state, the terminal one included, lies in its constraint set."""

    states: np.ndarray  # int64 (steps + 1,)
    controls: np.ndarray  # int64 (steps,)
    scenario: Scenario
    success: bool


@dataclass(frozen=True)
class ProbabilityEstimate:
    """Empirical success frequency with a Wilson 95% interval."""

    mean: float
    n: int
    ci_low: float
    ci_high: float
    seed: int


def wilson_interval(successes: int, n: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval; stays inside [0, 1] even at the boundaries."""
    if n <= 0:
        raise ModelError("interval needs at least one sample")
    phat = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (phat + z2 / (2.0 * n)) / denom
    half = z * np.sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def sample_scenario(noise: DisturbanceLaw, n_steps: int, seed: int) -> Scenario:
    """Independent inverse-cdf draws from the marginal, one per transition."""
    if n_steps < 0:
        raise ModelError(f"n_steps must be non-negative, got {n_steps}")
    u = _rng.unit_array(_rng.stream_u64_array(seed, np.arange(n_steps)))
    draws = np.minimum(
        np.searchsorted(noise.cdf, u, side="right"), noise.n_atoms - 1
    ).astype(np.int64)
    return Scenario(draws)


def _check_x0(model: Model, x0: int) -> int:
    m = model.states.n_points
    if not (0 <= int(x0) < m):
        raise ModelError(f"x0 must be a non-sink state index in 0..{m - 1}, got {x0}")
    return int(x0)


def simulate(model: Model, policy: FeedbackPolicy, x0: int, seed: int) -> Trajectory:
    """One closed-loop trajectory under ``policy`` from state index ``x0``."""
    x0 = _check_x0(model, x0)
    choice = _policy_choice_array(model, policy)
    tab = model.tables
    steps = tab.steps
    scenario = sample_scenario(model.noise, steps, seed)

    states = np.empty(steps + 1, dtype=np.int64)
    controls = np.empty(steps, dtype=np.int64)
    states[0] = x0
    x = x0
    ok = bool(tab.member[0, x])
    for k in range(steps):
        slot = int(choice[k, x])
        controls[k] = slot
        x = int(tab.next_state[k, x, slot, scenario.draws[k]])
        states[k + 1] = x
        ok = ok and bool(tab.member[k + 1, x])
    return Trajectory(states, controls, scenario, ok)


def simulate_batch(model: Model, policy: FeedbackPolicy, x0: int, n: int,
                   base_seed: int):
    """Paths for ``n`` samples with child seeds derived from ``base_seed``.

    Returns ``(states, controls, draws, success)`` arrays with one row per
    sample; sample ``i`` reproduces ``simulate`` run with
    ``derive_seed(base_seed, i)``.
    """
    x0 = _check_x0(model, x0)
    if n < 1:
        raise ModelError(f"need n >= 1 samples, got {n}")
    choice = _policy_choice_array(model, policy)
    tab = model.tables
    seeds = _rng.derive_seed_array(base_seed, n)
    return _kernels.batch_paths(
        x0, seeds, tab.next_state, choice, tab.member, tab.cdf
    )


def estimate_probability(model: Model, policy: FeedbackPolicy, x0: int, n: int,
                         base_seed: int) -> ProbabilityEstimate:
    """Monte Carlo estimate of the closed-loop success probability."""
    x0 = _check_x0(model, x0)
    if n < 1:
        raise ModelError(f"need n >= 1 samples, got {n}")
    choice = _policy_choice_array(model, policy)
    tab = model.tables
    seeds = _rng.derive_seed_array(base_seed, n)
    ok = _kernels.batch_success(
        x0, seeds, tab.next_state, choice, tab.member, tab.cdf
    )
    successes = int(np.count_nonzero(ok))
    lo, hi = wilson_interval(successes, n)
    return ProbabilityEstimate(successes / n, n, lo, hi, int(base_seed))
