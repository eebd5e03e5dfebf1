"""Benchmark the jitted kernels against the pure-numpy fallback.

Builds a wide 1-D grid model (table dynamics, three controls, five
disturbance atoms) and a long Monte Carlo batch on the built-in three-state
example, then times the stage backup and the batch walk on both paths and
checks the outputs agree bit for bit.

Run:  python benchmarks/bench_kernels.py [--states N] [--stages K] [--samples N]
The numpy-only path can also be forced package-wide with
STOCHVIAB_NO_NUMBA=1; this script always times both explicitly.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from stochviab import _kernels, make_three_state_example, select_feedback, solve
from stochviab._rng import derive_seed_array
from stochviab.model import (
    ConstraintSets,
    ControlMap,
    DisturbanceLaw,
    Model,
    StateSpace,
    TableDynamics,
    TimeGrid,
)


def build_grid_model(n_states: int, stages: int) -> Model:
    rng = np.random.default_rng(12345)
    points = np.linspace(-1.0, 1.0, n_states)[:, None]
    controls = np.array([[-1.0], [0.0], [1.0]])
    support = np.array([[-2.0], [-1.0], [0.0], [1.0], [2.0]])
    probs = np.array([0.05, 0.2, 0.5, 0.2, 0.05])
    # random drift table; ~2% of transitions fall into the sink
    table = rng.integers(0, n_states, size=(stages, n_states + 1, 3, 5))
    table[rng.random(table.shape) < 0.02] = n_states
    table[:, n_states, :, :] = n_states
    return Model(
        time=TimeGrid(0, stages),
        states=StateSpace(points),
        controls=ControlMap.shared(controls, n_states),
        noise=DisturbanceLaw(support, probs),
        dynamics=TableDynamics(table.astype(np.int64)),
        constraints=ConstraintSets("box", stationary=([-1.0], [1.0])),
    )


def time_call(fn, *args, repeat: int = 5):
    best = np.inf
    out = None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, out


def bench_stage_backup(model: Model, repeat: int) -> None:
    tab = model.tables
    v_next = tab.member[tab.steps].astype(np.float64)
    args = (tab.member[0], tab.n_ctrl[0], tab.next_state[0], tab.probs, v_next, 1e-12)

    t_np, (v_np, m_np) = time_call(_kernels.stage_backup_numpy, *args, repeat=repeat)
    print(f"stage_backup   numpy : {t_np * 1e3:9.3f} ms")
    if _kernels.HAVE_NUMBA:
        _kernels.stage_backup_numba(*args)  # compile outside the timer
        t_nb, (v_nb, m_nb) = time_call(_kernels.stage_backup_numba, *args, repeat=repeat)
        same = np.array_equal(v_np, v_nb) and np.array_equal(m_np, m_nb)
        print(f"stage_backup   numba : {t_nb * 1e3:9.3f} ms   "
              f"speedup x{t_np / t_nb:6.1f}   bit-identical: {same}")


def bench_batch(samples: int, repeat: int) -> None:
    model = make_three_state_example(0.01, 0, 40)
    _, am = solve(model)
    fb = select_feedback(am)
    tab = model.tables
    seeds = derive_seed_array(42, samples)
    args = (1, seeds, tab.next_state, fb.choice, tab.member, tab.cdf)

    t_np, ok_np = time_call(_kernels.batch_success_numpy, *args, repeat=repeat)
    print(f"batch_success  numpy : {t_np * 1e3:9.3f} ms   ({samples} walks)")
    if _kernels.HAVE_NUMBA:
        keys = _kernels._step_keys(tab.steps)
        _kernels.batch_success_numba(*args, keys)
        t_nb, ok_nb = time_call(_kernels.batch_success_numba, *args, keys, repeat=repeat)
        same = np.array_equal(ok_np, ok_nb)
        print(f"batch_success  numba : {t_nb * 1e3:9.3f} ms   "
              f"speedup x{t_np / t_nb:6.1f}   bit-identical: {same}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--states", type=int, default=4001)
    ap.add_argument("--stages", type=int, default=8)
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    print(f"numba available: {_kernels.HAVE_NUMBA}   dispatch uses numba: {_kernels.USE_NUMBA}")
    model = build_grid_model(args.states, args.stages)
    print(f"grid model: {args.states} states x {args.stages} stages, 3 controls, 5 atoms")
    bench_stage_backup(model, args.repeat)
    bench_batch(args.samples, args.repeat)


if __name__ == "__main__":
    main()
