"""Hot numeric kernels: jitted loops with a vectorized numpy fallback.

The backward-induction stage backup and the Monte Carlo batch walk dominate
runtime on anything bigger than toy models.  Both exist twice:

* ``*_numba`` -- numba ``@njit`` scalar loops (compiled, cached on disk);
* ``*_numpy`` -- pure numpy vectorization with the same operation order.

The two paths are written to produce bit-identical float results (identical
summation order, identical inverse-cdf clamping) and the test suite asserts
that.  Dispatch picks numba when it is importable, unless the environment
variable ``STOCHVIAB_NO_NUMBA`` is set to ``1``/``true``/``yes``; then the
numpy path serves.  ``benchmarks/bench_kernels.py`` times both.
"""

from __future__ import annotations

import os

import numpy as np

from ._rng import GOLDEN, MASK64, MIX_A, MIX_B, unit_array

_DISABLED = os.environ.get("STOCHVIAB_NO_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _DISABLED

_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_UMIX_A = np.uint64(MIX_A)
_UMIX_B = np.uint64(MIX_B)
_INV_2_53 = 1.0 / 9007199254740992.0


def _step_keys(steps: int) -> np.ndarray:
    """Per-step additive stream constants ((k+1)*GOLDEN mod 2**64)."""
    return np.array([((k + 1) * GOLDEN) & MASK64 for k in range(steps)], dtype=np.uint64)


# --- pure numpy implementations ---


def stage_backup_numpy(member_t, n_ctrl_t, next_t, probs, v_next, tol):
    """One backward-induction stage.

    Returns ``(values, argmax_mask)`` where ``values[x]`` is the stage value
    (0 outside the constraint set) and ``argmax_mask[x, j]`` flags admissible
    control slots within ``tol`` of the stage maximum.
    """
    n_total, u_max, n_atoms = next_t.shape
    acc = np.zeros((n_total, u_max))
    for i in range(n_atoms):
        acc += probs[i] * v_next[next_t[:, :, i]]
    valid = np.arange(u_max)[None, :] < n_ctrl_t[:, None]
    q = np.where(valid, acc, -np.inf)
    best = q.max(axis=1)
    # float drift in the probability sum can push the expectation a few ulp
    # past 1; the true value is a probability, so clamp the stored value
    values = np.where(member_t, np.minimum(best, 1.0), 0.0)
    mask = member_t[:, None] & (q >= best[:, None] - tol)
    return values, mask


def policy_backup_numpy(member_t, next_t, choice_t, probs, v_next):
    """One policy-evaluation stage: expectation under the fixed control slot."""
    n_total, _, n_atoms = next_t.shape
    rows = np.arange(n_total)
    succ = next_t[rows, choice_t, :]
    acc = np.zeros(n_total)
    for i in range(n_atoms):
        acc += probs[i] * v_next[succ[:, i]]
    return np.where(member_t, np.minimum(acc, 1.0), 0.0)


def batch_success_numpy(x0, seeds, next_table, choice, member, cdf):
    """Success flag of the closed-loop walk for every per-sample seed."""
    steps = next_table.shape[0]
    n_atoms = cdf.shape[0]
    keys = _step_keys(steps)
    n = seeds.shape[0]
    x = np.full(n, x0, dtype=np.int64)
    ok = np.full(n, bool(member[0, x0]))
    for k in range(steps):
        z = seeds + keys[k]
        z = (z ^ (z >> _U30)) * _UMIX_A
        z = (z ^ (z >> _U27)) * _UMIX_B
        u = unit_array(z ^ (z >> _U31))
        d = np.minimum(np.searchsorted(cdf, u, side="right"), n_atoms - 1)
        x = next_table[k, x, choice[k, x], d]
        ok &= member[k + 1, x]
    return ok


def batch_paths_numpy(x0, seeds, next_table, choice, member, cdf):
    """Full closed-loop paths: (states, controls, draws, success)."""
    steps = next_table.shape[0]
    n_atoms = cdf.shape[0]
    keys = _step_keys(steps)
    n = seeds.shape[0]
    states = np.empty((n, steps + 1), dtype=np.int64)
    controls = np.empty((n, steps), dtype=np.int64)
    draws = np.empty((n, steps), dtype=np.int64)
    states[:, 0] = x0
    x = np.full(n, x0, dtype=np.int64)
    ok = np.full(n, bool(member[0, x0]))
    for k in range(steps):
        z = seeds + keys[k]
        z = (z ^ (z >> _U30)) * _UMIX_A
        z = (z ^ (z >> _U27)) * _UMIX_B
        u = unit_array(z ^ (z >> _U31))
        d = np.minimum(np.searchsorted(cdf, u, side="right"), n_atoms - 1)
        slot = choice[k, x]
        x = next_table[k, x, slot, d]
        states[:, k + 1] = x
        controls[:, k] = slot
        draws[:, k] = d
        ok &= member[k + 1, x]
    return states, controls, draws, ok


# --- numba implementations ---

if HAVE_NUMBA:

    @njit(cache=True)
    def _mix64_jit(z):
        z = (z ^ (z >> _U30)) * _UMIX_A
        z = (z ^ (z >> _U27)) * _UMIX_B
        return z ^ (z >> _U31)

    @njit(cache=True)
    def stage_backup_numba(member_t, n_ctrl_t, next_t, probs, v_next, tol):
        n_total, u_max, n_atoms = next_t.shape
        values = np.zeros(n_total)
        mask = np.zeros((n_total, u_max), dtype=np.bool_)
        q = np.empty(u_max)
        for x in range(n_total):
            if not member_t[x]:
                continue
            best = -np.inf
            k = n_ctrl_t[x]
            for j in range(k):
                acc = 0.0
                for i in range(n_atoms):
                    acc += probs[i] * v_next[next_t[x, j, i]]
                q[j] = acc
                if acc > best:
                    best = acc
            values[x] = best if best < 1.0 else 1.0
            for j in range(k):
                if q[j] >= best - tol:
                    mask[x, j] = True
        return values, mask

    @njit(cache=True)
    def policy_backup_numba(member_t, next_t, choice_t, probs, v_next):
        n_total, _, n_atoms = next_t.shape
        out = np.zeros(n_total)
        for x in range(n_total):
            if not member_t[x]:
                continue
            acc = 0.0
            j = choice_t[x]
            for i in range(n_atoms):
                acc += probs[i] * v_next[next_t[x, j, i]]
            out[x] = acc if acc < 1.0 else 1.0
        return out

    @njit(cache=True)
    def batch_success_numba(x0, seeds, next_table, choice, member, cdf, keys):
        steps = next_table.shape[0]
        n_atoms = cdf.shape[0]
        n = seeds.shape[0]
        out = np.empty(n, dtype=np.bool_)
        for s in range(n):
            x = x0
            ok = member[0, x]
            for k in range(steps):
                u = np.float64(_mix64_jit(seeds[s] + keys[k]) >> _U11) * _INV_2_53
                d = 0
                while d < n_atoms - 1 and u >= cdf[d]:
                    d += 1
                x = next_table[k, x, choice[k, x], d]
                ok = ok and member[k + 1, x]
            out[s] = ok
        return out

    @njit(cache=True)
    def batch_paths_numba(x0, seeds, next_table, choice, member, cdf, keys):
        steps = next_table.shape[0]
        n_atoms = cdf.shape[0]
        n = seeds.shape[0]
        states = np.empty((n, steps + 1), dtype=np.int64)
        controls = np.empty((n, steps), dtype=np.int64)
        draws = np.empty((n, steps), dtype=np.int64)
        ok_arr = np.empty(n, dtype=np.bool_)
        for s in range(n):
            x = np.int64(x0)
            states[s, 0] = x
            ok = member[0, x]
            for k in range(steps):
                u = np.float64(_mix64_jit(seeds[s] + keys[k]) >> _U11) * _INV_2_53
                d = 0
                while d < n_atoms - 1 and u >= cdf[d]:
                    d += 1
                slot = choice[k, x]
                x = next_table[k, x, slot, d]
                states[s, k + 1] = x
                controls[s, k] = slot
                draws[s, k] = d
                ok = ok and member[k + 1, x]
            ok_arr[s] = ok
        return states, controls, draws, ok_arr


# --- dispatch ---


def stage_backup(member_t, n_ctrl_t, next_t, probs, v_next, tol):
    if USE_NUMBA:
        return stage_backup_numba(member_t, n_ctrl_t, next_t, probs, v_next, tol)
    return stage_backup_numpy(member_t, n_ctrl_t, next_t, probs, v_next, tol)


def policy_backup(member_t, next_t, choice_t, probs, v_next):
    if USE_NUMBA:
        return policy_backup_numba(member_t, next_t, choice_t, probs, v_next)
    return policy_backup_numpy(member_t, next_t, choice_t, probs, v_next)


def batch_success(x0, seeds, next_table, choice, member, cdf):
    if USE_NUMBA:
        keys = _step_keys(next_table.shape[0])
        return batch_success_numba(x0, seeds, next_table, choice, member, cdf, keys)
    return batch_success_numpy(x0, seeds, next_table, choice, member, cdf)


def batch_paths(x0, seeds, next_table, choice, member, cdf):
    if USE_NUMBA:
        keys = _step_keys(next_table.shape[0])
        return batch_paths_numba(x0, seeds, next_table, choice, member, cdf, keys)
    return batch_paths_numpy(x0, seeds, next_table, choice, member, cdf)


def warmup() -> None:
    """Force jit compilation on tiny inputs so timed runs stay honest."""
    if not USE_NUMBA:
        return
    member = np.array([[True, False], [True, False]])
    n_ctrl = np.array([1, 1], dtype=np.int64)
    nxt = np.zeros((1, 2, 1, 1), dtype=np.int64)
    probs = np.array([1.0])
    cdf = np.array([1.0])
    v = np.array([1.0, 0.0])
    choice = np.zeros((1, 2), dtype=np.int64)
    seeds = np.array([1], dtype=np.uint64)
    stage_backup(member[0], n_ctrl, nxt[0], probs, v, 1e-12)
    policy_backup(member[0], nxt[0], choice[0], probs, v)
    batch_success(0, seeds, nxt, choice, member, cdf)
    batch_paths(0, seeds, nxt, choice, member, cdf)
