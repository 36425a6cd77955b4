"""Stationary solvers for the truncated walk.

The direct solver is state-reduction (GTH) elimination, which is
subtraction-free and therefore immune to the near-singular cancellation of
pi P = pi; it is run level-blocked so the banded structure keeps the work at
O(L * m^3) instead of O((L m)^3). Power iteration and a seeded Monte Carlo
walk provide independent routes for cross-validation.

References
----------
W. K. Grassmann, M. I. Taksar and D. P. Heyman, "Regenerative analysis and
steady state distributions for Markov chains", Operations Research 33 (1985).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConvergenceFailureError, InternalConsistencyError, InvalidParameterError
from .kernel import TransitionKernel


@dataclass
class StationaryDist:
    """Stationary probabilities indexed by (level, background index).

    ``residual`` is the max row-balance violation for the solved chain
    (the successive-difference at stop for the power method, NaN for the
    Monte Carlo estimate).
    """

    pi: np.ndarray
    L_max: int
    D: int
    residual: float
    method: str = "direct"

    def flat(self) -> np.ndarray:
        return self.pi.ravel()

    def level_marginal(self) -> np.ndarray:
        return self.pi.sum(axis=1)


def _balance_residual(kernel: TransitionKernel, flat: np.ndarray) -> float:
    P = kernel.to_csr()
    return float(np.abs(flat @ P - flat).max())


def gth_stationary(P) -> np.ndarray:
    """Stationary vector of a single irreducible stochastic matrix by GTH.

    Subtraction-free: diagonal entries are never used, escape mass is summed
    from the off-diagonals, so no cancellation occurs.
    """
    A = np.array(P, dtype=float, copy=True)
    n = A.shape[0]
    records = []
    for j in range(n - 1, 0, -1):
        s = A[j, :j].sum()
        if s <= 0:
            raise InternalConsistencyError(f"state {j} has no escape mass to remaining states")
        col = A[:j, j].copy()
        records.append((j, col, s))
        A[:j, :j] += np.outer(col, A[j, :j] / s)
    pi = np.zeros(n)
    pi[0] = 1.0
    for j, col, s in reversed(records):
        pi[j] = (col @ pi[:j]) / s
    return pi / pi.sum()


def solve_direct(kernel: TransitionKernel) -> StationaryDist:
    """GTH elimination respecting the level bands.

    Levels are eliminated top-down; because the chain is level-skip-free,
    censoring a level only touches the adjacent lower level, so all updates
    stay inside a 2m x 2m window. Within a level, states are eliminated in
    descending enumeration order, and every eliminated state records its
    incoming column and escape mass for the back-substitution pass. States
    that are transient under truncation simply receive probability zero.
    """
    m, L = kernel.m, kernel.L_max
    records: list[tuple[int, int, int, np.ndarray, float]] = []

    T = kernel.top_block().copy()
    for n in range(L, 0, -1):
        lower = kernel.B0 if n == 1 else kernel.A0
        W = np.zeros((2 * m, 2 * m))
        W[:m, :m] = lower
        W[:m, m:] = kernel.Ap
        W[m:, :m] = kernel.Am
        W[m:, m:] = T
        for j in range(2 * m - 1, m - 1, -1):
            s = W[j, :j].sum()
            if s <= 0:
                raise InternalConsistencyError(
                    f"state (level {n}, background {j - m}) has no escape mass")
            col = W[:j, j].copy()
            records.append((n * m + (j - m), n, j, col, s))
            W[:j, :j] += np.outer(col, W[j, :j] / s)
        T = W[:m, :m].copy()

    for j in range(m - 1, 0, -1):
        s = T[j, :j].sum()
        if s <= 0:
            raise InternalConsistencyError(f"state (level 0, background {j}) has no escape mass")
        col = T[:j, j].copy()
        records.append((j, 0, j, col, s))
        T[:j, :j] += np.outer(col, T[j, :j] / s)

    flat = np.zeros((L + 1) * m)
    flat[0] = 1.0
    for glob, n, j, col, s in reversed(records):
        if n == 0:
            val = col @ flat[:j]
        else:
            val = col[:m] @ flat[(n - 1) * m: n * m]
            if j > m:
                val += col[m:] @ flat[n * m: n * m + (j - m)]
        flat[glob] = val / s
    flat /= flat.sum()

    return StationaryDist(pi=flat.reshape(L + 1, m), L_max=L, D=kernel.D,
                          residual=_balance_residual(kernel, flat), method="direct")


def solve_power(kernel: TransitionKernel, tol: float = 1e-10, max_iters: int = 200_000,
                x0=None) -> StationaryDist:
    """Left power iteration on the sparse kernel.

    Stops once the successive l1 difference is <= tol AND the projected
    remaining error (geometric extrapolation with the observed contraction
    factor) is small, so the returned vector is honestly close to the fixed
    point, not merely slow-moving.
    """
    P = kernel.to_csr()
    n = kernel.n_states
    if x0 is None:
        x = np.full(n, 1.0 / n)
    else:
        x = np.asarray(x0, dtype=float)
        x = x / x.sum()
    prev_diff = None
    diff = np.inf
    for _ in range(max_iters):
        x1 = x @ P
        x1 /= x1.sum()
        diff = float(np.abs(x1 - x).sum())
        contraction = diff / prev_diff if prev_diff else None
        x = x1
        if diff <= tol:
            if diff <= 0.02 * tol:
                break
            if contraction is not None and 0.0 < contraction < 1.0 \
                    and diff * contraction / (1.0 - contraction) <= 5.0 * tol:
                break
        prev_diff = diff
    else:
        raise ConvergenceFailureError(
            f"power iteration: no convergence in {max_iters} iterations "
            f"(last l1 difference {diff:.3e})", residual=diff)

    return StationaryDist(pi=x.reshape(kernel.L_max + 1, kernel.m), L_max=kernel.L_max,
                          D=kernel.D, residual=diff, method="power")


@njit(cache=False)
def _walk_chunk(indptr, targets, cdf, state, counts, u, t0, burn_in):
    s = state
    for i in range(u.shape[0]):
        lo = indptr[s]
        hi = indptr[s + 1]
        x = u[i]
        j = lo
        while j < hi - 1 and x >= cdf[j]:
            j += 1
        s = targets[j]
        if t0 + i >= burn_in:
            counts[s] += 1
    return s


def _sampler_tables(kernel: TransitionKernel):
    """Per-state cumulative tables in the kernel's row-assembly order."""
    indptr = [0]
    targets: list[int] = []
    cdf: list[float] = []
    for level, b, row in kernel.iter_rows():
        acc = 0.0
        for lv, c, p in row:
            acc += p
            targets.append(kernel.flat(lv, c))
            cdf.append(acc)
        indptr.append(len(targets))
    return (np.asarray(indptr, dtype=np.int64), np.asarray(targets, dtype=np.int64),
            np.asarray(cdf, dtype=np.float64))


def simulate(kernel: TransitionKernel, seed: int, steps: int,
             burn_in: int | None = None) -> StationaryDist:
    """Occupation frequencies of a seeded walk started at (level 0, zero background).

    Uniform draws come from PCG64 in fixed-size chunks, so runs are exactly
    reproducible per seed. Burn-in defaults to 10% of steps.
    """
    if burn_in is None:
        burn_in = steps // 10
    if steps <= burn_in:
        raise InvalidParameterError(f"steps ({steps}) must exceed burn_in ({burn_in})")
    indptr, targets, cdf = _sampler_tables(kernel)
    counts = np.zeros(kernel.n_states, dtype=np.int64)
    rng = np.random.Generator(np.random.PCG64(seed))
    state = 0
    done = 0
    chunk = 1_000_000
    while done < steps:
        u = rng.random(min(chunk, steps - done))
        state = _walk_chunk(indptr, targets, cdf, state, counts, u, done, burn_in)
        done += u.shape[0]
    pi = counts / float(steps - burn_in)
    return StationaryDist(pi=pi.reshape(kernel.L_max + 1, kernel.m), L_max=kernel.L_max,
                          D=kernel.D, residual=float("nan"), method="simulate")


def tv_distance(a: StationaryDist, b: StationaryDist) -> float:
    """Total variation distance between two distributions on the same box."""
    return 0.5 * float(np.abs(a.flat() - b.flat()).sum())


def write_pi_csv(dist: StationaryDist, idx, path) -> None:
    """Export as CSV with columns level, h_1..h_k, probability."""
    k = idx.k
    with open(path, "w") as fh:
        fh.write("level," + ",".join(f"h_{i + 1}" for i in range(k)) + ",probability\n")
        for level in range(dist.L_max + 1):
            for b, h in enumerate(idx.states):
                fh.write(f"{level}," + ",".join(str(v) for v in h)
                         + f",{float(dist.pi[level, b])!r}\n")
