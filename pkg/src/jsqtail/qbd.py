"""Quasi-birth-and-death layer over the background space.

The walk is level-skip-free, so its kernel is block tridiagonal with
repeating blocks A_minus / A_zero / A_plus away from level zero and a
boundary block B_zero. The level process inherits a matrix-geometric
stationary form pi_n = pi_0 R^n from the minimal nonnegative solution of
R = A_plus + R A_zero + R^2 A_minus.

The decay-rate apparatus: the generating family A(z) = z^{-1} A_minus +
A_zero + z A_plus has, at z = rho^{-k}, the exact right invariant vector
y_h = rho^{-(h_1+...+h_k)} on interior rows. Conjugating A(rho^{-k}) by
diag(y) gives a stochastic "twisted" chain; its stationary vector nu yields
the left invariant vector x = nu / y (entrywise), normalized so x . y = 1.
The per-background tail prefactor is then proportional to x.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd

import numpy as np

from .errors import (
    ConvergenceFailureError, InternalConsistencyError, NumericalDegeneracyError,
    UnstableParamsError,
)
from .model import QueueParams
from .solver import gth_stationary
from .statespace import BackgroundIndex, enumerate_background


@dataclass
class QbdBlocks:
    """Truncated transition blocks with truncation-affected rows flagged.

    Out-of-box targets (only the service-at-minimum jumps can exceed the
    background cap, plus tied arrivals in the degenerate D = 0 box) are
    redirected to the diagonal of A_zero (resp. B_zero).
    """

    A_minus: np.ndarray = field(repr=False)
    A_zero: np.ndarray = field(repr=False)
    A_plus: np.ndarray = field(repr=False)
    B_zero: np.ndarray = field(repr=False)
    boundary_rows: np.ndarray = field(repr=False)
    idx: BackgroundIndex = field(repr=False)
    params: QueueParams = field(repr=False)

    @property
    def m(self) -> int:
        return len(self.idx)


@dataclass
class RFactor:
    R: np.ndarray = field(repr=False)
    iterations: int = 0
    residual: float = float("nan")
    spectral_radius: float = float("nan")


@dataclass
class InvariantPair:
    """Invariant vectors of the generating family at the decay parameter.

    alpha = rho^{-k}; y is the exact right vector, x the left vector obtained
    from the twisted chain's stationary nu, r_vec the induced right
    eigenvector of R. ``exact_residual`` is filled (and must be zero) when
    the rational-arithmetic check was requested.
    """

    alpha: float
    y: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    nu: np.ndarray = field(repr=False)
    r_vec: np.ndarray = field(repr=False)
    interior_residual: float = float("nan")
    exact_residual: Fraction | None = None


def build_blocks(params: QueueParams, idx: BackgroundIndex) -> QbdBlocks:
    """Assemble the four blocks directly from the per-state entry rules.

    Up-jumps (mass lam) exist only on rows with a unique minimum; tied rows
    split the arrival within the level. Service at a minimum queue drops the
    level (or is a no-op in B_zero); other services move within the level.
    This is an independent route from the increment-law kernel assembly and
    is cross-checked against it in the tests.
    """
    m, k, D = len(idx), params.k, idx.D
    Ap = np.zeros((m, m))
    Az = np.zeros((m, m))
    Am = np.zeros((m, m))
    B0 = np.zeros((m, m))
    boundary = np.zeros(m, dtype=bool)

    for b, h in enumerate(idx.states):
        S = idx.zero_sets[b]
        if len(S) == 1:
            i = S[0]
            tgt = tuple(h[j] - 1 + (1 if j == i else 0) for j in range(k))
            Ap[b, idx.encode(tgt)] += params.lam
        else:
            w = params.lam / len(S)
            for i in S:
                tgt = tuple(h[j] + (1 if j == i else 0) for j in range(k))
                if max(tgt) > D:
                    Az[b, b] += w
                    B0[b, b] += w
                    boundary[b] = True
                else:
                    c = idx.encode(tgt)
                    Az[b, c] += w
                    B0[b, c] += w
        for j in range(k):
            if j in S:
                continue
            c = idx.encode(tuple(h[t] - (1 if t == j else 0) for t in range(k)))
            Az[b, c] += params.mu[j]
            B0[b, c] += params.mu[j]
        for i in S:
            tgt = tuple(h[t] + 1 - (1 if t == i else 0) for t in range(k))
            if max(tgt) > D:
                Az[b, b] += params.mu[i]
                boundary[b] = True
            else:
                Am[b, idx.encode(tgt)] += params.mu[i]
            B0[b, b] += params.mu[i]  # idle minimum queue: service is a no-op at level 0

    return QbdBlocks(A_minus=Am, A_zero=Az, A_plus=Ap, B_zero=B0,
                     boundary_rows=boundary, idx=idx, params=params)


def _exact_A_blocks(params: QueueParams, idx: BackgroundIndex):
    """The three level blocks as per-row {col: Fraction} maps, exact arithmetic."""
    k, D = params.k, idx.D
    lam, mu = params.lam_exact, params.mu_exact
    Ap = [dict() for _ in range(len(idx))]
    Az = [dict() for _ in range(len(idx))]
    Am = [dict() for _ in range(len(idx))]

    def put(rows, b, c, w):
        rows[b][c] = rows[b].get(c, Fraction(0)) + w

    for b, h in enumerate(idx.states):
        S = idx.zero_sets[b]
        if len(S) == 1:
            i = S[0]
            tgt = tuple(h[j] - 1 + (1 if j == i else 0) for j in range(k))
            put(Ap, b, idx.encode(tgt), lam)
        else:
            for i in S:
                tgt = tuple(h[j] + (1 if j == i else 0) for j in range(k))
                c = b if max(tgt) > D else idx.encode(tgt)
                put(Az, b, c, lam / len(S))
        for j in range(k):
            if j in S:
                continue
            put(Az, b, idx.encode(tuple(h[t] - (1 if t == j else 0) for t in range(k))), mu[j])
        for i in S:
            tgt = tuple(h[t] + 1 - (1 if t == i else 0) for t in range(k))
            if max(tgt) > D:
                put(Az, b, b, mu[i])
            else:
                put(Am, b, idx.encode(tgt), mu[i])
    return Am, Az, Ap


def solve_R(blocks: QbdBlocks, tol: float = 1e-12, max_iters: int = 20_000) -> RFactor:
    """Minimal nonnegative solution of R = A_plus + R A_zero + R^2 A_minus.

    Natural fixed-point iteration from zero; the iterates increase entrywise
    to the minimal solution, which is asserted along the way. Converges
    linearly at roughly the spectral radius of R, i.e. a few dozen steps at
    the reference loads.
    """
    Ap, Az, Am = blocks.A_plus, blocks.A_zero, blocks.A_minus
    R = np.zeros_like(Ap)
    delta = np.inf
    for it in range(1, max_iters + 1):
        R1 = Ap + R @ Az + R @ (R @ Am)
        if float((R1 - R).min()) < -1e-15:
            raise InternalConsistencyError("R iteration lost entrywise monotonicity")
        delta = float(np.abs(R1 - R).max())
        R = R1
        if delta <= tol:
            break
    else:
        raise ConvergenceFailureError(
            f"R iteration: no convergence in {max_iters} iterations", residual=delta)
    residual = float(np.abs(Ap + R @ Az + R @ (R @ Am) - R).sum(axis=1).max())
    return RFactor(R=R, iterations=it, residual=residual,
                   spectral_radius=_power_radius(R))


def _power_radius(R: np.ndarray, tol: float = 1e-13, max_iters: int = 100_000) -> float:
    v = np.ones(R.shape[0])
    lam = 0.0
    for _ in range(max_iters):
        w = R @ v
        nw = float(np.abs(w).max())
        if nw == 0.0:
            return 0.0
        lam_new = nw / float(np.abs(v).max())
        v = w / nw
        if abs(lam_new - lam) <= tol * max(1.0, lam_new):
            return lam_new
        lam = lam_new
    return lam


def boundary_pi0(blocks: QbdBlocks, rfactor: RFactor, tol: float = 1e-14,
                 max_iters: int = 1_000_000) -> np.ndarray:
    """Level-zero weights from the boundary balance, matrix-geometric normalized.

    Left Perron vector of B_zero + R A_minus by power iteration, scaled so
    the full geometric sum pi_0 (I - R)^{-1} 1 equals one.
    """
    W = blocks.B_zero + rfactor.R @ blocks.A_minus
    m = W.shape[0]
    v = np.full(m, 1.0 / m)
    for _ in range(max_iters):
        v1 = v @ W
        v1 /= v1.sum()
        diff = float(np.abs(v1 - v).max())
        v = v1
        if diff <= tol:
            break
    else:
        raise ConvergenceFailureError("boundary balance: power iteration stalled",
                                      residual=diff)
    total = np.linalg.solve(np.eye(m) - rfactor.R, np.ones(m))
    return v / float(v @ total)


def matrix_geometric_pi(blocks: QbdBlocks, rfactor: RFactor, pi0: np.ndarray,
                        n_levels: int) -> np.ndarray:
    """Level slices pi_n = pi_0 R^n for n = 0..n_levels."""
    if not rfactor.spectral_radius < 1:
        raise UnstableParamsError(
            f"spectral radius {rfactor.spectral_radius} >= 1; matrix-geometric "
            "form requires a stable instance")
    out = np.empty((n_levels + 1, blocks.m))
    v = np.array(pi0, dtype=float)
    out[0] = v
    for n in range(1, n_levels + 1):
        v = v @ rfactor.R
        out[n] = v
    return out


def twisted_chain(params: QueueParams, idx: BackgroundIndex) -> np.ndarray:
    """Stochastic conjugation of the generating family at the decay parameter.

    Entries follow the closed form: arrival jumps get weight lam/rho (split
    within a tie), service jumps weight mu_i * rho; rows sum to lam/rho +
    rho * sum(mu) = 1 by the definition of rho. Out-of-box service jumps are
    redirected to self-loops with their twisted weight, which keeps the
    truncated matrix stochastic (this is truncation of the twisted infinite
    chain, not conjugation of the truncated blocks).
    """
    m, k, D = len(idx), params.k, idx.D
    lam_over_rho = float(params.lam_exact / params.rho_exact)
    mu_rho = [float(mi * params.rho_exact) for mi in params.mu_exact]
    T = np.zeros((m, m))
    for b, h in enumerate(idx.states):
        S = idx.zero_sets[b]
        if len(S) == 1:
            i = S[0]
            tgt = tuple(h[j] - 1 + (1 if j == i else 0) for j in range(k))
            T[b, idx.encode(tgt)] += lam_over_rho
        else:
            w = lam_over_rho / len(S)
            for i in S:
                tgt = tuple(h[j] + (1 if j == i else 0) for j in range(k))
                c = b if max(tgt) > D else idx.encode(tgt)
                T[b, c] += w
        for j in range(k):
            if j in S:
                continue
            T[b, idx.encode(tuple(h[t] - (1 if t == j else 0) for t in range(k)))] += mu_rho[j]
        for i in S:
            tgt = tuple(h[t] + 1 - (1 if t == i else 0) for t in range(k))
            c = b if max(tgt) > D else idx.encode(tgt)
            T[b, c] += mu_rho[i]
    return T


def invariant_pair(params: QueueParams, blocks: QbdBlocks, rfactor: RFactor | None = None,
                   tol: float = 1e-12, rational: bool = False) -> InvariantPair:
    """Construct (alpha, y, x, nu, r_vec) and verify the interior identity.

    y_h = rho^{-(sum of h)} must satisfy A(rho^{-k}) y = y exactly on interior
    rows; a residual above ``tol`` signals a block-construction bug. With
    ``rational`` set the identity is additionally checked in exact Fraction
    arithmetic and must vanish identically.
    """
    idx = blocks.idx
    k = params.k
    rho_inv = 1 / params.rho_exact
    alpha = float(rho_inv ** k)
    alpha_inv = float(params.rho_exact ** k)
    y = np.array([float(rho_inv ** sum(h)) for h in idx.states])

    res = alpha_inv * (blocks.A_minus @ y) + blocks.A_zero @ y \
        + alpha * (blocks.A_plus @ y) - y
    interior_residual = float(np.abs(res[idx.interior_mask]).max())
    if interior_residual > tol:
        raise InternalConsistencyError(
            f"interior invariant-vector residual {interior_residual:.3e} exceeds {tol:.1e}")

    exact_residual = None
    if rational:
        exact_residual = invariant_residual_exact(params, idx)
        if exact_residual != 0:
            raise InternalConsistencyError(
                f"exact invariant-vector residual is nonzero: {exact_residual}")

    T = twisted_chain(params, idx)
    nu = gth_stationary(T)
    x = nu / y
    x = x / float(x @ y)

    if rfactor is None:
        rfactor = solve_R(blocks)
    m = blocks.m
    r_vec = (np.eye(m) - blocks.A_zero - rfactor.R @ blocks.A_minus
             - alpha_inv * blocks.A_minus) @ y
    return InvariantPair(alpha=alpha, y=y, x=x, nu=nu, r_vec=r_vec,
                         interior_residual=interior_residual,
                         exact_residual=exact_residual)


def invariant_residual_exact(params: QueueParams, idx: BackgroundIndex) -> Fraction:
    """Max absolute interior residual of the invariant identity, in Fractions."""
    Am, Az, Ap = _exact_A_blocks(params, idx)
    rho = params.rho_exact
    k = params.k
    alpha_inv = rho ** k
    alpha = 1 / alpha_inv
    y = [ (1 / rho) ** sum(h) for h in idx.states ]
    worst = Fraction(0)
    for b in range(len(idx)):
        if not idx.interior_mask[b]:
            continue
        acc = -y[b]
        for c, w in Am[b].items():
            acc += alpha_inv * w * y[c]
        for c, w in Az[b].items():
            acc += w * y[c]
        for c, w in Ap[b].items():
            acc += alpha * w * y[c]
        worst = max(worst, abs(acc))
    return worst


def prefactor(blocks: QbdBlocks, rfactor: RFactor, pair: InvariantPair,
              pi0: np.ndarray) -> np.ndarray:
    """Per-background tail constants c = (pi0 . r / x . r) x."""
    xr = float(pair.x @ pair.r_vec)
    if xr <= 0:
        raise NumericalDegeneracyError(f"x . r = {xr:.3e} is not positive")
    scale = float(pi0 @ pair.r_vec) / xr
    return scale * pair.x


def level_displacement_gcd(params: QueueParams, idx: BackgroundIndex) -> int:
    """gcd of level displacements over cycles of the (unredirected) block graph.

    Potentials are assigned by breadth-first search treating edges as
    undirected; every directed edge then contributes |phi(u) + d - phi(v)| to
    the gcd. A result of 1 certifies the level increments are aperiodic in
    the arithmetic sense.
    """
    k, D = params.k, idx.D
    edges: list[tuple[int, int, int]] = []
    for b, h in enumerate(idx.states):
        S = idx.zero_sets[b]
        if len(S) == 1:
            i = S[0]
            edges.append((b, idx.encode(tuple(h[j] - 1 + (1 if j == i else 0)
                                              for j in range(k))), 1))
        else:
            for i in S:
                tgt = tuple(h[j] + (1 if j == i else 0) for j in range(k))
                if max(tgt) <= D:
                    edges.append((b, idx.encode(tgt), 0))
        for j in range(k):
            if j in S:
                continue
            edges.append((b, idx.encode(tuple(h[t] - (1 if t == j else 0)
                                              for t in range(k))), 0))
        for i in S:
            tgt = tuple(h[t] + 1 - (1 if t == i else 0) for t in range(k))
            if max(tgt) <= D:
                edges.append((b, idx.encode(tgt), -1))

    adj: dict[int, list[tuple[int, int]]] = {b: [] for b in range(len(idx))}
    for u, v, d in edges:
        adj[u].append((v, d))
        adj[v].append((u, -d))
    phi = {0: 0}
    queue = [0]
    while queue:
        u = queue.pop()
        for v, d in adj[u]:
            if v not in phi:
                phi[v] = phi[u] + d
                queue.append(v)
    g = 0
    for u, v, d in edges:
        g = gcd(g, abs(phi[u] + d - phi[v]))
    return g


def spectral_radius_table(params: QueueParams, D_values, tol: float = 1e-12):
    """(D, spectral radius, |gap to rho^k|) rows for the truncation study."""
    target = float(params.rho_exact ** params.k)
    rows = []
    for D in D_values:
        idx = enumerate_background(params.k, D)
        rf = solve_R(build_blocks(params, idx), tol=tol)
        rows.append((D, rf.spectral_radius, abs(rf.spectral_radius - target)))
    return rows


def pi0_y_convergence(params: QueueParams, D_values, tol: float = 1e-12):
    """(D, sum of pi0 . y) rows: the boundary mass weighted by the right
    invariant vector, which must increase and go Cauchy in D for the
    matrix-geometric prefactor to be meaningful."""
    rho_inv = 1 / params.rho_exact
    rows = []
    for D in D_values:
        idx = enumerate_background(params.k, D)
        blocks = build_blocks(params, idx)
        rf = solve_R(blocks, tol=tol)
        pi0 = boundary_pi0(blocks, rf)
        y = np.array([float(rho_inv ** sum(h)) for h in idx.states])
        rows.append((D, float(pi0 @ y)))
    return rows
