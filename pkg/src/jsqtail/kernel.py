"""Increment laws and the one-step transition kernel of the reflecting walk.

State is (M, Y): the minimum queue length M (the "level") and the vector Y of
differences from it (the "background"). Per face, one step is one of

  arrival, unique shortest queue i:   (+1, -1 + e_i)  mass lam
  arrival, tied shortest queues:      ( 0, +e_i)      mass lam * w_i over ties
  service at a non-shortest queue j:  ( 0, -e_j)      mass mu_j
  service at a shortest queue i:      (-1, 1 - e_i)   mass mu_i

where the all-ones shifts reflect re-basing to the new minimum. At level zero
the shortest queues are empty, so their service events do nothing: the
(-1, 1 - e_i) jumps collapse to (0, 0), while a tie-broken arrival still
raises the level only in the single-minimum case. Tie weights w default to
uniform but are configurable.

Truncation (background max <= D, level <= L_max) redirects every outgoing
jump that leaves the box back to its source as a self-loop, keeping rows
stochastic; only the service-at-minimum jumps can exceed the background cap
(they raise the other entries by one) and only arrivals can exceed the level
cap.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import InvalidFaceError, InvalidParameterError, InternalConsistencyError
from .model import QueueParams
from .statespace import BackgroundIndex, FaceLabel, face_of


@dataclass(frozen=True)
class Increment:
    dlevel: int
    dbg: tuple[int, ...]
    prob: float


@dataclass(frozen=True)
class WalkState:
    level: int
    h: tuple[int, ...]


def _tie_weights(face_size: int, split) -> list[float]:
    if split is None:
        return [1.0 / face_size] * face_size
    w = [float(v) for v in split]
    if len(w) != face_size:
        raise InvalidParameterError(f"split length {len(w)} != face size {face_size}")
    if any(v <= 0 for v in w) or abs(sum(w) - 1.0) > 1e-12:
        raise InvalidParameterError("split weights must be positive and sum to 1")
    return w


def increment_law(params: QueueParams, face: FaceLabel, split=None) -> list[Increment]:
    """The finite increment distribution for one boundary face.

    Entries come in a fixed order (arrivals by ascending server index, then
    services by server index); the zero-level no-op services are merged into
    a single (0, 0) entry at the position of the first shortest-queue index.
    The masses sum to 1 by the rate normalization.
    """
    if not face.U:
        raise InvalidFaceError("face label with empty index set")
    k = params.k
    zero_set = sorted(i - 1 for i in face.U)  # 0-based positions
    out: list[Increment] = []

    if len(zero_set) == 1:
        i = zero_set[0]
        dbg = tuple(-1 + (1 if j == i else 0) for j in range(k))
        out.append(Increment(dlevel=1, dbg=dbg, prob=params.lam))
    else:
        w = _tie_weights(len(zero_set), split)
        for i, wi in zip(zero_set, w):
            dbg = tuple(1 if j == i else 0 for j in range(k))
            out.append(Increment(dlevel=0, dbg=dbg, prob=params.lam * wi))

    merged_noop = 0.0
    noop_pos = None
    for j in range(k):
        if j in zero_set:
            if face.zero_level:
                if noop_pos is None:
                    noop_pos = len(out)
                    out.append(None)  # placeholder, filled below
                merged_noop += params.mu[j]
            else:
                dbg = tuple(1 - (1 if t == j else 0) for t in range(k))
                out.append(Increment(dlevel=-1, dbg=dbg, prob=params.mu[j]))
        else:
            dbg = tuple(-(1 if t == j else 0) for t in range(k))
            out.append(Increment(dlevel=0, dbg=dbg, prob=params.mu[j]))
    if noop_pos is not None:
        out[noop_pos] = Increment(dlevel=0, dbg=(0,) * k, prob=merged_noop)
    return out


@dataclass
class TransitionKernel:
    """Banded one-step kernel over {0..L_max} x background box.

    Blocks: B0 (level-0 internal), Am/A0/Ap (down/within/up for levels >= 1).
    Background-cap redirects are already folded into the diagonals of A0 and
    B0; the level-cap redirect (and the degenerate L_max = 0 fold) is applied
    when rows are materialized, so the stored blocks stay truncation-clean
    otherwise. ``boundary_rows`` flags backgrounds whose row needed any
    redirect.
    """

    params: QueueParams
    D: int
    L_max: int
    idx: BackgroundIndex = field(repr=False)
    B0: np.ndarray = field(repr=False)
    Am: np.ndarray = field(repr=False)
    A0: np.ndarray = field(repr=False)
    Ap: np.ndarray = field(repr=False)
    boundary_rows: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return len(self.idx)

    @property
    def n_states(self) -> int:
        return (self.L_max + 1) * self.m

    def flat(self, level: int, b: int) -> int:
        return level * self.m + b

    def top_block(self) -> np.ndarray:
        """Diagonal block at the level cap: internal moves plus the up-jump fold."""
        base = self.B0 if self.L_max == 0 else self.A0
        return base + np.diag(self.Ap.sum(axis=1))

    def iter_rows(self):
        """Yield (level, background, [(target level, target background, prob), ...])."""
        m = self.m
        for level in range(self.L_max + 1):
            if level == self.L_max:
                diag, down = self.top_block(), self.Am if level > 0 else None
                up = None
            elif level == 0:
                diag, down, up = self.B0, None, self.Ap
            else:
                diag, down, up = self.A0, self.Am, self.Ap
            for b in range(m):
                row = []
                for blk, lv in ((down, level - 1), (diag, level), (up, level + 1)):
                    if blk is None:
                        continue
                    for c in np.nonzero(blk[b])[0]:
                        row.append((lv, int(c), float(blk[b, c])))
                yield level, b, row

    def to_csr(self) -> sp.csr_matrix:
        n, m = self.n_states, self.m
        rows, cols, vals = [], [], []
        for level, b, row in self.iter_rows():
            for lv, c, p in row:
                rows.append(level * m + b)
                cols.append(lv * m + c)
                vals.append(p)
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    def row_sum_residual(self) -> float:
        P = self.to_csr()
        return float(np.abs(np.asarray(P.sum(axis=1)).ravel() - 1.0).max())


def build_kernel(params: QueueParams, idx: BackgroundIndex, L_max: int, split=None) -> TransitionKernel:
    """Assemble the truncated kernel from the per-face increment laws.

    Intended for L_max >= 2; L_max in {0, 1} is tolerated (the degenerate
    folds are handled by the band assembly) so edge-case chains remain
    constructible.
    """
    if L_max < 0:
        raise InvalidParameterError(f"L_max must be >= 0, got {L_max}")
    m = len(idx)
    k = params.k
    B0 = np.zeros((m, m))
    Am = np.zeros((m, m))
    A0 = np.zeros((m, m))
    Ap = np.zeros((m, m))
    up_from_zero = np.zeros((m, m))
    boundary = np.zeros(m, dtype=bool)

    for b, h in enumerate(idx.states):
        face = face_of(h)
        for zero_level, diag_blk, up_blk in ((False, A0, Ap), (True, B0, up_from_zero)):
            law = increment_law(params, FaceLabel(U=face.U, zero_level=zero_level), split)
            for inc in law:
                tgt = tuple(h[j] + inc.dbg[j] for j in range(k))
                if max(tgt) > idx.D:
                    diag_blk[b, b] += inc.prob
                    boundary[b] = True
                    continue
                c = idx.encode(tgt)
                if inc.dlevel == 1:
                    up_blk[b, c] += inc.prob
                elif inc.dlevel == -1:
                    if zero_level:
                        raise InternalConsistencyError("down-jump in a zero-level law")
                    Am[b, c] += inc.prob
                else:
                    diag_blk[b, c] += inc.prob

    # the up-block out of level zero must coincide with the interior up-block
    if not np.array_equal(up_from_zero, Ap):
        raise InternalConsistencyError("level-0 up-block differs from the interior up-block")

    return TransitionKernel(params=params, D=idx.D, L_max=L_max, idx=idx,
                            B0=B0, Am=Am, A0=A0, Ap=Ap, boundary_rows=boundary)


def step(params: QueueParams, state: WalkState, draw: float, D: int, L_max: int,
         split=None) -> WalkState:
    """Advance one step by inverse-CDF over the face's increment law.

    Jumps leaving the truncation box are redirected to self-loops, matching
    build_kernel exactly.
    """
    face = face_of(state.h, zero_level=(state.level == 0))
    law = increment_law(params, face, split)
    cum = 0.0
    chosen = law[-1]
    for inc in law:
        cum += inc.prob
        if draw < cum:
            chosen = inc
            break
    new_level = state.level + chosen.dlevel
    new_h = tuple(state.h[j] + chosen.dbg[j] for j in range(params.k))
    if new_level > L_max or max(new_h) > D:
        return state
    return WalkState(level=new_level, h=new_h)


def write_triplets(kernel: TransitionKernel, path) -> None:
    """Dump the kernel as text triplets: flat row index, flat col index, probability."""
    with open(path, "w") as fh:
        fh.write(f"# states={kernel.n_states} m={kernel.m} L_max={kernel.L_max} D={kernel.D}\n")
        for level, b, row in kernel.iter_rows():
            r = kernel.flat(level, b)
            for lv, c, p in row:
                fh.write(f"{r} {kernel.flat(lv, c)} {p!r}\n")
