"""Truncated background state space.

The background of the walk is the vector of per-queue differences from the
minimum queue length: a k-vector of nonnegative integers with at least one
zero entry. Truncation keeps max difference <= D, so the space has
(D+1)^k - D^k members (all vectors with entries <= D minus those with every
entry >= 1). Enumeration is lexicographic and the index table is dense.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import InvalidStateError, SizeCapError

# Guard against accidentally huge boxes; (D+1)^k is compared against this.
STATE_CAP = 2_000_000


@dataclass(frozen=True)
class FaceLabel:
    """Which servers sit at the minimum, and whether the minimum is zero.

    ``U`` holds 1-based server indices, matching the convention used
    throughout the reports.
    """

    U: frozenset[int]
    zero_level: bool = False


def face_of(h, zero_level: bool = False) -> FaceLabel:
    """Label a background vector by its set of zero entries."""
    h = tuple(int(v) for v in h)
    if any(v < 0 for v in h) or min(h) != 0:
        raise InvalidStateError(f"{h} is not a background state (min entry must be 0)")
    return FaceLabel(U=frozenset(i + 1 for i, v in enumerate(h) if v == 0), zero_level=zero_level)


@dataclass
class BackgroundIndex:
    """Dense bijection between background vectors and integers in [0, m).

    ``interior_mask[b]`` is True when every one-step background jump from
    state b lands inside the box; rows of the transition blocks need
    truncation redirects exactly on the complement.
    """

    k: int
    D: int
    states: tuple[tuple[int, ...], ...]
    index: dict[tuple[int, ...], int] = field(repr=False)
    interior_mask: np.ndarray = field(repr=False)
    zero_sets: tuple[tuple[int, ...], ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.states)

    def encode(self, h) -> int:
        h = tuple(int(v) for v in h)
        try:
            return self.index[h]
        except KeyError:
            raise InvalidStateError(f"{h} not in the enumerated box (D={self.D})") from None

    def decode(self, b: int) -> tuple[int, ...]:
        return self.states[b]


def _jump_targets(h: tuple[int, ...], zero_set: tuple[int, ...]):
    """All one-step background targets from h, per the increment laws.

    Yields the composed background vectors only; level displacements are not
    needed here. Every target is again a valid background vector (min 0);
    the only way to leave the box is max exceeding D.
    """
    k = len(h)
    s = len(zero_set)
    if s == 1:
        i = zero_set[0]
        # arrival to the unique shortest queue: subtract 1 everywhere but i
        yield tuple(h[j] - 1 + (1 if j == i else 0) for j in range(k))
    else:
        for i in zero_set:
            yield tuple(h[j] + (1 if j == i else 0) for j in range(k))
    for j in range(k):
        if j in zero_set:
            # service completion at a shortest queue: add 1 everywhere but j
            yield tuple(h[t] + 1 - (1 if t == j else 0) for t in range(k))
        else:
            yield tuple(h[t] - (1 if t == j else 0) for t in range(k))


def enumerate_background(k: int, D: int, cap: int = STATE_CAP) -> BackgroundIndex:
    """Enumerate all difference vectors with min 0 and max <= D, lexicographically.

    Intended for k >= 2 and D >= 1; D = 0 is tolerated (single state) so the
    degenerate single-state chain used in solver edge tests can be built.
    """
    if k < 2:
        raise InvalidStateError(f"k must be >= 2, got {k}")
    if D < 0:
        raise InvalidStateError(f"D must be >= 0, got {D}")
    if (D + 1) ** k > cap:
        raise SizeCapError(f"(D+1)^k = {(D + 1) ** k} exceeds cap {cap}")

    states = tuple(h for h in product(range(D + 1), repeat=k) if min(h) == 0)
    index = {h: b for b, h in enumerate(states)}
    zero_sets = tuple(tuple(j for j, v in enumerate(h) if v == 0) for h in states)
    interior = np.ones(len(states), dtype=bool)
    for b, h in enumerate(states):
        for tgt in _jump_targets(h, zero_sets[b]):
            if max(tgt) > D:
                interior[b] = False
                break
    return BackgroundIndex(k=k, D=D, states=states, index=index,
                           interior_mask=interior, zero_sets=zero_sets)
