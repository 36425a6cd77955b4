import numpy as np
import pytest
from hypothesis import given, strategies as st

from jsqtail.errors import InvalidStateError, SizeCapError
from jsqtail.statespace import enumerate_background, face_of, _jump_targets

from oracles import brute_force_background


def test_small_enumeration_k2_d1():
    idx = enumerate_background(2, 1)
    assert idx.states == ((0, 0), (0, 1), (1, 0))


def test_cardinality_k2_d3():
    idx = enumerate_background(2, 3)
    assert len(idx) == 16 - 9 == 7


def test_cardinality_k3_d2():
    idx = enumerate_background(3, 2)
    assert len(idx) == 27 - 8 == 19


@pytest.mark.parametrize("k", [2, 3, 4])
@pytest.mark.parametrize("D", [1, 2, 4, 6])
def test_cardinality_formula_vs_brute_force(k, D):
    idx = enumerate_background(k, D)
    brute = brute_force_background(k, D)
    assert len(idx) == (D + 1) ** k - D ** k
    assert list(idx.states) == brute  # same lexicographic order


def test_bijectivity():
    idx = enumerate_background(3, 4)
    for b, h in enumerate(idx.states):
        assert idx.encode(h) == b
        assert idx.decode(b) == h


def test_face_of_examples():
    assert face_of((0, 0)).U == frozenset({1, 2})
    assert face_of((0, 3)).U == frozenset({1})
    assert face_of((0, 2, 0)).U == frozenset({1, 3})


def test_face_of_rejects_nonmember():
    with pytest.raises(InvalidStateError):
        face_of((1, 2))
    with pytest.raises(InvalidStateError):
        face_of((0, -1))


def test_zero_set_matches_face():
    idx = enumerate_background(3, 3)
    for b, h in enumerate(idx.states):
        U = face_of(h).U
        assert U == {i + 1 for i in idx.zero_sets[b]}
        assert all((h[i - 1] == 0) == (i in U) for i in range(1, 4))


def test_interior_mask_equals_max_below_D():
    # one-step closure fails exactly when a service-at-minimum jump would
    # push the max above D, i.e. when max h == D (and D >= 1)
    for k, D in [(2, 1), (2, 4), (3, 3)]:
        idx = enumerate_background(k, D)
        expect = np.array([max(h) <= D - 1 for h in idx.states])
        assert np.array_equal(idx.interior_mask, expect)


@given(st.integers(min_value=1, max_value=5), st.integers(min_value=2, max_value=3))
def test_jump_targets_stay_in_difference_space(D, k):
    idx = enumerate_background(k, D)
    for b, h in enumerate(idx.states):
        for tgt in _jump_targets(h, idx.zero_sets[b]):
            assert min(tgt) == 0  # every jump keeps a zero entry
            if idx.interior_mask[b]:
                assert max(tgt) <= D


def test_size_cap():
    with pytest.raises(SizeCapError):
        enumerate_background(4, 100)


def test_degenerate_single_state():
    idx = enumerate_background(2, 0)
    assert idx.states == ((0, 0),)
