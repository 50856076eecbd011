import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from posetrss.poset import (
    Ordering,
    Poset,
    PosetError,
    SetOfElements,
    apply_flips,
    build_poset,
    compare,
    dominance,
    pairwise_correlations,
    suggest_sign_flips,
    transitive_reduction,
)

from conftest import LABELS, FIVE_ELEMENTS


def brute_relation(x):
    m = x.shape[0]
    rel = np.zeros((m, m), dtype=bool)
    for i, j in itertools.product(range(m), repeat=2):
        rel[i, j] = bool(np.all(x[i] <= x[j]) and np.any(x[i] != x[j]))
    return rel


def test_compare_cases():
    assert compare((0, 1), (3, 3)) is Ordering.BELOW
    assert compare((3, 3), (0, 1)) is Ordering.ABOVE
    assert compare((0, 4), (3, 3)) is Ordering.INCOMPARABLE
    assert compare((1, 2), (1, 2)) is Ordering.EQUAL
    with pytest.raises(ValueError):
        compare((1, 2), (1, 2, 3))


def test_five_element_relation(five_poset):
    pairs = {(LABELS[i], LABELS[j]) for i, j in zip(*np.nonzero(five_poset.relation))}
    assert pairs == {("a", "b"), ("a", "c"), ("a", "d"), ("a", "e"), ("b", "d"), ("c", "d")}


def test_five_element_cover_edges(five_poset):
    covers = {(LABELS[i], LABELS[j]) for i, j in five_poset.cover_edges}
    assert covers == {("a", "b"), ("a", "c"), ("a", "e"), ("b", "d"), ("c", "d")}


def test_chain_and_antichain():
    x = np.cumsum(np.ones((6, 3)), axis=0)
    p = build_poset(x)
    assert len(p.cover_edges) == 5
    assert build_poset(np.array([[1.0, 2.0], [2.0, 1.0]])).relation.sum() == 0


def test_duplicates_carry_no_edge():
    p = build_poset(np.array([[1.0, 1.0], [1.0, 1.0], [2.0, 2.0]]))
    assert not p.relation[0, 1] and not p.relation[1, 0]
    assert p.relation[0, 2] and p.relation[1, 2]


def test_flipping_every_variable_reverses_the_order():
    p = build_poset(FIVE_ELEMENTS)
    q = build_poset(FIVE_ELEMENTS, flips=[True, True])
    np.testing.assert_array_equal(q.relation, p.relation.T)


def test_flip_is_a_view():
    x = FIVE_ELEMENTS.copy()
    y = apply_flips(x, [False, True])
    np.testing.assert_array_equal(x, FIVE_ELEMENTS)
    np.testing.assert_array_equal(y[:, 1], -FIVE_ELEMENTS[:, 1])


def test_invalid_posets_rejected():
    rel = np.zeros((3, 3), dtype=bool)
    rel[0, 1] = rel[1, 2] = True
    with pytest.raises(PosetError):
        Poset(rel)  # not transitive
    rel = np.eye(2, dtype=bool)
    with pytest.raises(PosetError):
        Poset(rel)
    with pytest.raises(PosetError):
        SetOfElements(np.array([[1.0, np.nan], [0.0, 0.0]]))
    with pytest.raises(PosetError):
        SetOfElements(np.array([[1.0, 2.0]]))


@settings(max_examples=200, deadline=None)
@given(arrays(np.int8, st.tuples(st.integers(2, 9), st.integers(1, 3)), elements=st.integers(0, 3)))
def test_dominance_matches_brute_force(x):
    x = x.astype(float)
    rel = dominance(x)
    np.testing.assert_array_equal(rel, brute_relation(x))
    p = Poset(rel)  # validates irreflexive, antisymmetric, transitive
    assert not np.any(p.relation & p.relation.T)
    closure = np.zeros_like(rel)
    for i, j in transitive_reduction(rel):
        closure[i, j] = True
    # closure of the cover edges recovers the relation
    for k in range(x.shape[0]):
        closure |= closure[:, [k]] & closure[[k], :]
    np.testing.assert_array_equal(closure, rel)


def test_correlation_hand_computed():
    # 3 * sum(xy) - sum(x) sum(y) = 12, 3 * sum(x^2) - sum(x)^2 = 6, 3 * sum(y^2) - sum(y)^2 = 26
    c = pairwise_correlations(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 4.0]]), ["x", "y"])
    assert c[0, 1] == pytest.approx(12 / np.sqrt(156), abs=1e-12)
    assert c[0, 0] == c[1, 1] == 1.0


def test_correlation_constant_column_is_named():
    with pytest.raises(ValueError, match="Cd"):
        pairwise_correlations(np.array([[1.0, 2.0], [2.0, 2.0], [3.0, 2.0]]), ["Pb", "Cd"])


def test_sign_flip_suggestions():
    assert list(suggest_sign_flips(np.array([[1.0, -0.9], [-0.9, 1.0]]))) == [False, True]
    assert not any(suggest_sign_flips(np.array([[1.0, 0.6], [0.6, 1.0]])))
    # Pb, Cd, Zn, S where Cd and Zn oppose the rest
    corr = np.array(
        [
            [1.0, -0.5, -0.6, 0.3],
            [-0.5, 1.0, 0.4, -0.2],
            [-0.6, 0.4, 1.0, -0.3],
            [0.3, -0.2, -0.3, 1.0],
        ]
    )
    assert list(suggest_sign_flips(corr)) == [False, True, True, False]
