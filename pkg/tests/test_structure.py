from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from opalg.errors import DimensionCapError, MissingFieldError, NonCancellativeError
from opalg.structure import (PartialStructure, check_axioms, induced_order, is_separating,
                             is_state, ominus, resolutions_of_unity, state_polytope, top_set)


def boolean(n: int) -> PartialStructure:
    """Subsets of n atoms as bitmasks, ⊕ = disjoint union."""
    size = 2 ** n
    plus = {(x, y): x | y for x in range(size) for y in range(size) if not x & y}
    return PartialStructure.from_table(size, plus, 0, size - 1)


def chain(k: int) -> PartialStructure:
    """{0, 1/k, ..., 1} with ⊕ defined when the sum stays ≤ 1."""
    plus = {(x, y): x + y for x in range(k + 1) for y in range(k + 1) if x + y <= k}
    return PartialStructure.from_table(k + 1, plus, 0, k)


@pytest.mark.parametrize("profile", ["PAS", "WEA", "EA", "orthoalgebra"])
def test_boolean_algebra_satisfies_profiles(profile):
    assert check_axioms(boolean(3), profile).passed


def test_chain_is_ea_but_not_orthoalgebra():
    s = chain(2)
    assert check_axioms(s, "EA").passed
    rep = check_axioms(s, "orthoalgebra")
    assert rep["OA5"].witness == (1,)


def test_missing_fields():
    s = PartialStructure.from_table(1, {(0, 0): 0}, 0)
    with pytest.raises(MissingFieldError):
        check_axioms(s, "EA")
    with pytest.raises(MissingFieldError):
        check_axioms(boolean(1), "OA")
    with pytest.raises(MissingFieldError):
        check_axioms(boolean(1), "convexEA")
    with pytest.raises(ValueError):
        check_axioms(boolean(1), "group")


def test_bad_tables_rejected():
    with pytest.raises(ValueError):
        PartialStructure(2, np.zeros((3, 3)), 0)
    with pytest.raises(ValueError):
        PartialStructure(2, np.full((2, 2), 5), 0)


def test_commutativity_failure_witness():
    s = PartialStructure.from_table(3, {(0, 0): 0, (0, 1): 1, (1, 0): 1, (0, 2): 2,
                                        (2, 0): 2, (1, 2): 2}, 0, 2)
    rep = check_axioms(s, "EA")
    assert rep["EA1"].witness == (1, 2)


def test_weak_versus_strong_associativity():
    # a⊕b = u, (a⊕b)⊕c undefined but b⊕c defined and a⊕(b⊕c) defined: one-sided
    plus = {}
    for x in range(6):
        plus[(0, x)] = plus[(x, 0)] = x
    a, b, c, bc, u = 1, 2, 3, 4, 5
    for x, y, z in [(a, b, u), (b, c, bc), (a, bc, u), (c, c, u)]:
        plus[(x, y)] = plus[(y, x)] = z
    s = PartialStructure.from_table(6, plus, 0, u)
    assert not check_axioms(s, "EA")["EA2"].passed
    assert check_axioms(s, "WEA")["WEA2"].passed


def test_order_on_boolean():
    s = boolean(2)
    res = induced_order(s)
    assert res.report.passed
    assert res.le(1, 3) and not res.le(1, 2)


def test_top_set_and_ominus():
    s = boolean(2)
    assert top_set(s) == {3}
    assert ominus(s, 3, 1) == 2
    assert ominus(s, 1, 2) is None


def test_ominus_requires_cancellation():
    s = PartialStructure.from_table(3, {(0, 0): 0, (0, 1): 1, (1, 0): 1, (0, 2): 2,
                                        (2, 0): 2, (1, 1): 2, (1, 2): 2, (2, 1): 2}, 0, 2)
    with pytest.raises(NonCancellativeError):
        ominus(s, 2, 1)


def test_resolutions_of_unity():
    found = dict(resolutions_of_unity(boolean(2), 3))
    assert set(found) == {(3,), (1, 2)}
    assert (1, 1, 1) in dict(resolutions_of_unity(chain(3), 3))


def test_state_polytope_of_boolean():
    poly = state_polytope(boolean(2))
    assert poly.dimension == 1
    assert poly.vertices == [(0, 0, 1, 1), (0, 1, 0, 1)]
    assert poly.contains((0, Fraction(1, 3), Fraction(2, 3), 1))


def test_state_polytope_cap():
    # ten unrelated elements besides 0 and the unit
    plus = {(0, x): x for x in range(12)} | {(x, 0): x for x in range(12)}
    s = PartialStructure.from_table(12, plus, 0, 11)
    with pytest.raises(DimensionCapError):
        state_polytope(s)
    assert state_polytope(s, enumerate_vertices=False).dimension == 10


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.lists(st.integers(0, 6), min_size=3, max_size=3))
def test_atom_distributions_are_states(n, weights):
    s = boolean(n)
    w = [Fraction(x) for x in weights[:n]]
    total = sum(w)
    if total == 0:
        w, total = [Fraction(1)] + [Fraction(0)] * (n - 1), Fraction(1)
    values = [sum((w[i] for i in range(n) if x >> i & 1), Fraction(0)) / total
              for x in range(2 ** n)]
    assert is_state(s, values) is None
    assert state_polytope(s).contains(values)
    bad = list(values)
    bad[-1] = Fraction(1, 2)
    assert is_state(s, bad) is not None


def test_separation():
    s = boolean(1)
    assert is_separating(s, [(0, 1)]) is None
    assert is_separating(s, [(0, 0)]) == (0, 1)
