import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

import oracles
from opalg.errors import PathologyError
from opalg.phenomenology import (Event, StateUpdateRule, build_sequential_theory, parse_theory,
                                 sequential_from_theory)
from opalg.quotient import (attempt_completion, build_wea, build_woa, detect_proper_weakness,
                            equivalence_classes, witness_independence)
from opalg.structure import check_axioms

UNIFORM = "measurement Z = { z0, z1 }\nstate mix = { z0: 1/2, z1: 1/2 }\n"

QUBIT = """measurement Z = { z0, z1 }
measurement X = { x+, x- }
state up = { z0: 1, z1: 0, x+: 1/2, x-: 1/2 }
state down = { z0: 0, z1: 1, x+: 1/2, x-: 1/2 }
state plus = { z0: 1/2, z1: 1/2, x+: 1, x-: 0 }
state minus = { z0: 1/2, z1: 1/2, x+: 0, x-: 1 }
"""


def ev(m, *outs):
    return Event(m, frozenset(outs))


def test_uniform_collapse():
    w = build_wea(parse_theory(UNIFORM))
    assert w.size == 3
    h = w.class_of(ev("Z", "z0"))
    assert w.class_of(ev("Z", "z1")) == h
    assert w.add(h, h) == w.unit
    assert [w.label(x) for x in range(3)] == ["0", "e(z0)", "1"]
    assert check_axioms(w.to_structure(), "EA").passed


def test_classical_bit_is_boolean(classical_bit):
    w = build_wea(classical_bit)
    assert w.size == 4
    assert check_axioms(w.to_structure(), "orthoalgebra").passed
    assert not detect_proper_weakness(w).properly_weak


def test_counterexample_classes(counterexample_wea):
    w = counterexample_wea
    assert w.class_of(ev("M", "a", "b")) == w.class_of(ev("N", "c"))
    assert w.class_of(ev("M", "f")) == w.class_of(ev("N", "d", "g"))
    verdict = detect_proper_weakness(w)
    assert verdict.properly_weak and verdict.labels == ("e(a)", "e(b)", "e(d)")


def test_modes():
    th = parse_theory(UNIFORM)
    assert len(equivalence_classes(th)) == 3
    with pytest.raises(ValueError):
        equivalence_classes(th, "other")
    with pytest.raises(TypeError):
        equivalence_classes(th, "sequential")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_quotient_laws(seed):
    text, meas, states = oracles.random_theory_text(random.Random(seed))
    w = build_wea(parse_theory(text))
    groups, _ = oracles.brute_quotient(meas, states)
    assert sorted(groups) == [c.signature for c in w.classes]
    for x in range(w.size):
        assert w.supplement[w.supplement[x]] == x
        assert w.add(x, w.supplement[x]) == w.unit
    assert witness_independence(w) is None


def test_completion_of_effect_algebra_is_trivial(classical_bit):
    w = build_wea(classical_bit)
    res = attempt_completion(w)
    assert res.is_effect_algebra and res.rounds == 0 and not res.added
    assert res.embedding == {i: i for i in range(w.size)}


def test_completion_of_counterexample(counterexample_wea):
    res = attempt_completion(counterexample_wea)
    assert res.is_effect_algebra
    assert len(res.signatures) == 16
    assert res.rounds == 2
    assert check_axioms(res.to_structure(), "EA").passed


def test_completion_round_limit(counterexample_wea):
    res = attempt_completion(counterexample_wea, max_rounds=1)
    assert res.status == "round-limit"


def _qubit_seq(depth):
    th = parse_theory(QUBIT)
    rule = StateUpdateRule(th, {(s, o): t for s in ("up", "down", "plus", "minus")
                                for o, t in (("z0", "up"), ("z1", "down"),
                                             ("x+", "plus"), ("x-", "minus"))})
    return build_sequential_theory(th, rule, depth)


def test_woa_merges_post_measurement_outcomes():
    woa = build_woa(_qubit_seq(2))
    a = woa.class_of((ev("Z", "z0"), ev("X", "x+")))
    b = woa.class_of((ev("Z", "z0"), ev("X", "x-")))
    assert a == b
    assert woa.class_of(()) == woa.unit
    zero = woa.class_of((ev("Z"),))
    assert zero == woa.zero == woa.class_of((ev("Z", "z0"), ev("Z", "z1")))
    rep = check_axioms(woa.to_structure(), "WOA")
    assert rep.passed, rep.failures()


def test_woa_product_is_concatenation():
    woa = build_woa(_qubit_seq(2))
    z0 = woa.class_of((ev("Z", "z0"),))
    xp = woa.class_of((ev("X", "x+"),))
    assert woa.product[(z0, xp)] == woa.class_of((ev("Z", "z0"), ev("X", "x+")))
    assert woa.product[(woa.unit, z0)] == z0


def test_woa_rejects_contextual_data():
    text = UNIFORM + ("tree T = Z { z0 -> Z, z1 -> Z }\n"
                      "seqstate mix z0.z0 = 1/2\nseqstate mix z0.z1 = 1/4\n"
                      "seqstate mix z1.z0 = 1/4\nseqstate mix z1.z1 = 1/4\n")
    with pytest.raises(PathologyError):
        build_woa(sequential_from_theory(parse_theory(text)))


def test_woa_depth_one_matches_wea():
    th = parse_theory(UNIFORM)
    woa = build_woa(build_sequential_theory(th, StateUpdateRule(th), 1))
    # zero, the empty sequence, and the length-one classes h and Z.{z0,z1}
    assert woa.size == 4
    h = woa.class_of((ev("Z", "z0"),))
    full = woa.class_of((ev("Z", "z0", "z1"),))
    assert sorted(woa.length_one()) == sorted({h, full})
    assert woa.plus[(h, h)] == full
    assert Fraction(1, 2) in woa.classes[h].signature
