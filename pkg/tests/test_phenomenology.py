import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

import oracles
from opalg.errors import (PathologyError, TheorySyntaxError, TheoryValidationError,
                          UnknownOutcomeError)
from opalg.phenomenology import (Event, StateUpdateRule, build_sequential_theory,
                                 check_noncontextuality, complete_trees, event_complement,
                                 event_join, event_meet, event_probability, format_theory,
                                 max_tree_deviation, parse_theory, sequential_from_theory)

BIT = """measurement Z = { z0, z1 }
state up = { z0: 1, z1: 0 }
state mix = { z0: 1/2, z1: 1/2 }
"""


def test_parse_basic(classical_bit):
    assert [m.id for m in classical_bit.measurements] == ["Z"]
    assert classical_bit.state("up")["z0"] == 1
    assert len(classical_bit.events()) == 4


def test_unknown_outcome():
    th = parse_theory(BIT)
    with pytest.raises(UnknownOutcomeError):
        th.state("up")["q"]
    with pytest.raises(UnknownOutcomeError):
        th.measurement_of("q")


@pytest.mark.parametrize("text, line, col", [
    ("measurement Z = { z0 z1 }\n", 1, 22),
    ("measurement Z = { z0, z1 }\nstate s = { z0: 1/0, z1: 0 }\n", 2, 17),
    ("\nfoo bar\n", 2, 1),
    ("measurement Z = { z0, z1 } extra\n", 1, 28),
    ("measurement Z = { z0, z1 }\nstate s = { z0: x, z1: 1 }\n", 2, 17),
])
def test_syntax_error_positions(text, line, col):
    with pytest.raises(TheorySyntaxError) as err:
        parse_theory(text)
    assert (err.value.line, err.value.column) == (line, col)


@pytest.mark.parametrize("text", [
    "measurement Z = { z0, z1 }\nstate s = { z0: 1/2, z1: 1/3 }\n",
    "measurement Z = { z0, z1 }\nmeasurement Y = { z0 }\n",
    "measurement Z = { z0, z1 }\nstate s = { z0: 1 }\n",
    "measurement Z = { z0, z1 }\nstate s = { z0: 3/2, z1: -1/2 }\n",
    "measurement Z = { z0, z1 }\nstate s = { z0: 1, z1: 0, q: 0 }\n",
    "measurement Z = { z0, z1 }\nmeasurement Y = { y0, y1 }\n"
    "state s = { z0: 1, z1: 0, y0: 0, y1: 1 }\nconstraint Z.{z0} == Y.{y0}\n",
])
def test_validation_errors(text):
    with pytest.raises(TheoryValidationError):
        parse_theory(text)


def test_comments_and_blank_lines():
    th = parse_theory("# header\n\n" + BIT.replace("\n", "  # trailing\n", 1))
    assert th == parse_theory(BIT)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_format_round_trip(seed):
    text, _, _ = oracles.random_theory_text(random.Random(seed))
    th = parse_theory(text)
    assert parse_theory(format_theory(th)) == th


def test_round_trip_with_constraints(counterexample):
    assert parse_theory(format_theory(counterexample)) == counterexample


def test_event_lattice(counterexample):
    a = Event("M", frozenset({"a"}))
    b = Event("M", frozenset({"b"}))
    assert event_join(a, b) == Event("M", frozenset({"a", "b"}))
    assert event_meet(a, b) == Event("M", frozenset())
    assert event_complement(counterexample, a) == Event("M", frozenset({"b", "f"}))
    assert event_probability(counterexample.state("wa"), event_join(a, b)) == 1
    with pytest.raises(Exception):
        event_join(a, Event("N", frozenset({"c"})))


def test_complete_trees_count(classical_bit):
    assert len(complete_trees(classical_bit, 1)) == 1
    two = parse_theory("measurement A = { a0, a1 }\nmeasurement B = { b0, b1 }\n"
                       "state s = { a0: 1/2, a1: 1/2, b0: 1, b1: 0 }\n")
    # 2 roots, each with 2 children chosen from 2 depth-1 trees
    assert len(complete_trees(two, 2)) == 8


def test_update_rule_sequences():
    th = parse_theory(BIT)
    rule = StateUpdateRule(th, {("mix", "z0"): "up", ("mix", "z1"): "up"})
    seq = build_sequential_theory(th, rule, 2)
    assert seq.prob("mix", ("z0", "z0")) == Fraction(1, 2)
    assert seq.prob("mix", ("z1", "z1")) == 0
    assert seq.prob("up", ()) == 1
    rep = check_noncontextuality(seq)
    assert rep.passed and max_tree_deviation(seq) == 0


def test_update_rule_rejects_bad_successor():
    th = parse_theory(BIT)
    from opalg.phenomenology import State
    with pytest.raises(TheoryValidationError):
        StateUpdateRule(th, {("up", "z0"): State("bad", {"z0": Fraction(1), "z1": Fraction(1)})})


def test_explicit_sequential_theory_detects_prefix_violation():
    text = BIT + ("tree T = Z { z0 -> Z, z1 -> Z }\n"
                  "seqstate up z0.z0 = 1/2\nseqstate up z0.z1 = 1/4\n"
                  "seqstate up z1.z0 = 0\nseqstate up z1.z1 = 0\n")
    th = parse_theory(text.replace("state mix = { z0: 1/2, z1: 1/2 }\n", ""))
    seq = sequential_from_theory(th)
    rep = check_noncontextuality(seq)
    assert not rep["prefix"].passed
    assert not rep["normalization"].passed


def test_inconsistent_instrument_is_pathological():
    th = parse_theory("measurement A = { a0, a1 }\nmeasurement B = { b0, b1 }\n"
                      "state s = { a0: 1/2, a1: 1/2, b0: 1/2, b1: 1/2 }\n")

    class Flaky:
        exact = True
        calls = 0

        def initial(self, state):
            Flaky.calls += 1
            return (state, 0)

        def step(self, internal, outcome):
            state, depth = internal
            p = state[outcome]
            if depth == 1:
                # the second step depends on which tree is being walked
                p = Fraction(1, 4) if Flaky.calls % 2 else Fraction(3, 4)
                p = p if outcome.endswith("0") else 1 - p
            return p, (state, depth + 1)

    with pytest.raises(PathologyError):
        build_sequential_theory(th, Flaky(), 2)
