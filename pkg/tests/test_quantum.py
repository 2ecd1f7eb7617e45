from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from opalg.errors import NonSpanningError, TheoryValidationError
from opalg.quantum import (DensityState, QuantumEffect, QuantumOperation, _round_distribution,
                           born_values, fuzzy_set_algebra, gleason_check, herm_covec,
                           herm_unvec, herm_vec, hermitian_basis,
                           informationally_complete_effects, loewner_le, op_ominus,
                           operation_algebra_instance, partial_transpose, projective,
                           projector_sample, quantum_instrument, quantum_sequential_theory,
                           qubit_bases, random_density, random_kraus, reciprocity_check,
                           transpose_choi, effect_structure)
from opalg.phenomenology import check_noncontextuality
from opalg.structure import check_axioms

seeds = st.integers(0, 2 ** 32 - 1)


def test_effect_and_state_validation():
    with pytest.raises(ValueError):
        QuantumEffect(np.diag([1.5, 0]))
    with pytest.raises(ValueError):
        QuantumEffect(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError):
        DensityState(np.eye(2))
    e = QuantumEffect(np.diag([1, 0.25]))
    assert np.allclose(e.supplement().matrix, np.diag([0, 0.75]))
    assert DensityState(np.eye(2) / 2).prob(e) == pytest.approx(0.625)


@settings(max_examples=30, deadline=None)
@given(seeds, st.sampled_from([2, 3]))
def test_hermitian_vectorisation(seed, d):
    rng = np.random.default_rng(seed)
    a, b = random_density(d, rng), random_density(d, rng)
    assert np.allclose(herm_unvec(herm_vec(a), d), a)
    assert herm_covec(a) @ herm_vec(b) == pytest.approx(np.real(np.trace(a @ b)))
    basis = hermitian_basis(d)
    gram = np.array([[np.real(np.trace(x @ y)) for y in basis] for x in basis])
    assert np.allclose(gram, np.eye(d * d))


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_kraus_choi_round_trip(seed):
    rng = np.random.default_rng(seed)
    op = QuantumOperation(random_kraus(2, rng, 3, 0.8))
    back = QuantumOperation.from_choi(op.choi)
    assert back.distance(op) < 1e-12
    rho = random_density(2, rng)
    assert np.allclose(back(rho), op(rho), atol=1e-12)
    assert op.is_cp()


def test_operation_basics():
    i = QuantumOperation.identity(2)
    assert i.is_trace_preserving()
    assert QuantumOperation.zero(2).plus(i).distance(i) == 0
    assert i.plus(i) is None
    with pytest.raises(ValueError):
        QuantumOperation([np.eye(2) * 2])
    # the transpose map is positive but not completely positive
    assert np.linalg.eigvalsh(transpose_choi(2))[0] == pytest.approx(-1)


def test_ominus():
    p0 = np.diag([1.0, 0])
    p1 = np.diag([0, 1.0])
    dephase = QuantumOperation([p0, p1])
    res = op_ominus(dephase, QuantumOperation([p0]))
    assert res.defined and res.complement_matches
    assert res.operation.distance(QuantumOperation([p1])) < 1e-12
    bad = op_ominus(QuantumOperation([p0]), QuantumOperation.identity(2))
    assert not bad.defined and bad.min_eigenvalue < 0


def test_fuzzy_embedding():
    fz = fuzzy_set_algebra(2, 2)
    half = fz.index((Fraction(1, 2), Fraction(1, 2)))
    assert np.allclose(fz.embed(half).matrix, np.eye(2) / 2)
    assert fz.embedding_report().passed
    assert check_axioms(fz.structure, "EA").passed


def test_projector_sample_is_orthoalgebra():
    s = projector_sample(2, 3, seed=1)
    assert s.structure.size == 8
    assert check_axioms(s.structure, "orthoalgebra").passed


def test_three_projectors_resolution():
    # three rank-1 projectors summing to I in C^3
    mats = [np.zeros((3, 3)), np.eye(3)] + [np.diag(v) for v in np.eye(3)]
    mats += [mats[2] + mats[3], mats[2] + mats[4], mats[3] + mats[4]]
    s = effect_structure(3, mats)
    assert check_axioms(s.structure, "EA").passed
    assert s.fragment_ea2().passed


def test_gleason_recovers_state():
    rng = np.random.default_rng(0)
    for d in (2, 3):
        E = informationally_complete_effects(d)
        rho = random_density(d, rng)
        g = gleason_check(d, E, born_values(rho, E))
        assert g.feasible and np.allclose(g.rho, rho, atol=1e-10)


def test_gleason_certificates():
    E = informationally_complete_effects(2)
    vals = born_values(np.eye(2) / 2, E)
    vals[1] = 1.0  # breaks (I+X)/2 + (I-X)/2 = I
    g = gleason_check(2, E, vals)
    assert not g.feasible and g.certificate["kind"] == "additivity"
    # a consistent but non-positive assignment: Bloch vector of length 1.5
    E = informationally_complete_effects(2)
    vals = born_values(np.eye(2) / 2 + 0.75 * np.diag([1, -1]), E)
    g = gleason_check(2, E, vals)
    assert not g.feasible and g.certificate["kind"] == "negative-eigenvalue"
    with pytest.raises(NonSpanningError):
        gleason_check(2, E[:3], vals[:3])


def test_operation_algebra_d2():
    inst = operation_algebra_instance(2)
    assert inst.structure.size == 17
    assert inst.top_set_report().passed


def test_reciprocity_example():
    b = qubit_bases()
    zero, plus = b["Z"][0], b["X"][0]
    assert abs(zero.conj() @ plus) ** 2 == pytest.approx(0.5)
    dev, rep = reciprocity_check(3, 50, seed=2)
    assert rep.passed and dev <= 1e-12


def test_round_distribution():
    assert _round_distribution([1 / 3, 1 / 3, 1 / 3], 10) == [Fraction(4, 10), Fraction(3, 10),
                                                              Fraction(3, 10)]
    assert sum(_round_distribution([0.125, 0.5, 0.375], 7)) == 1


def _zx():
    b = qubit_bases()
    meas = {"Z": projective(b["Z"], ["z0", "z1"]), "X": projective(b["X"], ["x+", "x-"])}
    states = {"zero": np.outer(b["Z"][0], b["Z"][0].conj())}
    return meas, states


def test_instrument_examples():
    meas, states = _zx()
    seq = quantum_sequential_theory(2, meas, states, depth=2)
    assert seq.prob("zero", ("z0", "z0")) == pytest.approx(1)
    assert seq.prob("zero", ("z0", "x+")) == pytest.approx(0.5)
    assert seq.prob("zero", ("x+", "z1")) == pytest.approx(0.25)
    assert check_noncontextuality(seq, 1e-12).passed
    theory, _ = quantum_instrument(2, meas, states)
    assert theory.approximate and theory.state("zero")["x+"] == Fraction(1, 2)


def test_instrument_matches_born_rule():
    rng = np.random.default_rng(3)
    meas, _ = _zx()
    rho = random_density(2, rng)
    seq = quantum_sequential_theory(2, meas, {"r": rho}, depth=2)
    for string, p in seq.string_probs["r"].items():
        projs = [meas[m][o][0] for o in string for m in meas if o in meas[m]]
        assert p == pytest.approx(oracles.born_sequence(rho, projs), abs=1e-12)


def test_instrument_must_be_trace_preserving():
    with pytest.raises(TheoryValidationError):
        quantum_instrument(2, {"Z": {"z0": [np.diag([1.0, 0])]}}, {"s": np.eye(2) / 2})


def test_partial_transpose_and_loewner():
    x = np.kron(np.diag([1.0, 0]), np.array([[0, 1], [0, 0]]))
    assert np.allclose(partial_transpose(x, (2, 2)), np.kron(np.diag([1.0, 0]),
                                                             np.array([[0, 0], [1, 0]])))
    assert loewner_le(np.diag([0.2, 0.3]), np.eye(2))
    assert not loewner_le(np.diag([1.2, 0.3]), np.eye(2))
