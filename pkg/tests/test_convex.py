import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

import oracles
from opalg.composite import exact_separable_cone, exact_transpose_choi
from opalg.convex import (EffectTheory, LinearInterval, MatrixCone, PolyhedralCone,
                          check_axiom1, check_convex_axioms, double_dual_report, dual_cone,
                          enumerate_faces, extend_state, face_definition_report, find_test,
                          functional_bijection_report, is_regular, is_self_dual,
                          normalized_functionals, state_embedding)
from opalg.errors import DimensionMismatchError, NotInConeError
from opalg.quantum import fuzzy_set_algebra
from opalg.quotient import build_wea
from opalg.structure import check_axioms

F = Fraction


def test_ray_dual_is_half_plane():
    ray = PolyhedralCone(2, generators=[(1, 0)])
    d = dual_cone(ray)
    assert d.dual_contains((1, 0))
    assert d.contains((0, 5)) and d.contains((0, -5)) and not d.contains((-1, 0))
    assert not is_regular(ray)["generating"].passed


def test_plane_is_not_pointed():
    plane = PolyhedralCone(2, generators=[(1, 0), (-1, 0), (0, 1), (0, -1)])
    rep = is_regular(plane)
    assert rep["generating"].passed and not rep["pointed"].passed


def test_orthant_is_regular_and_self_dual():
    c = PolyhedralCone.orthant(3)
    assert is_regular(c).passed
    assert is_self_dual(c).passed
    wedge = PolyhedralCone(2, generators=[(1, 0), (1, 1)])
    assert not is_self_dual(wedge).passed


def test_inner_product_required():
    with pytest.raises(ValueError):
        is_self_dual(PolyhedralCone.orthant(2), None)
    with pytest.raises(ValueError):
        is_self_dual(MatrixCone("psd", (2,)), "euclidean")


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        PolyhedralCone(3, generators=[(1, 0)])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_double_dual_property(seed):
    rng = random.Random(seed)
    dim = rng.randint(2, 4)
    c = PolyhedralCone(dim, generators=oracles.random_integer_cone(rng, dim, rng.randint(0, 2)))
    assert double_dual_report(c).passed
    for g in c.generators:
        assert c.contains(g)


def test_interval_requires_unit_in_cone():
    with pytest.raises(NotInConeError):
        LinearInterval(PolyhedralCone.orthant(2), (1, -1))
    iv = LinearInterval(PolyhedralCone.orthant(2), (1, 1))
    assert iv.contains((F(1, 2), 1)) and not iv.contains((2, 0))


def test_orthant_functionals_form_a_simplex():
    fp = normalized_functionals(LinearInterval(PolyhedralCone.orthant(3), (1, 1, 1)))
    assert not fp.unbounded and len(fp.vertices) == 3
    values = sorted(tuple(fp.evaluate(f, e) for e in [(1, 0, 0), (0, 1, 0), (0, 0, 1)])
                    for f in fp.vertices)
    assert values == [(0, 0, 1), (0, 1, 0), (1, 0, 0)]


def test_signature_embedding(counterexample_wea):
    emb = state_embedding(counterexample_wea)
    assert emb.report.passed and emb.generating
    fp = normalized_functionals(emb.interval)
    assert len(fp.vertices) == 4
    rep = functional_bijection_report(fp, emb.vectors, counterexample_wea.to_structure())
    assert rep.passed
    # a state given by its values is recovered uniquely
    f = fp.vertices[0]
    vals = {i: fp.evaluate(f, v) for i, v in emb.vectors.items()}
    assert extend_state(fp, emb.vectors, vals) == tuple(f)


def test_fuzzy_functionals_d3():
    fz = fuzzy_set_algebra(3, 2)
    pts = {i: f for i, f in enumerate(fz.functions)}
    fp = normalized_functionals(LinearInterval(PolyhedralCone.orthant(3), (1, 1, 1)))
    assert functional_bijection_report(fp, pts, fz.structure).passed


def test_faces_of_square():
    sq = [(0, 0), (1, 0), (0, 1), (1, 1)]
    faces = enumerate_faces(sq)
    assert sorted(len(f.members) for f in faces) == [1, 1, 1, 1, 2, 2, 2, 2, 4]
    assert face_definition_report(sq, faces).passed


def test_fuzzy_algebra_is_convex():
    fz = fuzzy_set_algebra(2, 4)
    rep = check_axioms(fz.structure, "convexEA")
    assert rep.passed, rep.failures()
    states = [tuple(f[0] for f in fz.functions)]
    assert check_convex_axioms(fz.structure, states)["homogeneous"].passed


def test_broken_scalar_action_fails():
    fz = fuzzy_set_algebra(1, 2)
    s = fz.structure
    one = fz.index((F(1),))
    s.scalar[(F(1, 2), one)] = one
    rep = check_convex_axioms(s)
    assert not rep["C2"].passed
    assert rep["C2"].witness[2] == one


def test_axiom1_on_classical_bit(classical_bit):
    w = build_wea(classical_bit)
    states = w.induced_states()
    mix = tuple((a + b) / 2 for a, b in zip(*states))
    th = EffectTheory(w.to_structure(), states + [mix])
    assert th.extreme_states() == [0, 1]
    t = find_test(th, 0)
    assert states[0][t] == 1 and states[1][t] < 1
    assert find_test(th, 2) is None
    assert check_axiom1(th).passed


def test_effect_theory_rejects_nonstates(classical_bit):
    w = build_wea(classical_bit)
    with pytest.raises(ValueError):
        EffectTheory(w.to_structure(), [(F(1, 2),) * w.size])


def test_matrix_cones():
    assert MatrixCone("psd", (2,)).self_duality(pairs=50, nonmembers=20, seed=1).self_dual
    res = MatrixCone("separable", (2, 2)).self_duality(pairs=50, nonmembers=20, seed=1)
    assert not res.self_dual and res.witness_eigenvalue == pytest.approx(-0.5)


def test_exact_separable_cone_excludes_transpose_choi():
    cone = exact_separable_cone()
    vec, covec = exact_transpose_choi()
    assert cone.dual_contains(covec)
    assert not cone.contains_lp(vec)
