import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from opalg import composite
from opalg.errors import DimensionMismatchError
from opalg.quantum import (QuantumEffect, bell_state, partial_transpose, random_density,
                           random_pure)

seeds = st.integers(0, 2 ** 32 - 1)


def test_product_of_units_is_unit():
    i = QuantumEffect(np.eye(2))
    assert np.allclose(composite.product_effect(i, i).matrix, np.eye(4))
    with pytest.raises(DimensionMismatchError):
        composite.product_effect(i, QuantumEffect(np.eye(3)), (2, 2))


def test_supplement_of_product():
    e = QuantumEffect(np.diag([0.3, 0.9]))
    f = QuantumEffect(np.diag([1.0, 0.2]))
    ef = composite.product_effect(e, f)
    rest = (composite.product_effect(e.supplement(), f).matrix
            + composite.product_effect(QuantumEffect(np.eye(2)), f.supplement()).matrix)
    assert np.allclose(ef.matrix + rest, np.eye(4))


def test_separable_effect_bounds():
    z = np.array([1, 0], complex)
    o = np.array([0, 1], complex)
    s = composite.SeparableEffect.from_vectors([(1.0, z, z), (1.0, o, o)])
    assert np.allclose(np.diag(s.total).real, [1, 0, 0, 1])
    with pytest.raises(ValueError):
        composite.SeparableEffect.from_vectors([(1.0, z, z), (1.0, z, z)])


def test_composite_state_certificates():
    phi = bell_state(2)
    bell = np.outer(phi, phi.conj())
    assert composite.CompositeState(bell, (2, 2)).certificate == "psd"
    swap_half = partial_transpose(bell, (2, 2))
    assert composite.CompositeState(swap_half, (2, 2)).certificate == "ppt-dual"
    with pytest.raises(ValueError):
        composite.CompositeState(np.diag([1.5, -0.5, 0, 0]), (2, 2))


def test_product_state_marginals():
    rng = np.random.default_rng(1)
    ra, rb = random_density(2, rng), random_density(3, rng)
    X = np.kron(ra, rb)
    local = [np.diag([1.0, 0]), np.diag([0, 1.0])]
    remote = [np.eye(3)]
    m = composite.marginals(X, (2, 3), local, remote, "A")
    assert np.allclose(m, np.real(np.diag(ra)))


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_no_signalling_property(seed):
    assert composite.influence_check(2, 3, 5, seed).max_deviation <= 1e-12


def test_nonlinear_functional_signals():
    def bent(X, e):
        return float(np.real(np.trace(X @ e))) ** 2

    res = composite.influence_check(2, 2, 20, seed=0, functional=bent)
    assert not res.report.passed


def test_overlap_of_bell_state():
    phi = bell_state(2)
    X = np.outer(phi, phi.conj())
    res = composite.max_separable_overlap(X, (2, 2), restarts=8, seed=0)
    assert res.projector_bound == pytest.approx(0.5, abs=1e-9)
    assert res.interval_bound == pytest.approx(1)
    grid = composite.max_separable_overlap(X, (2, 2), method="grid", grid=12)
    assert grid.projector_bound == pytest.approx(0.5, abs=1e-6)
    assert composite.schmidt_bound(phi, (2, 2)) == pytest.approx(oracles.schmidt_top(phi, (2, 2)))


def test_maximally_mixed_interval_bound():
    res = composite.max_separable_overlap(np.eye(4) / 4, (2, 2), restarts=4, seed=0)
    assert res.interval_bound == pytest.approx(1)
    assert res.projector_bound == pytest.approx(0.25)


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_overlap_matches_schmidt(seed):
    rng = np.random.default_rng(seed)
    psi = random_pure(4, rng)
    res = composite.max_separable_overlap(np.outer(psi, psi.conj()), (2, 2), restarts=8, seed=1)
    assert res.projector_bound == pytest.approx(oracles.schmidt_top(psi, (2, 2)), abs=1e-6)


def test_singleton_is_testable():
    phi = bell_state(2)
    rep = composite.testability_scan(2, [np.outer(phi, phi.conj())])
    assert rep.entries[0].testable and rep.entries[0].test == "identity"


def test_grid_and_span():
    assert len(composite.product_state_grid(2)) == 36
    assert composite.separable_span_rank(2, 40, seed=0) == 16


def test_dual_gap():
    gap = composite.dual_gap_witness(2, samples=500)
    assert gap.report.passed
    assert gap.min_eigenvalue == pytest.approx(oracles.pt_bell_min_eigenvalue(2))
