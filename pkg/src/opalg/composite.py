"""Two-party composites: product and separable effects, block-positive
composite states, no-signalling, separable overlap bounds and testability."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatchError
from .parallel import trial_map
from .quantum import (IDENTITY_TOL, MEMBER_TOL, QuantumEffect, bell_state, herm_vec,
                      partial_transpose, random_density, random_povm, random_pure)
from .report import AxiomReport

OPT_TOL = 1e-6


def product_effect(e: QuantumEffect, f: QuantumEffect, dims: tuple[int, int] | None = None) -> QuantumEffect:
    if dims is not None and (e.dim, f.dim) != tuple(dims):
        raise DimensionMismatchError(f"effects of dimension {(e.dim, f.dim)}, expected {dims}")
    return QuantumEffect(np.kron(e.matrix, f.matrix))


@dataclass
class SeparableEffect:
    """Σ λ_i P_i ⊗ Q_i with local effects P_i, Q_i."""

    terms: list[tuple[float, np.ndarray, np.ndarray]]
    total: np.ndarray = field(init=False)

    def __post_init__(self):
        if not self.terms:
            raise ValueError("empty separable effect")
        if any(lam <= 0 for lam, _, _ in self.terms):
            raise ValueError("weights must be positive")
        self.total = sum(lam * np.kron(p, q) for lam, p, q in self.terms)
        n = self.total.shape[0]
        if np.linalg.eigvalsh(np.eye(n) - self.total)[0] < -MEMBER_TOL:
            raise ValueError("separable effect exceeds the unit")

    @classmethod
    def from_vectors(cls, terms: Sequence[tuple[float, np.ndarray, np.ndarray]]) -> "SeparableEffect":
        return cls([(lam, np.outer(a, a.conj()), np.outer(b, b.conj())) for lam, a, b in terms])


def product_vector(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(a, b)


# ---------------------------------------------------------------------------
# Composite states
# ---------------------------------------------------------------------------


@dataclass
class CompositeState:
    """Unit-trace Hermitian X with ⟨ab|X|ab⟩ ≥ 0 on product vectors."""

    X: np.ndarray
    dims: tuple[int, int]
    certificate: str = ""

    def __post_init__(self):
        self.X = np.asarray(self.X, complex)
        dA, dB = self.dims
        if self.X.shape != (dA * dB, dA * dB):
            raise DimensionMismatchError(f"state of shape {self.X.shape} for dims {self.dims}")
        if not np.allclose(self.X, self.X.conj().T, atol=IDENTITY_TOL):
            raise ValueError("composite state is not Hermitian")
        if abs(np.trace(self.X).real - 1) > IDENTITY_TOL:
            raise ValueError("composite state does not have unit trace")
        if not self.certificate:
            self.certificate = block_positivity(self.X, self.dims)
        if not self.certificate:
            raise ValueError("composite state is negative on a product effect")

    def prob(self, effect: np.ndarray) -> float:
        return float(np.real(np.trace(self.X @ effect)))


def block_positivity(X: np.ndarray, dims: tuple[int, int], samples: int = 10_000,
                     seed: int = 0, tol: float = MEMBER_TOL) -> str:
    """'psd' or 'ppt-dual' when an analytic certificate applies, 'sampled'
    when nonnegative on ``samples`` random product vectors, '' otherwise."""
    if np.linalg.eigvalsh(X)[0] >= -tol:
        return "psd"
    if np.linalg.eigvalsh(partial_transpose(X, dims))[0] >= -tol:
        return "ppt-dual"
    rng = np.random.default_rng(seed)
    dA, dB = dims
    for _ in range(samples):
        v = np.kron(random_pure(dA, rng), random_pure(dB, rng))
        if np.real(v.conj() @ X @ v) < -tol:
            return ""
    return "sampled"


def random_composite_state(dims: tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    """A density matrix or the partial transpose of one (block-positive, often
    not positive)."""
    dA, dB = dims
    rho = random_density(dA * dB, rng, rank=int(rng.integers(1, dA * dB + 1)))
    return partial_transpose(rho, dims) if rng.random() < 0.5 else rho


# ---------------------------------------------------------------------------
# No-signalling
# ---------------------------------------------------------------------------


Functional = Callable[[np.ndarray, np.ndarray], float]


def trace_functional(X: np.ndarray, effect: np.ndarray) -> float:
    return float(np.real(np.trace(X @ effect)))


def marginals(X: np.ndarray, dims, local: Sequence[np.ndarray], remote: Sequence[np.ndarray],
              side: str = "A", functional: Functional = trace_functional) -> np.ndarray:
    """p(i) = Σ_j ω(E_i ⊗ F_j) for the ``side`` party's effects E_i."""
    out = []
    for e in local:
        total = 0.0
        for f in remote:
            eff = np.kron(e, f) if side == "A" else np.kron(f, e)
            total += functional(X, eff)
        out.append(total)
    return np.array(out)


@dataclass
class InfluenceResult:
    max_deviation: float
    report: AxiomReport


def influence_check(dA: int, dB: int, trials: int, seed: int,
                    functional: Functional = trace_functional,
                    state_sampler=None) -> InfluenceResult:
    """Marginal of one party's measurement under two choices of the other
    party's measurement, in both directions."""
    dims = (dA, dB)
    sampler = state_sampler or random_composite_state

    def one(rng):
        X = sampler(dims, rng)
        worst = 0.0
        for side, (dl, dr) in (("A", (dA, dB)), ("B", (dB, dA))):
            local = random_povm(dl, int(rng.integers(2, 4)), rng)
            f1 = random_povm(dr, int(rng.integers(2, 4)), rng)
            f2 = random_povm(dr, int(rng.integers(2, 4)), rng)
            m1 = marginals(X, dims, local, f1, side, functional)
            m2 = marginals(X, dims, local, f2, side, functional)
            worst = max(worst, float(np.max(np.abs(m1 - m2))))
        return worst

    dev = max(trial_map(one, trials, seed), default=0.0)
    rep = AxiomReport("influence-free")
    rep.add("no-signalling", dev <= IDENTITY_TOL, None if dev <= IDENTITY_TOL else (dev,),
            f"max marginal deviation {dev:.3e} over {trials} trials")
    return InfluenceResult(dev, rep)


# ---------------------------------------------------------------------------
# Separable overlap
# ---------------------------------------------------------------------------


@dataclass
class OverlapResult:
    projector_bound: float
    interval_bound: float
    vectors: tuple[np.ndarray, np.ndarray]
    converged: bool
    method: str


def _top_eig(m: np.ndarray) -> tuple[float, np.ndarray]:
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    return float(w[-1]), v[:, -1]


def max_separable_overlap(X: np.ndarray, dims: tuple[int, int], method: str = "product-ascent",
                          restarts: int = 32, seed: int = 0, max_iter: int = 500,
                          grid: int = 24) -> OverlapResult:
    """max over product vectors of ⟨ab|X|ab⟩ (projector-form bound) together
    with the interval bound tr X reached by A = I."""
    X = np.asarray(X, complex)
    dA, dB = dims
    T = X.reshape(dA, dB, dA, dB)
    interval = float(np.real(np.trace(X)))
    if method == "grid":
        return _grid_overlap(X, dims, grid, interval)
    if method != "product-ascent":
        raise ValueError(f"unknown method {method!r}")
    rng = np.random.default_rng(seed)
    best, best_vecs, conv_all = -np.inf, None, True
    for _ in range(restarts):
        b = random_pure(dB, rng)
        val = -np.inf
        converged = False
        for _ in range(max_iter):
            ma = np.einsum("j,ijkl,l->ik", b.conj(), T, b)
            _, a = _top_eig(ma)
            mb = np.einsum("i,ijkl,k->jl", a.conj(), T, a)
            new, b = _top_eig(mb)
            if abs(new - val) < 1e-14:
                converged = True
                val = new
                break
            val = new
        conv_all &= converged
        if val > best:
            best, best_vecs = val, (a, b)
    return OverlapResult(min(best, interval), interval, best_vecs, conv_all, "product-ascent")


def _grid_overlap(X, dims, n, interval) -> OverlapResult:
    if dims != (2, 2):
        raise ValueError("grid method is implemented for two qubits")
    pts = []
    for t in np.linspace(0, np.pi, n):
        for p in np.linspace(0, 2 * np.pi, 2 * n, endpoint=False):
            pts.append(np.array([np.cos(t / 2), np.exp(1j * p) * np.sin(t / 2)]))
    best, vecs = -np.inf, None
    for a in pts:
        for b in pts:
            v = np.kron(a, b)
            val = float(np.real(v.conj() @ X @ v))
            if val > best:
                best, vecs = val, (a, b)
    return OverlapResult(min(best, interval), interval, vecs, True, "grid")


def schmidt_bound(psi: np.ndarray, dims: tuple[int, int]) -> float:
    """Largest squared Schmidt coefficient."""
    s = np.linalg.svd(np.asarray(psi).reshape(dims), compute_uv=False)
    return float(s[0] ** 2)


# ---------------------------------------------------------------------------
# Testability
# ---------------------------------------------------------------------------


@dataclass
class TestabilityEntry:
    index: int
    pure: bool
    overlap: float
    testable: bool
    test: str


@dataclass
class TestabilityReport:
    entries: list[TestabilityEntry]
    report: AxiomReport


def testability_scan(d: int, states: Sequence[np.ndarray], restarts: int = 32, seed: int = 0,
                     tol: float = OPT_TOL) -> TestabilityReport:
    """Per state: testable when some product projector has overlap 1 with it and
    overlap < 1 with every other listed state. Axiom 1 asks this of every pure
    state in the list."""
    if d not in (2, 3):
        raise ValueError("d must be 2 or 3")
    dims = (d, d)
    states = [np.asarray(s, complex) for s in states]
    entries = []
    for k, X in enumerate(states):
        pure = bool(abs(np.real(np.trace(X @ X)) - 1) <= tol)
        if len(states) == 1:
            entries.append(TestabilityEntry(k, pure, 1.0, True, "identity"))
            continue
        res = max_separable_overlap(X, dims, restarts=restarts, seed=seed + k)
        ok = res.projector_bound >= 1 - tol
        if ok:
            v = np.kron(*res.vectors)
            P = np.outer(v, v.conj())
            others = [float(np.real(np.trace(P @ Y))) for j, Y in enumerate(states) if j != k]
            ok = all(o < 1 - tol for o in others)
        entries.append(TestabilityEntry(k, pure, res.projector_bound, ok,
                                        "product-projector" if ok else ""))
    untestable = tuple(e.index for e in entries if e.pure and not e.testable)
    rep = AxiomReport("axiom1")
    rep.add("pure states testable", not untestable, untestable or None,
            f"{sum(e.pure for e in entries)} pure states")
    return TestabilityReport(entries, rep)


def product_state_grid(d: int) -> list[np.ndarray]:
    """Pure product states built from the computational basis and the uniform
    superpositions |j⟩ + ω^k|j'⟩ on each factor."""
    local = [np.eye(d)[i].astype(complex) for i in range(d)]
    phases = [1, 1j, -1, -1j]
    for i in range(d):
        for j in range(i + 1, d):
            for p in phases:
                v = np.zeros(d, complex)
                v[i], v[j] = 1, p
                local.append(v / np.sqrt(2))
    out = []
    for a in local:
        for b in local:
            v = np.kron(a, b)
            out.append(np.outer(v, v.conj()))
    return out


# ---------------------------------------------------------------------------
# Cone facts
# ---------------------------------------------------------------------------


def separable_span_rank(d: int, samples: int, seed: int) -> int:
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(samples):
        v = np.kron(random_pure(d, rng), random_pure(d, rng))
        rows.append(herm_vec(np.outer(v, v.conj())))
    G = np.array(rows)
    return int(np.linalg.matrix_rank(G @ G.T, tol=1e-9))


@dataclass
class DualGap:
    min_eigenvalue: float
    min_product_pairing: float
    report: AxiomReport


def dual_gap_witness(d: int, samples: int = 10_000, seed: int = 0,
                     tol: float = MEMBER_TOL) -> DualGap:
    """The partially transposed maximally entangled projector pairs
    nonnegatively with every product effect but is not positive."""
    phi = bell_state(d)
    W = partial_transpose(np.outer(phi, phi.conj()), (d, d))
    lo = float(np.linalg.eigvalsh(W)[0])
    rng = np.random.default_rng(seed)
    pair = np.inf
    for _ in range(samples):
        v = np.kron(random_pure(d, rng), random_pure(d, rng))
        pair = min(pair, float(np.real(v.conj() @ W @ v)))
    rep = AxiomReport("dual-gap")
    rep.add("in separable dual", pair >= -tol, None if pair >= -tol else (pair,),
            f"min product pairing {pair:.3e}")
    rep.add("outside PSD cone", lo <= -tol, None if lo <= -tol else (lo,),
            f"min eigenvalue {lo:.6f}")
    return DualGap(lo, pair, rep)


# Exact separable cone sample ------------------------------------------------

_H = Fraction(1, 2)


def _qubit_projectors():
    """Stabilizer-state projectors as exact (re, im) matrices."""
    z, o = Fraction(0), Fraction(1)
    return [
        ((o, z), (z, z)), ((z, z), (z, o)),
        ((_H, _H), (_H, _H)), ((_H, -_H), (-_H, _H)),
        ((_H, (z, -_H)), ((z, _H), _H)), ((_H, (z, _H)), ((z, -_H), _H)),
    ]


def _cx(v):
    return v if isinstance(v, tuple) else (v, Fraction(0))


def _cmul(a, b):
    return (a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0])


def _exact_kron(a, b):
    n, m = len(a), len(b)
    out = [[None] * (n * m) for _ in range(n * m)]
    for i in range(n):
        for j in range(n):
            for k in range(m):
                for l in range(m):
                    out[i * m + k][j * m + l] = _cmul(_cx(a[i][j]), _cx(b[k][l]))
    return out


def _exact_herm_vec(a):
    d = len(a)
    diag = [a[i][i][0] for i in range(d)]
    pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]
    return tuple(diag + [a[i][j][0] for i, j in pairs] + [a[i][j][1] for i, j in pairs])


def _exact_herm_covec(a):
    d = len(a)
    diag = [a[i][i][0] for i in range(d)]
    pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]
    return tuple(diag + [2 * a[i][j][0] for i, j in pairs] + [2 * a[i][j][1] for i, j in pairs])


def exact_separable_cone():
    """Polyhedral inner approximation of the two-qubit separable cone: the cone
    generated by the 36 products of single-qubit stabilizer projectors, in
    Hermitian coordinates."""
    from .convex import PolyhedralCone

    ps = _qubit_projectors()
    gens = [_exact_herm_vec(_exact_kron(p, q)) for p in ps for q in ps]
    return PolyhedralCone(16, generators=gens)


def exact_transpose_choi():
    """Swap operator (Choi matrix of the transpose map) as exact vector and covector."""
    d = 2
    m = [[(Fraction(0), Fraction(0)) for _ in range(4)] for _ in range(4)]
    for i in range(d):
        for j in range(d):
            m[i * d + j][j * d + i] = (Fraction(1), Fraction(0))
    return _exact_herm_vec(m), _exact_herm_covec(m)
