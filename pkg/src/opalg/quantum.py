"""Finite-dimensional quantum instances: effects, density matrices, the
Gleason-type linear inversion, CP-map operation algebras, and instruments that
generate sequential theories."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product as cartesian
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import (ClosureCapError, DimensionMismatchError, NonSpanningError,
                     TheoryValidationError)
from .parallel import trial_map
from .phenomenology import (Measurement, PhenomenologicalTheory, SequentialTheory, State,
                            build_sequential_theory)
from .report import AxiomReport
from .structure import UNDEF, PartialStructure, top_set

HERM_TOL = 1e-12
MEMBER_TOL = 1e-9
IDENTITY_TOL = 1e-12


# ---------------------------------------------------------------------------
# Basic objects
# ---------------------------------------------------------------------------


def _is_hermitian(a: np.ndarray, tol: float = HERM_TOL) -> bool:
    return a.ndim == 2 and a.shape[0] == a.shape[1] and np.allclose(a, a.conj().T, atol=tol, rtol=0)


class HermitianOperator:
    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=complex)
        if not _is_hermitian(m):
            raise ValueError("matrix is not Hermitian")
        self.matrix = (m + m.conj().T) / 2
        self.dim = m.shape[0]

    def eigvals(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def __repr__(self):
        return f"HermitianOperator(d={self.dim})"


class QuantumEffect(HermitianOperator):
    """0 ⪯ E ⪯ I."""

    def __init__(self, matrix, tol: float = MEMBER_TOL):
        super().__init__(matrix)
        ev = self.eigvals()
        if ev[0] < -tol or ev[-1] > 1 + tol:
            raise ValueError(f"spectrum [{ev[0]:.3g}, {ev[-1]:.3g}] leaves [0, 1]")

    def supplement(self) -> "QuantumEffect":
        return QuantumEffect(np.eye(self.dim) - self.matrix)

    def __add__(self, other: "QuantumEffect") -> "QuantumEffect":
        return QuantumEffect(self.matrix + other.matrix)


class DensityState(HermitianOperator):
    def __init__(self, matrix, tol: float = MEMBER_TOL):
        super().__init__(matrix)
        if self.eigvals()[0] < -tol or abs(np.trace(self.matrix).real - 1) > tol:
            raise ValueError("not a density matrix")

    def prob(self, effect) -> float:
        e = effect.matrix if isinstance(effect, HermitianOperator) else np.asarray(effect)
        return float(np.real(np.trace(self.matrix @ e)))


def loewner_le(a: np.ndarray, b: np.ndarray, tol: float = MEMBER_TOL) -> bool:
    """a ⪯ b."""
    return bool(np.linalg.eigvalsh(b - a)[0] >= -tol)


# Random sampling -----------------------------------------------------------


def random_pure(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    r = d if rank is None else rank
    g = rng.normal(size=(d, r)) + 1j * rng.normal(size=(d, r))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_effect(d: int, rng: np.random.Generator, top: float = 1.0) -> np.ndarray:
    """Random effect whose largest eigenvalue is uniform in (0, top)."""
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = g @ g.conj().T
    return h / np.linalg.eigvalsh(h)[-1] * rng.uniform(0.05, top)


def random_povm(d: int, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    gs = [random_density(d, rng) for _ in range(k)]
    s = sum(gs)
    w, v = np.linalg.eigh(s)
    inv_sqrt = v @ np.diag(w ** -0.5) @ v.conj().T
    return [inv_sqrt @ g @ inv_sqrt for g in gs]


def random_kraus(d: int, rng: np.random.Generator, n: int = 2, norm: float = 1.0) -> list[np.ndarray]:
    """Kraus list of a trace-nonincreasing map with ‖Σ K†K‖ = norm."""
    ks = [rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)) for _ in range(n)]
    s = sum(k.conj().T @ k for k in ks)
    c = np.sqrt(norm / np.linalg.eigvalsh(s)[-1])
    return [c * k for k in ks]


# Hermitian vectorisation ---------------------------------------------------


def herm_vec(a: np.ndarray) -> np.ndarray:
    """Real coordinates (a_ii, Re a_ij, Im a_ij for i<j)."""
    d = a.shape[0]
    iu = np.triu_indices(d, 1)
    return np.concatenate([np.real(np.diag(a)), np.real(a[iu]), np.imag(a[iu])])


def herm_covec(x: np.ndarray) -> np.ndarray:
    """Coordinates of the functional A ↦ tr(XA), so herm_covec(X)·herm_vec(A) = tr(XA)."""
    d = x.shape[0]
    iu = np.triu_indices(d, 1)
    return np.concatenate([np.real(np.diag(x)), 2 * np.real(x[iu]), 2 * np.imag(x[iu])])


def herm_unvec(v: np.ndarray, d: int) -> np.ndarray:
    iu = np.triu_indices(d, 1)
    m = len(iu[0])
    a = np.diag(v[:d]).astype(complex)
    a[iu] = v[d:d + m] + 1j * v[d + m:]
    a[(iu[1], iu[0])] = v[d:d + m] - 1j * v[d + m:]
    return a


def hermitian_basis(d: int) -> list[np.ndarray]:
    """Trace-orthonormal basis of d×d Hermitian matrices."""
    out = []
    for i in range(d):
        e = np.zeros((d, d), complex)
        e[i, i] = 1
        out.append(e)
    for i in range(d):
        for j in range(i + 1, d):
            e = np.zeros((d, d), complex)
            e[i, j] = e[j, i] = 1 / np.sqrt(2)
            out.append(e)
            f = np.zeros((d, d), complex)
            f[i, j], f[j, i] = -1j / np.sqrt(2), 1j / np.sqrt(2)
            out.append(f)
    return out


def partial_transpose(x: np.ndarray, dims: tuple[int, int]) -> np.ndarray:
    """Transpose on the second factor."""
    dA, dB = dims
    t = x.reshape(dA, dB, dA, dB).transpose(0, 3, 2, 1)
    return t.reshape(dA * dB, dA * dB)


def bell_state(d: int) -> np.ndarray:
    v = np.zeros(d * d, complex)
    for i in range(d):
        v[i * d + i] = 1
    return v / np.sqrt(d)


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(a - b))))


# ---------------------------------------------------------------------------
# Quantum operations
# ---------------------------------------------------------------------------


class QuantumOperation:
    """Trace-nonincreasing CP map given by Kraus operators."""

    def __init__(self, kraus: Sequence[np.ndarray], d: int | None = None, check: bool = True):
        ks = [np.asarray(k, dtype=complex) for k in kraus]
        if d is None:
            if not ks:
                raise ValueError("dimension needed for an empty Kraus list")
            d = ks[0].shape[0]
        for k in ks:
            if k.shape != (d, d):
                raise DimensionMismatchError(f"Kraus operator of shape {k.shape} for d={d}")
        self.d = d
        self.kraus = ks
        self._choi = None
        if check and not loewner_le(self.effect(), np.eye(d)):
            raise ValueError("map is trace-increasing")

    @classmethod
    def from_choi(cls, choi: np.ndarray, tol: float = MEMBER_TOL) -> "QuantumOperation":
        n = choi.shape[0]
        d = int(round(np.sqrt(n)))
        w, v = np.linalg.eigh((choi + choi.conj().T) / 2)
        if w[0] < -tol:
            raise ValueError(f"Choi matrix has eigenvalue {w[0]:.3g}")
        ks = [np.sqrt(lam) * v[:, i].reshape(d, d).T for i, lam in enumerate(w) if lam > tol]
        op = cls(ks, d, check=False)
        return op

    @classmethod
    def identity(cls, d: int) -> "QuantumOperation":
        return cls([np.eye(d)], d)

    @classmethod
    def zero(cls, d: int) -> "QuantumOperation":
        return cls([], d)

    def effect(self) -> np.ndarray:
        """Σ K†K: the effect 'this operation occurred'."""
        return sum((k.conj().T @ k for k in self.kraus), np.zeros((self.d, self.d), complex))

    @property
    def choi(self) -> np.ndarray:
        """Σ_ij E_ij ⊗ A(E_ij)."""
        if self._choi is None:
            n = self.d * self.d
            c = np.zeros((n, n), complex)
            for k in self.kraus:
                v = k.T.reshape(-1)                         # Σ_i |i⟩ ⊗ K|i⟩
                c += np.outer(v, v.conj())
            self._choi = c
        return self._choi

    def superop(self) -> np.ndarray:
        return sum((np.kron(k, k.conj()) for k in self.kraus),
                   np.zeros((self.d ** 2, self.d ** 2), complex))

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return sum((k @ rho @ k.conj().T for k in self.kraus), np.zeros((self.d, self.d), complex))

    def compose(self, other: "QuantumOperation") -> "QuantumOperation":
        """self ∘ other (other acts first)."""
        return QuantumOperation([a @ b for a in self.kraus for b in other.kraus], self.d, check=False)

    def plus(self, other: "QuantumOperation") -> "QuantumOperation | None":
        """Map sum when it is still trace-nonincreasing."""
        s = self.effect() + other.effect()
        if not loewner_le(s, np.eye(self.d)):
            return None
        return QuantumOperation(self.kraus + other.kraus, self.d, check=False)

    def is_cp(self, tol: float = MEMBER_TOL) -> bool:
        return bool(np.linalg.eigvalsh(self.choi)[0] >= -tol)

    def is_trace_preserving(self, tol: float = MEMBER_TOL) -> bool:
        return bool(np.allclose(self.effect(), np.eye(self.d), atol=tol, rtol=0))

    def distance(self, other: "QuantumOperation") -> float:
        return float(np.max(np.abs(self.choi - other.choi)))


def choi_is_cp(choi: np.ndarray, tol: float = MEMBER_TOL) -> bool:
    return bool(np.linalg.eigvalsh((choi + choi.conj().T) / 2)[0] >= -tol)


def transpose_choi(d: int) -> np.ndarray:
    """Choi matrix of the transpose map (the swap operator)."""
    c = np.zeros((d * d, d * d), complex)
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d))
            e[i, j] = 1
            c += np.kron(e, e.T)
    return c


@dataclass
class OminusResult:
    defined: bool
    operation: QuantumOperation | None
    min_eigenvalue: float
    kraus_complement: list[np.ndarray] | None = None
    complement_matches: bool | None = None


def _kraus_key(k: np.ndarray) -> tuple:
    return tuple(np.round(k, 9).reshape(-1).tolist())


def op_ominus(a: QuantumOperation, b: QuantumOperation, tol: float = MEMBER_TOL) -> OminusResult:
    """a ⊖ b via the Choi criterion; when b's Kraus list is a submultiset of
    a's, also check that the leftover Kraus operators realise the result."""
    diff = a.choi - b.choi
    lo = float(np.linalg.eigvalsh((diff + diff.conj().T) / 2)[0])
    if lo < -tol:
        return OminusResult(False, None, lo)
    op = QuantumOperation.from_choi(diff, tol)
    pool = [_kraus_key(k) for k in a.kraus]
    left = list(a.kraus)
    sub = True
    for k in b.kraus:
        key = _kraus_key(k)
        if key in pool:
            i = pool.index(key)
            pool.pop(i)
            left.pop(i)
        else:
            sub = False
            break
    if not sub:
        return OminusResult(True, op, lo)
    rest = QuantumOperation(left, a.d, check=False)
    match = bool(np.max(np.abs(rest.choi - op.choi), initial=0) <= MEMBER_TOL)
    return OminusResult(True, op, lo, left, match)


# ---------------------------------------------------------------------------
# Fuzzy sets (classical effects)
# ---------------------------------------------------------------------------


@dataclass
class FuzzyAlgebra:
    d: int
    denominator: int
    functions: list[tuple[Fraction, ...]]
    structure: PartialStructure

    def index(self, f) -> int:
        return self.functions.index(tuple(Fraction(v) for v in f))

    def embed(self, x: int) -> QuantumEffect:
        return QuantumEffect(np.diag([float(v) for v in self.functions[x]]))

    def embedding_report(self) -> AxiomReport:
        rep = AxiomReport("diagonal-embedding")
        s = self.structure
        mats = [np.diag([float(v) for v in f]) for f in self.functions]
        bad = next(((x, y) for x, y in s.defined_pairs()
                    if not np.allclose(mats[x] + mats[y], mats[int(s.plus[x, y])],
                                       atol=IDENTITY_TOL)), None)
        rep.add("plus", bad is None, bad)
        undefined_ok = next(((x, y) for x in range(s.size) for y in range(s.size)
                             if s.plus[x, y] == UNDEF
                             and loewner_le(mats[x] + mats[y], np.eye(self.d))), None)
        rep.add("domain", undefined_ok is None, undefined_ok)
        eye = np.eye(self.d)
        bad = next((x for x in range(s.size)
                    if not np.allclose(eye - mats[x], mats[self.index(
                        tuple(1 - v for v in self.functions[x]))])), None)
        rep.add("supplement", bad is None, None if bad is None else (bad,))
        rep.add("unit", np.allclose(mats[s.unit], eye), None if np.allclose(
            mats[s.unit], eye) else (s.unit,))
        rep.add("zero", np.allclose(mats[s.zero], 0), None if np.allclose(
            mats[s.zero], 0) else (s.zero,))
        return rep


def fuzzy_set_algebra(d: int, denominator: int = 4) -> FuzzyAlgebra:
    """Functions {0..d-1} → {0, 1/N, ..., 1} with pointwise partial sum and the
    pointwise scalar action for scalars k/N (defined where the result stays on
    the grid)."""
    if d < 1:
        raise ValueError("d must be at least 1")
    N = denominator
    levels = [Fraction(k, N) for k in range(N + 1)]
    funcs = [tuple(f) for f in cartesian(levels, repeat=d)]
    funcs.sort()
    idx = {f: i for i, f in enumerate(funcs)}
    n = len(funcs)
    plus = np.full((n, n), UNDEF, dtype=np.int64)
    for i, f in enumerate(funcs):
        for j, g in enumerate(funcs):
            h = tuple(a + b for a, b in zip(f, g))
            if all(v <= 1 for v in h):
                plus[i, j] = idx[h]
    scalar = {}
    for a in levels:
        for i, f in enumerate(funcs):
            h = tuple(a * v for v in f)
            if h in idx:
                scalar[(a, i)] = idx[h]
    zero = idx[tuple([Fraction(0)] * d)]
    unit = idx[tuple([Fraction(1)] * d)]
    labels = ["(" + ",".join(str(v) for v in f) + ")" for f in funcs]
    s = PartialStructure(n, plus, zero, unit, scalar=scalar, labels=labels,
                         values=list(funcs))
    return FuzzyAlgebra(d, N, funcs, s)


# ---------------------------------------------------------------------------
# Sampled effect algebras
# ---------------------------------------------------------------------------


@dataclass
class EffectSample:
    d: int
    effects: list[np.ndarray]
    structure: PartialStructure

    def fragment_ea2(self) -> AxiomReport:
        """Strong associativity on triples with x + y + z ⪯ I whose partial
        sums all lie in the carrier."""
        s = self.structure
        eye = np.eye(self.d)
        rep = AxiomReport("fragment")
        bad, checked = None, 0
        for x in range(s.size):
            for y in range(s.size):
                xy = s.add(x, y)
                for z in range(s.size):
                    if not loewner_le(self.effects[x] + self.effects[y] + self.effects[z], eye):
                        continue
                    yz = s.add(y, z)
                    if xy is None or yz is None:
                        continue
                    checked += 1
                    left, right = s.add(xy, z), s.add(x, yz)
                    if left != right and bad is None:
                        bad = (x, y, z)
        rep.add("EA2", bad is None, bad, f"{checked} closed triples")
        return rep


def _find(mats: list[np.ndarray], m: np.ndarray, tol: float = 1e-9) -> int | None:
    for i, a in enumerate(mats):
        if np.max(np.abs(a - m)) <= tol:
            return i
    return None


def effect_structure(d: int, mats: list[np.ndarray], labels=None) -> EffectSample:
    """⊕ defined iff the operator sum is ⪯ I and present in the carrier."""
    n = len(mats)
    eye = np.eye(d)
    plus = np.full((n, n), UNDEF, dtype=np.int64)
    for i in range(n):
        for j in range(i, n):
            s = mats[i] + mats[j]
            if loewner_le(s, eye):
                k = _find(mats, s)
                if k is not None:
                    plus[i, j] = plus[j, i] = k
    zero = _find(mats, np.zeros((d, d)))
    unit = _find(mats, eye)
    return EffectSample(d, mats, PartialStructure(n, plus, zero, unit, labels=labels))


def quantum_effect_sample(d: int, count: int, seed: int, depth: int = 1,
                          cap: int = 300) -> EffectSample:
    """Random effects closed under defined pairwise sums (``depth`` rounds) and
    supplements."""
    if d not in (2, 3):
        raise ValueError("d must be 2 or 3")
    rng = np.random.default_rng(seed)
    eye = np.eye(d, dtype=complex)
    mats = [np.zeros((d, d), complex), eye]

    def push(m):
        if _find(mats, m) is None:
            mats.append(m)
            if len(mats) > cap:
                raise ClosureCapError(f"effect closure exceeds {cap} elements")

    for _ in range(count):
        e = random_effect(d, rng, top=0.6)
        push(e)
        push(eye - e)
    for _ in range(depth):
        cur = list(mats)
        for i in range(len(cur)):
            for j in range(i, len(cur)):
                s = cur[i] + cur[j]
                if loewner_le(s, eye):
                    push(s)
        for m in list(mats):
            push(eye - m)
    return effect_structure(d, mats)


def projector_sample(d: int, count: int, seed: int) -> EffectSample:
    """{0, I, P, I − P} for random rank-1 projectors P: an orthoalgebra."""
    rng = np.random.default_rng(seed)
    eye = np.eye(d, dtype=complex)
    mats = [np.zeros((d, d), complex), eye]
    for _ in range(count):
        v = random_pure(d, rng)
        p = np.outer(v, v.conj())
        mats += [p, eye - p]
    return effect_structure(d, mats)


# ---------------------------------------------------------------------------
# Gleason-type inversion
# ---------------------------------------------------------------------------


def _gell_mann(d: int) -> list[np.ndarray]:
    out = []
    for j in range(d):
        for k in range(j + 1, d):
            s = np.zeros((d, d), complex)
            s[j, k] = s[k, j] = 1
            a = np.zeros((d, d), complex)
            a[j, k], a[k, j] = -1j, 1j
            out += [s, a]
    for l in range(1, d):
        m = np.zeros((d, d), complex)
        for i in range(l):
            m[i, i] = 1
        m[l, l] = -l
        out.append(m * np.sqrt(2 / (l * (l + 1))))
    return out


def informationally_complete_effects(d: int) -> list[np.ndarray]:
    """I together with (I ± G/‖G‖)/2 for the Pauli (d=2) or Gell-Mann matrices G."""
    eye = np.eye(d, dtype=complex)
    out = [eye]
    for g in _gell_mann(d):
        g = g / np.max(np.abs(np.linalg.eigvalsh(g)))
        out += [(eye + g) / 2, (eye - g) / 2]
    return out


@dataclass
class GleasonResult:
    feasible: bool
    rho: np.ndarray | None
    residual: float
    certificate: dict = field(default_factory=dict)


def gleason_check(d: int, effects: Sequence[np.ndarray], values: Sequence[float],
                  tol: float = MEMBER_TOL) -> GleasonResult:
    """Find Hermitian ρ with tr(ρE_j) = v_j; accept if ρ ⪰ 0 and tr ρ = 1."""
    effects = [np.asarray(e.matrix if isinstance(e, HermitianOperator) else e, complex)
               for e in effects]
    values = np.asarray(values, dtype=float)
    if len(effects) != len(values):
        raise DimensionMismatchError("one value per effect")
    basis = hermitian_basis(d)
    A = np.array([[np.real(np.trace(b @ e)) for b in basis] for e in effects])
    if np.linalg.matrix_rank(A, tol=1e-10) < d * d:
        raise NonSpanningError(f"effects span {np.linalg.matrix_rank(A, tol=1e-10)} of {d * d} dimensions")
    coef, *_ = np.linalg.lstsq(A, values, rcond=None)
    residual = float(np.max(np.abs(A @ coef - values)))
    cert: dict[str, Any] = {}
    eye = np.eye(d)
    for i, e in enumerate(effects):
        for j in range(i, len(effects)):
            if np.allclose(e + effects[j], eye, atol=tol):
                gap = values[i] + values[j] - 1
                if abs(gap) > tol:
                    cert = {"kind": "additivity", "pair": [i, j], "gap": float(gap)}
                    break
        if cert:
            break
    if residual > tol:
        cert = cert or {"kind": "inconsistent", "residual": residual}
        return GleasonResult(False, None, residual, cert)
    rho = sum(c * b for c, b in zip(coef, basis))
    ev = np.linalg.eigvalsh(rho)
    tr = float(np.real(np.trace(rho)))
    if abs(tr - 1) > tol:
        return GleasonResult(False, rho, residual, {"kind": "trace", "trace": tr})
    if ev[0] < -tol:
        return GleasonResult(False, rho, residual, {"kind": "negative-eigenvalue",
                                                    "eigenvalue": float(ev[0])})
    return GleasonResult(True, rho, residual, {})


def born_values(rho: np.ndarray, effects: Sequence[np.ndarray]) -> np.ndarray:
    return np.array([np.real(np.trace(rho @ e)) for e in effects])


# ---------------------------------------------------------------------------
# Operation algebra instance
# ---------------------------------------------------------------------------


def _partial_permutations(d: int, phases: Sequence[complex]) -> list[np.ndarray]:
    """Partial permutation matrices with entries from ``phases``, one per
    global-phase class (first nonzero entry equal to 1)."""
    out = []
    for domain_mask in range(1, 2 ** d):
        dom = [j for j in range(d) if domain_mask >> j & 1]
        for targets in cartesian(range(d), repeat=len(dom)):
            if len(set(targets)) < len(targets):
                continue
            for ph in cartesian(phases, repeat=len(dom) - 1):
                k = np.zeros((d, d), complex)
                for n, (j, i) in enumerate(zip(dom, targets)):
                    k[i, j] = 1 if n == 0 else ph[n - 1]
                out.append(k)
    return out


def _set_partitions(items: list):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


@dataclass
class OperationSample:
    d: int
    operations: list[QuantumOperation]
    structure: PartialStructure

    def top_set_report(self, tol: float = MEMBER_TOL) -> AxiomReport:
        tops = top_set(self.structure)
        bad = next((i for i, op in enumerate(self.operations)
                    if (i in tops) != op.is_trace_preserving(tol)), None)
        rep = AxiomReport("top-set")
        rep.add("trace-preserving", bad is None, None if bad is None else (bad,),
                f"{len(tops)} top elements")
        return rep


def operation_algebra_instance(d: int, cap: int = 400) -> OperationSample:
    """Finite carrier of CP maps closed under ⊕ and composition.

    Elements are Σ_k Ad_{K_k} with the K_k phased partial permutations having
    pairwise disjoint domains (exactly the sums with Σ K†K ⪯ I). Phases are
    fourth roots of unity at d=2 and signs at d=3.
    """
    if d not in (2, 3):
        raise ValueError("d must be 2 or 3")
    phases = (1, 1j, -1, -1j) if d == 2 else (1, -1)
    pieces: dict[tuple, list[np.ndarray]] = {}
    for k in _partial_permutations(d, phases):
        dom = tuple(j for j in range(d) if np.any(k[:, j]))
        pieces.setdefault(dom, []).append(k)
    ops = [QuantumOperation.zero(d)]
    for mask in range(1, 2 ** d):
        cols = [j for j in range(d) if mask >> j & 1]
        for part in _set_partitions(cols):
            choices = [pieces[tuple(sorted(b))] for b in part]
            for combo in cartesian(*choices):
                ops.append(QuantumOperation(list(combo), d, check=False))
    keys: dict[tuple, int] = {}
    uniq = []
    for op in ops:
        key = tuple(np.round(op.choi, 6).reshape(-1).tolist())
        if key not in keys:
            keys[key] = len(uniq)
            uniq.append(op)
    if len(uniq) > cap:
        raise ClosureCapError(f"operation carrier has {len(uniq)} > {cap} elements")
    n = len(uniq)

    def find(op):
        return keys.get(tuple(np.round(op.choi, 6).reshape(-1).tolist()))

    plus = np.full((n, n), UNDEF, dtype=np.int64)
    prod = np.full((n, n), UNDEF, dtype=np.int64)
    for i, a in enumerate(uniq):
        for j, b in enumerate(uniq):
            s = a.plus(b)
            if s is not None:
                k = find(s)
                if k is None:
                    raise ClosureCapError("carrier not closed under ⊕")
                plus[i, j] = k
            k = find(a.compose(b))
            if k is None:
                raise ClosureCapError("carrier not closed under composition")
            prod[i, j] = k
    labels = [f"op{i}" for i in range(n)]
    s = PartialStructure(n, plus, 0, find(QuantumOperation.identity(d)), product=prod,
                         labels=labels)
    return OperationSample(d, uniq, s)


def operation_identities(d: int, trials: int, seed: int) -> dict[str, float]:
    """Largest Choi deviation of the linear operation-algebra identities over
    random trace-nonincreasing maps."""

    def one(rng):
        a = QuantumOperation(random_kraus(d, rng, 2, rng.uniform(0.1, 0.5)))
        b = QuantumOperation(random_kraus(d, rng, 2, rng.uniform(0.1, 0.5)))
        c = QuantumOperation(random_kraus(d, rng, 2, rng.uniform(0.1, 1.0)))
        ab = a.plus(b)
        i, z = QuantumOperation.identity(d), QuantumOperation.zero(d)
        out = {
            "right-distributive": ab.compose(c).distance(a.compose(c).plus(b.compose(c))),
            "left-distributive": c.compose(ab).distance(c.compose(a).plus(c.compose(b))),
            "product-associative": a.compose(b).compose(c).distance(a.compose(b.compose(c))),
            "unit": max(i.compose(a).distance(a), a.compose(i).distance(a)),
            "zero": max(z.compose(c).distance(z), c.compose(z).distance(z)),
            "plus-commutative": ab.distance(b.plus(a)),
        }
        abc = ab.plus(QuantumOperation(random_kraus(d, rng, 1, 0.1)))
        if abc is not None:
            e = abc.kraus[-1:]
            other = a.plus(b.plus(QuantumOperation(e, d)))
            out["plus-associative"] = abc.distance(other)
        # Top set: t is top iff no nonzero map can be added to it.
        gap = np.eye(d) - c.effect()
        w, v = np.linalg.eigh(gap)
        spare = QuantumOperation([v @ np.diag(np.sqrt(np.clip(w, 0, None))) @ v.conj().T], d,
                                 check=False)
        nonzero = np.max(np.abs(spare.choi)) > MEMBER_TOL
        out["top-set-mismatch"] = float(nonzero == c.is_trace_preserving())
        return out

    results = trial_map(one, trials, seed)
    worst: dict[str, float] = {}
    for r in results:
        for k, v in r.items():
            worst[k] = max(worst.get(k, 0.0), float(v))
    return worst


# ---------------------------------------------------------------------------
# Reciprocity
# ---------------------------------------------------------------------------


def reciprocity_check(d: int, trials: int, seed: int) -> tuple[float, AxiomReport]:
    def one(rng):
        chi, phi = random_pure(d, rng), random_pure(d, rng)
        e_chi, e_phi = np.outer(chi, chi.conj()), np.outer(phi, phi.conj())
        return abs(np.real(chi.conj() @ e_phi @ chi) - np.real(phi.conj() @ e_chi @ phi))

    dev = max(trial_map(one, trials, seed), default=0.0)
    rep = AxiomReport("reciprocity")
    rep.add("reciprocity", dev <= IDENTITY_TOL, None if dev <= IDENTITY_TOL else (dev,),
            f"max deviation {dev:.3e} over {trials} pairs")
    return float(dev), rep


# ---------------------------------------------------------------------------
# Instruments
# ---------------------------------------------------------------------------


class QuantumInstrument:
    """Per-outcome Kraus lists; the conditional state after outcome x is
    Σ K ρ K† / p(x)."""

    exact = False

    def __init__(self, d: int, kraus: Mapping[str, Sequence[np.ndarray]],
                 states: Mapping[str, np.ndarray], measurements: Mapping[str, Sequence[str]]):
        self.d = d
        self.kraus = {o: [np.asarray(k, complex) for k in ks] for o, ks in kraus.items()}
        self.states = {s: np.asarray(r, complex) for s, r in states.items()}
        self.measurements = {m: tuple(os) for m, os in measurements.items()}
        for m, outs in self.measurements.items():
            total = sum((k.conj().T @ k for o in outs for k in self.kraus[o]),
                        np.zeros((d, d), complex))
            if not np.allclose(total, np.eye(d), atol=IDENTITY_TOL):
                raise TheoryValidationError(f"measurement {m} is not trace preserving")

    def initial(self, state: State) -> np.ndarray:
        return self.states[state.id]

    def step(self, rho: np.ndarray, outcome: str):
        out = sum((k @ rho @ k.conj().T for k in self.kraus[outcome]),
                  np.zeros((self.d, self.d), complex))
        p = float(np.real(np.trace(out)))
        return p, (out / p if p > 1e-15 else rho)

    def probability(self, rho: np.ndarray, outcome: str) -> float:
        return self.step(rho, outcome)[0]


def _round_distribution(ps: Sequence[float], denominator: int) -> list[Fraction]:
    """Largest-remainder rounding onto the grid 1/denominator, keeping the sum 1."""
    scaled = [max(p, 0.0) * denominator for p in ps]
    floors = [int(np.floor(v)) for v in scaled]
    short = denominator - sum(floors)
    order = sorted(range(len(ps)), key=lambda i: -(scaled[i] - floors[i]))
    for i in order[:max(short, 0)]:
        floors[i] += 1
    return [Fraction(f, denominator) for f in floors]


def quantum_instrument(d: int, measurements: Mapping[str, Mapping[str, Sequence[np.ndarray]]],
                       states: Mapping[str, np.ndarray],
                       denominator: int = 10 ** 6) -> tuple[PhenomenologicalTheory, QuantumInstrument]:
    """Theory (rounded single-shot probabilities, flagged approximate) and the
    instrument generating its sequential extension."""
    kraus = {}
    meas = []
    for m, outs in measurements.items():
        meas.append(Measurement(m, tuple(outs)))
        for o, ks in outs.items():
            if o in kraus:
                raise TheoryValidationError(f"outcome {o!r} appears in two measurements")
            kraus[o] = ks
    inst = QuantumInstrument(d, kraus, states, {m.id: m.outcomes for m in meas})
    st = []
    for sid, rho in states.items():
        probs = {}
        for m in meas:
            raw = [inst.probability(inst.states[sid], o) for o in m.outcomes]
            probs.update(zip(m.outcomes, _round_distribution(raw, denominator)))
        st.append(State(sid, probs))
    theory = PhenomenologicalTheory(tuple(meas), tuple(st), approximate=True)
    return theory, inst


def projective(basis: Sequence[np.ndarray], names: Sequence[str]) -> dict[str, list[np.ndarray]]:
    return {n: [np.outer(v, np.conj(v))] for n, v in zip(names, basis)}


def quantum_sequential_theory(d: int, measurements, states, depth: int = 2,
                              denominator: int = 10 ** 6) -> SequentialTheory:
    theory, inst = quantum_instrument(d, measurements, states, denominator)
    return build_sequential_theory(theory, inst, depth)


def rationalize(seq: SequentialTheory, denominator: int = 10 ** 6) -> SequentialTheory:
    """Exact copy of a float sequential theory with probabilities snapped to
    the nearest fraction with bounded denominator."""
    probs = {s: {k: Fraction(v).limit_denominator(denominator) for k, v in t.items()}
             for s, t in seq.string_probs.items()}
    return SequentialTheory(seq.theory, seq.depth, seq.trees, probs, None, exact=True)


def qubit_bases() -> dict[str, list[np.ndarray]]:
    s = 1 / np.sqrt(2)
    return {
        "Z": [np.array([1, 0], complex), np.array([0, 1], complex)],
        "X": [np.array([s, s], complex), np.array([s, -s], complex)],
        "Y": [np.array([s, 1j * s], complex), np.array([s, -1j * s], complex)],
    }
