"""Convex structure: scalar actions on effect algebras, polyhedral cones and
their duals, interval representations, normalized functionals, faces and
testability."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import exact
from .errors import DimensionMismatchError, NotInConeError
from .report import AxiomReport
from .structure import UNDEF, PartialStructure, is_state

ONE = Fraction(1)
ZERO = Fraction(0)


# ---------------------------------------------------------------------------
# Scalar actions
# ---------------------------------------------------------------------------


def check_convex_axioms(s: PartialStructure, states: Sequence[Sequence] | None = None) -> AxiomReport:
    """C1–C4 (and COA15 when ``s`` has a product) over the grid of scalars
    present in the scalar table. Instances whose terms are missing from the
    table are skipped; the note records how many were checked."""
    if s.scalar is None:
        raise ValueError("structure has no scalar action")
    act = s.scalar
    grid = sorted({a for a, _ in act})
    n = s.size
    rep = AxiomReport("convex")

    def sc(a, x):
        return act.get((a, x))

    def plus(x, y):
        if x is None or y is None:
            return None
        z = int(s.plus[x, y])
        return None if z == UNDEF else z

    # C1: α(βa) = (αβ)a
    bad, done, total = None, 0, 0
    for a in grid:
        for b in grid:
            for x in range(n):
                total += 1
                bx = sc(b, x)
                lhs = sc(a, bx) if bx is not None else None
                rhs = sc(a * b, x)
                if lhs is None or rhs is None:
                    continue
                done += 1
                if lhs != rhs and bad is None:
                    bad = (str(a), str(b), x)
    rep.add("C1", bad is None, bad, f"{done}/{total} instances defined")

    # C2: α+β ≤ 1 ⇒ αa ⊕ βa exists and equals (α+β)a
    bad, done, total = None, 0, 0
    for a in grid:
        for b in grid:
            if a + b > 1:
                continue
            for x in range(n):
                total += 1
                ax, bx, cx = sc(a, x), sc(b, x), sc(a + b, x)
                if ax is None or bx is None or cx is None:
                    continue
                done += 1
                if plus(ax, bx) != cx and bad is None:
                    bad = (str(a), str(b), x)
    rep.add("C2", bad is None, bad, f"{done}/{total} instances defined")

    # C3: α(a ⊕ b) = αa ⊕ αb
    bad, done, total = None, 0, 0
    for x, y in s.defined_pairs():
        z = int(s.plus[x, y])
        for a in grid:
            total += 1
            lhs, ax, ay = sc(a, z), sc(a, x), sc(a, y)
            if lhs is None or ax is None or ay is None:
                continue
            done += 1
            if plus(ax, ay) != lhs and bad is None:
                bad = (str(a), x, y)
    rep.add("C3", bad is None, bad, f"{done}/{total} instances defined")

    # C4: 1a = a
    bad = next(((x,) for x in range(n) if sc(ONE, x) != x), None)
    rep.add("C4", bad is None, bad)

    if s.product is not None:
        q = s.product
        bad, done = None, 0
        for a in grid:
            for x in range(n):
                ax = sc(a, x)
                for y in range(n):
                    xy = int(q[x, y])
                    ay = sc(a, y)
                    if ax is None or ay is None or xy == UNDEF or sc(a, xy) is None:
                        continue
                    l1, l2 = int(q[ax, y]), int(q[x, ay])
                    if UNDEF in (l1, l2):
                        continue
                    done += 1
                    if not (l1 == sc(a, xy) == l2) and bad is None:
                        bad = (str(a), x, y)
        rep.add("COA15", bad is None, bad, f"{done} instances defined")

    if states is not None:
        bad = None
        for k, w in enumerate(states):
            for (a, x), y in act.items():
                if w[y] != a * w[x]:
                    bad = (k, str(a), x)
                    break
            if bad:
                break
        rep.add("homogeneous", bad is None, bad)
    return rep


# ---------------------------------------------------------------------------
# Polyhedral cones
# ---------------------------------------------------------------------------


def _split(lin, rays):
    """Generator list from a lineality basis and extreme rays."""
    out = [tuple(v) for v in rays]
    for v in lin:
        out.append(tuple(v))
        out.append(tuple(-x for x in v))
    return out


class PolyhedralCone:
    """Finitely generated cone in Q^n held in both V- and H-form.

    Either side may be supplied; the other is computed on demand by exact
    double description. ``generators`` span the cone by nonnegative
    combinations; ``facets`` are normals h with h·x ≥ 0 on the cone.
    """

    def __init__(self, dim: int, generators=None, facets=None):
        if generators is None and facets is None:
            raise ValueError("need generators or facets")
        self.dim = dim
        self._gens = None if generators is None else [exact.vec(g) for g in generators]
        self._facets = None if facets is None else [exact.vec(h) for h in facets]
        for rows in (self._gens, self._facets):
            for r in rows or ():
                if len(r) != dim:
                    raise DimensionMismatchError(f"vector of length {len(r)} in dimension {dim}")

    @classmethod
    def orthant(cls, dim: int) -> "PolyhedralCone":
        eye = [tuple(ONE if i == j else ZERO for j in range(dim)) for i in range(dim)]
        return cls(dim, generators=eye, facets=eye)

    @property
    def generators(self) -> list:
        if self._gens is None:
            lin, rays = exact.cone_generators(self._facets, self.dim)
            self._gens = _split(lin, rays)
        return self._gens

    @property
    def facets(self) -> list:
        if self._facets is None:
            lin, rays = exact.cone_generators(self.generators, self.dim)
            self._facets = _split(lin, rays)
        return self._facets

    def contains(self, x) -> bool:
        """Membership via the H-form."""
        x = exact.vec(x)
        return all(exact.dot(h, x) >= 0 for h in self.facets)

    def contains_lp(self, x) -> bool:
        """Membership via exact LP on the generators (independent of the H-form)."""
        x = exact.vec(x)
        if exact.is_zero(x):
            return True
        if not self.generators:
            return False
        return exact.feasible_nonneg(self.generators, x)[0]

    def dual_contains(self, y) -> bool:
        y = exact.vec(y)
        return all(exact.dot(y, g) >= 0 for g in self.generators)

    def __repr__(self):
        return f"PolyhedralCone(dim={self.dim}, generators={len(self.generators)})"


def dual_cone(c: PolyhedralCone) -> PolyhedralCone:
    """K* = {y : y·x ≥ 0 for x in K}; generators and facets swap."""
    return PolyhedralCone(c.dim, generators=c.facets, facets=c.generators)


def double_dual_report(c: PolyhedralCone) -> AxiomReport:
    """Recompute K** from scratch and check mutual generator membership with K
    using the LP oracle."""
    lin, rays = exact.cone_generators(c.generators, c.dim)
    dual_gens = _split(lin, rays)
    lin2, rays2 = exact.cone_generators(dual_gens, c.dim)
    back = PolyhedralCone(c.dim, generators=_split(lin2, rays2))
    rep = AxiomReport("double-dual")
    miss = next((g for g in back.generators if not c.contains_lp(g)), None)
    rep.add("K** ⊆ K", miss is None, None if miss is None else tuple(str(v) for v in miss))
    miss = next((g for g in c.generators if not back.contains_lp(g)), None)
    rep.add("K ⊆ K**", miss is None, None if miss is None else tuple(str(v) for v in miss))
    bad = next((g for g in c.generators for h in c.facets if exact.dot(h, g) < 0), None)
    rep.add("consistent", bad is None, None if bad is None else tuple(str(v) for v in bad))
    return rep


def is_regular(c: PolyhedralCone) -> AxiomReport:
    rep = AxiomReport("regular")
    rep.add("convex", True, None, "polyhedral")
    r = exact.rank(c.generators) if c.generators else 0
    rep.add("generating", r == c.dim, None if r == c.dim else (r, c.dim))
    bad = next((g for g in c.generators
                if not exact.is_zero(g) and c.contains_lp(tuple(-v for v in g))), None)
    rep.add("pointed", bad is None, None if bad is None else tuple(str(v) for v in bad))
    rep.add("closed", True, None, "polyhedral")
    return rep


def is_self_dual(c, inner_product: str | None = "euclidean", **kw):
    """Self-duality verdict. Polyhedral cones are decided exactly; matrix cones
    (:class:`MatrixCone`) by sampling with explicit witnesses."""
    if inner_product is None:
        raise ValueError("an inner product must be declared")
    if isinstance(c, MatrixCone):
        if inner_product != "trace":
            raise ValueError("matrix cones use the trace inner product")
        return c.self_duality(**kw)
    if inner_product != "euclidean":
        raise ValueError(f"unsupported inner product {inner_product!r}")
    rep = AxiomReport("self-dual")
    d = dual_cone(c)
    miss = next((g for g in c.generators if not c.dual_contains(g)), None)
    rep.add("K ⊆ K*", miss is None, None if miss is None else tuple(str(v) for v in miss))
    miss = next((g for g in d.generators if not c.contains_lp(g)), None)
    rep.add("K* ⊆ K", miss is None, None if miss is None else tuple(str(v) for v in miss))
    return rep


# ---------------------------------------------------------------------------
# Sampled matrix cones
# ---------------------------------------------------------------------------

MEMBERSHIP_TOL = 1e-9


@dataclass
class MatrixCone:
    """PSD cone on C^d (kind "psd") or the separable cone on C^dA ⊗ C^dB
    (kind "separable"), explored by sampling."""

    kind: str
    dims: tuple[int, ...]

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        from .quantum import random_density

        if self.kind == "psd":
            return random_density(self.dims[0], rng, rank=int(rng.integers(1, self.dims[0] + 1)))
        dA, dB = self.dims
        k = int(rng.integers(1, 4))
        out = np.zeros((dA * dB, dA * dB), dtype=complex)
        for w in rng.random(k):
            out += w * np.kron(random_density(dA, rng, rank=1), random_density(dB, rng, rank=1))
        return out

    def self_duality(self, pairs: int = 500, nonmembers: int = 100, seed: int = 0,
                     tol: float = MEMBERSHIP_TOL) -> "SelfDualityResult":
        rng = np.random.default_rng(seed)
        worst = np.inf
        for _ in range(pairs):
            a, b = self.sample(rng), self.sample(rng)
            worst = min(worst, float(np.real(np.trace(a @ b))))
        rep = AxiomReport("self-dual")
        rep.add("K ⊆ K*", worst >= -tol, None if worst >= -tol else (worst,),
                f"min inner product {worst:.3e} over {pairs} pairs")
        if self.kind == "psd":
            d = self.dims[0]
            witnessed = 0
            for _ in range(nonmembers):
                x = _random_nonpsd(d, rng)
                w, v = np.linalg.eigh(x)
                vec_ = v[:, 0]
                sep = np.outer(vec_, vec_.conj())           # in the cone
                if np.real(np.trace(sep @ x)) < -tol:
                    witnessed += 1
            ok = witnessed == nonmembers
            rep.add("K* ⊆ K", ok, None if ok else (nonmembers - witnessed,),
                    f"{witnessed}/{nonmembers} non-members separated")
            return SelfDualityResult(ok and worst >= -tol, rep, worst, None)
        # Separable: the transpose-map Choi matrix lies in K* but not in K.
        from .quantum import partial_transpose, bell_state

        dA, dB = self.dims
        phi = bell_state(min(dA, dB))
        wit = partial_transpose(np.outer(phi, phi.conj()), (dA, dB))
        lo = float(np.linalg.eigvalsh(wit)[0])
        probe = np.inf
        for _ in range(nonmembers * 10):
            probe = min(probe, float(np.real(np.trace(wit @ self.sample(rng)))))
        in_dual = probe >= -tol
        rep.add("K* ⊆ K", not (in_dual and lo < -tol), (lo,),
                f"transpose-map witness: min eigenvalue {lo:.6f}, "
                f"min pairing with sampled cone {probe:.3e}")
        return SelfDualityResult(False if (in_dual and lo < -tol) else worst >= -tol, rep, worst, lo)


def _random_nonpsd(d: int, rng: np.random.Generator) -> np.ndarray:
    while True:
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        h = (g + g.conj().T) / 2
        if np.linalg.eigvalsh(h)[0] < -1e-6:
            return h


@dataclass
class SelfDualityResult:
    self_dual: bool
    report: AxiomReport
    min_pair_inner: float
    witness_eigenvalue: float | None


# ---------------------------------------------------------------------------
# Intervals and the signature embedding
# ---------------------------------------------------------------------------


@dataclass
class LinearInterval:
    cone: PolyhedralCone
    unit: tuple

    def __post_init__(self):
        self.unit = exact.vec(self.unit)
        if not self.cone.contains_lp(self.unit):
            raise NotInConeError("unit is not in the cone")

    def contains(self, x) -> bool:
        x = exact.vec(x)
        return self.cone.contains_lp(x) and self.cone.contains_lp(exact.sub(self.unit, x))


@dataclass
class Embedding:
    interval: LinearInterval
    vectors: dict[int, tuple]
    report: AxiomReport
    generating: bool


def state_embedding(wea) -> Embedding:
    """Send each effect to its signature vector. The cone is spanned by the
    signatures; the unit maps to the all-ones vector."""
    vectors = {c.id: exact.vec(c.signature) for c in wea.classes}
    k = len(wea.state_ids)
    gens = [v for v in vectors.values() if not exact.is_zero(v)]
    cone = PolyhedralCone(k, generators=gens)
    iv = LinearInterval(cone, vectors[wea.unit])
    rep = AxiomReport("embedding")
    bad = next(((x, y) for (x, y), z in wea.plus.items()
                if exact.add(vectors[x], vectors[y]) != vectors[z]), None)
    rep.add("additive", bad is None, bad)
    rep.add("unit", all(v == 1 for v in vectors[wea.unit]), None if all(
        v == 1 for v in vectors[wea.unit]) else (wea.unit,))
    rep.add("zero", exact.is_zero(vectors[wea.zero]), None if exact.is_zero(
        vectors[wea.zero]) else (wea.zero,))
    bad = next((x for x in vectors
                if exact.sub(iv.unit, vectors[x]) != vectors[wea.supplement[x]]), None)
    rep.add("supplement", bad is None, None if bad is None else (bad,))
    inj = len(set(vectors.values())) == len(vectors)
    rep.add("injective", inj, None if inj else ("collision",))
    generating = exact.rank(gens) == k if gens else k == 0
    return Embedding(iv, vectors, rep, generating)


# ---------------------------------------------------------------------------
# Normalized functionals
# ---------------------------------------------------------------------------


@dataclass
class FunctionalPolytope:
    """{f : f·g ≥ 0 on cone generators, f(u) = 1}, in coordinates of the
    span of the cone (so that it is bounded whenever the cone is pointed)."""

    basis: list
    vertices: list
    unbounded: bool

    def evaluate(self, f, x) -> Fraction:
        return exact.dot(f, _coords(self.basis, x))


def _coords(basis, x):
    rows = [tuple(b[i] for b in basis) for i in range(len(x))]
    sol = exact.solve_affine(rows, list(x))
    if sol is None:
        raise NotInConeError("vector outside the span of the cone")
    return sol[0]


def normalized_functionals(iv: LinearInterval) -> FunctionalPolytope:
    gens = [g for g in iv.cone.generators if not exact.is_zero(g)]
    basis, _ = exact.rref(gens)
    basis = [tuple(r) for r in basis]
    k = len(basis)
    g_coords = [_coords(basis, g) for g in gens]
    u_coords = _coords(basis, iv.unit)
    verts, rays, lin = exact.polytope_vertices([u_coords], [ONE], g_coords,
                                               [ZERO] * len(g_coords), k)
    return FunctionalPolytope(basis, sorted(verts), bool(rays) or lin)


def functional_bijection_report(fp: FunctionalPolytope, points: dict[int, tuple],
                                structure: PartialStructure) -> AxiomReport:
    """Vertices restrict to distinct states on the finite effect set ``points``
    (ids of ``structure``), and restriction is inverted by exact extension."""
    rep = AxiomReport("functionals")
    ids = sorted(points)
    restrictions = []
    bad_state = None
    for f in fp.vertices:
        vals = [ZERO] * structure.size
        for i in ids:
            vals[i] = fp.evaluate(f, points[i])
        restrictions.append(tuple(vals))
        if bad_state is None and is_state(structure, vals) is not None:
            bad_state = tuple(str(v) for v in f)
    rep.add("restriction is a state", bad_state is None, bad_state)
    distinct = len(set(restrictions)) == len(restrictions)
    rep.add("restriction injective", distinct, None if distinct else ("collision",))
    rows = [_coords(fp.basis, points[i]) for i in ids]
    span_ok = exact.rank(rows) == len(fp.basis)
    rep.add("effects span", span_ok, None if span_ok else (exact.rank(rows), len(fp.basis)))
    bad_ext = None
    for f, vals in zip(fp.vertices, restrictions):
        sol = exact.solve_affine(rows, [vals[i] for i in ids])
        if sol is None or sol[1] or tuple(sol[0]) != tuple(f):
            bad_ext = tuple(str(v) for v in f)
            break
    rep.add("extension inverts restriction", bad_ext is None, bad_ext)
    return rep


def extend_state(fp: FunctionalPolytope, points: dict[int, tuple], values: dict[int, Fraction]):
    """The unique functional agreeing with ``values`` on ``points``, or None."""
    ids = sorted(points)
    rows = [_coords(fp.basis, points[i]) for i in ids]
    sol = exact.solve_affine(rows, [exact.as_fraction(values[i]) for i in ids])
    if sol is None or sol[1]:
        return None
    return tuple(sol[0])


# ---------------------------------------------------------------------------
# Faces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Face:
    normal: tuple          # h with h·x ≥ c on the polytope, equality on the face
    offset: Fraction
    members: frozenset     # vertex indices


def polytope_facets(vertices: Sequence[Sequence]) -> list[tuple[tuple, Fraction]]:
    """Facet inequalities h·x ≥ c of conv(vertices) plus implicit equalities
    (as pairs of opposite inequalities)."""
    n = len(vertices[0])
    lifted = [(ONE,) + exact.vec(v) for v in vertices]
    lin, rays = exact.cone_generators(lifted, n + 1)
    out = []
    for r in _split(lin, rays):
        out.append((tuple(r[1:]), -r[0]))
    return out


def enumerate_faces(vertices: Sequence[Sequence]) -> list[Face]:
    """All nonempty faces of conv(vertices), each exposed by a supporting
    inequality (sum of the facet inequalities cutting it out)."""
    verts = [exact.vec(v) for v in vertices]
    facets = polytope_facets(verts)
    tight = []
    for h, c in facets:
        tight.append(frozenset(i for i, v in enumerate(verts) if exact.dot(h, v) == c))
    n = len(verts[0])
    faces: dict[frozenset, Face] = {}
    full = frozenset(range(len(verts)))
    faces[full] = Face(tuple([ZERO] * n), ZERO, full)
    frontier = [(full, tuple([ZERO] * n), ZERO)]
    while frontier:
        nxt = []
        for mem, h0, c0 in frontier:
            for (h, c), t in zip(facets, tight):
                m = mem & t
                if not m or m == mem or m in faces:
                    continue
                h1 = exact.add(h0, h)
                faces[m] = Face(h1, c0 + c, m)
                nxt.append((m, h1, c0 + c))
        frontier = nxt
    return sorted(faces.values(), key=lambda f: (len(f.members), sorted(f.members)))


def face_definition_report(vertices: Sequence[Sequence], faces: Sequence[Face],
                           samples: int = 20, seed: int = 0) -> AxiomReport:
    """For each face, vertices outside it are strictly above the supporting
    hyperplane (so no convex combination touching them lands in the face), and
    random rational combinations confirm it via the LP hull oracle."""
    import random

    verts = [exact.vec(v) for v in vertices]
    rng = random.Random(seed)
    rep = AxiomReport("faces")
    bad_sup = bad_lp = None
    for f in faces:
        for i, v in enumerate(verts):
            val = exact.dot(f.normal, v)
            if (i in f.members) != (val == f.offset) or val < f.offset:
                bad_sup = bad_sup or (sorted(f.members), i)
        outside = [i for i in range(len(verts)) if i not in f.members]
        inside = sorted(f.members)
        if not outside:
            continue
        for _ in range(samples):
            k = rng.randint(1, min(3, len(verts)))
            picks = rng.sample(range(len(verts)), k)
            if not any(p in outside for p in picks):
                picks[0] = rng.choice(outside)
            w = [Fraction(rng.randint(1, 9)) for _ in picks]
            tot = sum(w)
            x = [ZERO] * len(verts[0])
            for wi, p in zip(w, picks):
                x = exact.add(x, exact.scale(wi / tot, verts[p]))
            if exact.in_convex_hull([verts[i] for i in inside], x):
                bad_lp = bad_lp or (inside, picks)
    rep.add("supporting", bad_sup is None, bad_sup)
    rep.add("extremality", bad_lp is None, bad_lp)
    return rep


# ---------------------------------------------------------------------------
# Effect theories and tests
# ---------------------------------------------------------------------------


@dataclass
class EffectTheory:
    algebra: PartialStructure
    states: list[tuple]

    def __post_init__(self):
        self.states = [tuple(exact.vec(s)) for s in self.states]
        for k, st in enumerate(self.states):
            w = is_state(self.algebra, st)
            if w is not None:
                raise ValueError(f"state {k} is not a state on the algebra: {w}")

    def extreme_states(self) -> list[int]:
        out = []
        for k, st in enumerate(self.states):
            others = [o for j, o in enumerate(self.states) if j != k and o != st]
            if not others or not exact.in_convex_hull(others, st):
                out.append(k)
        return out


def find_test(theory: EffectTheory, state: int) -> int | None:
    """An effect t with ω(t) = 1 and σ(t) < 1 for every other vertex σ."""
    verts = theory.extreme_states()
    if state not in verts:
        return None
    w = theory.states[state]
    for t in theory.algebra.order():
        if w[t] != 1:
            continue
        if all(theory.states[v][t] < 1 for v in verts
               if v != state and theory.states[v] != w):
            return t
    return None


def check_axiom1(theory: EffectTheory) -> AxiomReport:
    rep = AxiomReport("axiom1")
    missing = [k for k in theory.extreme_states() if find_test(theory, k) is None]
    rep.add("testable", not missing, tuple(missing) if missing else None,
            f"{len(theory.extreme_states())} extreme states")
    return rep
