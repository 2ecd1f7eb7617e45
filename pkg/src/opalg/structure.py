"""Finite partial-operation structures (PAS, weak/ordinary effect algebras,
orthoalgebras, operation algebras) and exhaustive axiom checkers.

Tables are integer arrays: ``plus[x, y]`` is the id of ``x ⊕ y`` or ``-1`` when
undefined; ``product`` likewise (total for operation algebras).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations_with_replacement
from typing import Any, Mapping, Sequence

import numpy as np

from . import exact
from .errors import DimensionCapError, MissingFieldError, NonCancellativeError
from .report import AxiomReport

UNDEF = -1

PROFILES = ("PAS", "WEA", "EA", "orthoalgebra", "OA", "WOA", "convexEA")


@dataclass
class PartialStructure:
    size: int
    plus: np.ndarray
    zero: int
    unit: int | None = None
    product: np.ndarray | None = None
    scalar: dict[tuple[Fraction, int], int] | None = None
    labels: list[str] | None = None
    values: list | None = None
    search_order: list[int] | None = None

    def __post_init__(self):
        self.plus = np.asarray(self.plus, dtype=np.int64)
        n = self.size
        if self.plus.shape != (n, n):
            raise ValueError(f"plus table has shape {self.plus.shape}, expected {(n, n)}")
        if ((self.plus < UNDEF) | (self.plus >= n)).any():
            raise ValueError("plus table references an invalid id")
        if not 0 <= self.zero < n:
            raise ValueError("zero is not a valid id")
        if self.unit is not None and not 0 <= self.unit < n:
            raise ValueError("unit is not a valid id")
        if self.product is not None:
            self.product = np.asarray(self.product, dtype=np.int64)
            if self.product.shape != (n, n) or ((self.product < UNDEF) | (self.product >= n)).any():
                raise ValueError("product table malformed")
        if self.scalar is not None:
            for (alpha, x), y in self.scalar.items():
                if not (0 <= x < n and 0 <= y < n):
                    raise ValueError(f"scalar action entry ({alpha}, {x}) -> {y} leaves the carrier")

    @classmethod
    def from_table(cls, size: int, plus: Mapping[tuple[int, int], int], zero: int,
                   unit: int | None = None, **kw) -> "PartialStructure":
        table = np.full((size, size), UNDEF, dtype=np.int64)
        for (x, y), z in plus.items():
            table[x, y] = z
        return cls(size, table, zero, unit, **kw)

    def add(self, x: int, y: int) -> int | None:
        z = int(self.plus[x, y])
        return None if z == UNDEF else z

    def mul(self, x: int, y: int) -> int | None:
        if self.product is None:
            raise MissingFieldError("structure has no product")
        z = int(self.product[x, y])
        return None if z == UNDEF else z

    def label(self, x: int) -> str:
        return self.labels[x] if self.labels else str(x)

    def order(self) -> list[int]:
        return list(self.search_order) if self.search_order else list(range(self.size))

    def defined_pairs(self) -> list[tuple[int, int]]:
        xs, ys = np.nonzero(self.plus >= 0)
        return list(zip(xs.tolist(), ys.tolist()))


# ---------------------------------------------------------------------------
# Axiom checking
# ---------------------------------------------------------------------------


def _first(mask: np.ndarray, order: Sequence[int]) -> tuple | None:
    """First True index of a boolean array, scanning coordinates in ``order``."""
    if not mask.any():
        return None
    rank = np.empty(len(order), dtype=np.int64)
    rank[np.asarray(order)] = np.arange(len(order))
    idx = np.argwhere(mask)
    keys = rank[idx]
    best = np.lexsort(keys.T[::-1])[0]
    return tuple(int(v) for v in idx[best])


def _compose(table: np.ndarray, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Elementwise table[left, right] with UNDEF propagation."""
    out = np.full(np.broadcast(left, right).shape, UNDEF, dtype=np.int64)
    l, r = np.broadcast_arrays(left, right)
    ok = (l >= 0) & (r >= 0)
    out[ok] = table[l[ok], r[ok]]
    return out


def _commutativity(s: PartialStructure, table: np.ndarray) -> tuple | None:
    return _first(table != table.T, s.order())


def _associativity(s: PartialStructure, table: np.ndarray, strong: bool) -> tuple | None:
    """Triple (x, y, z) violating (x⊕y)⊕z = x⊕(y⊕z): strongly (one side
    defined, the other not, or unequal) or weakly (both defined, unequal)."""
    n = s.size
    idx = np.arange(n)
    for x in s.order():
        xy = table[x, :]                                      # x ⊕ y
        left = _compose(table, xy[:, None], idx[None, :])     # (x⊕y)⊕z
        yz = table                                            # y ⊕ z
        right = _compose(table, np.full((n, n), x), yz)       # x⊕(y⊕z)
        if strong:
            bad = left != right
        else:
            bad = (left >= 0) & (right >= 0) & (left != right)
        hit = _first(bad, s.order())
        if hit is not None:
            return (x,) + hit
    return None


def _supplements(s: PartialStructure) -> dict[int, list[int]]:
    out = {}
    for x in range(s.size):
        out[x] = np.nonzero(s.plus[x, :] == s.unit)[0].tolist()
    return out


def _cancellative(s: PartialStructure) -> tuple | None:
    for x in s.order():
        row = s.plus[x, :]
        seen: dict[int, int] = {}
        for y in s.order():
            z = int(row[y])
            if z == UNDEF:
                continue
            if z in seen:
                return (x, seen[z], y)
            seen[z] = y
    return None


def _positive(s: PartialStructure) -> tuple | None:
    xs, ys = np.nonzero(s.plus == s.zero)
    for x, y in zip(xs.tolist(), ys.tolist()):
        if x != s.zero or y != s.zero:
            return (x, y)
    return None


def _zero_law(s: PartialStructure) -> tuple | None:
    bad = s.plus[:, s.zero] != np.arange(s.size)
    hit = _first(bad, s.order())
    return hit


def _require(s: PartialStructure, profile: str) -> None:
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}; expected one of {PROFILES}")
    if profile in ("WEA", "EA", "orthoalgebra", "convexEA") and s.unit is None:
        raise MissingFieldError(f"profile {profile} needs a unit")
    if profile in ("OA", "WOA"):
        if s.product is None:
            raise MissingFieldError(f"profile {profile} needs a product")
        if s.unit is None:
            raise MissingFieldError(f"profile {profile} needs a product unit")
    if profile == "convexEA" and s.scalar is None:
        raise MissingFieldError("profile convexEA needs a scalar action")


def check_axioms(s: PartialStructure, profile: str) -> AxiomReport:
    """Exhaustively verify the axioms of ``profile`` on ``s``."""
    _require(s, profile)
    report = AxiomReport(profile)
    if profile in ("PAS", "WEA", "EA", "orthoalgebra", "convexEA"):
        report.add("EA1", (w := _commutativity(s, s.plus)) is None, w)
        if profile == "WEA":
            report.add("WEA2", (w := _associativity(s, s.plus, strong=False)) is None, w)
        else:
            report.add("EA2", (w := _associativity(s, s.plus, strong=True)) is None, w)
        if profile == "PAS":
            report.add("ZERO", (w := _zero_law(s)) is None, w)
            report.add("CANCEL", (w := _cancellative(s)) is None, w)
            report.add("POS", (w := _positive(s)) is None, w)
            return report
        sup = _supplements(s)
        bad3 = next(((x, len(v)) for x, v in ((x, sup[x]) for x in s.order()) if len(v) != 1), None)
        report.add("EA3", bad3 is None, bad3)
        ones = sup[s.unit]
        zero = ones[0] if len(ones) == 1 else None
        bad4 = None
        for x in s.order():
            if s.plus[x, s.unit] != UNDEF and x != zero:
                bad4 = (x,)
                break
        if zero is None:
            bad4 = (s.unit,)
        report.add("EA4", bad4 is None, bad4)
        if profile == "orthoalgebra":
            diag = np.diagonal(s.plus)
            hit = next((x for x in s.order() if diag[x] != UNDEF and x != s.zero), None)
            report.add("OA5", hit is None, None if hit is None else (hit,))
        if profile == "convexEA":
            from .convex import check_convex_axioms
            report.extend(check_convex_axioms(s))
        return report

    # Operation algebras.
    strong = profile == "OA"
    report.add("OA1", (w := _associativity(s, s.plus, strong=strong)) is None, w,
               "" if strong else "weak associativity")
    report.add("OA2", (w := _commutativity(s, s.plus)) is None, w)
    report.add("OA3", (w := _cancellative(s)) is None, w)
    report.add("OA4", (w := _positive(s)) is None, w)
    report.add("ZERO", (w := _zero_law(s)) is None, w)
    q = s.product
    if strong and (q == UNDEF).any():
        hit = _first(q == UNDEF, s.order())
        report.add("TOTAL", False, hit, "product must be total")
    report.add("OA5", (w := _associativity(s, q, strong=strong)) is None, w,
               "" if strong else "where both sides defined")
    u = s.unit
    bad6 = next((a for a in s.order() if q[u, a] != a or q[a, u] != a), None)
    report.add("OA6", bad6 is None, None if bad6 is None else (bad6,))
    z = s.zero
    bad7 = next((c for c in s.order() if q[z, c] != z or q[c, z] != z), None)
    report.add("OA7", bad7 is None, None if bad7 is None else (bad7,))
    report.add("OA8", (w := _distributivity(s, strong)) is None, w,
               "strong" if strong else "where both sides defined")
    tops = top_set(s)
    report.add("OA9", u in tops, None if u in tops else (u,))
    report.add("OA10", True, None, "finite carrier: every chain is finite and has a maximum")
    return report


def _distributivity(s: PartialStructure, strong: bool) -> tuple | None:
    n = s.size
    p, q = s.plus, s.product
    order = s.order()
    for c in order:
        ab = p                                               # a ⊕ b
        # right: (a⊕b)c vs ac ⊕ bc
        lhs = _compose(q, ab, np.full((n, n), c))
        ac = q[:, c]
        rhs = _compose(p, ac[:, None], ac[None, :])
        # left: c(a⊕b) vs ca ⊕ cb
        lhs2 = _compose(q, np.full((n, n), c), ab)
        ca = q[c, :]
        rhs2 = _compose(p, ca[:, None], ca[None, :])
        for l, r, tag in ((lhs, rhs, "right"), (lhs2, rhs2, "left")):
            if strong:
                bad = (ab >= 0) & (l != r)
            else:
                bad = (l >= 0) & (r >= 0) & (l != r)
            hit = _first(bad, order)
            if hit is not None:
                return hit + (c, tag)
    return None


# ---------------------------------------------------------------------------
# Order-theoretic helpers
# ---------------------------------------------------------------------------


@dataclass
class OrderResult:
    relation: np.ndarray
    report: AxiomReport

    def le(self, x: int, y: int) -> bool:
        return bool(self.relation[x, y])


def induced_order(s: PartialStructure) -> OrderResult:
    """x ≤ y iff x ⊕ z = y for some z. The report records whether the relation
    is a partial order (guaranteed for cancellative positive structures)."""
    n = s.size
    rel = np.zeros((n, n), dtype=bool)
    xs, zs = np.nonzero(s.plus >= 0)
    rel[xs, s.plus[xs, zs]] = True
    report = AxiomReport("order")
    report.add("cancellative", (w := _cancellative(s)) is None, w)
    report.add("positive", (w := _positive(s)) is None, w)
    refl = np.nonzero(~np.diagonal(rel))[0]
    report.add("reflexive", len(refl) == 0, (int(refl[0]),) if len(refl) else None)
    anti = np.argwhere(rel & rel.T & ~np.eye(n, dtype=bool))
    report.add("antisymmetric", len(anti) == 0, tuple(int(v) for v in anti[0]) if len(anti) else None)
    r = rel.astype(np.int64)
    two = (r @ r) > 0
    trans = np.argwhere(two & ~rel)
    report.add("transitive", len(trans) == 0,
               tuple(int(v) for v in trans[0]) if len(trans) else None)
    return OrderResult(rel, report)


def top_set(s: PartialStructure) -> set[int]:
    """{t : a ⊕ t defined ⇒ a = 0}."""
    tops = set()
    for t in range(s.size):
        partners = np.nonzero(s.plus[:, t] >= 0)[0]
        if all(int(a) == s.zero for a in partners):
            tops.add(t)
    return tops


def ominus(s: PartialStructure, x: int, y: int) -> int | None:
    """The z with y ⊕ z = x, or None when y is not below x."""
    if _cancellative(s) is not None:
        raise NonCancellativeError("x ⊖ y needs a cancellative structure")
    hits = np.nonzero(s.plus[y, :] == x)[0]
    return int(hits[0]) if len(hits) else None


def resolutions_of_unity(s: PartialStructure, max_size: int) -> list[tuple[tuple[int, ...], Any]]:
    """Multisets of nonzero elements (size ≤ max_size) whose iterated ⊕ equals
    the unit for some bracketing. Each entry is (multiset, bracketing)."""
    if s.unit is None:
        raise MissingFieldError("resolutions of unity need a unit")
    elems = [x for x in range(s.size) if x != s.zero]
    memo: dict[tuple, dict[int, Any]] = {}

    def reach(ms: tuple) -> dict[int, Any]:
        if ms in memo:
            return memo[ms]
        if len(ms) == 1:
            out = {ms[0]: ms[0]}
        else:
            out = {}
            k = len(ms)
            seen = set()
            for mask in range(1, 2 ** (k - 1)):
                left = tuple(ms[i] for i in range(k) if mask >> i & 1)
                right = tuple(ms[i] for i in range(k) if not mask >> i & 1)
                if (left, right) in seen:
                    continue
                seen.add((left, right))
                for a, ta in reach(left).items():
                    for b, tb in reach(right).items():
                        c = s.add(a, b)
                        if c is not None and c not in out:
                            out[c] = (ta, tb)
        memo[ms] = out
        return out

    found = []
    for k in range(1, max_size + 1):
        for ms in combinations_with_replacement(elems, k):
            r = reach(ms)
            if s.unit in r:
                found.append((ms, r[s.unit]))
    return found


# ---------------------------------------------------------------------------
# State spaces
# ---------------------------------------------------------------------------

VERTEX_DIM_CAP = 8


@dataclass
class StatePolytope:
    """{ω : ω(x)+ω(y) = ω(x⊕y), ω(1) = 1, 0 ≤ ω ≤ 1} in exact arithmetic."""

    variables: int
    eq_rows: list
    eq_rhs: list
    ineq_rows: list
    ineq_rhs: list
    empty: bool
    dimension: int
    base: tuple | None = None
    directions: list = field(default_factory=list)
    vertices: list | None = None

    def contains(self, point: Sequence) -> bool:
        p = exact.vec(point)
        return (all(exact.dot(r, p) == b for r, b in zip(self.eq_rows, self.eq_rhs))
                and all(exact.dot(r, p) >= b for r, b in zip(self.ineq_rows, self.ineq_rhs)))


def state_constraints(s: PartialStructure) -> tuple[list, list]:
    n = s.size
    rows, rhs = [], []
    seen = set()
    for x, y in s.defined_pairs():
        z = int(s.plus[x, y])
        key = (min(x, y), max(x, y), z)
        if key in seen:
            continue
        seen.add(key)
        r = [Fraction(0)] * n
        r[x] += 1
        r[y] += 1
        r[z] -= 1
        if any(r):
            rows.append(tuple(r))
            rhs.append(Fraction(0))
    if s.unit is not None:
        r = [Fraction(0)] * n
        r[s.unit] = Fraction(1)
        rows.append(tuple(r))
        rhs.append(Fraction(1))
    return rows, rhs


def state_polytope(s: PartialStructure, enumerate_vertices: bool = True) -> StatePolytope:
    n = s.size
    eq, eq_rhs = state_constraints(s)
    ineq, ineq_rhs = [], []
    for i in range(n):
        e = tuple(Fraction(int(i == j)) for j in range(n))
        ineq.append(e)
        ineq_rhs.append(Fraction(0))
        ineq.append(tuple(-v for v in e))
        ineq_rhs.append(Fraction(-1))
    sol = exact.solve_affine(eq, eq_rhs) if eq else (tuple([Fraction(0)] * n),
                                                     exact.nullspace([], n))
    if sol is None:
        return StatePolytope(n, eq, eq_rhs, ineq, ineq_rhs, True, -1, vertices=[] if enumerate_vertices else None)
    base, dirs = sol
    k = len(dirs)
    # Inequalities in parameter space: row·(base + D t) >= rhs.
    prow, prhs = [], []
    empty = False
    for r, b in zip(ineq, ineq_rhs):
        coeff = tuple(exact.dot(r, d) for d in dirs)
        const = exact.dot(r, base)
        if exact.is_zero(coeff):
            if const < b:
                empty = True
            continue
        prow.append(coeff)
        prhs.append(b - const)
    poly = StatePolytope(n, eq, eq_rhs, ineq, ineq_rhs, empty, k, base, dirs)
    if empty:
        poly.dimension = -1
        poly.vertices = [] if enumerate_vertices else None
        return poly
    if not enumerate_vertices:
        return poly
    if k > VERTEX_DIM_CAP:
        raise DimensionCapError(f"state polytope has dimension {k} > {VERTEX_DIM_CAP}")
    if k == 0:
        verts_t = [()]
    else:
        verts_t, rec, _ = exact.polytope_vertices([], [], prow, prhs, k)
    verts = []
    for t in verts_t:
        v = list(base)
        for c, d in zip(t, dirs):
            v = [a + c * b for a, b in zip(v, d)]
        verts.append(tuple(v))
    poly.vertices = sorted(verts)
    if not verts:
        poly.empty = True
        poly.dimension = -1
    return poly


def is_state(s: PartialStructure, values: Sequence) -> tuple | None:
    """None if ``values`` is a state on ``s``; otherwise a witness."""
    for x, v in enumerate(values):
        if not 0 <= v <= 1:
            return ("range", x)
    if s.unit is not None and values[s.unit] != 1:
        return ("unit", s.unit)
    for x, y in s.defined_pairs():
        z = int(s.plus[x, y])
        if values[x] + values[y] != values[z]:
            return ("additivity", x, y, z)
    return None


def is_separating(s: PartialStructure, states: Sequence[Sequence]) -> tuple | None:
    """None if the states separate all elements; otherwise an inseparable pair."""
    sig = {}
    for x in range(s.size):
        key = tuple(st[x] for st in states)
        if key in sig:
            return (sig[key], x)
        sig[key] = x
    return None
