"""Exact rational linear algebra: row reduction, null spaces, the double
description method for polyhedral cones, and a small exact simplex used as an
independent membership oracle.

Vectors are tuples of :class:`fractions.Fraction`; matrices are lists of such
tuples (row-major).
"""
from __future__ import annotations

from fractions import Fraction
from itertools import combinations
from math import gcd, lcm
from typing import Iterable, Sequence

Vector = tuple
Matrix = list

ZERO = Fraction(0)
ONE = Fraction(1)


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**12)
    return Fraction(x)


def vec(values: Iterable) -> Vector:
    return tuple(as_fraction(v) for v in values)


def mat(rows: Iterable[Iterable]) -> Matrix:
    return [vec(r) for r in rows]


def dot(u: Sequence[Fraction], v: Sequence[Fraction]) -> Fraction:
    return sum((a * b for a, b in zip(u, v)), ZERO)


def add(u, v) -> Vector:
    return tuple(a + b for a, b in zip(u, v))


def sub(u, v) -> Vector:
    return tuple(a - b for a, b in zip(u, v))


def scale(c, u) -> Vector:
    return tuple(c * a for a in u)


def is_zero(u) -> bool:
    return all(a == 0 for a in u)


def primitive(u: Sequence[Fraction]) -> Vector:
    """Scale a nonzero rational vector to the primitive integer vector with the
    same direction (positive multiples only)."""
    den = 1
    for a in u:
        den = lcm(den, a.denominator)
    ints = [int(a * den) for a in u]
    g = 0
    for a in ints:
        g = gcd(g, abs(a))
    if g == 0:
        return tuple(ZERO for _ in u)
    return tuple(Fraction(a // g) for a in ints)


def rref(rows: Matrix) -> tuple[Matrix, list[int]]:
    """Reduced row echelon form and pivot columns."""
    a = [list(r) for r in rows]
    if not a:
        return [], []
    m, n = len(a), len(a[0])
    pivots: list[int] = []
    r = 0
    for c in range(n):
        if r == m:
            break
        p = next((i for i in range(r, m) if a[i][c] != 0), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        inv = 1 / a[r][c]
        a[r] = [x * inv for x in a[r]]
        for i in range(m):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
    return [tuple(row) for row in a[:r]], pivots


def rank(rows: Matrix) -> int:
    if not rows:
        return 0
    return len(rref(rows)[1])


def nullspace(rows: Matrix, n: int | None = None) -> Matrix:
    """Basis of {x : A x = 0}."""
    if not rows:
        if n is None:
            raise ValueError("column count required for an empty matrix")
        return [tuple(ONE if i == j else ZERO for i in range(n)) for j in range(n)]
    n = len(rows[0])
    red, piv = rref(rows)
    free = [c for c in range(n) if c not in piv]
    basis = []
    for f in free:
        x = [ZERO] * n
        x[f] = ONE
        for row, p in zip(red, piv):
            x[p] = -row[f]
        basis.append(tuple(x))
    return basis


def solve_affine(rows: Matrix, rhs: Sequence[Fraction]) -> tuple[Vector, Matrix] | None:
    """Solve A x = b. Returns (particular solution, null-space basis) or None if
    the system is inconsistent."""
    if not rows:
        raise ValueError("empty system")
    n = len(rows[0])
    aug = [tuple(r) + (as_fraction(b),) for r, b in zip(rows, rhs)]
    red, piv = rref(aug)
    if n in piv:
        return None
    x = [ZERO] * n
    for row, p in zip(red, piv):
        x[p] = row[n]
    return tuple(x), nullspace([r for r in rows], n)


def in_span(basis: Matrix, v: Sequence[Fraction]) -> bool:
    if not basis:
        return is_zero(v)
    return rank(list(basis) + [tuple(v)]) == rank(list(basis))


# ---------------------------------------------------------------------------
# Double description
# ---------------------------------------------------------------------------


def _zero_set(rays_rows: Matrix, r: Vector) -> frozenset:
    return frozenset(i for i, a in enumerate(rays_rows) if dot(a, r) == 0)


def cone_generators(ineqs: Matrix, n: int) -> tuple[Matrix, Matrix]:
    """Minimal generators of the cone {x in Q^n : A x >= 0}.

    Returns ``(lineality, rays)``: a basis of the lineality space and the
    extreme rays of the pointed part (lying in the orthogonal complement of the
    lineality space), each normalised to a primitive integer vector.
    """
    ineqs = [tuple(r) for r in ineqs if not is_zero(r)]
    lin = nullspace(ineqs, n) if ineqs else nullspace([], n)
    if len(lin) == n:
        return lin, []
    # Restrict to the complement of the lineality space: equalities l.x = 0.
    rows = list(ineqs)
    for l in lin:
        rows.append(tuple(l))
        rows.append(tuple(-a for a in l))
    # Pick n linearly independent rows to seed the iteration.
    seed: list[int] = []
    for i, r in enumerate(rows):
        if rank([rows[j] for j in seed] + [r]) > len(seed):
            seed.append(i)
            if len(seed) == n:
                break
    if len(seed) < n:
        raise ArithmeticError("constraint rows do not span after adding lineality")
    base = [rows[i] for i in seed]
    # Rays of {x : B x >= 0} with B invertible are the columns of B^{-1}.
    inv_cols = []
    for k in range(n):
        e = tuple(ONE if i == k else ZERO for i in range(n))
        sol = solve_affine(base, e)
        inv_cols.append(primitive(sol[0]))
    rays = inv_cols
    done = list(seed)
    for i, r in enumerate(rows):
        if i in seed:
            continue
        vals = [dot(r, x) for x in rays]
        pos = [x for x, v in zip(rays, vals) if v > 0]
        neg = [(x, v) for x, v in zip(rays, vals) if v < 0]
        zer = [x for x, v in zip(rays, vals) if v == 0]
        new = pos + zer
        if neg and pos:
            done_rows = [rows[j] for j in done]
            zs = {x: _zero_set(done_rows, x) for x in rays}
            for p in pos:
                vp = dot(r, p)
                for q, vq in neg:
                    common = zs[p] & zs[q]
                    if len(common) < n - 2:
                        continue
                    adjacent = True
                    for x in rays:
                        if x == p or x == q:
                            continue
                        if common <= zs[x]:
                            adjacent = False
                            break
                    if adjacent:
                        w = sub(scale(vp, q), scale(vq, p))
                        if not is_zero(w):
                            new.append(primitive(w))
        rays = list(dict.fromkeys(new))
        done.append(i)
    return lin, rays


def polytope_vertices(eq: Matrix, eq_rhs: Sequence, ineq: Matrix, ineq_rhs: Sequence,
                      n: int) -> tuple[list[Vector], list[Vector], bool]:
    """Vertices of {x : E x = e, A x >= a} via homogenisation.

    Returns ``(vertices, recession_rays, has_lineality)``.
    """
    rows = []
    for r, b in zip(eq, eq_rhs):
        h = tuple(r) + (-as_fraction(b),)
        rows.append(h)
        rows.append(tuple(-v for v in h))
    for r, b in zip(ineq, ineq_rhs):
        rows.append(tuple(r) + (-as_fraction(b),))
    rows.append(tuple([ZERO] * n + [ONE]))
    lin, rays = cone_generators(rows, n + 1)
    verts = []
    rec = []
    for r in rays:
        t = r[-1]
        if t > 0:
            verts.append(tuple(v / t for v in r[:-1]))
        elif t == 0:
            rec.append(r[:-1])
    return sorted(set(verts)), rec, bool(lin)


# ---------------------------------------------------------------------------
# Exact simplex (phase one only): feasibility of {lam >= 0 : G^T lam = x}
# ---------------------------------------------------------------------------


def feasible_nonneg(columns: Sequence[Sequence[Fraction]], target: Sequence[Fraction]
                    ) -> tuple[bool, Vector | None]:
    """Decide whether ``target`` is a nonnegative combination of ``columns``.

    Phase-one simplex with Bland's rule in exact arithmetic. Returns
    ``(feasible, weights)``.
    """
    m = len(target)
    k = len(columns)
    if k == 0:
        return is_zero(target), ()
    # Tableau rows: sum_j col_j[i] lam_j + s_i = |t_i| with sign flips.
    tab = []
    for i in range(m):
        sgn = -1 if target[i] < 0 else 1
        row = [sgn * as_fraction(columns[j][i]) for j in range(k)]
        row += [ONE if a == i else ZERO for a in range(m)]
        row.append(sgn * as_fraction(target[i]))
        tab.append(row)
    basis = [k + i for i in range(m)]
    ncol = k + m
    # Objective: minimise sum of artificials -> reduced costs.
    cost = [ZERO] * (ncol + 1)
    for i in range(m):
        for j in range(ncol + 1):
            cost[j] -= tab[i][j]
    for i in range(m):
        cost[k + i] += ONE
    while True:
        enter = next((j for j in range(ncol) if cost[j] < 0), None)
        if enter is None:
            break
        best = None
        for i in range(m):
            a = tab[i][enter]
            if a > 0:
                ratio = tab[i][-1] / a
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:
            break
        _, p = best
        piv = tab[p][enter]
        tab[p] = [v / piv for v in tab[p]]
        for i in range(m):
            if i != p and tab[i][enter] != 0:
                f = tab[i][enter]
                tab[i] = [a - f * b for a, b in zip(tab[i], tab[p])]
        f = cost[enter]
        cost = [a - f * b for a, b in zip(cost, tab[p])]
        basis[p] = enter
    if -cost[-1] != 0:
        return False, None
    lam = [ZERO] * k
    for i, b in enumerate(basis):
        if b < k:
            lam[b] = tab[i][-1]
    return True, tuple(lam)


def in_convex_hull(points: Sequence[Sequence[Fraction]], x: Sequence[Fraction]) -> bool:
    cols = [tuple(p) + (ONE,) for p in points]
    return feasible_nonneg(cols, tuple(x) + (ONE,))[0]


def subsets(items: Sequence, max_size: int | None = None):
    top = len(items) if max_size is None else min(max_size, len(items))
    for r in range(top + 1):
        yield from combinations(items, r)
