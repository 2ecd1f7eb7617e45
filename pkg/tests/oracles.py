"""Independent reference computations used to cross-check the library.

These deliberately avoid the package's own code paths: plain dictionaries and
bitmasks for quotients, reduced density matrices for Schmidt coefficients,
direct Born-rule products for sequential probabilities.
"""
from __future__ import annotations

import random
from fractions import Fraction

import numpy as np


def brute_quotient(measurements: dict[str, list[str]], states: list[dict[str, Fraction]]):
    """Signature -> set of (measurement, frozenset) events, and the sum table
    on signatures induced by disjoint same-measurement pairs."""
    groups: dict[tuple, set] = {}
    for m, outs in measurements.items():
        for mask in range(2 ** len(outs)):
            ev = frozenset(o for i, o in enumerate(outs) if mask >> i & 1)
            sig = tuple(sum((st[o] for o in ev), Fraction(0)) for st in states)
            groups.setdefault(sig, set()).add((m, ev))
    sums: dict[tuple, tuple] = {}
    for m, outs in measurements.items():
        k = len(outs)
        for a in range(2 ** k):
            for b in range(2 ** k):
                if a & b:
                    continue
                sa = tuple(sum((st[outs[i]] for i in range(k) if a >> i & 1), Fraction(0)) for st in states)
                sb = tuple(sum((st[outs[i]] for i in range(k) if b >> i & 1), Fraction(0)) for st in states)
                sums[(sa, sb)] = tuple(x + y for x, y in zip(sa, sb))
    return groups, sums


def random_theory_text(rng: random.Random, max_meas: int = 4, max_out: int = 4,
                       max_states: int = 6, denominators=(1, 2, 3, 4)) -> tuple[str, dict, list]:
    """A random valid theory as source text plus its plain-dict description."""
    meas = {}
    label = 0
    for mi in range(rng.randint(1, max_meas)):
        k = rng.randint(1, max_out)
        meas[f"M{mi}"] = [f"o{label + j}" for j in range(k)]
        label += k
    states = []
    for _ in range(rng.randint(1, max_states)):
        st = {}
        for outs in meas.values():
            den = rng.choice(denominators)
            cuts = sorted(rng.randint(0, den) for _ in range(len(outs) - 1))
            parts = [b - a for a, b in zip([0] + cuts, cuts + [den])]
            for o, p in zip(outs, parts):
                st[o] = Fraction(p, den)
        states.append(st)
    lines = [f"measurement {m} = {{ {', '.join(outs)} }}" for m, outs in meas.items()]
    for i, st in enumerate(states):
        body = ", ".join(f"{o}: {v.numerator}/{v.denominator}" for o, v in st.items())
        lines.append(f"state s{i} = {{ {body} }}")
    return "\n".join(lines) + "\n", meas, states


def schmidt_top(psi: np.ndarray, dims: tuple[int, int]) -> float:
    """Largest eigenvalue of the reduced density matrix."""
    m = psi.reshape(dims)
    return float(np.linalg.eigvalsh(m @ m.conj().T)[-1])


def born_sequence(rho: np.ndarray, projectors: list[np.ndarray]) -> float:
    """Probability of a sequence of projective outcomes (Lüders rule)."""
    v = rho
    for p in projectors:
        v = p @ v @ p
    return float(np.real(np.trace(v)))


def random_integer_cone(rng: random.Random, dim: int, extra: int, lo: int = -3, hi: int = 3):
    gens = []
    while len(gens) < dim + extra:
        g = tuple(Fraction(rng.randint(lo, hi)) for _ in range(dim))
        if any(g):
            gens.append(g)
    return gens


def pt_bell_min_eigenvalue(d: int) -> float:
    """Analytic: (|Φ+⟩⟨Φ+|)^{T_B} = SWAP / d, whose smallest eigenvalue is -1/d."""
    return -1.0 / d
