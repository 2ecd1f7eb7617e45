"""Probabilistic-equivalence quotients: effects of a phenomenological theory,
the weak effect algebra they carry, detection of proper weakness, an
experimental completion procedure, and the bounded-depth sequential analogue
(weak operation algebras)."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product as cartesian
import numpy as np

from .errors import InternalConsistencyError, PathologyError, TheoryValidationError
from .phenomenology import (Event, PhenomenologicalTheory, SequentialTheory,
                            event_complement, event_probability)
from .report import AxiomReport
from .structure import UNDEF, PartialStructure, _associativity, check_axioms


@dataclass(frozen=True)
class EffectClass:
    id: int
    representatives: tuple[Event, ...]
    signature: tuple[Fraction, ...]

    @property
    def label(self) -> str:
        rep = min(self.representatives, key=lambda e: (len(e.subset), _rank_hint(e)))
        if not rep.subset:
            return "0"
        if self.signature and all(v == 1 for v in self.signature):
            return "1"
        return "e(" + "∨".join(sorted(rep.subset)) + ")"


def _rank_hint(e: Event) -> tuple:
    return (e.measurement, tuple(sorted(e.subset)))


def _signature(theory: PhenomenologicalTheory, event: Event) -> tuple[Fraction, ...]:
    return tuple(event_probability(s, event) for s in theory.states)


def equivalence_classes(theory: PhenomenologicalTheory | SequentialTheory,
                        mode: str = "plain") -> list:
    """Partition events (plain) or event sequences (sequential) by exact
    probability signature; class ids follow lexicographic signature order."""
    if mode == "sequential":
        if not isinstance(theory, SequentialTheory):
            raise TypeError("sequential mode needs a SequentialTheory")
        return _sequential_classes(theory)[0]
    if mode != "plain":
        raise ValueError(f"unknown mode {mode!r}")
    if not theory.states:
        raise TheoryValidationError("theory has no states")
    groups: dict[tuple, list[Event]] = {}
    for ev in theory.events():
        groups.setdefault(_signature(theory, ev), []).append(ev)
    return [EffectClass(i, tuple(groups[sig]), sig) for i, sig in enumerate(sorted(groups))]


@dataclass
class WeakEffectAlgebra:
    classes: list[EffectClass]
    plus: dict[tuple[int, int], int]
    unit: int
    zero: int
    supplement: list[int]
    state_ids: tuple[str, ...] = ()
    theory: PhenomenologicalTheory | None = None
    witnesses: dict[tuple[int, int], list[tuple[Event, Event]]] = field(default_factory=dict)
    _index: dict[Event, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._index:
            self._index = {ev: c.id for c in self.classes for ev in c.representatives}

    @property
    def size(self) -> int:
        return len(self.classes)

    def class_of(self, event: Event) -> int:
        return self._index[event]

    def add(self, x: int, y: int) -> int | None:
        return self.plus.get((x, y))

    def signature(self, x: int) -> tuple[Fraction, ...]:
        return self.classes[x].signature

    def label(self, x: int) -> str:
        return self.classes[x].label

    def induced_states(self) -> list[tuple[Fraction, ...]]:
        """ω^e for every theory state, as value tuples indexed by class id."""
        return [tuple(c.signature[k] for c in self.classes) for k in range(len(self.state_ids))]

    def search_order(self) -> list[int]:
        """Classes ranked by their smallest representative (size first, then
        the theory's event enumeration order)."""
        if self.theory is None:
            return list(range(self.size))
        pos = {ev: i for i, ev in enumerate(self.theory.events())}
        key = {c.id: min((len(e.subset), pos.get(e, 0)) for e in c.representatives)
               for c in self.classes}
        return sorted(range(self.size), key=lambda k: key[k])

    def to_structure(self) -> PartialStructure:
        return PartialStructure.from_table(
            self.size, self.plus, self.zero, self.unit,
            labels=[c.label for c in self.classes],
            values=[c.signature for c in self.classes],
            search_order=self.search_order())


def build_wea(theory: PhenomenologicalTheory) -> WeakEffectAlgebra:
    """Quotient a validated theory by probabilistic equivalence and equip the
    effects with the witnessed partial sum."""
    classes = equivalence_classes(theory)
    index = {ev: c.id for c in classes for ev in c.representatives}
    plus: dict[tuple[int, int], int] = {}
    witnesses: dict[tuple[int, int], list[tuple[Event, Event]]] = {}
    for m in theory.measurements:
        evs = [e for e in theory.events() if e.measurement == m.id]
        for a in evs:
            for b in evs:
                if a.subset & b.subset:
                    continue
                x, y = index[a], index[b]
                z = index[Event(m.id, a.subset | b.subset)]
                prev = plus.setdefault((x, y), z)
                if prev != z:
                    raise InternalConsistencyError(
                        f"witnesses disagree for {classes[x].label} ⊕ {classes[y].label}: "
                        f"{classes[prev].label} vs {classes[z].label}")
                witnesses.setdefault((x, y), []).append((a, b))
    units = {index[theory.full_event(m.id)] for m in theory.measurements}
    zeros = {index[theory.empty_event(m.id)] for m in theory.measurements}
    if len(units) != 1 or len(zeros) != 1:
        raise InternalConsistencyError("unit or zero is not a single effect")
    supplement = []
    for c in classes:
        comps = {index[event_complement(theory, e)] for e in c.representatives}
        if len(comps) != 1:
            raise InternalConsistencyError(f"supplement of {c.label} is not well defined")
        supplement.append(comps.pop())
    return WeakEffectAlgebra(classes, plus, units.pop(), zeros.pop(), supplement,
                             tuple(s.id for s in theory.states), theory, witnesses, index)


def witness_independence(wea: WeakEffectAlgebra) -> tuple | None:
    """Exhaustive re-check that every witness pair of a defined sum lands in the
    same class. Returns a conflicting witness or None."""
    for (x, y), pairs in wea.witnesses.items():
        z = wea.plus[(x, y)]
        for a, b in pairs:
            if wea.class_of(Event(a.measurement, a.subset | b.subset)) != z:
                return (x, y, str(a), str(b))
    return None


@dataclass
class WeaknessVerdict:
    properly_weak: bool
    witness: tuple[int, int, int] | None
    labels: tuple[str, ...] | None = None


def detect_proper_weakness(wea: WeakEffectAlgebra | PartialStructure) -> WeaknessVerdict:
    """Find (x, y, z) with exactly one of (x⊕y)⊕z, x⊕(y⊕z) defined, or
    certify strong associativity by exhausting all triples."""
    s = wea.to_structure() if isinstance(wea, WeakEffectAlgebra) else wea
    hit = _associativity(s, s.plus, strong=True)
    if hit is None:
        return WeaknessVerdict(False, None)
    return WeaknessVerdict(True, hit, tuple(s.label(v) for v in hit))


# ---------------------------------------------------------------------------
# Completion (experimental)
# ---------------------------------------------------------------------------


@dataclass
class CompletionResult:
    status: str                       # "effect-algebra", "round-limit", "conflict", "axiom-failure"
    rounds: int
    signatures: list[tuple]
    plus: dict[tuple[int, int], int]
    unit: int
    zero: int
    embedding: dict[int, int]
    added: list[tuple]
    log: list[list[tuple]]
    report: AxiomReport | None = None
    diagnostic: str = ""
    preservation: AxiomReport | None = None

    @property
    def is_effect_algebra(self) -> bool:
        return self.status == "effect-algebra"

    def to_structure(self) -> PartialStructure:
        labels = ["(" + ",".join(str(v) for v in sig) + ")" for sig in self.signatures]
        return PartialStructure.from_table(len(self.signatures), self.plus, self.zero,
                                           self.unit, labels=labels,
                                           values=list(self.signatures))


def attempt_completion(wea: WeakEffectAlgebra, max_rounds: int = 10) -> CompletionResult:
    """Impose associativity wherever only one side exists, adjoining elements
    whose signature is the sum of the summands' signatures.

    Each round collects the violating triples in canonical order, then forces
    the missing sums breadth-first. The conjectured uniqueness of the result is
    not assumed; the processing order is recorded in ``log``.
    """
    sigs: list[tuple] = [c.signature for c in wea.classes]
    where = {sig: i for i, sig in enumerate(sigs)}
    plus = dict(wea.plus)
    added: list[tuple] = []
    log: list[list[tuple]] = []
    conflict = ""

    def force(u: int, v: int) -> int | None:
        nonlocal conflict
        if (u, v) in plus:
            return plus[(u, v)]
        target = tuple(a + b for a, b in zip(sigs[u], sigs[v]))
        if any(t > 1 for t in target):
            conflict = conflict or f"forced sum of {u} and {v} exceeds 1 in some state"
            return None
        w = where.get(target)
        if w is None:
            w = len(sigs)
            sigs.append(target)
            where[target] = w
            added.append(target)
        plus[(u, v)] = w
        plus[(v, u)] = w
        return w

    rounds = 0
    while True:
        n = len(sigs)
        todo = []
        for x in range(n):
            for y in range(n):
                xy = plus.get((x, y))
                for z in range(n):
                    yz = plus.get((y, z))
                    left = plus.get((xy, z)) if xy is not None else None
                    right = plus.get((x, yz)) if yz is not None else None
                    if (left is None) != (right is None):
                        todo.append((x, y, z, "left" if left is not None else "right"))
        if not todo:
            break
        if rounds == max_rounds:
            return CompletionResult("round-limit", rounds, sigs, plus, wea.unit, wea.zero,
                                    {i: i for i in range(wea.size)}, added, log,
                                    diagnostic=f"still {len(todo)} one-sided triples after "
                                               f"{max_rounds} rounds")
        rounds += 1
        log.append(todo)
        for x, y, z, side in todo:
            if side == "left":
                yz = force(y, z)
                if yz is not None:
                    force(x, yz)
            else:
                xy = force(x, y)
                if xy is not None:
                    force(xy, z)
        if conflict:
            return CompletionResult("conflict", rounds, sigs, plus, wea.unit, wea.zero,
                                    {i: i for i in range(wea.size)}, added, log,
                                    diagnostic=conflict)

    # Canonical ids: lexicographic signature order.
    order = sorted(range(len(sigs)), key=lambda i: sigs[i])
    new_id = {old: new for new, old in enumerate(order)}
    csigs = [sigs[i] for i in order]
    cplus = {(new_id[a], new_id[b]): new_id[c] for (a, b), c in plus.items()}
    result = CompletionResult("effect-algebra", rounds, csigs, cplus, new_id[wea.unit],
                              new_id[wea.zero], {i: new_id[i] for i in range(wea.size)},
                              added, log)
    s = result.to_structure()
    rep = check_axioms(s, "EA")
    result.report = rep
    if not rep.passed:
        result.status = "axiom-failure"
        result.diagnostic = "; ".join(f"{v.axiom} fails at {v.witness}" for v in rep.failures())
    result.preservation = _embedding_report(wea, result, s)
    return result


def _embedding_report(wea: WeakEffectAlgebra, res: CompletionResult,
                      s: PartialStructure) -> AxiomReport:
    emb = res.embedding
    rep = AxiomReport("embedding")
    injective = len(set(emb.values())) == len(emb)
    rep.add("injective", injective, None if injective else ("collision",))
    bad = next(((x, y) for (x, y), z in wea.plus.items()
                if res.plus.get((emb[x], emb[y])) != emb[z]), None)
    rep.add("plus", bad is None, bad)
    rep.add("zero", emb[wea.zero] == res.zero, None if emb[wea.zero] == res.zero else (wea.zero,))
    rep.add("unit", emb[wea.unit] == res.unit, None if emb[wea.unit] == res.unit else (wea.unit,))
    bad_sup = None
    for x in range(wea.size):
        sx = [b for b in range(s.size) if res.plus.get((emb[x], b)) == res.unit]
        if sx != [emb[wea.supplement[x]]]:
            bad_sup = (x,)
            break
    rep.add("supplement", bad_sup is None, bad_sup)
    return rep


# ---------------------------------------------------------------------------
# Sequential quotient: weak operation algebras (experimental reading)
# ---------------------------------------------------------------------------

Seq = tuple  # tuple[Event, ...]


@dataclass(frozen=True)
class SequenceClass:
    id: int
    length: int                      # -1 for the merged zero class
    representatives: tuple[Seq, ...]
    signature: tuple

    @property
    def label(self) -> str:
        if self.length == -1:
            return "0"
        if self.length == 0:
            return "1"
        rep = min(self.representatives, key=lambda s: (sum(len(e.subset) for e in s), str(s)))
        return ".".join("{" + ",".join(sorted(e.subset)) + "}" for e in rep)


def _flanks(seq: SequentialTheory, budget: int) -> list[tuple[tuple, tuple]]:
    strings = [()]
    frontier = [()]
    outs = seq.theory.outcomes
    for _ in range(budget):
        frontier = [s + (o,) for s in frontier for o in outs]
        strings.extend(frontier)
    return [(a, b) for a in strings for b in strings if len(a) + len(b) <= budget]


def _seq_prob(seq: SequentialTheory, sid: str, a: tuple, x: Seq, b: tuple):
    total = 0
    for mid in cartesian(*[sorted(e.subset) for e in x]):
        string = a + tuple(mid) + b
        if string and string not in seq.string_probs[sid]:
            raise TheoryValidationError(f"string {'.'.join(string)} is not realizable")
        total = total + seq.prob(sid, string)
    return total


def _sequential_classes(seq: SequentialTheory):
    theory = seq.theory
    events = theory.events()
    D = seq.depth
    flank_cache = {L: _flanks(seq, D - L) for L in range(D + 1)}
    groups: dict[tuple, list[Seq]] = {}
    sig_of: dict[Seq, tuple] = {}
    for L in range(D + 1):
        for x in cartesian(events, repeat=L):
            sig = tuple(_seq_prob(seq, s.id, a, x, b)
                        for s in theory.states for a, b in flank_cache[L])
            if L > 0 and all(v == 0 for v in sig):
                key = (-1, ())
            else:
                key = (L, sig)
            groups.setdefault(key, []).append(x)
            sig_of[x] = key
    keys = sorted(groups)
    classes = [SequenceClass(i, k[0], tuple(groups[k]), k[1]) for i, k in enumerate(keys)]
    index = {x: keys.index(k) for x, k in sig_of.items()}
    return classes, index


@dataclass
class WeakOperationAlgebra:
    classes: list[SequenceClass]
    plus: dict[tuple[int, int], int]
    product: dict[tuple[int, int], int]
    unit: int
    zero: int
    depth: int
    index: dict[Seq, int] = field(default_factory=dict, repr=False)
    report: AxiomReport | None = None

    @property
    def size(self) -> int:
        return len(self.classes)

    def class_of(self, x: Seq) -> int:
        return self.index[tuple(x)]

    def to_structure(self) -> PartialStructure:
        return PartialStructure.from_table(
            self.size, self.plus, self.zero, self.unit,
            product=_table(self.size, self.product),
            labels=[c.label for c in self.classes])

    def length_one(self) -> list[int]:
        return [c.id for c in self.classes if c.length == 1]


def _table(n: int, entries: dict[tuple[int, int], int]) -> np.ndarray:
    t = np.full((n, n), UNDEF, dtype=np.int64)
    for (a, b), c in entries.items():
        t[a, b] = c
    return t


def build_woa(seq: SequentialTheory) -> WeakOperationAlgebra:
    """Quotient bounded-depth event sequences by sequential equivalence.

    Elements are classes of sequences of events (length ≤ depth, one event per
    step); x ~ y when they have equal length and ω(a x b) = ω(a y b) for every
    state and all outcome strings a, b that fit within the depth. All
    identically-zero sequences form one class. The product is concatenation
    (undefined beyond the depth, except that zero absorbs); ⊕ merges two
    sequences that differ in one step by disjoint events of one measurement.
    """
    from .phenomenology import check_noncontextuality

    nc = check_noncontextuality(seq)
    if not nc.passed:
        v = nc.failures()[0]
        raise PathologyError(f"noncontextuality violated ({v.axiom}): {v.witness}")
    classes, index = _sequential_classes(seq)
    zero = next(c.id for c in classes if c.length == -1) if any(
        c.length == -1 for c in classes) else None
    unit = index[()]
    if zero is None:
        raise PathologyError("no zero class")
    theory = seq.theory
    by_meas: dict[str, list[Event]] = {}
    for e in theory.events():
        by_meas.setdefault(e.measurement, []).append(e)

    plus: dict[tuple[int, int], int] = {}
    for x, cx in index.items():
        for p, e in enumerate(x):
            for f in by_meas[e.measurement]:
                if e.subset & f.subset:
                    continue
                y = x[:p] + (f,) + x[p + 1:]
                merged = x[:p] + (Event(e.measurement, e.subset | f.subset),) + x[p + 1:]
                cy, cz = index[y], index[merged]
                prev = plus.setdefault((cx, cy), cz)
                if prev != cz:
                    raise PathologyError(f"⊕ not well defined on classes {cx}, {cy}")
    for c in classes:
        for key in ((zero, c.id), (c.id, zero)):
            prev = plus.setdefault(key, c.id)
            if prev != c.id:
                raise PathologyError(f"zero law fails for class {c.id}")

    product: dict[tuple[int, int], int] = {}
    D = seq.depth
    for x, cx in index.items():
        for y, cy in index.items():
            if len(x) + len(y) > D:
                continue
            cz = index[x + y]
            prev = product.setdefault((cx, cy), cz)
            if prev != cz:
                raise PathologyError(f"product not well defined on classes {cx}, {cy}")
    for c in classes:
        product[(zero, c.id)] = zero
        product[(c.id, zero)] = zero
    woa = WeakOperationAlgebra(classes, plus, product, unit, zero, D, index)
    woa.report = check_axioms(woa.to_structure(), "WOA")
    return woa
