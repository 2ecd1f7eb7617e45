"""Finite phenomenological theories: disjoint measurements, exact-rational
states, their Boolean event logics, and bounded-depth sequential closure."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from typing import Any, Iterator, Mapping, Protocol

from .errors import (TheorySyntaxError, TheoryValidationError, UnknownOutcomeError,
                     PathologyError)
from .report import AxiomReport


@dataclass(frozen=True)
class Measurement:
    id: str
    outcomes: tuple[str, ...]


@dataclass(frozen=True)
class State:
    id: str
    probs: Mapping[str, Fraction] = field(hash=False)

    def __getitem__(self, outcome: str) -> Fraction:
        try:
            return self.probs[outcome]
        except KeyError:
            raise UnknownOutcomeError(f"state {self.id!r} has no outcome {outcome!r}") from None


@dataclass(frozen=True)
class Event:
    measurement: str
    subset: frozenset

    def __str__(self) -> str:
        return f"{self.measurement}.{{{','.join(sorted(self.subset))}}}"

    def __repr__(self) -> str:
        return f"Event({self})"


@dataclass(frozen=True)
class Constraint:
    lhs: Event
    rhs: Event


@dataclass(frozen=True)
class OpTree:
    """A conditional-composition tree: perform ``measurement``; after outcome
    ``o`` continue with ``children[o]`` (``None`` is a leaf)."""

    measurement: str
    children: tuple[tuple[str, "OpTree | None"], ...]

    def label(self) -> str:
        inner = ",".join(f"{o}:{c.label() if c else '.'}" for o, c in self.children)
        return f"{self.measurement}({inner})"

    def depth(self) -> int:
        return 1 + max((c.depth() for _, c in self.children if c is not None), default=0)

    def walk(self, prefix: tuple = ()) -> Iterator[tuple[tuple, "OpTree"]]:
        """Yield (path-to-node, node) for every internal node."""
        yield prefix, self
        for o, c in self.children:
            if c is not None:
                yield from c.walk(prefix + (o,))

    def leaves(self, prefix: tuple = ()) -> list[tuple]:
        out = []
        for o, c in self.children:
            if c is None:
                out.append(prefix + (o,))
            else:
                out.extend(c.leaves(prefix + (o,)))
        return out

    def paths(self) -> list[tuple]:
        """Every nonempty node string (internal and leaf)."""
        out = []
        for pre, node in self.walk():
            for o, _ in node.children:
                out.append(pre + (o,))
        return out


@dataclass
class PhenomenologicalTheory:
    measurements: tuple[Measurement, ...]
    states: tuple[State, ...]
    constraints: tuple[Constraint, ...] = ()
    approximate: bool = False
    trees: dict[str, OpTree] = field(default_factory=dict)
    seq_probs: dict[str, dict[tuple, Fraction]] = field(default_factory=dict)

    def __post_init__(self):
        self.measurements = tuple(self.measurements)
        self.states = tuple(self.states)
        self.constraints = tuple(self.constraints)

    def __eq__(self, other):
        if not isinstance(other, PhenomenologicalTheory):
            return NotImplemented
        return (self.measurements == other.measurements
                and [(s.id, dict(s.probs)) for s in self.states]
                == [(s.id, dict(s.probs)) for s in other.states]
                and self.constraints == other.constraints
                and self.trees == other.trees
                and self.seq_probs == other.seq_probs)

    @property
    def outcomes(self) -> tuple[str, ...]:
        return tuple(o for m in self.measurements for o in m.outcomes)

    def measurement(self, mid: str) -> Measurement:
        for m in self.measurements:
            if m.id == mid:
                return m
        raise KeyError(f"unknown measurement {mid!r}")

    def measurement_of(self, outcome: str) -> Measurement:
        for m in self.measurements:
            if outcome in m.outcomes:
                return m
        raise UnknownOutcomeError(f"unknown outcome {outcome!r}")

    def state(self, sid: str) -> State:
        for s in self.states:
            if s.id == sid:
                return s
        raise KeyError(f"unknown state {sid!r}")

    def events(self) -> list[Event]:
        """All events, measurement by measurement, subsets by size."""
        out = []
        for m in self.measurements:
            for r in range(len(m.outcomes) + 1):
                for sub in combinations(m.outcomes, r):
                    out.append(Event(m.id, frozenset(sub)))
        return out

    def full_event(self, mid: str) -> Event:
        return Event(mid, frozenset(self.measurement(mid).outcomes))

    def empty_event(self, mid: str) -> Event:
        return Event(mid, frozenset())


def event_probability(state: State, event: Event) -> Fraction:
    total = Fraction(0)
    for x in event.subset:
        total += state[x]
    return total


def _check_same(e: Event, f: Event) -> None:
    if e.measurement != f.measurement:
        raise ValueError(f"{e} and {f} belong to different measurements")


def event_join(e: Event, f: Event) -> Event:
    _check_same(e, f)
    return Event(e.measurement, e.subset | f.subset)


def event_meet(e: Event, f: Event) -> Event:
    _check_same(e, f)
    return Event(e.measurement, e.subset & f.subset)


def event_complement(theory: PhenomenologicalTheory, e: Event) -> Event:
    full = frozenset(theory.measurement(e.measurement).outcomes)
    return Event(e.measurement, full - e.subset)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate_theory(theory: PhenomenologicalTheory) -> AxiomReport:
    report = AxiomReport("theory")
    seen: dict[str, str] = {}
    clash = None
    for m in theory.measurements:
        if not m.outcomes:
            report.add("nonempty", False, (m.id,), "measurement has no outcomes")
        if len(set(m.outcomes)) != len(m.outcomes):
            dup = next(o for o in m.outcomes if m.outcomes.count(o) > 1)
            clash = clash or (dup, m.id, m.id)
        for o in m.outcomes:
            if o in seen and seen[o] != m.id and clash is None:
                clash = (o, seen[o], m.id)
            seen.setdefault(o, m.id)
    report.add("disjoint", clash is None, clash)

    missing = None
    for s in theory.states:
        for o in seen:
            if o not in s.probs:
                missing = missing or (s.id, o)
    report.add("coverage", missing is None, missing)

    bad_range = None
    bad_norm = None
    for s in theory.states:
        for o, p in s.probs.items():
            if not (0 <= p <= 1) and bad_range is None:
                bad_range = (s.id, o, str(p))
        for m in theory.measurements:
            total = sum((s.probs.get(o, Fraction(0)) for o in m.outcomes), Fraction(0))
            if total != 1 and bad_norm is None:
                bad_norm = (s.id, m.id, str(total))
    report.add("range", bad_range is None, bad_range)
    report.add("normalization", bad_norm is None, bad_norm)
    report.add("states", len(theory.states) > 0, None if theory.states else ("no states",))

    bad_con = None
    if missing is None:
        for c in theory.constraints:
            for s in theory.states:
                if event_probability(s, c.lhs) != event_probability(s, c.rhs):
                    bad_con = bad_con or (str(c.lhs), str(c.rhs), s.id)
    if theory.constraints:
        report.add("constraints", bad_con is None, bad_con)
    return report


# ---------------------------------------------------------------------------
# Theory files
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(->|==|[{}(),:=.]|(?:[A-Za-z0-9_+']|-(?!>))+(?:/[0-9]+)?)")


def _tokenize(line: str, lineno: int) -> list[tuple[str, int]]:
    toks = []
    pos = 0
    text = line.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            col = pos + 1 + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise TheorySyntaxError(f"unexpected character {text[col - 1]!r}", lineno, col)
        toks.append((m.group(1), m.start(1) + 1))
        pos = m.end()
    return toks


class _Cursor:
    def __init__(self, toks, lineno):
        self.toks = toks
        self.i = 0
        self.lineno = lineno

    def peek(self):
        return self.toks[self.i][0] if self.i < len(self.toks) else None

    def col(self):
        if self.i < len(self.toks):
            return self.toks[self.i][1]
        return (self.toks[-1][1] + len(self.toks[-1][0])) if self.toks else 1

    def next(self, expect: str | None = None) -> str:
        if self.i >= len(self.toks):
            raise TheorySyntaxError(f"unexpected end of line, expected {expect or 'token'}",
                                    self.lineno, self.col())
        tok = self.toks[self.i][0]
        if expect is not None and tok != expect:
            raise TheorySyntaxError(f"expected {expect!r}, found {tok!r}", self.lineno, self.col())
        self.i += 1
        return tok

    def ident(self) -> str:
        tok = self.peek()
        if tok is None or not re.fullmatch(r"(?:[A-Za-z0-9_+']|-(?!>))+", tok):
            raise TheorySyntaxError(f"expected identifier, found {tok!r}", self.lineno, self.col())
        return self.next()

    def fraction(self) -> Fraction:
        col = self.col()
        tok = self.next()
        if not re.fullmatch(r"-?[0-9]+(?:/[0-9]+)?", tok):
            raise TheorySyntaxError(f"expected p/q, found {tok!r}", self.lineno, col)
        try:
            return Fraction(tok)
        except ZeroDivisionError:
            raise TheorySyntaxError("zero denominator", self.lineno, col) from None

    def end(self):
        if self.i != len(self.toks):
            raise TheorySyntaxError(f"trailing input {self.peek()!r}", self.lineno, self.col())

    def brace_list(self, item):
        self.next("{")
        out = []
        if self.peek() == "}":
            self.next()
            return out
        while True:
            out.append(item())
            col = self.col()
            tok = self.next()
            if tok == "}":
                return out
            if tok != ",":
                raise TheorySyntaxError(f"expected ',' or '}}', found {tok!r}", self.lineno, col)


def _parse_event(cur: _Cursor) -> Event:
    mid = cur.ident()
    cur.next(".")
    outs = cur.brace_list(cur.ident)
    return Event(mid, frozenset(outs))


def _parse_tree(cur: _Cursor) -> OpTree:
    mid = cur.ident()
    if cur.peek() != "{":
        return OpTree(mid, ())

    def child():
        o = cur.ident()
        cur.next("->")
        if cur.peek() == "leaf":
            cur.next()
            return o, None
        return o, _parse_tree(cur)

    return OpTree(mid, tuple(cur.brace_list(child)))


def _expand_bare(tree: OpTree, theory_meas: dict[str, Measurement], lineno: int) -> OpTree:
    if tree.measurement not in theory_meas:
        raise TheoryValidationError(f"line {lineno}: unknown measurement {tree.measurement!r}")
    outs = theory_meas[tree.measurement].outcomes
    if not tree.children:
        return OpTree(tree.measurement, tuple((o, None) for o in outs))
    given = dict(tree.children)
    unknown = set(given) - set(outs)
    if unknown:
        raise TheoryValidationError(f"line {lineno}: outcomes {sorted(unknown)} not in "
                                    f"{tree.measurement}")
    kids = tuple((o, _expand_bare(given[o], theory_meas, lineno) if given.get(o) else None)
                 for o in outs)
    return OpTree(tree.measurement, kids)


def parse_theory(text: str) -> PhenomenologicalTheory:
    measurements: list[Measurement] = []
    states: list[tuple[State, int]] = []
    constraints: list[Constraint] = []
    trees: dict[str, tuple[OpTree, int]] = {}
    seq: dict[str, dict[tuple, Fraction]] = {}
    owner: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        toks = _tokenize(line, lineno)
        cur = _Cursor(toks, lineno)
        kw = cur.next()
        if kw == "measurement":
            mid = cur.ident()
            cur.next("=")
            outs = cur.brace_list(cur.ident)
            cur.end()
            if not outs:
                raise TheoryValidationError(f"line {lineno}: measurement {mid!r} is empty")
            if any(m.id == mid for m in measurements):
                raise TheoryValidationError(f"line {lineno}: duplicate measurement {mid!r}")
            for o in outs:
                if o in owner or outs.count(o) > 1:
                    raise TheoryValidationError(
                        f"line {lineno}: duplicate outcome id {o!r}"
                        + (f" (already in {owner[o]})" if o in owner else ""))
                owner[o] = mid
            measurements.append(Measurement(mid, tuple(outs)))
        elif kw == "state":
            sid = cur.ident()
            cur.next("=")

            def item():
                o = cur.ident()
                cur.next(":")
                return o, cur.fraction()

            pairs = cur.brace_list(item)
            cur.end()
            probs = {}
            for o, p in pairs:
                if o in probs:
                    raise TheoryValidationError(f"line {lineno}: outcome {o!r} repeated in state")
                if not 0 <= p <= 1:
                    raise TheoryValidationError(
                        f"line {lineno}: probability {p} for {o!r} outside [0,1]")
                probs[o] = p
            states.append((State(sid, probs), lineno))
        elif kw == "constraint":
            lhs = _parse_event(cur)
            cur.next("==")
            rhs = _parse_event(cur)
            cur.end()
            constraints.append(Constraint(lhs, rhs))
        elif kw == "tree":
            tid = cur.ident()
            cur.next("=")
            t = _parse_tree(cur)
            cur.end()
            trees[tid] = (t, lineno)
        elif kw == "seqstate":
            sid = cur.ident()
            string = [cur.ident()]
            while cur.peek() == ".":
                cur.next()
                string.append(cur.ident())
            cur.next("=")
            p = cur.fraction()
            cur.end()
            if not 0 <= p <= 1:
                raise TheoryValidationError(f"line {lineno}: probability {p} outside [0,1]")
            seq.setdefault(sid, {})[tuple(string)] = p
        else:
            raise TheorySyntaxError(f"unknown keyword {kw!r}", lineno, 1)

    meas = {m.id: m for m in measurements}
    theory = PhenomenologicalTheory(
        tuple(measurements), tuple(s for s, _ in states), tuple(constraints),
        trees={tid: _expand_bare(t, meas, ln) for tid, (t, ln) in trees.items()},
        seq_probs=seq)
    for s, ln in states:
        for o in s.probs:
            if o not in owner:
                raise TheoryValidationError(f"line {ln}: unknown outcome {o!r} in state {s.id!r}")
    for c in constraints:
        for e in (c.lhs, c.rhs):
            m = meas.get(e.measurement)
            if m is None or not e.subset <= set(m.outcomes):
                raise TheoryValidationError(f"bad event {e} in constraint")
    report = validate_theory(theory)
    if not report.passed:
        v = report.failures()[0]
        line = dict((s.id, ln) for s, ln in states)
        where = f"line {line[v.witness[0]]}: " if v.witness and v.witness[0] in line else ""
        raise TheoryValidationError(f"{where}{v.axiom} violated: {v.witness}")
    return theory


def format_theory(theory: PhenomenologicalTheory) -> str:
    lines = []
    for m in theory.measurements:
        lines.append(f"measurement {m.id} = {{ {', '.join(m.outcomes)} }}")
    for s in theory.states:
        body = ", ".join(f"{o}: {p.numerator}/{p.denominator}" for o, p in s.probs.items())
        lines.append(f"state {s.id} = {{ {body} }}")
    for c in theory.constraints:
        lines.append(f"constraint {c.lhs} == {c.rhs}")

    def tree_text(t: OpTree) -> str:
        kids = ", ".join(f"{o} -> {tree_text(c) if c else 'leaf'}" for o, c in t.children)
        return f"{t.measurement} {{ {kids} }}"

    for tid, t in theory.trees.items():
        lines.append(f"tree {tid} = {tree_text(t)}")
    for sid, table in theory.seq_probs.items():
        for string, p in table.items():
            lines.append(f"seqstate {sid} {'.'.join(string)} = {p.numerator}/{p.denominator}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Sequential closure
# ---------------------------------------------------------------------------


class Instrument(Protocol):
    """Per-outcome conditional-state rule.

    ``initial`` maps a theory state to the instrument's internal state;
    ``step`` returns the probability of ``outcome`` and the conditional state
    after it.
    """

    exact: bool

    def initial(self, state: State) -> Any: ...

    def step(self, internal: Any, outcome: str) -> tuple[Any, Any]: ...


class StateUpdateRule:
    """Instrument on a phenomenological theory: after outcome ``x`` in state
    ``s`` the system is in state ``successors[(s, x)]`` (default: unchanged)."""

    exact = True

    def __init__(self, theory: PhenomenologicalTheory,
                 successors: Mapping[tuple[str, str], str | State] | None = None):
        self.theory = theory
        self.successors = dict(successors or {})
        for key, nxt in self.successors.items():
            st = nxt if isinstance(nxt, State) else theory.state(nxt)
            rep = validate_theory(PhenomenologicalTheory(theory.measurements, (st,)))
            if not rep.passed:
                raise TheoryValidationError(f"successor for {key} is not a state: "
                                            f"{rep.failures()[0].witness}")

    def initial(self, state: State) -> State:
        return state

    def step(self, internal: State, outcome: str) -> tuple[Fraction, State]:
        p = internal[outcome]
        nxt = self.successors.get((internal.id, outcome), internal)
        if not isinstance(nxt, State):
            nxt = self.theory.state(nxt)
        return p, nxt


def complete_trees(theory: PhenomenologicalTheory, depth: int) -> list[OpTree]:
    """All conditional-composition trees in which every path has length ``depth``."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if depth == 1:
        return [OpTree(m.id, tuple((o, None) for o in m.outcomes)) for m in theory.measurements]
    sub = complete_trees(theory, depth - 1)
    out = []
    for m in theory.measurements:
        for kids in product(sub, repeat=len(m.outcomes)):
            out.append(OpTree(m.id, tuple(zip(m.outcomes, kids))))
    return out


@dataclass
class SequentialTheory:
    theory: PhenomenologicalTheory
    depth: int
    trees: dict[str, OpTree]
    string_probs: dict[str, dict[tuple, Any]]
    tree_probs: dict[str, dict[str, dict[tuple, Any]]] | None = None
    exact: bool = True

    def prob(self, state_id: str, string: tuple) -> Any:
        if not string:
            return Fraction(1) if self.exact else 1.0
        return self.string_probs[state_id][tuple(string)]

    def realizable(self, string: tuple) -> bool:
        sid = self.theory.states[0].id
        return not string or tuple(string) in self.string_probs[sid]


def _close(a, b, tol) -> bool:
    return a == b if tol == 0 else abs(a - b) <= tol


def build_sequential_theory(theory: PhenomenologicalTheory, instrument: Instrument,
                            depth: int) -> SequentialTheory:
    if depth < 1:
        raise ValueError("depth must be at least 1")
    tol = 0 if instrument.exact else 1e-12
    trees = {t.label(): t for t in complete_trees(theory, depth)}
    string_probs: dict[str, dict[tuple, Any]] = {s.id: {} for s in theory.states}
    tree_probs: dict[str, dict[str, dict[tuple, Any]]] = {}
    for tid, tree in trees.items():
        per_state = {}
        for s in theory.states:
            table: dict[tuple, Any] = {}
            one = Fraction(1) if instrument.exact else 1.0
            _walk(tree, instrument, instrument.initial(s), (), one, table, tol)
            per_state[s.id] = table
            known = string_probs[s.id]
            for string, p in table.items():
                if string in known and not _close(known[string], p, tol):
                    raise PathologyError(f"string {'.'.join(string)} has probability "
                                         f"{known[string]} and {p} in different trees")
                known.setdefault(string, p)
        tree_probs[tid] = per_state
    return SequentialTheory(theory, depth, trees, string_probs, tree_probs,
                            exact=instrument.exact)


def _walk(tree: OpTree, instrument, internal, prefix, weight, table, tol) -> None:
    total = 0
    branches = []
    for o, child in tree.children:
        p, nxt = instrument.step(internal, o)
        if p < -tol or p > 1 + tol:
            raise TheoryValidationError(f"instrument gave probability {p} for {o!r}")
        total += p
        branches.append((o, child, p, nxt))
    if not _close(total, 1, tol if tol else 0):
        raise TheoryValidationError(f"instrument probabilities at {tree.measurement} sum to {total}")
    for o, child, p, nxt in branches:
        w = weight * p
        table[prefix + (o,)] = w
        if child is not None:
            _walk(child, instrument, nxt, prefix + (o,), w, table, tol)


def sequential_from_theory(theory: PhenomenologicalTheory) -> SequentialTheory:
    """Sequential theory given explicitly by ``tree``/``seqstate`` lines."""
    if not theory.trees:
        raise TheoryValidationError("theory declares no trees")
    depth = max(t.depth() for t in theory.trees.values())
    probs = {s.id: dict(theory.seq_probs.get(s.id, {})) for s in theory.states}
    for s in theory.states:
        for o in theory.outcomes:
            probs[s.id].setdefault((o,), s.probs[o])
    return SequentialTheory(theory, depth, dict(theory.trees), probs, None, exact=True)


def check_noncontextuality(seq: SequentialTheory, tol: float | None = None) -> AxiomReport:
    """Leaf normalisation, prefix consistency and path-probability agreement
    across trees (the probability of a path never depends on what would have
    been done off that path)."""
    if tol is None:
        tol = 0 if seq.exact else 1e-12
    report = AxiomReport("sequential")
    norm = prefix = missing = None
    for tid, tree in seq.trees.items():
        for s in seq.theory.states:
            table = seq.string_probs[s.id]
            leaves = tree.leaves()
            if any(l not in table for l in leaves):
                missing = missing or (tid, s.id, ".".join(next(l for l in leaves if l not in table)))
                continue
            total = sum((table[l] for l in leaves), 0)
            if not _close(total, 1, tol) and norm is None:
                norm = (tid, s.id, str(total))
            for pre, node in tree.walk():
                kids = [pre + (o,) for o, _ in node.children]
                if any(k not in table for k in kids):
                    continue
                here = seq.prob(s.id, pre) if (not pre or pre in table) else None
                if here is None:
                    continue
                below = sum((table[k] for k in kids), 0)
                if not _close(here, below, tol) and prefix is None:
                    prefix = (tid, s.id, ".".join(pre) or "<root>", str(here), str(below))
    report.add("coverage", missing is None, missing)
    report.add("normalization", norm is None, norm)
    report.add("prefix", prefix is None, prefix)
    clash = None
    if seq.tree_probs:
        seen: dict[tuple[str, tuple], tuple[str, Any]] = {}
        for tid, per_state in seq.tree_probs.items():
            for sid, table in per_state.items():
                for string, p in table.items():
                    key = (sid, string)
                    if key in seen:
                        t0, p0 = seen[key]
                        if not _close(p0, p, tol) and clash is None:
                            clash = (sid, ".".join(string), t0, tid)
                    else:
                        seen[key] = (tid, p)
    report.add("sibling_independence", clash is None, clash)
    return report


def max_tree_deviation(seq: SequentialTheory) -> float:
    """Largest spread of any path probability across the trees containing it."""
    worst = 0.0
    if not seq.tree_probs:
        return worst
    vals: dict[tuple, list] = {}
    for per_state in seq.tree_probs.values():
        for sid, table in per_state.items():
            for string, p in table.items():
                vals.setdefault((sid, string), []).append(p)
    for ps in vals.values():
        worst = max(worst, float(max(ps) - min(ps)))
    return worst
