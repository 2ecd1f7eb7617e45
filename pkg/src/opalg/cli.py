"""Command-line front end.

Exit codes: 0 when every check passes, 1 when a check fails (the report holds
the witness), 2 for usage or input errors.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .errors import OpalgError
from .report import AxiomReport

SCHEMA = 1
FIXTURES = ("paper-counterexample.th", "classical-bit.th")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _plain(obj: Any) -> Any:
    if isinstance(obj, AxiomReport):
        return _plain(obj.to_dict())
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return [_plain(v) for v in obj] if obj.ndim > 1 else [
                [float(z.real), float(z.imag)] for z in obj]
        return obj.tolist()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def emit_report(report: dict, fmt: str = "json") -> bytes:
    """Serialize a run report with stable key order."""
    body = dict(report)
    body.setdefault("schema", SCHEMA)
    body.setdefault("verdicts", [])
    if fmt == "json":
        return (json.dumps(_plain(body), sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode()
    if fmt != "text":
        raise ValueError(f"unknown format {fmt!r}")
    plain = _plain(body)
    lines = [f"command: {plain.get('command', '')}",
             f"result: {'PASS' if plain.get('passed') else 'FAIL'}"]
    for v in plain["verdicts"]:
        lines.append(f"[{v['profile']}] {'PASS' if v['passed'] else 'FAIL'}")
        for item in v["verdicts"]:
            w = f" witness={item['witness']}" if "witness" in item else ""
            n = f" ({item['note']})" if "note" in item else ""
            lines.append(f"  {item['axiom']}: {item['result']}{w}{n}")
    for key in sorted(plain.get("findings", {})):
        lines.append(f"{key}: {json.dumps(plain['findings'][key], sort_keys=True, ensure_ascii=False)}")
    return ("\n".join(lines) + "\n").encode()


# ---------------------------------------------------------------------------
# Inputs
# ---------------------------------------------------------------------------


def _read_input(name: str) -> tuple[str, str]:
    """Text and display name; bundled fixtures resolve by bare name."""
    p = Path(name)
    if p.is_file():
        return p.read_text(), p.name
    if p.name in FIXTURES and not p.exists():
        return (resources.files("opalg") / "data" / p.name).read_text(), p.name
    raise UsageError(f"cannot read {name}")


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _load_theory(name: str):
    from .phenomenology import parse_theory

    text, shown = _read_input(name)
    return parse_theory(text), {"file": shown, "sha256": _digest(text)}


def parse_cone(text: str):
    """``dimension n`` then ``generators`` and/or ``facets`` blocks of p/q rows."""
    from .convex import PolyhedralCone

    dim = None
    blocks: dict[str, list] = {}
    cur = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head = line.split()
        if head[0] == "dimension":
            dim = int(head[1])
        elif head[0] in ("generators", "facets") and len(head) == 1:
            cur = head[0]
            blocks.setdefault(cur, [])
        else:
            if cur is None:
                raise UsageError(f"line {no}: row outside a block")
            try:
                blocks[cur].append(tuple(Fraction(t) for t in head))
            except (ValueError, ZeroDivisionError):
                raise UsageError(f"line {no}: bad rational") from None
    rows = [r for b in blocks.values() for r in b]
    if dim is None:
        if not rows:
            raise UsageError("cone file has no dimension and no rows")
        dim = len(rows[0])
    return PolyhedralCone(dim, generators=blocks.get("generators"), facets=blocks.get("facets"))


def format_cone(cone) -> str:
    out = [f"dimension {cone.dim}", "generators"]
    out += [" ".join(str(v) for v in g) for g in cone.generators]
    out.append("facets")
    out += [" ".join(str(v) for v in h) for h in cone.facets]
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _need_seed(args):
    if args.seed is None:
        raise UsageError("--seed is required for sampled runs")


def cmd_theory_validate(args) -> dict:
    from .phenomenology import validate_theory

    th, inp = _load_theory(args.file)
    rep = validate_theory(th)
    return {"inputs": inp, "verdicts": [rep],
            "findings": {"measurements": len(th.measurements), "states": len(th.states),
                         "approximate": th.approximate}}


def _wea_table(w) -> dict:
    return {
        "elements": [{"id": c.id, "label": c.label, "signature": list(c.signature),
                      "representatives": sorted(str(e) for e in c.representatives)}
                     for c in w.classes],
        "plus": sorted([[x, y, z] for (x, y), z in w.plus.items()]),
        "unit": w.unit, "zero": w.zero, "supplement": w.supplement,
    }


def cmd_theory_wea(args) -> dict:
    from .quotient import build_wea, detect_proper_weakness
    from .structure import check_axioms

    th, inp = _load_theory(args.file)
    w = build_wea(th)
    s = w.to_structure()
    verdicts = [check_axioms(s, "WEA")]
    findings: dict[str, Any] = {"effects": w.size}
    if args.check:
        ea = check_axioms(s, "EA")
        findings["EA"] = ea.summary()
        findings["EA_report"] = ea.to_dict()
        weak = detect_proper_weakness(w)
        findings["properly weak"] = weak.properly_weak
        if weak.witness:
            findings["weakness witness"] = {"ids": list(weak.witness), "labels": list(weak.labels)}
    return {"inputs": inp, "verdicts": verdicts, "findings": findings,
            "artifacts": {"algebra": _wea_table(w)}}


def cmd_theory_complete(args) -> dict:
    from .quotient import attempt_completion, build_wea

    th, inp = _load_theory(args.file)
    w = build_wea(th)
    res = attempt_completion(w, args.max_rounds)
    verdicts = [r for r in (res.report, res.preservation) if r is not None]
    findings = {"status": res.status, "rounds": res.rounds, "size": len(res.signatures),
                "added": [list(a) for a in res.added], "diagnostic": res.diagnostic}
    out = {"inputs": inp, "verdicts": verdicts, "findings": findings,
           "artifacts": {"signatures": [list(s) for s in res.signatures],
                         "plus": sorted([[x, y, z] for (x, y), z in res.plus.items()]),
                         "embedding": {str(k): v for k, v in sorted(res.embedding.items())}}}
    if not res.is_effect_algebra:
        out["passed"] = False
    return out


def cmd_theory_states(args) -> dict:
    from .quotient import build_wea
    from .structure import is_separating, is_state, state_polytope

    th, inp = _load_theory(args.file)
    w = build_wea(th)
    s = w.to_structure()
    rep = AxiomReport("states")
    induced = w.induced_states()
    bad = next(((k, wit) for k, st in enumerate(induced) if (wit := is_state(s, st)) is not None), None)
    rep.add("induced are states", bad is None, bad)
    sep = is_separating(s, induced)
    rep.add("separating", sep is None, sep)
    poly = state_polytope(s)
    return {"inputs": inp, "verdicts": [rep],
            "findings": {"dimension": poly.dimension, "vertices": len(poly.vertices or [])},
            "artifacts": {"vertices": [list(v) for v in poly.vertices or []],
                          "induced": [list(v) for v in induced]}}


def cmd_quantum_gleason(args) -> dict:
    from .parallel import trial_map
    from .quantum import (born_values, gleason_check, informationally_complete_effects,
                          random_density, trace_distance)

    _need_seed(args)
    d = args.dim
    E = informationally_complete_effects(d)

    def one(rng):
        rho = random_density(d, rng)
        g = gleason_check(d, E, born_values(rho, E))
        dist = trace_distance(g.rho, rho) if g.feasible else np.inf
        bad = born_values(rho, E)
        bad[1] += 0.05
        rejected = not gleason_check(d, E, bad).feasible
        return dist, rejected

    res = trial_map(one, args.trials, args.seed)
    worst = max(r[0] for r in res)
    rejected = all(r[1] for r in res)
    rep = AxiomReport("gleason")
    rep.add("recovery", worst <= 1e-9, None if worst <= 1e-9 else (worst,),
            f"max trace distance {worst:.3e}")
    rep.add("corrupted rejected", rejected, None if rejected else ("accepted",))
    return {"verdicts": [rep], "findings": {"effects": len(E), "trials": args.trials}}


def cmd_quantum_opalg(args) -> dict:
    from .quantum import operation_algebra_instance, operation_identities
    from .structure import check_axioms

    _need_seed(args)
    inst = operation_algebra_instance(args.dim)
    oa = check_axioms(inst.structure, "OA")
    ids = operation_identities(args.dim, args.samples, args.seed)
    rep = AxiomReport("linear-identities")
    for k in sorted(ids):
        ok = ids[k] <= (1e-12 if k != "top-set-mismatch" else 0)
        rep.add(k, ok, None if ok else (ids[k],), f"max deviation {ids[k]:.3e}")
    return {"verdicts": [oa, inst.top_set_report(), rep],
            "findings": {"carrier": inst.structure.size, "OA": oa.summary()}}


def cmd_quantum_reciprocity(args) -> dict:
    from .quantum import reciprocity_check

    _need_seed(args)
    dev, rep = reciprocity_check(args.dim, args.trials, args.seed)
    return {"verdicts": [rep], "findings": {"max deviation": dev}}


def cmd_quantum_instrument(args) -> dict:
    from .phenomenology import check_noncontextuality, max_tree_deviation
    from .quantum import projective, quantum_sequential_theory, qubit_bases

    b = qubit_bases()
    meas = {"Z": projective(b["Z"], ["z0", "z1"]), "X": projective(b["X"], ["x+", "x-"])}
    states = {"zero": np.outer(b["Z"][0], b["Z"][0].conj()),
              "plus": np.outer(b["X"][0], b["X"][0].conj())}
    seq = quantum_sequential_theory(2, meas, states, args.depth)
    rep = check_noncontextuality(seq, 1e-12)
    probs = {sid: {".".join(k): v for k, v in sorted(t.items())}
             for sid, t in sorted(seq.string_probs.items())}
    return {"verdicts": [rep],
            "findings": {"trees": len(seq.trees), "max tree deviation": max_tree_deviation(seq)},
            "artifacts": {"string probabilities": probs}}


def cmd_composite_influence(args) -> dict:
    from .composite import influence_check

    _need_seed(args)
    res = influence_check(args.dims[0], args.dims[1], args.trials, args.seed)
    return {"verdicts": [res.report], "findings": {"max deviation": res.max_deviation}}


def cmd_composite_testability(args) -> dict:
    from .composite import product_state_grid, testability_scan
    from .quantum import bell_state

    _need_seed(args)
    states = product_state_grid(args.dim)
    if args.entangled:
        phi = bell_state(args.dim)
        states.append(np.outer(phi, phi.conj()))
    res = testability_scan(args.dim, states, restarts=args.restarts, seed=args.seed)
    return {"verdicts": [res.report],
            "findings": {"states": len(states),
                         "untestable": [e.index for e in res.entries if not e.testable],
                         "overlaps": [round(e.overlap, 9) for e in res.entries]}}


def cmd_composite_overlap(args) -> dict:
    from .composite import max_separable_overlap, schmidt_bound
    from .quantum import bell_state, random_pure

    _need_seed(args)
    d = args.dim
    dims = (d, d)
    if args.state == "bell":
        psi = bell_state(d)
    elif args.state == "product":
        e = np.zeros(d, complex)
        e[0] = 1
        psi = np.kron(e, e)
    elif args.state == "mixed":
        psi = None
    else:
        psi = random_pure(d * d, np.random.default_rng(args.seed))
    X = np.eye(d * d) / (d * d) if psi is None else np.outer(psi, psi.conj())
    res = max_separable_overlap(X, dims, restarts=args.restarts, seed=args.seed)
    rep = AxiomReport("overlap")
    rep.add("converged", res.converged, None if res.converged else ("best bound reported",))
    findings = {"projector bound": res.projector_bound, "interval bound": res.interval_bound}
    if psi is not None:
        oracle = schmidt_bound(psi, dims)
        ok = abs(oracle - res.projector_bound) <= 1e-6
        rep.add("schmidt oracle", ok, None if ok else (oracle, res.projector_bound))
        findings["schmidt"] = oracle
    return {"verdicts": [rep], "findings": findings}


def _load_cone(name):
    text, shown = _read_input(name)
    return parse_cone(text), {"file": shown, "sha256": _digest(text)}


def cmd_cone_dual(args) -> dict:
    from .convex import double_dual_report, dual_cone

    c, inp = _load_cone(args.file)
    d = dual_cone(c)
    return {"inputs": inp, "verdicts": [double_dual_report(c)],
            "artifacts": {"dual": format_cone(d)}}


def cmd_cone_regular(args) -> dict:
    from .convex import is_regular

    c, inp = _load_cone(args.file)
    return {"inputs": inp, "verdicts": [is_regular(c)]}


def cmd_cone_selfdual(args) -> dict:
    from .convex import MatrixCone, is_self_dual

    if args.file:
        c, inp = _load_cone(args.file)
        return {"inputs": inp, "verdicts": [is_self_dual(c)]}
    _need_seed(args)
    if args.psd:
        cone = MatrixCone("psd", (args.psd,))
    elif args.separable:
        cone = MatrixCone("separable", (args.separable, args.separable))
    else:
        raise UsageError("give a cone file, --psd D or --separable D")
    res = is_self_dual(cone, "trace", pairs=args.pairs, nonmembers=args.nonmembers, seed=args.seed)
    out = {"verdicts": [res.report],
           "findings": {"self dual": res.self_dual, "min pair inner": res.min_pair_inner,
                        "witness eigenvalue": res.witness_eigenvalue}}
    if args.separable:
        # The expected answer is "not self-dual"; the check passes when witnessed.
        out["passed"] = (not res.self_dual) and res.report["K ⊆ K*"].passed
    return out


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="opalg", description="Effect and operation algebra workbench")
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--output", "-o", help="write the report here instead of stdout")
    p.add_argument("--timing", action="store_true", help="record wall time (breaks byte-identity)")
    groups = p.add_subparsers(dest="group", required=True)

    def common(sp, seed=False):
        sp.add_argument("--format", choices=("json", "text"), default=argparse.SUPPRESS)
        sp.add_argument("--output", "-o", default=argparse.SUPPRESS)
        sp.add_argument("--timing", action="store_true", default=argparse.SUPPRESS)
        if seed:
            sp.add_argument("--seed", type=int)

    th = groups.add_parser("theory").add_subparsers(dest="cmd", required=True)
    for name, fn in (("validate", cmd_theory_validate), ("wea", cmd_theory_wea),
                     ("complete", cmd_theory_complete), ("states", cmd_theory_states)):
        sp = th.add_parser(name)
        sp.add_argument("file")
        common(sp)
        sp.set_defaults(fn=fn)
        if name == "wea":
            sp.add_argument("--check", action="store_true", help="also run EA checks and weakness detection")
        if name == "complete":
            sp.add_argument("--max-rounds", type=int, default=10)

    q = groups.add_parser("quantum").add_subparsers(dest="cmd", required=True)
    sp = q.add_parser("gleason")
    sp.add_argument("--dim", type=int, choices=(2, 3), default=2)
    sp.add_argument("--trials", type=int, default=100)
    common(sp, True)
    sp.set_defaults(fn=cmd_quantum_gleason)
    sp = q.add_parser("opalg")
    sp.add_argument("--dim", type=int, choices=(2, 3), default=2)
    sp.add_argument("--samples", type=int, default=200)
    common(sp, True)
    sp.set_defaults(fn=cmd_quantum_opalg)
    sp = q.add_parser("reciprocity")
    sp.add_argument("--dim", type=int, default=2)
    sp.add_argument("--trials", type=int, default=1000)
    common(sp, True)
    sp.set_defaults(fn=cmd_quantum_reciprocity)
    sp = q.add_parser("instrument")
    sp.add_argument("--depth", type=int, default=2)
    common(sp)
    sp.set_defaults(fn=cmd_quantum_instrument)

    c = groups.add_parser("composite").add_subparsers(dest="cmd", required=True)
    sp = c.add_parser("influence")
    sp.add_argument("--dims", type=int, nargs=2, default=(2, 2))
    sp.add_argument("--trials", type=int, default=1000)
    common(sp, True)
    sp.set_defaults(fn=cmd_composite_influence)
    sp = c.add_parser("testability")
    sp.add_argument("--dim", type=int, choices=(2, 3), default=2)
    sp.add_argument("--entangled", action="store_true", help="append the maximally entangled state")
    sp.add_argument("--restarts", type=int, default=32)
    common(sp, True)
    sp.set_defaults(fn=cmd_composite_testability)
    sp = c.add_parser("overlap")
    sp.add_argument("--dim", type=int, default=2)
    sp.add_argument("--state", choices=("bell", "product", "mixed", "random"), default="bell")
    sp.add_argument("--restarts", type=int, default=32)
    common(sp, True)
    sp.set_defaults(fn=cmd_composite_overlap)

    k = groups.add_parser("cone").add_subparsers(dest="cmd", required=True)
    for name, fn in (("dual", cmd_cone_dual), ("regular", cmd_cone_regular)):
        sp = k.add_parser(name)
        sp.add_argument("file")
        common(sp)
        sp.set_defaults(fn=fn)
    sp = k.add_parser("selfdual")
    sp.add_argument("file", nargs="?")
    sp.add_argument("--psd", type=int, metavar="D")
    sp.add_argument("--separable", type=int, metavar="D")
    sp.add_argument("--pairs", type=int, default=500)
    sp.add_argument("--nonmembers", type=int, default=100)
    common(sp, True)
    sp.set_defaults(fn=cmd_cone_selfdual)
    return p


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    start = time.perf_counter()
    try:
        body = args.fn(args)
    except UsageError as exc:
        print(f"opalg: {exc}", file=sys.stderr)
        return 2
    except (OpalgError, OSError) as exc:
        print(f"opalg: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    verdicts = body.get("verdicts", [])
    passed = body.pop("passed", all(v.passed for v in verdicts))
    report = {"schema": SCHEMA, "command": f"{args.group} {args.cmd}", "passed": passed,
              "seed": getattr(args, "seed", None), **body}
    if args.timing:
        report["wall_time"] = round(time.perf_counter() - start, 6)
    data = emit_report(report, args.format)
    if args.output:
        try:
            Path(args.output).write_bytes(data)
        except OSError as exc:
            print(f"opalg: {exc}", file=sys.stderr)
            return 2
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    return 0 if passed else 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
