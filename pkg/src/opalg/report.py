"""Structured axiom verdicts."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator


@dataclass(frozen=True)
class Verdict:
    axiom: str
    passed: bool
    witness: tuple | None = None
    note: str = ""

    def __post_init__(self):
        if not self.passed and self.witness is None:
            raise ValueError(f"failed verdict {self.axiom!r} needs a witness")


@dataclass
class AxiomReport:
    profile: str
    verdicts: list[Verdict] = field(default_factory=list)

    def add(self, axiom: str, passed: bool, witness=None, note: str = "") -> Verdict:
        v = Verdict(axiom, bool(passed), None if witness is None else tuple(witness), note)
        self.verdicts.append(v)
        return v

    def extend(self, other: "AxiomReport") -> None:
        self.verdicts.extend(other.verdicts)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def failures(self) -> list[Verdict]:
        return [v for v in self.verdicts if not v.passed]

    def __getitem__(self, axiom: str) -> Verdict:
        for v in self.verdicts:
            if v.axiom == axiom:
                return v
        raise KeyError(axiom)

    def __contains__(self, axiom: str) -> bool:
        return any(v.axiom == axiom for v in self.verdicts)

    def __iter__(self) -> Iterator[Verdict]:
        return iter(self.verdicts)

    def summary(self) -> dict[str, str]:
        return {v.axiom: "pass" if v.passed else "fail" for v in self.verdicts}

    def to_dict(self) -> dict[str, Any]:
        out = []
        for v in self.verdicts:
            d: dict[str, Any] = {"axiom": v.axiom, "result": "pass" if v.passed else "fail"}
            if v.witness is not None:
                d["witness"] = list(v.witness)
            if v.note:
                d["note"] = v.note
            out.append(d)
        return {"profile": self.profile, "passed": self.passed, "verdicts": out}

    def __str__(self) -> str:
        lines = [f"[{self.profile}] {'PASS' if self.passed else 'FAIL'}"]
        for v in self.verdicts:
            tag = "pass" if v.passed else "FAIL"
            extra = f" witness={v.witness}" if v.witness is not None else ""
            note = f" ({v.note})" if v.note else ""
            lines.append(f"  {v.axiom:<10} {tag}{extra}{note}")
        return "\n".join(lines)
