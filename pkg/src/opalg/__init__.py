"""Finite model checking for effect algebras, operation algebras and their
quantum-mechanical instances."""
from .errors import OpalgError
from .phenomenology import PhenomenologicalTheory, parse_theory, validate_theory
from .quotient import attempt_completion, build_wea, build_woa, detect_proper_weakness
from .report import AxiomReport, Verdict
from .structure import PartialStructure, check_axioms

__version__ = "0.1.0"

__all__ = [
    "AxiomReport", "OpalgError", "PartialStructure", "PhenomenologicalTheory", "Verdict",
    "attempt_completion", "build_wea", "build_woa", "check_axioms", "detect_proper_weakness",
    "parse_theory", "validate_theory",
]
