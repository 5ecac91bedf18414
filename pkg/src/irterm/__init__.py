"""Termination and memory-safety analysis for a small LLVM-like IR.

The public surface mirrors the pipeline: parse IR (`ir`), build a symbolic
execution graph (`seg`), check completeness, extract integer transition
systems and search for ranking functions (`termination`), and cross-check
everything against a concrete interpreter (`oracle`).  `cli.analyze` ties
the stages together.
"""

__version__ = "0.1.0"

from .cli import AnalysisConfig, Verdict, analyze
from .ir import ParseError, parse
from .seg import HeuristicsConfig, Seg, SegBuilder, is_complete, to_dot
from .termination import (
    check_certificate,
    extract_its,
    its_text,
    prove_termination,
    sccs,
)

__all__ = [
    "AnalysisConfig",
    "HeuristicsConfig",
    "ParseError",
    "Seg",
    "SegBuilder",
    "Verdict",
    "analyze",
    "check_certificate",
    "extract_its",
    "is_complete",
    "its_text",
    "parse",
    "prove_termination",
    "sccs",
    "to_dot",
    "__version__",
]
