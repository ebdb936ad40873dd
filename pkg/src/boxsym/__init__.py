"""S4 countermodels compiled into symmetric-iteration templates and checked at finite truncation."""

from .kripke import Countermodel, Frame, KripkeModel, Theorem, decide_s4, evaluate, unravel
from .modal import parse_formula, to_box_form, to_text
from .perms import Permutation, Truncation

__all__ = [
    "Countermodel", "Frame", "KripkeModel", "Permutation", "Theorem", "Truncation",
    "decide_s4", "evaluate", "parse_formula", "to_box_form", "to_text", "unravel",
]
__version__ = "0.1.0"
