"""Rational numbers given as straight-line arithmetic circuits.

Exact and modular evaluation, basis-lowering passes, a randomized equality
test, a residue-number-system sign procedure and SDP emission.
"""

__version__ = "0.1.0"

from .circuit import (
    BasisId,
    Circuit,
    EvalOutcome,
    Gate,
    OpCode,
    eval_exact,
    eval_mod,
    parse_circuit,
    serialize_circuit,
    value_bound_check,
)
from .eqcheck import EqParams, detection_census, eq_test, rounds_for_error
from .lowering import comparison_instance, drop_division, drop_subtraction, merge_to_sign, to_plus_hsq
from .signcheck import PrimeMode, compare, sign_nonneg
