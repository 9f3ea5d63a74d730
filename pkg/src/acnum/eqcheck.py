"""Randomized equality test for circuit values by residues modulo random integers.

Both circuits are lowered to a monotone comparison pair (S', S'') of maximal
size l.  Each round draws m uniformly from [1, 2^(2l)] and compares
v(S') mod m with v(S'') mod m.  A mismatch proves the values differ; equal
residues in every round leave a one-sided error of at most (1 - 1/(2l))^t.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass
from fractions import Fraction

from .circuit import BasisId, Circuit, eval_mod, eval_nodes
from .errors import PreconditionError
from .lowering import comparison_instance

CENSUS_LIMIT = 1 << 24


class EqOutcome(enum.Enum):
    EQUAL = "EQUAL"
    NOT_EQUAL = "NOT_EQUAL"


@dataclass(frozen=True)
class EqParams:
    """``rounds`` of None means: enough rounds to push the error below ``error``."""

    seed: int = 0
    rounds: int | None = None
    error: float = 1e-9

    def __post_init__(self):
        if self.rounds is not None and self.rounds < 1:
            raise PreconditionError("rounds must be positive")


@dataclass(frozen=True)
class EqVerdict:
    outcome: EqOutcome
    rounds_run: int
    witness: int | None
    error_bound: float
    ell: int
    bound: int
    seed: int

    @property
    def equal(self) -> bool:
        return self.outcome is EqOutcome.EQUAL

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome.value,
            "rounds_run": self.rounds_run,
            "witness": self.witness,
            "error_bound": self.error_bound,
            "ell": self.ell,
            "bound": str(self.bound),
            "seed": self.seed,
        }


def single_round_miss(ell: int) -> float:
    return 1.0 - 1.0 / (2 * ell)


def rounds_for_error(ell: int, target_error: float) -> int:
    """Smallest t with (1 - 1/(2 ell))^t <= target_error."""
    if ell < 1:
        raise PreconditionError("ell must be positive")
    if target_error >= 1:
        return 1
    if target_error <= 0:
        raise PreconditionError("target error must be in (0, 1)")
    q = single_round_miss(ell)
    t = max(1, math.ceil(math.log(target_error) / math.log(q)))
    # settle float rounding at the boundary by direct powering
    while q**t > target_error:
        t += 1
    while t > 1 and q ** (t - 1) <= target_error:
        t -= 1
    return t


def monotone_pair(s1: Circuit, s2: Circuit) -> tuple[Circuit, Circuit]:
    return comparison_instance(s1, s2, BasisId.MONOTONE)


def _round_rng(seed: int, index: int) -> random.Random:
    return random.Random(f"acnum-eq:{seed}:{index}")


def eq_test(s1: Circuit, s2: Circuit, params: EqParams = EqParams()) -> EqVerdict:
    a, b = monotone_pair(s1, s2)
    ell = max(a.size, b.size)
    if ell == 0:
        # both sides are the bare constant 1
        return EqVerdict(EqOutcome.EQUAL, 0, None, 0.0, 0, 1, params.seed)
    bits = 2 * ell
    bound = 1 << bits
    rounds = params.rounds or rounds_for_error(ell, params.error)
    for r in range(rounds):
        m = _round_rng(params.seed, r).getrandbits(bits) + 1  # uniform on [1, B]
        if eval_mod(a, m) != eval_mod(b, m):
            return EqVerdict(EqOutcome.NOT_EQUAL, r + 1, m, 0.0, ell, bound, params.seed)
    err = single_round_miss(ell) ** rounds
    return EqVerdict(EqOutcome.EQUAL, rounds, None, err, ell, bound, params.seed)


def detection_census(s1: Circuit, s2: Circuit) -> Fraction:
    """Exact fraction of m in [1, 2^(2l)] whose residues tell v(s1) and v(s2) apart."""
    a, b = monotone_pair(s1, s2)
    if eval_nodes(a)[-1] == eval_nodes(b)[-1]:
        raise PreconditionError("census needs circuits with different values")
    ell = max(a.size, b.size)
    bound = 1 << (2 * ell)
    if bound > CENSUS_LIMIT:
        raise PreconditionError(f"B = 2^{2 * ell} is too large for exhaustive enumeration")
    hits = sum(1 for m in range(1, bound + 1) if eval_mod(a, m) != eval_mod(b, m))
    return Fraction(hits, bound)
