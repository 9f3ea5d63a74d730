"""Deterministic sign of a division-free circuit value from its residues.

The value x is never materialised.  We work with residues modulo odd primes
p_1..p_m (product M, |x| < M/4) and the CRT coefficients
xi_i = [x * M_i^-1]_{p_i}, which satisfy

    sum_i M_i * xi_i = rho(x) * M + [x]_M,        0 <= rho(x) < m.

The rank rho is recovered as floor(sigma) where sigma = sum_i s_i / 2^h,
s_i = floor(2^h xi_i / p_i), provided frac(sigma) <= 3/4.  Doubling x until
that guard holds (the shift k*) and reading the parity of [2^k* x]_M decides
the sign.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .circuit import Circuit, eval_mod, value_bit_bound
from .errors import InternalError, PreconditionError, SieveBudgetError
from .lowering import sign_circuit

SIEVE_BUDGET = 1 << 24


class PrimeMode(enum.Enum):
    TIGHT = "tight"
    PAPER = "paper"


class Sign(enum.Enum):
    NONNEG = "NONNEG"
    NEG = "NEG"


class Branch(enum.Enum):
    PARITY = "PARITY"  # k* = 0: compare [x]_2 with [[x]_M]_2
    SHIFTED = "SHIFTED"  # k* > 0: parity of [2^k* x]_M


class Relation(enum.Enum):
    GEQ = "GEQ"
    LT = "LT"


def odd_primes_upto(limit: int) -> list[int]:
    if limit < 3:
        return []
    sieve = bytearray([1]) * (limit + 1)
    sieve[0:2] = b"\x00\x00"
    for p in range(2, math.isqrt(limit) + 1):
        if sieve[p]:
            sieve[p * p :: p] = bytes(len(range(p * p, limit + 1, p)))
    return [p for p in range(3, limit + 1, 2) if sieve[p]]


def _odd_primes_from(start_after: int, count_hint: int = 64):
    """Yield odd primes greater than ``start_after`` forever."""
    lo = start_after
    span = max(1024, count_hint * 16)
    while True:
        hi = lo + span
        for p in odd_primes_upto(hi):
            if p > lo:
                yield p
        lo = hi
        span *= 2


@dataclass(frozen=True)
class PrimeBasis:
    primes: tuple[int, ...]
    mode: PrimeMode
    h: int
    M: int
    inv_cofactors: tuple[int, ...] = field(repr=False)

    @property
    def m(self) -> int:
        return len(self.primes)

    @property
    def shift_cap(self) -> int:
        return (self.M - 1).bit_length() + 2  # ceil(log2 M) + 2

    @classmethod
    def from_primes(cls, primes, mode: PrimeMode = PrimeMode.TIGHT) -> "PrimeBasis":
        primes = tuple(primes)
        if not primes or any(p % 2 == 0 for p in primes) or list(primes) != sorted(set(primes)):
            raise PreconditionError("primes must be distinct, odd and ascending")
        M = math.prod(primes)
        # h = bit_length(m) + 2 keeps m / 2^h < 1/4 for every m
        h = len(primes).bit_length() + 2
        inv = []
        for i, p in enumerate(primes):
            cofactor = 1
            for j, q in enumerate(primes):
                if j != i:
                    cofactor = cofactor * q % p
            inv.append(pow(cofactor, -1, p))
        return cls(primes, mode, h, M, tuple(inv))

    def describe(self) -> dict:
        return {
            "mode": self.mode.value,
            "m": self.m,
            "h": self.h,
            "largest_prime": self.primes[-1],
            "log2_M": self.M.bit_length(),
        }


@functools.lru_cache(maxsize=64)
def _tight_basis(value_bits: int) -> PrimeBasis:
    target = 1 << (value_bits + 2)
    primes, M = [], 1
    for p in _odd_primes_from(2, count_hint=value_bits):
        primes.append(p)
        M *= p
        if M > target:
            break
    return PrimeBasis.from_primes(primes, PrimeMode.TIGHT)


@functools.lru_cache(maxsize=16)
def _paper_basis(ell: int, value_bits: int) -> PrimeBasis:
    limit = 1 << (2 * ell)
    if limit > SIEVE_BUDGET:
        raise SieveBudgetError(
            f"paper-mode basis needs all primes up to 2^{2 * ell}; use tight mode"
        )
    primes = odd_primes_upto(limit)
    M = math.prod(primes)
    target = 1 << (value_bits + 2)
    if M <= target:
        # only tiny l: primes up to 2^(2l) do not cover 4 * 2^(2^l)
        more = _odd_primes_from(primes[-1] if primes else 2)
        while M <= target:
            p = next(more)
            primes.append(p)
            M *= p
    return PrimeBasis.from_primes(primes, PrimeMode.PAPER)


def build_prime_basis(
    ell: int, mode: PrimeMode = PrimeMode.TIGHT, value_bits: int | None = None
) -> PrimeBasis:
    """Prime basis with M > 4 * 2^value_bits (value_bits defaults to 2^ell).

    TIGHT takes the shortest prefix of odd primes; PAPER takes every odd
    prime up to 2^(2 ell).
    """
    if ell < 1:
        raise PreconditionError("ell must be at least 1")
    if value_bits is None:
        value_bits = 1 << ell
    if mode is PrimeMode.PAPER:
        return _paper_basis(ell, value_bits)
    return _tight_basis(value_bits)


def basis_for(c: Circuit, mode: PrimeMode = PrimeMode.TIGHT) -> PrimeBasis:
    """Prime basis guaranteeing |v(c)| < M/4, using the static bit bound of c."""
    return build_prime_basis(max(c.size, 1), mode, value_bit_bound(c))


# ---------------------------------------------------------------------------
# Residue state and sigma


@dataclass(frozen=True)
class ResidueState:
    xi: tuple[int, ...]
    shift: int = 0

    def doubled(self, basis: PrimeBasis) -> "ResidueState":
        return ResidueState(
            tuple(2 * x % p for x, p in zip(self.xi, basis.primes)), self.shift + 1
        )


@dataclass(frozen=True)
class SigmaValue:
    """sigma as the fixed-point integer ``total`` with ``h`` fractional bits."""

    total: int
    h: int

    @property
    def floor(self) -> int:
        return self.total >> self.h

    @property
    def frac_units(self) -> int:
        return self.total & ((1 << self.h) - 1)

    @property
    def value(self) -> Fraction:
        return Fraction(self.total, 1 << self.h)

    @property
    def fractional(self) -> Fraction:
        return Fraction(self.frac_units, 1 << self.h)

    @property
    def guard(self) -> bool:
        """frac(sigma) <= 3/4, the condition under which floor(sigma) = rho."""
        return 4 * self.frac_units <= 3 << self.h


def residues_from_values(values, basis: PrimeBasis) -> ResidueState:
    return ResidueState(
        tuple(x % p * inv % p for x, p, inv in zip(values, basis.primes, basis.inv_cofactors))
    )


def residues_of(c: Circuit, basis: PrimeBasis) -> ResidueState:
    return residues_from_values([eval_mod(c, p) for p in basis.primes], basis)


def residues_of_int(x: int, basis: PrimeBasis) -> ResidueState:
    return residues_from_values([x % p for p in basis.primes], basis)


def sigma(state: ResidueState, basis: PrimeBasis) -> SigmaValue:
    h = basis.h
    total = sum((x << h) // p for x, p in zip(state.xi, basis.primes))
    return SigmaValue(total, h)


def crt_rank(state: ResidueState, basis: PrimeBasis) -> int:
    """rho computed directly from the CRT identity (big-integer reference)."""
    M = basis.M
    return sum((M // p) * x for x, p in zip(state.xi, basis.primes)) // M


# keeps 2 * xi and xi << h inside int64 for the vectorised search
_VECTOR_PRIME_LIMIT = 1 << 40
_VECTOR_MIN_PRIMES = 64


def _shift_to_guard(
    state: ResidueState, basis: PrimeBasis, history: bool = False
) -> tuple[ResidueState, SigmaValue, list]:
    """Double ``state`` until the sigma guard holds (k* steps, at most the cap)."""
    if basis.m < _VECTOR_MIN_PRIMES or basis.primes[-1] >= _VECTOR_PRIME_LIMIT or basis.h > 20:
        return _shift_to_guard_scalar(state, basis, history)
    return _shift_to_guard_vector(state, basis, history)


def _shift_to_guard_vector(
    state: ResidueState, basis: PrimeBasis, history: bool = False
) -> tuple[ResidueState, SigmaValue, list]:
    # k* can run to log2 M steps over many primes, so candidate shifts are
    # scored a block at a time; blocks grow so an early hit stays cheap
    h = basis.h
    p = np.array(basis.primes, dtype=np.int64)
    cur = np.array(state.xi, dtype=np.int64)
    last = basis.shift_cap  # highest shift we may inspect
    fracs: list[Fraction] = []
    shift = state.shift
    block = 4
    while shift <= last:
        rows = np.empty((min(block, last - shift + 1), len(p)), dtype=np.int64)
        for r in range(len(rows)):
            rows[r] = cur
            cur = 2 * cur % p
        totals = ((rows << h) // p).sum(axis=1)
        ok = 4 * (totals & ((1 << h) - 1)) <= 3 << h
        hit = int(np.argmax(ok)) if ok.any() else len(rows)
        if history:
            fracs.extend(Fraction(int(t) & ((1 << h) - 1), 1 << h) for t in totals[: hit + 1])
        if hit < len(rows):
            final = ResidueState(tuple(int(x) for x in rows[hit]), shift + hit)
            return final, SigmaValue(int(totals[hit]), h), fracs
        shift += len(rows)
        block = min(2 * block, 1024)
    raise InternalError(f"k* search exceeded the cap ceil(log2 M) + 2 = {last}")


def _shift_to_guard_scalar(
    state: ResidueState, basis: PrimeBasis, history: bool = False
) -> tuple[ResidueState, SigmaValue, list]:
    fracs = []
    cap = basis.shift_cap
    while True:
        sig = sigma(state, basis)
        if history:
            fracs.append(sig.fractional)
        if sig.guard:
            return state, sig, fracs
        if state.shift >= cap:
            raise InternalError(f"k* search exceeded the cap ceil(log2 M) + 2 = {cap}")
        state = state.doubled(basis)


def k_star(state: ResidueState, basis: PrimeBasis) -> int:
    """Least k >= 0 with frac(sigma([2^k x]_M)) <= 3/4."""
    final, _, _ = _shift_to_guard(state, basis)
    return final.shift - state.shift


def parity_of_reduced(state: ResidueState, basis: PrimeBasis) -> int:
    """[[2^shift x]_M]_2 from sum(xi) = rho + [x]_M (mod 2) with rho = floor(sigma)."""
    sig = sigma(state, basis)
    if not sig.guard:
        raise PreconditionError("frac(sigma) > 3/4: floor(sigma) is not the rank here")
    return (sum(state.xi) - sig.floor) % 2


# ---------------------------------------------------------------------------
# Decision procedure


@dataclass(frozen=True)
class SignVerdict:
    outcome: Sign
    k_star: int
    branch: Branch
    a1: int | None = None
    a2: int | None = None
    b: int | None = None
    trace: dict | None = field(default=None, compare=False)
    basis: PrimeBasis | None = field(default=None, compare=False, repr=False)

    @property
    def nonneg(self) -> bool:
        return self.outcome is Sign.NONNEG

    def to_dict(self) -> dict:
        d = {
            "outcome": self.outcome.value,
            "k_star": self.k_star,
            "branch": self.branch.value,
            "a1": self.a1,
            "a2": self.a2,
            "b": self.b,
        }
        if self.trace is not None:
            d["trace"] = self.trace
        return d


def sign_nonneg(
    c: Circuit,
    mode: PrimeMode = PrimeMode.TIGHT,
    basis: PrimeBasis | None = None,
    trace: bool = False,
) -> SignVerdict:
    """Decide v(c) >= 0 for a division-free circuit (zero counts as NONNEG)."""
    if basis is None:
        basis = basis_for(c, mode)
    state = residues_of(c, basis)
    final, sig, fracs = _shift_to_guard(state, basis, history=trace)
    k = final.shift
    info = None
    if trace:
        info = {
            "basis": basis.describe(),
            "xi": list(state.xi),
            "sigma": str(sigma(state, basis).value),
            "sigma_at_k_star": str(sig.value),
            "frac_history": [str(f) for f in fracs],
        }
    parity = (sum(final.xi) - sig.floor) % 2
    if k == 0:
        a1 = eval_mod(c, 2)
        outcome = Sign.NONNEG if a1 == parity else Sign.NEG
        return SignVerdict(outcome, 0, Branch.PARITY, a1=a1, a2=parity, trace=info, basis=basis)
    outcome = Sign.NONNEG if parity == 0 else Sign.NEG
    return SignVerdict(outcome, k, Branch.SHIFTED, b=parity, trace=info, basis=basis)


@dataclass(frozen=True)
class CompareVerdict:
    relation: Relation
    sign: SignVerdict
    lowered_size: int

    def to_dict(self) -> dict:
        return {
            "relation": self.relation.value,
            "lowered_size": self.lowered_size,
            "sign": self.sign.to_dict(),
        }


def compare(
    s1: Circuit, s2: Circuit, mode: PrimeMode = PrimeMode.TIGHT, trace: bool = False
) -> CompareVerdict:
    """GEQ iff v(s1) >= v(s2), for circuits over any supported basis."""
    d = sign_circuit(s1, s2)
    verdict = sign_nonneg(d, mode, trace=trace)
    rel = Relation.GEQ if verdict.nonneg else Relation.LT
    return CompareVerdict(rel, verdict, d.size)
