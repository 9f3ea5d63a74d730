import math
import random
from dataclasses import dataclass
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acnum.circuit import BasisId, parse_circuit
from acnum.errors import InternalError, PreconditionError, PromiseViolation, SieveBudgetError
from acnum.generate import GenSpec, enumerate_circuits, from_int, from_rat, generate
from acnum.signcheck import (
    Branch,
    PrimeBasis,
    PrimeMode,
    Relation,
    Sign,
    build_prime_basis,
    compare,
    crt_rank,
    k_star,
    odd_primes_upto,
    parity_of_reduced,
    residues_of,
    residues_of_int,
    sigma,
    sign_nonneg,
)

from oracles import cmp_pairs, value

B357 = PrimeBasis.from_primes([3, 5, 7])


def naive_primes(n):
    return [p for p in range(3, n + 1) if all(p % d for d in range(2, math.isqrt(p) + 1))]


# -- prime bases ------------------------------------------------------------


def test_sieve_matches_trial_division():
    for n in (0, 2, 3, 10, 97, 1000):
        assert odd_primes_upto(n) == naive_primes(n)


def test_worked_basis():
    assert B357.M == 105 and B357.h == 4 and B357.shift_cap == 7 + 2


def test_from_primes_validates():
    for bad in ([], [2, 3], [5, 3], [3, 3]):
        with pytest.raises(PreconditionError):
            PrimeBasis.from_primes(bad)


def test_inverse_cofactors():
    for basis in (B357, build_prime_basis(5), build_prime_basis(3, PrimeMode.PAPER)):
        for p, inv in zip(basis.primes, basis.inv_cofactors):
            assert (basis.M // p) * inv % p == 1


@pytest.mark.parametrize("ell", range(1, 9))
def test_tight_basis_covers_bound(ell):
    b = build_prime_basis(ell)
    assert b.M > 4 * 2 ** (2**ell)
    assert b.M // b.primes[-1] <= 4 * 2 ** (2**ell)  # minimal prefix
    assert b.primes == tuple(naive_primes(b.primes[-1]))


@pytest.mark.parametrize("ell", range(1, 7))
def test_paper_basis(ell):
    b = build_prime_basis(ell, PrimeMode.PAPER)
    assert set(naive_primes(2 ** (2 * ell))) <= set(b.primes)
    assert b.M > 4 * 2 ** (2**ell)


def test_paper_basis_small_example():
    b = build_prime_basis(2, PrimeMode.PAPER)
    assert b.primes == (3, 5, 7, 11, 13) and b.m == 5
    # l = 1 needs primes beyond 2^2 to keep |v| < M/4
    assert build_prime_basis(1, PrimeMode.PAPER).M > 16


def test_paper_basis_budget():
    with pytest.raises(SieveBudgetError):
        build_prime_basis(13, PrimeMode.PAPER)
    with pytest.raises(PreconditionError):
        build_prime_basis(0)


# -- CRT machinery ----------------------------------------------------------


def test_worked_vector_17():
    s = residues_of_int(17, B357)
    assert s.xi == (1, 2, 3)
    assert crt_rank(s, B357) == 1
    assert sigma(s, B357).value == Fraction(17, 16)
    assert k_star(s, B357) == 0


def test_worked_vector_1():
    s = residues_of_int(1, B357)
    assert s.xi == (2, 1, 1)
    assert crt_rank(s, B357) == 1
    assert k_star(s, B357) == 3
    shifted = s.doubled(B357).doubled(B357).doubled(B357)
    assert parity_of_reduced(shifted, B357) == 0


def test_worked_vector_minus_17():
    s = residues_of_int(-17, B357)
    assert sigma(s, B357).fractional == Fraction(3, 4)
    assert k_star(s, B357) == 0


def test_parity_needs_guard():
    s = residues_of_int(1, B357)
    with pytest.raises(PreconditionError):
        parity_of_reduced(s, B357)


@settings(max_examples=400)
@given(st.integers(0, 104))
def test_crt_identity(x):
    s = residues_of_int(x, B357)
    total = sum((B357.M // p) * xi for p, xi in zip(B357.primes, s.xi))
    assert total == crt_rank(s, B357) * B357.M + x
    # sigma under-approximates sum(xi/p) by less than m / 2^h < 1/4
    exact = sum(Fraction(xi, p) for xi, p in zip(s.xi, B357.primes))
    sig = sigma(s, B357)
    assert 0 <= exact - sig.value < Fraction(B357.m, 2**B357.h) < Fraction(1, 4)
    if sig.guard:
        assert sig.floor == crt_rank(s, B357)
        assert parity_of_reduced(s, B357) == x % 2


@settings(max_examples=200)
@given(st.integers(-(2**64), 2**64))
def test_k_star_under_cap_for_large_bases(x):
    b = build_prime_basis(6)
    s = residues_of_int(x, b)
    assert k_star(s, b) <= math.ceil(math.log2(b.M))


def test_iteration_cap_raises_internal_error():
    @dataclass(frozen=True)
    class Capped(PrimeBasis):
        @property
        def shift_cap(self) -> int:
            return 1

    capped = Capped(B357.primes, B357.mode, B357.h, B357.M, B357.inv_cofactors)
    with pytest.raises(InternalError):
        k_star(residues_of_int(1, capped), capped)


# -- sign decisions ---------------------------------------------------------


@pytest.mark.parametrize("x", range(-26, 27))
def test_sign_of_small_integers(x):
    v = sign_nonneg(from_int(x), basis=B357)
    assert v.nonneg == (x >= 0)


def test_sign_branches():
    assert sign_nonneg(from_int(17), basis=B357).branch is Branch.PARITY
    v1 = sign_nonneg(from_int(1), basis=B357)
    assert v1.branch is Branch.SHIFTED and v1.k_star == 3 and v1.b == 0
    assert v1.outcome is Sign.NONNEG


def test_sign_trace():
    v = sign_nonneg(from_int(-5), trace=True)
    assert v.trace["xi"] and v.trace["frac_history"]
    assert "trace" in v.to_dict()
    assert "trace" not in sign_nonneg(from_int(-5)).to_dict()


def test_exhaustive_single_circuits_both_modes():
    count = 0
    for size in range(0, 4):
        for c in enumerate_circuits(BasisId.DIVISION_FREE, size):
            want = value(c)[0] >= 0
            for mode in PrimeMode:
                assert sign_nonneg(c, mode).nonneg == want
            count += 1
    assert count == 1 + 3 + 3 * 12 + 3 * 12 * 27


def test_compare_examples():
    assert compare(from_int(3), from_int(5)).relation is Relation.LT
    assert compare(from_int(5), from_int(3)).relation is Relation.GEQ
    assert compare(from_int(4), from_int(4)).relation is Relation.GEQ
    a = from_rat(Fraction(1, 3))
    b = from_rat(Fraction(1, 4))
    assert compare(a, b).relation is Relation.GEQ
    assert compare(b, a).relation is Relation.LT


def test_compare_hsq_and_monotone_inputs():
    h = parse_circuit("v1 = add v0 v0\nv2 = add v1 v0\nv3 = hsq v2")  # 9/2
    assert compare(h, from_int(4)).relation is Relation.GEQ
    assert compare(h, from_int(5)).relation is Relation.LT


def test_compare_promise():
    bad = parse_circuit("v1 = sub v0 v0\nv2 = div v0 v1")
    with pytest.raises(PromiseViolation):
        compare(bad, from_int(1))


def test_compare_random_mixed_bases_and_modes():
    rng = random.Random(8)
    for n in range(150):
        s1 = generate(GenSpec(rng.choice(list(BasisId)), rng.randint(0, 5), seed=n))
        s2 = generate(GenSpec(rng.choice(list(BasisId)), rng.randint(0, 5), seed=n + 5000))
        want = Relation.GEQ if cmp_pairs(value(s1), value(s2)) >= 0 else Relation.LT
        tight = compare(s1, s2)
        assert tight.relation is want
        # paper mode sieves up to 2^(2l), so only small lowered circuits qualify
        if tight.lowered_size <= 7:
            assert compare(s1, s2, PrimeMode.PAPER).relation is want


def test_compare_report_shape():
    d = compare(from_int(2), from_int(7)).to_dict()
    assert d["relation"] == "LT" and d["sign"]["outcome"] == "NEG"
    assert d["lowered_size"] > 0


@settings(max_examples=100, deadline=None)
@given(st.integers(-(2**80), 2**80), st.integers(1, 12))
def test_vectorised_search_matches_scalar(x, ell):
    from acnum.signcheck import _shift_to_guard_scalar, _shift_to_guard_vector

    b = build_prime_basis(ell)
    s = residues_of_int(x, b)
    assert _shift_to_guard_vector(s, b, history=True) == _shift_to_guard_scalar(s, b, history=True)
