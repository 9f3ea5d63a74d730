from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from acnum.circuit import BasisId, OpCode, eval_exact
from acnum.errors import GenerationError
from acnum.generate import GenSpec, enumerate_circuits, from_int, from_rat, generate

from oracles import value


@pytest.mark.parametrize("basis", list(BasisId))
def test_generate_respects_basis_and_size(basis):
    for seed in range(50):
        c = generate(GenSpec(basis, 7, seed=seed))
        assert c.basis is basis and c.size == 7
        assert c.opcodes <= basis.opcodes
        assert eval_exact(c).defined


def test_generate_is_deterministic():
    spec = GenSpec(BasisId.ARITHMETIC, 12, seed=42)
    assert generate(spec) == generate(spec)
    assert generate(spec) != generate(GenSpec(BasisId.ARITHMETIC, 12, seed=43))


def test_weights_and_max_bits():
    c = generate(GenSpec(BasisId.DIVISION_FREE, 30, seed=1, weights={OpCode.SUB: 0, OpCode.MUL: 0}))
    assert c.opcodes == {OpCode.ADD}
    capped = generate(GenSpec(BasisId.MONOTONE, 40, seed=2, max_bits=20))
    num, den = value(capped)
    assert num.bit_length() <= 20


def test_generate_gives_up():
    with pytest.raises(GenerationError):
        generate(GenSpec(BasisId.MONOTONE, 3, seed=0, max_bits=0, retries=5))
    with pytest.raises(ValueError):
        generate(GenSpec(BasisId.MONOTONE, -1))


def test_enumeration_counts():
    # gate i has (3 ops) * i^2 choices over the division-free basis
    assert sum(1 for _ in enumerate_circuits(BasisId.DIVISION_FREE, 2)) == 3 * 12
    assert sum(1 for _ in enumerate_circuits(BasisId.PLUS_HSQ, 2)) == (1 + 1) * (4 + 2)
    assert list(enumerate_circuits(BasisId.MONOTONE, 0))[0].size == 0


@given(st.integers(-(10**30), 10**30))
def test_from_int(n):
    c = from_int(n)
    assert value(c) == (n, 1)
    assert c.size <= 2 * max(n.bit_length(), 1) + 2


@given(st.fractions(max_denominator=10**6))
def test_from_rat(x):
    assert Fraction(*value(from_rat(x))) == x
