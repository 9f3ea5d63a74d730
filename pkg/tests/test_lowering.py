import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acnum.circuit import BasisId, Circuit, Gate, OpCode, eval_exact, parse_circuit
from acnum.errors import BasisError, PromiseViolation
from acnum.generate import GenSpec, from_int, from_rat, generate
from acnum.lowering import (
    PASS_CONSTANTS,
    LoweringReport,
    comparison_instance,
    drop_division,
    drop_subtraction,
    eliminate_dead,
    embed_arithmetic,
    lower,
    merge_to_sign,
    sign_circuit,
    to_plus_hsq,
)

from oracles import cmp_pairs, interpret, value

ADD, SUB, MUL, DIV, HSQ = OpCode.ADD, OpCode.SUB, OpCode.MUL, OpCode.DIV, OpCode.HSQ


def sgn(x):
    return (x > 0) - (x < 0)


def frac(pair):
    return Fraction(*pair)


def node_value(c, node):
    return frac(interpret(c)[node])


def within(name, n_in, n_out):
    k = PASS_CONSTANTS[name]
    return n_out <= k * n_in + k


# -- worked examples --------------------------------------------------------


def test_merge_example():
    s1, s2 = from_int(5), from_int(3)
    m = merge_to_sign(s1.with_basis(BasisId.DIVISION_FREE), s2.with_basis(BasisId.DIVISION_FREE))
    assert value(m) == (2, 1)
    assert m.size == s1.size + s2.size + 1


def test_merge_requires_subtraction():
    with pytest.raises(BasisError):
        merge_to_sign(from_int(2), from_int(3))


def test_drop_division_three_halves():
    c = from_rat(Fraction(3, 2))
    d = drop_division(c)
    assert d.basis is BasisId.DIVISION_FREE and DIV not in d.opcodes
    num, den = value(d)
    assert den == 1 and num > 0


def test_drop_division_negative_and_zero():
    assert sgn(value(drop_division(from_rat(Fraction(-7, 3))))[0]) == -1
    zero = parse_circuit("v1 = add v0 v0\nv2 = sub v1 v1\nv3 = div v2 v1")
    assert value(drop_division(zero))[0] == 0


def test_drop_division_passes_through_division_free():
    c = from_int(-9)
    assert drop_division(c).gates == c.gates


def test_drop_division_promise():
    with pytest.raises(PromiseViolation) as info:
        drop_division(parse_circuit("v1 = sub v0 v0\nv2 = div v0 v1"))
    assert info.value.gate == 2


def test_drop_subtraction_minus_one():
    pair = drop_subtraction(from_int(-1))
    assert pair.program.basis is BasisId.MONOTONE
    p, n = pair.values()
    assert p > 0 and n > 0 and p - n == -1


def test_drop_subtraction_rejects_division():
    with pytest.raises(BasisError):
        drop_subtraction(from_rat(Fraction(1, 2)))


def test_to_plus_hsq_product():
    c = parse_circuit("v1 = add v0 v0\nv2 = add v1 v0\nv3 = mul v1 v2")  # 6
    pair = to_plus_hsq(c)
    assert pair.program.basis is BasisId.PLUS_HSQ
    assert pair.difference() == 6
    assert pair.program.size == 1 + 2 + 2 + 10


def test_to_plus_hsq_rejects_subtraction():
    with pytest.raises(BasisError):
        to_plus_hsq(from_int(-3))


def test_embed_arithmetic_hsq():
    c = parse_circuit("v1 = add v0 v0\nv2 = hsq v1\nv3 = hsq v2")
    e = embed_arithmetic(c)
    assert e.basis is BasisId.ARITHMETIC and HSQ not in e.opcodes
    assert value(e) == value(c) == (2, 1)


# -- comparison instances ---------------------------------------------------


@pytest.mark.parametrize("target", list(BasisId))
@pytest.mark.parametrize("x, y", [(3, 5), (5, 3), (4, 4), (Fraction(-1, 3), Fraction(1, 7)), (0, 0)])
def test_comparison_instance_examples(target, x, y):
    a, b = comparison_instance(from_rat(x), from_rat(y), target)
    assert a.opcodes <= target.opcodes and b.opcodes <= target.opcodes
    assert cmp_pairs(value(a), value(b)) == sgn(Fraction(x) - Fraction(y))


def test_comparison_instance_monotone_concat():
    s1, s2 = from_int(6), from_int(9)
    a, b = comparison_instance(s1, s2, BasisId.MONOTONE)
    assert (a, b) == (s1, s2)


def test_comparison_instance_plus_hsq_from_hsq():
    s1 = parse_circuit("v1 = add v0 v0\nv2 = hsq v1")  # 2
    s2 = parse_circuit("v1 = hsq v0\nv2 = add v1 v0\nv3 = add v2 v2")  # 3
    for target in BasisId:
        a, b = comparison_instance(s1, s2, target)
        assert cmp_pairs(value(a), value(b)) == -1


def test_comparison_instance_promise():
    bad = parse_circuit("v1 = sub v0 v0\nv2 = div v0 v1")
    with pytest.raises(PromiseViolation):
        comparison_instance(bad, from_int(1), BasisId.MONOTONE)


def test_random_comparison_instances():
    rng = random.Random(5)
    for n in range(300):
        s1 = generate(GenSpec(rng.choice(list(BasisId)), rng.randint(0, 6), seed=2 * n))
        s2 = generate(GenSpec(rng.choice(list(BasisId)), rng.randint(0, 6), seed=2 * n + 1))
        want = cmp_pairs(value(s1), value(s2))
        target = list(BasisId)[n % 4]
        a, b = comparison_instance(s1, s2, target)
        assert a.basis is target and b.basis is target
        assert cmp_pairs(value(a), value(b)) == want


def test_equal_values_map_to_equal_values():
    s1 = parse_circuit("v1 = add v0 v0\nv2 = mul v1 v1")
    s2 = parse_circuit("v1 = add v0 v0\nv2 = add v1 v1")
    for target in BasisId:
        a, b = comparison_instance(s1, s2, target)
        assert value(a) == value(b)


# -- per-pass contracts on random arithmetic circuits -----------------------


def test_passes_on_1000_random_arithmetic():
    rng = random.Random(99)
    for n in range(1000):
        c = generate(GenSpec(BasisId.ARITHMETIC, rng.randint(0, 10), seed=n))
        v = frac(interpret(c)[-1])

        d = drop_division(c)
        assert DIV not in d.opcodes
        assert sgn(node_value(d, d.size)) == sgn(v)
        assert within("drop_division", c.size, d.size)

        pair = drop_subtraction(d)
        assert pair.program.opcodes <= BasisId.MONOTONE.opcodes
        diff = node_value(pair.program, pair.pos_out) - node_value(pair.program, pair.neg_out)
        assert diff == node_value(d, d.size)
        assert within("drop_subtraction", d.size, pair.program.size)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 8))
def test_to_plus_hsq_preserves_difference(seed, size):
    c = generate(GenSpec(BasisId.MONOTONE, size, seed=seed, max_bits=200))
    pair = to_plus_hsq(c)
    diff = node_value(pair.program, pair.pos_out) - node_value(pair.program, pair.neg_out)
    assert diff == frac(interpret(c)[-1])
    assert pair.program.size == 1 + sum(2 if g.op is ADD else 10 for g in c.gates)
    assert within("to_plus_hsq", c.size, pair.program.size)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 8))
def test_embed_arithmetic_preserves_value(seed, size):
    c = generate(GenSpec(BasisId.PLUS_HSQ, size, seed=seed))
    e = embed_arithmetic(c)
    assert value(e) == value(c)
    assert within("embed_arithmetic", c.size, e.size)


def test_sign_circuit_size_is_linear():
    rng = random.Random(3)
    for n in range(200):
        s1 = generate(GenSpec(BasisId.ARITHMETIC, rng.randint(1, 8), seed=n))
        s2 = generate(GenSpec(BasisId.ARITHMETIC, rng.randint(1, 8), seed=n + 10**6))
        d = sign_circuit(s1, s2)
        merged = s1.size + s2.size + 1
        assert d.size <= 5 * merged + 5
        assert sgn(value(d)[0]) == cmp_pairs(value(s1), value(s2))


# -- lower / cleanup --------------------------------------------------------


@pytest.mark.parametrize("target", list(BasisId))
@pytest.mark.parametrize("cleanup", [False, True])
def test_lower_preserves_sign(target, cleanup):
    rng = random.Random(17)
    for n in range(60):
        c = generate(GenSpec(rng.choice(list(BasisId)), rng.randint(0, 6), seed=n))
        out = lower(c, target, cleanup=cleanup)
        assert out.circuit.basis is target
        assert out.circuit.opcodes <= target.opcodes
        assert sgn(out.represented()) == sgn(frac(interpret(c)[-1]))
        assert all(r.within_bound for r in out.reports)


def test_lower_value_targets_are_exact():
    c = from_rat(Fraction(-5, 4))
    assert lower(c, BasisId.ARITHMETIC).represented() == Fraction(-5, 4)
    h = parse_circuit("v1 = add v0 v0\nv2 = hsq v1\nv3 = add v2 v1")
    assert lower(h, BasisId.ARITHMETIC).represented() == 4
    m = from_int(11)
    assert lower(m, BasisId.PLUS_HSQ).represented() == 11
    assert lower(from_int(-11), BasisId.MONOTONE).represented() == -11


def test_lower_reports():
    out = lower(from_rat(Fraction(2, 3)), BasisId.PLUS_HSQ)
    names = [r.pass_name for r in out.reports]
    assert names == ["drop_division", "drop_subtraction", "to_plus_hsq"]
    for a, b in zip(out.reports, out.reports[1:]):
        assert a.output_size == b.input_size
    d = out.reports[0].to_dict()
    assert d["within_bound"] is True and d["constant"] == 5


def test_report_bound_arithmetic():
    r = LoweringReport("drop_division", 4, 25)
    assert r.within_bound and r.expansion_factor == Fraction(25, 4)
    assert not LoweringReport("drop_division", 4, 26).within_bound


def test_cleanup_shrinks():
    out = lower(from_rat(Fraction(7, 3)), BasisId.MONOTONE)
    clean = lower(from_rat(Fraction(7, 3)), BasisId.MONOTONE, cleanup=True)
    assert clean.circuit.size <= out.circuit.size
    assert clean.represented() == out.represented()


def test_eliminate_dead():
    c = parse_circuit("v1 = add v0 v0\nv2 = mul v0 v0\nv3 = add v1 v1")
    pruned, remap = eliminate_dead(c, [3])
    assert pruned.size == 2 and remap[3] == 2
    assert value(pruned) == (4, 1)


def test_eliminate_dead_keeps_undefinedness_out_of_scope():
    c = Circuit(BasisId.ARITHMETIC, [Gate(SUB, 0, 0), Gate(DIV, 0, 1), Gate(ADD, 0, 0)])
    assert not eval_exact(c).defined
    pruned, _ = eliminate_dead(c, [3])
    assert eval_exact(pruned).value == 2
