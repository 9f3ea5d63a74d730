"""Random and exhaustive circuit generation, plus small constructors."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping

from .circuit import BasisId, Circuit, Gate, OpCode, concat, height
from .errors import GenerationError

_OP_ORDER = (OpCode.ADD, OpCode.SUB, OpCode.MUL, OpCode.DIV, OpCode.HSQ)


def _ops(basis: BasisId) -> list[OpCode]:
    return [op for op in _OP_ORDER if basis.admits(op)]


@dataclass(frozen=True)
class GenSpec:
    basis: BasisId
    size: int
    seed: int = 0
    weights: Mapping[OpCode, float] | None = None
    max_bits: int | None = None  # reject gates whose value height exceeds 2**max_bits
    retries: int = 200


def generate(spec: GenSpec) -> Circuit:
    """Random topologically valid circuit with every prefix defined.

    A gate that would divide by zero (or break the ``max_bits`` budget) is
    redrawn, at most ``spec.retries`` times per gate.
    """
    if spec.size < 0:
        raise ValueError("size must be non-negative")
    rng = random.Random(spec.seed)
    ops = _ops(spec.basis)
    weights = [float((spec.weights or {}).get(op, 1.0)) for op in ops]
    vals = [Fraction(1)]
    gates: list[Gate] = []
    for i in range(1, spec.size + 1):
        for _ in range(spec.retries):
            op = rng.choices(ops, weights)[0]
            j = rng.randrange(i)
            k = None if op.unary else rng.randrange(i)
            v = _apply(op, vals[j], None if k is None else vals[k])
            if v is None:
                continue
            if spec.max_bits is not None and height(v).bit_length() > spec.max_bits:
                continue
            break
        else:
            raise GenerationError(f"gave up on gate v{i} after {spec.retries} draws")
        gates.append(Gate(op, j, k))
        vals.append(v)
    return Circuit(spec.basis, gates)


def _apply(op: OpCode, a: Fraction, b: Fraction | None) -> Fraction | None:
    if op is OpCode.ADD:
        return a + b
    if op is OpCode.SUB:
        return a - b
    if op is OpCode.MUL:
        return a * b
    if op is OpCode.DIV:
        return None if b == 0 else a / b
    return a * a / 2


def enumerate_circuits(basis: BasisId, size: int) -> Iterator[Circuit]:
    """Every circuit of exactly ``size`` gates over ``basis`` (defined or not)."""
    ops = _ops(basis)

    def choices(i: int):
        for op in ops:
            if op.unary:
                for j in range(i):
                    yield Gate(op, j)
            else:
                for j in range(i):
                    for k in range(i):
                        yield Gate(op, j, k)

    for gates in itertools.product(*(list(choices(i)) for i in range(1, size + 1))):
        yield Circuit(basis, gates)


def from_int(n: int) -> Circuit:
    """Small circuit with value n (double-and-add from 1)."""
    gates: list[Gate] = []
    if n == 0:
        return Circuit(BasisId.DIVISION_FREE, [Gate(OpCode.SUB, 0, 0)])
    cur = 0
    for bit in bin(abs(n))[3:]:
        gates.append(Gate(OpCode.ADD, cur, cur))
        cur = len(gates)
        if bit == "1":
            gates.append(Gate(OpCode.ADD, cur, 0))
            cur = len(gates)
    if n < 0:
        gates.append(Gate(OpCode.SUB, 0, 0))
        gates.append(Gate(OpCode.SUB, len(gates), cur))
        return Circuit(BasisId.DIVISION_FREE, gates)
    return Circuit(BasisId.MONOTONE, gates)


def from_rat(x) -> Circuit:
    """Arithmetic circuit with value x = p/q."""
    x = Fraction(x)
    if x.denominator == 1:
        return from_int(x.numerator)
    gates, (a, b) = concat([from_int(x.numerator), from_int(x.denominator)], BasisId.ARITHMETIC)
    gates.append(Gate(OpCode.DIV, a, b))
    return Circuit(BasisId.ARITHMETIC, gates)
