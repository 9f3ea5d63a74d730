"""Straight-line arithmetic circuits: representation, text/JSON I/O, evaluation.

A circuit is a sequence of assignments ``s_1 .. s_l`` where node 0 is the
implicit constant 1 and every gate reads only earlier nodes.  The value of a
circuit is the value of its last node (1 for the empty circuit).
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import BasisError, CircuitError, ParseError, PreconditionError, PromiseViolation

Rat = Fraction


class OpCode(enum.Enum):
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    DIV = "div"
    HSQ = "hsq"  # x -> x**2 / 2

    @property
    def unary(self) -> bool:
        return self is OpCode.HSQ


class BasisId(enum.Enum):
    ARITHMETIC = "arithmetic"
    DIVISION_FREE = "division-free"
    MONOTONE = "monotone"
    PLUS_HSQ = "plus-hsq"

    @property
    def opcodes(self) -> frozenset[OpCode]:
        return _ADMISSIBLE[self]

    def admits(self, op: OpCode) -> bool:
        return op in _ADMISSIBLE[self]

    @classmethod
    def parse(cls, name: str) -> "BasisId":
        key = name.strip().lower().replace("_", "-")
        for b in cls:
            if b.value == key:
                return b
        raise ValueError(f"unknown basis {name!r}")


_ADMISSIBLE = {
    BasisId.ARITHMETIC: frozenset({OpCode.ADD, OpCode.SUB, OpCode.MUL, OpCode.DIV}),
    BasisId.DIVISION_FREE: frozenset({OpCode.ADD, OpCode.SUB, OpCode.MUL}),
    BasisId.MONOTONE: frozenset({OpCode.ADD, OpCode.MUL}),
    BasisId.PLUS_HSQ: frozenset({OpCode.ADD, OpCode.HSQ}),
}

# Inference order: first basis admitting every opcode wins.
_INFERENCE_ORDER = (BasisId.MONOTONE, BasisId.DIVISION_FREE, BasisId.ARITHMETIC, BasisId.PLUS_HSQ)


def smallest_basis(ops: Iterable[OpCode]) -> BasisId:
    ops = set(ops)
    for b in _INFERENCE_ORDER:
        if ops <= b.opcodes:
            return b
    names = ", ".join(sorted(op.value for op in ops))
    raise BasisError(f"no basis admits all of: {names}")


@dataclass(frozen=True)
class Gate:
    op: OpCode
    lhs: int
    rhs: int | None = None

    def __post_init__(self):
        if self.op.unary and self.rhs is not None:
            raise CircuitError(f"{self.op.value} is unary")
        if not self.op.unary and self.rhs is None:
            raise CircuitError(f"{self.op.value} needs two operands")

    @property
    def operands(self) -> tuple[int, ...]:
        return (self.lhs,) if self.rhs is None else (self.lhs, self.rhs)

    def render(self, index: int) -> str:
        args = " ".join(f"v{j}" for j in self.operands)
        return f"v{index} = {self.op.value} {args}"


@dataclass(frozen=True)
class Circuit:
    """An immutable straight-line program over a declared basis."""

    basis: BasisId
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for i, g in enumerate(self.gates, start=1):
            for j in g.operands:
                if not 0 <= j < i:
                    raise CircuitError(f"gate v{i} references v{j}: operands must precede the gate")
            if not self.basis.admits(g.op):
                raise BasisError(f"gate v{i}: opcode {g.op.value} not in basis {self.basis.value}")

    @property
    def size(self) -> int:
        return len(self.gates)

    @property
    def opcodes(self) -> frozenset[OpCode]:
        return frozenset(g.op for g in self.gates)

    def prefix(self, n: int) -> "Circuit":
        """The circuit s_0..s_n; its value is the value of node n."""
        return Circuit(self.basis, self.gates[:n])

    def with_basis(self, basis: BasisId) -> "Circuit":
        return Circuit(basis, self.gates)

    def __len__(self) -> int:
        return len(self.gates)


@dataclass(frozen=True)
class EvalOutcome:
    """Either a defined value or the index of the first gate dividing by zero."""

    value: Fraction | None = None
    undefined_at: int | None = None

    @property
    def defined(self) -> bool:
        return self.undefined_at is None

    def __str__(self) -> str:
        if self.defined:
            return format_rat(self.value)
        return f"undefined (division by zero at gate v{self.undefined_at})"


# ---------------------------------------------------------------------------
# Text / JSON I/O

_GATE_RE = re.compile(r"v(\d+)$")


def _node(token: str, line: int, col: int) -> int:
    m = _GATE_RE.match(token)
    if not m:
        raise ParseError(f"expected a node name like v3, got {token!r}", line, col)
    return int(m.group(1))


def _parse_text(text: str) -> Circuit:
    basis: BasisId | None = None
    gates: list[Gate] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        tokens = [(m.group(), m.start() + 1) for m in re.finditer(r"\S+", line)]
        if not tokens:
            continue
        word, col = tokens[0]
        if word == "basis":
            if gates or basis is not None:
                raise ParseError("basis header must come first and only once", lineno, col)
            if len(tokens) != 2:
                raise ParseError("expected: basis <name>", lineno, col)
            try:
                basis = BasisId.parse(tokens[1][0])
            except ValueError as exc:
                raise ParseError(str(exc), lineno, tokens[1][1]) from None
            continue
        if len(tokens) < 4 or tokens[1][0] != "=":
            raise ParseError("expected: v<i> = <op> v<j> [v<k>]", lineno, col)
        index = _node(word, lineno, col)
        if index != len(gates) + 1:
            raise ParseError(f"expected gate v{len(gates) + 1}, got v{index}", lineno, col)
        try:
            op = OpCode(tokens[2][0])
        except ValueError:
            raise ParseError(f"unknown opcode {tokens[2][0]!r}", lineno, tokens[2][1]) from None
        arity = 1 if op.unary else 2
        if len(tokens) != 3 + arity:
            raise ParseError(f"{op.value} takes {arity} operand(s)", lineno, tokens[2][1])
        args = []
        for tok, c in tokens[3:]:
            j = _node(tok, lineno, c)
            if j >= index:
                raise ParseError(f"forward reference v{j} in gate v{index}", lineno, c)
            args.append(j)
        if basis is not None and not basis.admits(op):
            raise ParseError(
                f"opcode {op.value} not in declared basis {basis.value}", lineno, tokens[2][1]
            )
        gates.append(Gate(op, *args))
    if basis is None:
        basis = smallest_basis(g.op for g in gates)
    return Circuit(basis, gates)


def _parse_json(text: str) -> Circuit:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(obj, dict) or not isinstance(obj.get("gates", []), list):
        raise ParseError("expected an object with a 'gates' list")
    gates = []
    for n, g in enumerate(obj.get("gates", []), start=1):
        try:
            op = OpCode(g["op"])
            gates.append(Gate(op, int(g["lhs"]), None if op.unary else int(g["rhs"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"gate {n}: malformed entry {g!r} ({exc})") from None
    if "basis" in obj:
        try:
            basis = BasisId.parse(obj["basis"])
        except ValueError as exc:
            raise ParseError(str(exc)) from None
    else:
        basis = smallest_basis(g.op for g in gates)
    return Circuit(basis, gates)


def parse_circuit(text: str, format: str = "text") -> Circuit:
    """Parse a circuit from ``text``; ``format`` is ``"text"``, ``"json"`` or ``"auto"``."""
    if format == "auto":
        format = "json" if text.lstrip().startswith("{") else "text"
    if format == "text":
        return _parse_text(text)
    if format == "json":
        return _parse_json(text)
    raise ValueError(f"unknown circuit format {format!r}")


def circuit_to_dict(c: Circuit) -> dict:
    gates = []
    for g in c.gates:
        d = {"op": g.op.value, "lhs": g.lhs}
        if g.rhs is not None:
            d["rhs"] = g.rhs
        gates.append(d)
    return {"basis": c.basis.value, "gates": gates}


def serialize_circuit(c: Circuit, format: str = "text") -> str:
    if format == "text":
        lines = [f"basis {c.basis.value}"]
        lines += [g.render(i) for i, g in enumerate(c.gates, start=1)]
        return "\n".join(lines) + "\n"
    if format == "json":
        return json.dumps(circuit_to_dict(c)) + "\n"
    raise ValueError(f"unknown circuit format {format!r}")


def format_rat(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def parse_rat(text: str) -> Fraction:
    return Fraction(text.strip())


# ---------------------------------------------------------------------------
# Evaluation


def eval_nodes(c: Circuit) -> list[Fraction]:
    """Exact values of every node 0..l; raises PromiseViolation on division by zero."""
    if OpCode.DIV not in c.opcodes and OpCode.HSQ not in c.opcodes:
        ints = _eval_int_nodes(c)
        return [Fraction(v) for v in ints]
    vals: list[Fraction] = [Fraction(1)]
    for i, g in enumerate(c.gates, start=1):
        a = vals[g.lhs]
        if g.op is OpCode.HSQ:
            vals.append(a * a / 2)
            continue
        b = vals[g.rhs]
        if g.op is OpCode.ADD:
            vals.append(a + b)
        elif g.op is OpCode.SUB:
            vals.append(a - b)
        elif g.op is OpCode.MUL:
            vals.append(a * b)
        else:
            if b == 0:
                raise PromiseViolation(f"division by zero at gate v{i}", gate=i)
            vals.append(a / b)
    return vals


def _eval_int_nodes(c: Circuit) -> list[int]:
    vals = [1]
    for g in c.gates:
        a, b = vals[g.lhs], vals[g.rhs]
        if g.op is OpCode.ADD:
            vals.append(a + b)
        elif g.op is OpCode.SUB:
            vals.append(a - b)
        else:
            vals.append(a * b)
    return vals


def eval_exact(c: Circuit) -> EvalOutcome:
    try:
        return EvalOutcome(eval_nodes(c)[-1])
    except PromiseViolation as exc:
        return EvalOutcome(undefined_at=exc.gate)


def defined_value(c: Circuit) -> Fraction:
    """Exact value of ``c``, raising PromiseViolation when it is undefined."""
    return eval_nodes(c)[-1]


def eval_mod(c: Circuit, modulus: int) -> int:
    """Least non-negative residue of v(c) modulo ``modulus``.

    Division-free circuits have integer values, so this is exact.  HSQ gates
    are accepted for odd moduli, where halving is multiplication by the
    inverse of 2.
    """
    if modulus < 1:
        raise PreconditionError("modulus must be a positive integer")
    ops = c.opcodes
    if OpCode.DIV in ops:
        raise PreconditionError("eval_mod needs a division-free circuit; lower it first")
    if modulus == 1:
        return 0
    half = None
    if OpCode.HSQ in ops:
        if modulus % 2 == 0:
            raise PreconditionError("HSQ gates can only be reduced modulo an odd number")
        half = (modulus + 1) // 2
    vals = [1 % modulus]
    for g in c.gates:
        a = vals[g.lhs]
        if g.op is OpCode.HSQ:
            vals.append(a * a * half % modulus)
            continue
        b = vals[g.rhs]
        if g.op is OpCode.ADD:
            vals.append((a + b) % modulus)
        elif g.op is OpCode.SUB:
            vals.append((a - b) % modulus)
        else:
            vals.append(a * b % modulus)
    return vals[-1]


def height(x: Fraction) -> int:
    return max(abs(x.numerator), x.denominator)


def value_bound_check(c: Circuit) -> bool:
    """True iff max(|num|, den) of v(c) is below 2**(2**l)."""
    h = height(defined_value(c))
    return h.bit_length() <= 2**c.size


def value_bit_bound(c: Circuit) -> int:
    """Static b with |v(c)| < 2**b for a division-free circuit, never above 2**l.

    Propagates b_0 = 1, b = max(b_j, b_k) + 1 for ADD/SUB and b_j + b_k for MUL
    without evaluating anything.
    """
    if not c.opcodes <= BasisId.DIVISION_FREE.opcodes:
        raise PreconditionError("bit bound is defined for division-free circuits only")
    bits = [1]
    for g in c.gates:
        if g.op is OpCode.MUL:
            bits.append(bits[g.lhs] + bits[g.rhs])
        else:
            bits.append(max(bits[g.lhs], bits[g.rhs]) + 1)
    return bits[-1]


def repeated_squaring(size: int) -> Circuit:
    """ADD(0,0) followed by size-1 squarings; value 2**(2**(size-1))."""
    if size < 1:
        raise ValueError("size must be at least 1")
    gates = [Gate(OpCode.ADD, 0, 0)] + [Gate(OpCode.MUL, i, i) for i in range(1, size)]
    return Circuit(BasisId.MONOTONE, gates)


def concat(circuits: Sequence[Circuit], basis: BasisId) -> tuple[list[Gate], list[int]]:
    """Lay circuits one after another in a single gate list.

    Returns the gate list and the node index holding each circuit's output.
    Node 0 stays shared.
    """
    gates: list[Gate] = []
    outs = []
    for c in circuits:
        offset = len(gates)

        def remap(j: int) -> int:
            return 0 if j == 0 else j + offset

        for g in c.gates:
            gates.append(Gate(g.op, remap(g.lhs), None if g.rhs is None else remap(g.rhs)))
        outs.append(remap(c.size))
    for g in gates:
        if not basis.admits(g.op):
            raise BasisError(f"opcode {g.op.value} not in basis {basis.value}")
    return gates, outs
