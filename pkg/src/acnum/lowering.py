"""Basis-lowering passes.

Every pass replaces each input gate by a constant-size group of output
gates, so output size is linear in input size:

    arithmetic --drop_division--> division-free --drop_subtraction--> monotone pair
    monotone --to_plus_hsq--> {+, x^2/2} pair

Pair passes represent a value as the difference of two nodes (P - N) living
in one gate list.  Monotone targets cannot build 0, so the tracks start from
(P_0, N_0) = (2, 1); only differences matter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .circuit import BasisId, Circuit, Gate, OpCode, concat, eval_exact, eval_nodes
from .errors import BasisError, PromiseViolation

ADD, SUB, MUL, DIV, HSQ = OpCode.ADD, OpCode.SUB, OpCode.MUL, OpCode.DIV, OpCode.HSQ

# Measured per-pass constants C with output_size <= C * input_size + C.
PASS_CONSTANTS = {
    "embed_arithmetic": 3,
    "drop_division": 5,
    "drop_subtraction": 7,
    "to_plus_hsq": 11,
}

ZERO = Circuit(BasisId.DIVISION_FREE, (Gate(SUB, 0, 0),))


@dataclass(frozen=True)
class PairCircuit:
    """Value represented as v(pos_out) - v(neg_out) inside one program."""

    program: Circuit
    pos_out: int
    neg_out: int

    def values(self) -> tuple[Fraction, Fraction]:
        vals = eval_nodes(self.program)
        return vals[self.pos_out], vals[self.neg_out]

    def difference(self) -> Fraction:
        p, n = self.values()
        return p - n

    def split(self) -> tuple[Circuit, Circuit]:
        """Prefix circuits ending at the P and N outputs."""
        return self.program.prefix(self.pos_out), self.program.prefix(self.neg_out)


@dataclass(frozen=True)
class LoweringReport:
    pass_name: str
    input_size: int
    output_size: int

    @property
    def expansion_factor(self) -> Fraction:
        return Fraction(self.output_size, max(self.input_size, 1))

    @property
    def constant(self) -> int:
        return PASS_CONSTANTS[self.pass_name]

    @property
    def within_bound(self) -> bool:
        c = self.constant
        return self.output_size <= c * self.input_size + c

    def to_dict(self) -> dict:
        return {
            "pass_name": self.pass_name,
            "input_size": self.input_size,
            "output_size": self.output_size,
            "expansion_factor": str(self.expansion_factor),
            "constant": self.constant,
            "within_bound": self.within_bound,
        }


class _Builder:
    def __init__(self) -> None:
        self.gates: list[Gate] = []

    def emit(self, op: OpCode, a: int, b: int | None = None) -> int:
        self.gates.append(Gate(op, a, b))
        return len(self.gates)

    def circuit(self, basis: BasisId) -> Circuit:
        return Circuit(basis, self.gates)


def _require(c: Circuit, allowed: frozenset[OpCode], what: str) -> None:
    bad = c.opcodes - allowed
    if bad:
        names = ", ".join(sorted(op.value for op in bad))
        raise BasisError(f"{what} does not accept opcode(s) {names}")


def _check_defined(c: Circuit) -> None:
    out = eval_exact(c)
    if not out.defined:
        raise PromiseViolation(
            f"circuit value is undefined (division by zero at gate v{out.undefined_at})",
            gate=out.undefined_at,
        )


# ---------------------------------------------------------------------------
# Passes


def embed_arithmetic(c: Circuit) -> Circuit:
    """Same value over the arithmetic basis; HSQ(j) becomes (s_j * s_j) / 2."""
    if HSQ not in c.opcodes:
        return c.with_basis(BasisId.ARITHMETIC)
    b = _Builder()
    two = b.emit(ADD, 0, 0)
    node = [0]
    for g in c.gates:
        if g.op is HSQ:
            sq = b.emit(MUL, node[g.lhs], node[g.lhs])
            node.append(b.emit(DIV, sq, two))
        else:
            node.append(b.emit(g.op, node[g.lhs], node[g.rhs]))
    return b.circuit(BasisId.ARITHMETIC)


def merge_to_sign(s1: Circuit, s2: Circuit) -> Circuit:
    """One circuit computing v(s1) - v(s2); size l1 + l2 + 1."""
    for s in (s1, s2):
        if not s.basis.admits(SUB):
            raise BasisError(f"merge_to_sign needs a basis with subtraction, got {s.basis.value}")
    if BasisId.ARITHMETIC in (s1.basis, s2.basis):
        basis = BasisId.ARITHMETIC
    else:
        basis = BasisId.DIVISION_FREE
    gates, (a, b) = concat([s1, s2], basis)
    gates.append(Gate(SUB, a, b))
    return Circuit(basis, gates)


def drop_division(s: Circuit, *, assume_defined: bool = False) -> Circuit:
    """Division-free circuit whose value N*D has the sign and zero set of N/D = v(s).

    Circuits without DIV pass through unchanged (D-track constant 1).
    """
    _require(s, BasisId.ARITHMETIC.opcodes, "drop_division")
    if DIV not in s.opcodes:
        return s.with_basis(BasisId.DIVISION_FREE)
    if not assume_defined:
        _check_defined(s)
    b = _Builder()
    num, den = [0], [0]
    for g in s.gates:
        j, k = g.lhs, g.rhs
        if g.op in (ADD, SUB):
            a1 = b.emit(MUL, num[j], den[k])
            a2 = b.emit(MUL, den[j], num[k])
            den.append(b.emit(MUL, den[j], den[k]))
            num.append(b.emit(g.op, a1, a2))
        elif g.op is MUL:
            den.append(b.emit(MUL, den[j], den[k]))
            num.append(b.emit(MUL, num[j], num[k]))
        else:
            den.append(b.emit(MUL, den[j], num[k]))
            num.append(b.emit(MUL, num[j], den[k]))
    b.emit(MUL, num[-1], den[-1])
    return b.circuit(BasisId.DIVISION_FREE)


def _monotone_tracks(s: Circuit) -> tuple[_Builder, list[int], list[int]]:
    _require(s, BasisId.DIVISION_FREE.opcodes, "drop_subtraction")
    b = _Builder()
    left, right = [b.emit(ADD, 0, 0)], [0]
    for g in s.gates:
        j, k = g.lhs, g.rhs
        if g.op is ADD:
            left.append(b.emit(ADD, left[j], left[k]))
            right.append(b.emit(ADD, right[j], right[k]))
        elif g.op is SUB:
            left.append(b.emit(ADD, left[j], right[k]))
            right.append(b.emit(ADD, right[j], left[k]))
        else:
            # (A-B)(C-D) = (AC + BD) - (BC + AD)
            l3 = b.emit(MUL, left[j], left[k])
            l2 = b.emit(MUL, right[j], right[k])
            left.append(b.emit(ADD, l2, l3))
            r3 = b.emit(MUL, right[j], left[k])
            r2 = b.emit(MUL, left[j], right[k])
            right.append(b.emit(ADD, r2, r3))
    return b, left, right


def drop_subtraction(s: Circuit) -> PairCircuit:
    b, left, right = _monotone_tracks(s)
    return PairCircuit(b.circuit(BasisId.MONOTONE), left[-1], right[-1])


def _hsq_tracks(s: Circuit) -> tuple[_Builder, list[int], list[int]]:
    _require(s, BasisId.MONOTONE.opcodes, "to_plus_hsq")
    b = _Builder()
    pos, neg = [b.emit(ADD, 0, 0)], [0]
    for g in s.gates:
        j, k = g.lhs, g.rhs
        if g.op is ADD:
            pos.append(b.emit(ADD, pos[j], pos[k]))
            neg.append(b.emit(ADD, neg[j], neg[k]))
            continue
        # xy = ((x+y)^2 - (x-y)^2)/4 split over the P/N tracks
        a1 = b.emit(ADD, pos[j], pos[k])
        a2 = b.emit(ADD, neg[j], neg[k])
        a3 = b.emit(ADD, pos[j], neg[k])
        a4 = b.emit(ADD, neg[j], pos[k])
        a5 = b.emit(HSQ, a1)
        a6 = b.emit(HSQ, a2)
        a7 = b.emit(HSQ, a3)
        a8 = b.emit(HSQ, a4)
        pos.append(b.emit(ADD, a5, a6))
        neg.append(b.emit(ADD, a7, a8))
    return b, pos, neg


def to_plus_hsq(s: Circuit) -> PairCircuit:
    b, pos, neg = _hsq_tracks(s)
    return PairCircuit(b.circuit(BasisId.PLUS_HSQ), pos[-1], neg[-1])


def _hsq_compare(program: Circuit, a: int, b: int) -> tuple[list[Gate], int, int]:
    """Extend the {+, x^2/2} image of a monotone program with
    f' = P_a + N_b and f'' = P_b + N_a, so that v(a) >= v(b) iff f' >= f''."""
    builder, pos, neg = _hsq_tracks(program)
    f1 = builder.emit(ADD, pos[a], neg[b])
    f2 = builder.emit(ADD, pos[b], neg[a])
    return builder.gates, f1, f2


# ---------------------------------------------------------------------------
# Composite reductions


def _with_subtraction(c: Circuit) -> Circuit:
    if HSQ in c.opcodes:
        return embed_arithmetic(c)
    if not c.basis.admits(SUB):
        return c.with_basis(BasisId.DIVISION_FREE)
    return c


def sign_circuit(s1: Circuit, s2: Circuit, *, assume_defined: bool = False) -> Circuit:
    """Division-free circuit d with sign(v(d)) = sign(v(s1) - v(s2))."""
    if not assume_defined:
        _check_defined(s1)
        _check_defined(s2)
    merged = merge_to_sign(_with_subtraction(s1), _with_subtraction(s2))
    return drop_division(merged, assume_defined=True)


def comparison_instance(
    s1: Circuit, s2: Circuit, target_basis: BasisId, *, assume_defined: bool = False
) -> tuple[Circuit, Circuit]:
    """Map (s1, s2) to (S', S'') over ``target_basis`` preserving both >= and =."""
    if not assume_defined:
        _check_defined(s1)
        _check_defined(s2)
    if target_basis is BasisId.ARITHMETIC:
        return embed_arithmetic(s1), embed_arithmetic(s2)
    allowed = target_basis.opcodes
    if s1.opcodes <= allowed and s2.opcodes <= allowed:
        return s1.with_basis(target_basis), s2.with_basis(target_basis)
    if target_basis is BasisId.DIVISION_FREE:
        return sign_circuit(s1, s2, assume_defined=True), ZERO

    mono = BasisId.MONOTONE.opcodes
    if s1.opcodes <= mono and s2.opcodes <= mono:
        gates, (a, b) = concat([s1, s2], BasisId.MONOTONE)
        program = Circuit(BasisId.MONOTONE, gates)
    else:
        pair = drop_subtraction(sign_circuit(s1, s2, assume_defined=True))
        program, a, b = pair.program, pair.pos_out, pair.neg_out
    if target_basis is BasisId.MONOTONE:
        return program.prefix(a), program.prefix(b)

    gates, _, _ = _hsq_compare(program, a, b)
    # the two comparison gates are last; each output circuit keeps one of them
    return (
        Circuit(BasisId.PLUS_HSQ, gates[:-1]),
        Circuit(BasisId.PLUS_HSQ, gates[:-2] + gates[-1:]),
    )


# ---------------------------------------------------------------------------
# Single-circuit lowering with reports


@dataclass(frozen=True)
class Lowered:
    """Result of lowering one circuit.

    For single-output targets ``neg_out`` is None and the value (or its sign,
    after drop_division) sits at the last node.  For pair targets the sign of
    v(s) equals the sign of v(pos_out) - v(neg_out).
    """

    circuit: Circuit
    pos_out: int
    neg_out: int | None
    reports: tuple[LoweringReport, ...] = field(default=())

    def represented(self) -> Fraction:
        vals = eval_nodes(self.circuit)
        if self.neg_out is None:
            return vals[self.pos_out]
        return vals[self.pos_out] - vals[self.neg_out]


def eliminate_dead(c: Circuit, keep: Sequence[int]) -> tuple[Circuit, dict[int, int]]:
    """Drop gates that no kept node depends on; returns the circuit and a node remap."""
    live = set(keep)
    for i in range(c.size, 0, -1):
        if i in live:
            live.update(c.gates[i - 1].operands)
    remap = {0: 0}
    gates = []
    for i in sorted(live - {0}):
        g = c.gates[i - 1]
        gates.append(Gate(g.op, remap[g.lhs], None if g.rhs is None else remap[g.rhs]))
        remap[i] = len(gates)
    return Circuit(c.basis, gates), remap


def lower(c: Circuit, target: BasisId, *, cleanup: bool = False) -> Lowered:
    reports: list[LoweringReport] = []

    def run(name: str, src: Circuit, out: Circuit) -> None:
        reports.append(LoweringReport(name, src.size, out.size))

    if c.opcodes <= target.opcodes:
        result = Lowered(c.with_basis(target), c.size, None)
    elif target is BasisId.ARITHMETIC:
        out = embed_arithmetic(c)
        run("embed_arithmetic", c, out)
        result = Lowered(out, out.size, None)
    elif target is BasisId.PLUS_HSQ and c.opcodes <= BasisId.MONOTONE.opcodes:
        pair = to_plus_hsq(c)
        run("to_plus_hsq", c, pair.program)
        result = Lowered(pair.program, pair.pos_out, pair.neg_out)
    else:
        src = _with_subtraction(c)
        if HSQ in c.opcodes:
            run("embed_arithmetic", c, src)
        d = drop_division(src)
        if DIV in src.opcodes:
            run("drop_division", src, d)
        if target is BasisId.DIVISION_FREE:
            result = Lowered(d, d.size, None)
        else:
            pair = drop_subtraction(d)
            run("drop_subtraction", d, pair.program)
            if target is BasisId.MONOTONE:
                result = Lowered(pair.program, pair.pos_out, pair.neg_out)
            else:
                gates, f1, f2 = _hsq_compare(pair.program, pair.pos_out, pair.neg_out)
                out = Circuit(BasisId.PLUS_HSQ, gates)
                run("to_plus_hsq", pair.program, out)
                result = Lowered(out, f1, f2)

    if cleanup:
        keep = [result.pos_out] + ([] if result.neg_out is None else [result.neg_out])
        pruned, remap = eliminate_dead(result.circuit, keep)
        result = Lowered(
            pruned,
            remap[result.pos_out],
            None if result.neg_out is None else remap[result.neg_out],
        )
    return Lowered(result.circuit, result.pos_out, result.neg_out, tuple(reports))
