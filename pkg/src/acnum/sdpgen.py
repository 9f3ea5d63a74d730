"""Semidefinite programs whose optimum is the value of a {+, x^2/2} circuit.

Every gate s_i gets a variable x_i and a block that is PSD exactly when x_i
is at least the gate's output on its inputs:

    s_i = s_j + s_k   ->  [ x_i - x_j - x_k ]
    s_i = s_j^2 / 2   ->  [[ 2 x_i, x_j ], [ x_j, 1 ]]

Both maps are monotone, so every feasible point has x_l >= v(S) and
x_i = v(s_i) is feasible: min x_l = v(S).  Adding the block [q - x_l] gives
a feasibility instance that is feasible iff v(S) <= q.

Standard form is Q_0 + sum_i x_i Q_i >= 0.  SDPA files use
sum_i x_i F_i - F_0 >= 0, hence F_0 = -Q_0 and F_i = Q_i.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from decimal import Context, Decimal
from fractions import Fraction
from typing import Mapping

from .circuit import (
    BasisId,
    Circuit,
    OpCode,
    circuit_to_dict,
    eval_nodes,
    format_rat,
    parse_circuit,
    serialize_circuit,
)
from .errors import BasisError, InternalError, ParseError, PreconditionError


class LossyRoundingWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Affine:
    """const + sum coeff * x_var, with exact rational coefficients."""

    const: Fraction = Fraction(0)
    coeffs: tuple[tuple[int, Fraction], ...] = ()

    @classmethod
    def of(cls, const=0, terms: Mapping[int, Fraction] | None = None) -> "Affine":
        terms = {v: Fraction(a) for v, a in (terms or {}).items() if a != 0}
        return cls(Fraction(const), tuple(sorted(terms.items())))

    @classmethod
    def var(cls, v: int) -> "Affine":
        return cls.of(0, {v: Fraction(1)})

    def __add__(self, other: "Affine") -> "Affine":
        terms = dict(self.coeffs)
        for v, a in other.coeffs:
            terms[v] = terms.get(v, 0) + a
        return Affine.of(self.const + other.const, terms)

    def scale(self, k) -> "Affine":
        k = Fraction(k)
        return Affine.of(self.const * k, {v: a * k for v, a in self.coeffs})

    def __neg__(self) -> "Affine":
        return self.scale(-1)

    def __sub__(self, other: "Affine") -> "Affine":
        return self + (-other)

    def coeff(self, v: int) -> Fraction:
        return dict(self.coeffs).get(v, Fraction(0))

    def evaluate(self, x: Mapping[int, Fraction]) -> Fraction:
        return self.const + sum((a * x[v] for v, a in self.coeffs), Fraction(0))

    @property
    def is_zero(self) -> bool:
        return self.const == 0 and not self.coeffs

    def to_dict(self) -> dict:
        return {
            "const": _pair(self.const),
            "coeffs": [[v, _pair(a)] for v, a in self.coeffs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Affine":
        return cls.of(_unpair(d["const"]), {int(v): _unpair(a) for v, a in d["coeffs"]})


def _pair(x: Fraction) -> list[int]:
    return [x.numerator, x.denominator]


def _unpair(p) -> Fraction:
    return Fraction(int(p[0]), int(p[1]))


@dataclass(frozen=True)
class SdpBlock:
    """Symmetric 1x1 or 2x2 block given by its upper-triangle entries."""

    dim: int
    entries: tuple[tuple[tuple[int, int], Affine], ...]

    @classmethod
    def make(cls, rows: list[list[Affine]]) -> "SdpBlock":
        dim = len(rows)
        if dim not in (1, 2):
            raise ValueError("blocks are 1x1 or 2x2")
        entries = []
        for r in range(dim):
            for c in range(r, dim):
                if rows[r][c] != rows[c][r]:
                    raise ValueError("block is not symmetric")
                if not rows[r][c].is_zero:
                    entries.append(((r, c), rows[r][c]))
        return cls(dim, tuple(entries))

    def entry(self, r: int, c: int) -> Affine:
        key = (min(r, c), max(r, c))
        for k, a in self.entries:
            if k == key:
                return a
        return Affine()

    def evaluate(self, x: Mapping[int, Fraction]) -> list[list[Fraction]]:
        return [[self.entry(r, c).evaluate(x) for c in range(self.dim)] for r in range(self.dim)]


@dataclass(frozen=True)
class SdpProgram:
    var_ids: tuple[int, ...]
    blocks: tuple[SdpBlock, ...]
    objective: Affine
    kind: str = "value"  # "value" or "threshold"
    encoding: str = "substitute"  # "substitute" or "keep-x0"
    threshold: Fraction | None = None
    source_hash: str = ""
    source: Circuit | None = field(default=None, compare=False)

    @property
    def n_vars(self) -> int:
        return len(self.var_ids)

    def to_dict(self, include_source: bool = True) -> dict:
        d = {
            "n_vars": self.n_vars,
            "var_ids": list(self.var_ids),
            "kind": self.kind,
            "encoding": self.encoding,
            "threshold": None if self.threshold is None else _pair(self.threshold),
            "source_hash": self.source_hash,
            "objective": self.objective.to_dict(),
            "blocks": [
                {
                    "dim": b.dim,
                    "entries": [{"i": r, "j": c, **a.to_dict()} for (r, c), a in b.entries],
                }
                for b in self.blocks
            ],
        }
        if include_source:
            d["source"] = None if self.source is None else circuit_to_dict(self.source)
        return d


def circuit_hash(c: Circuit) -> str:
    return hashlib.sha256(serialize_circuit(c).encode()).hexdigest()


# ---------------------------------------------------------------------------
# Emission


def _require_plus_hsq(c: Circuit) -> None:
    if not c.opcodes <= BasisId.PLUS_HSQ.opcodes:
        raise BasisError("SDP emission needs a circuit over {add, hsq}")


def emit_value_program(c: Circuit, keep_x0: bool = False) -> SdpProgram:
    """min x_l subject to one PSD block per gate; the infimum is v(c)."""
    _require_plus_hsq(c)

    def x(j: int) -> Affine:
        return Affine.of(1) if j == 0 and not keep_x0 else Affine.var(j)

    one = Affine.of(1)
    blocks = []
    for i, g in enumerate(c.gates, start=1):
        if g.op is OpCode.ADD:
            blocks.append(SdpBlock.make([[x(i) - x(g.lhs) - x(g.rhs)]]))
        else:
            blocks.append(SdpBlock.make([[x(i).scale(2), x(g.lhs)], [x(g.lhs), one]]))
    if keep_x0:
        # x_0 = 1 as diag(x_0 - 1, 1 - x_0) >= 0
        blocks.append(SdpBlock.make([[x(0) - one, Affine()], [Affine(), one - x(0)]]))
    first = 0 if keep_x0 else 1
    return SdpProgram(
        var_ids=tuple(range(first, c.size + 1)),
        blocks=tuple(blocks),
        objective=x(c.size),
        encoding="keep-x0" if keep_x0 else "substitute",
        source_hash=circuit_hash(c),
        source=c,
    )


def emit_threshold_feasibility(c: Circuit, q, keep_x0: bool = False) -> SdpProgram:
    """Feasible iff v(c) <= q."""
    q = Fraction(q)
    base = emit_value_program(c, keep_x0)
    last = base.objective  # x_l (or the constant 1 for the empty circuit)
    cap = SdpBlock.make([[Affine.of(q) - last]])
    return SdpProgram(
        var_ids=base.var_ids,
        blocks=base.blocks + (cap,),
        objective=Affine(),
        kind="threshold",
        encoding=base.encoding,
        threshold=q,
        source_hash=base.source_hash,
        source=c,
    )


# ---------------------------------------------------------------------------
# Exact certificates


@dataclass(frozen=True)
class BlockCheck:
    dim: int
    diagonal: tuple[Fraction, ...]
    det: Fraction | None
    psd: bool


@dataclass(frozen=True)
class PsdCertificate:
    assignment: dict
    checks: tuple[BlockCheck, ...]

    @property
    def ok(self) -> bool:
        return all(ch.psd for ch in self.checks)

    def failing(self) -> list[int]:
        return [n for n, ch in enumerate(self.checks) if not ch.psd]


def check_block(block: SdpBlock, x: Mapping[int, Fraction]) -> BlockCheck:
    m = block.evaluate(x)
    if block.dim == 1:
        return BlockCheck(1, (m[0][0],), None, m[0][0] >= 0)
    a, b, d = m[0][0], m[0][1], m[1][1]
    det = a * d - b * b
    return BlockCheck(2, (a, d), det, a >= 0 and d >= 0 and det >= 0)


def check_assignment(program: SdpProgram, x: Mapping[int, Fraction]) -> PsdCertificate:
    x = {v: Fraction(x[v]) for v in program.var_ids}
    return PsdCertificate(x, tuple(check_block(b, x) for b in program.blocks))


def canonical_assignment(c: Circuit, program: SdpProgram) -> dict[int, Fraction]:
    vals = eval_nodes(c)
    return {v: vals[v] for v in program.var_ids}


def canonical_certificate(c: Circuit, program: SdpProgram) -> PsdCertificate:
    """Check x_i = v(s_i) against every block in exact arithmetic."""
    cert = check_assignment(program, canonical_assignment(c, program))
    bad = cert.failing()
    if not bad:
        return cert
    if program.kind == "threshold" and bad == [len(program.blocks) - 1]:
        raise PreconditionError("canonical point exceeds the threshold: v(c) > q")
    raise InternalError(f"canonical point violates emitted block(s) {bad}")


def lower_bounds(c: Circuit) -> list[Fraction]:
    """Exact lower bounds on x_i valid for every feasible point."""
    lb = [Fraction(1)]
    for g in c.gates:
        if g.op is OpCode.ADD:
            lb.append(lb[g.lhs] + lb[g.rhs])
        else:
            v = lb[g.lhs]
            lb.append(v * v / 2 if v >= 0 else Fraction(0))
    return lb


def certify_infeasible(program: SdpProgram, c: Circuit | None = None, q=None) -> bool:
    """True when lower-bound propagation proves x_l > q, i.e. no feasible point."""
    c = c if c is not None else program.source
    q = Fraction(q) if q is not None else program.threshold
    if c is None or q is None:
        raise PreconditionError("need the source circuit and the threshold")
    _require_plus_hsq(c)
    return lower_bounds(c)[-1] > q


@dataclass(frozen=True)
class ThresholdVerdict:
    feasible: bool
    certificate: PsdCertificate | None
    lower_bound: Fraction


def threshold_verdict(c: Circuit, q, keep_x0: bool = False) -> ThresholdVerdict:
    """Decide v(c) <= q with a certificate either way."""
    program = emit_threshold_feasibility(c, q, keep_x0)
    lb = lower_bounds(c)[-1]
    if certify_infeasible(program, c, q):
        return ThresholdVerdict(False, None, lb)
    cert = check_assignment(program, canonical_assignment(c, program))
    if not cert.ok:
        raise InternalError("neither certificate applies")
    return ThresholdVerdict(True, cert, lb)


# ---------------------------------------------------------------------------
# Writers and readers


def _matrices(program: SdpProgram):
    """Yield (matno, blkno, i, j, value) in SDPA terms (1-indexed, F_0 = -Q_0)."""
    col = {v: n for n, v in enumerate(program.var_ids, start=1)}
    for blkno, block in enumerate(program.blocks, start=1):
        for (r, c), a in block.entries:
            if a.const != 0:
                yield 0, blkno, r + 1, c + 1, -a.const
            for v, coef in a.coeffs:
                yield col[v], blkno, r + 1, c + 1, coef


def _decimal(x: Fraction, ctx: Context, lossy: list) -> str:
    d = ctx.divide(Decimal(x.numerator), Decimal(x.denominator))
    if Fraction(d) != x:
        lossy.append(x)
    return str(d)


def write_sdpa(program: SdpProgram, precision: int = 30) -> str:
    """SDPA sparse (.dat-s) text with coefficients rounded to ``precision`` digits."""
    if precision < 1:
        raise PreconditionError("precision must be at least 1")
    ctx = Context(prec=precision)
    lossy: list = []
    ids = ",".join(str(v) for v in program.var_ids)
    thr = "" if program.threshold is None else f" threshold={format_rat(program.threshold)}"
    if program.objective.const != 0:
        thr += f" objconst={format_rat(program.objective.const)}"
    lines = [
        f'"acnum {program.kind} program encoding={program.encoding}{thr}',
        f'"var_ids={ids} source={program.source_hash or "-"}',
        str(program.n_vars),
        str(len(program.blocks)),
        " ".join(str(b.dim) for b in program.blocks),
        " ".join(_decimal(program.objective.coeff(v), ctx, lossy) for v in program.var_ids),
    ]
    for matno, blkno, i, j, val in _matrices(program):
        lines.append(f"{matno} {blkno} {i} {j} {_decimal(val, ctx, lossy)}")
    if lossy:
        warnings.warn(
            f"{len(lossy)} coefficient(s) rounded to {precision} digits; use the JSON form for exact data",
            LossyRoundingWarning,
            stacklevel=2,
        )
    return "\n".join(lines) + "\n"


def read_sdpa(text: str) -> SdpProgram:
    """Parse SDPA sparse text back into a program (source circuit not included)."""
    meta: dict[str, str] = {}
    body = []
    for raw in text.splitlines():
        line = raw.strip()
        if line.startswith('"') or line.startswith("*"):
            for tok in line.lstrip('"*').split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    meta[k] = v
            if line.startswith('"acnum '):
                meta["kind"] = line.split()[1]
            continue
        body.append(line)
    try:
        n_vars = int(body[0])
        n_blocks = int(body[1])
        sizes = [abs(int(t)) for t in body[2].replace(",", " ").replace("{", " ").replace("}", " ").split()]
        cvec = [Fraction(Decimal(t)) for t in body[3].replace(",", " ").split()]
        records = [ln.split() for ln in body[4:] if ln]
    except (IndexError, ValueError) as exc:
        raise ParseError(f"malformed SDPA header: {exc}") from None
    if len(sizes) != n_blocks or len(cvec) != n_vars:
        raise ParseError("SDPA header counts do not match")
    if meta.get("var_ids"):
        var_ids = tuple(int(v) for v in meta["var_ids"].split(","))
    else:
        var_ids = tuple(range(1, n_vars + 1))
    if len(var_ids) != n_vars:
        raise ParseError("var_ids comment does not match variable count")
    cells: dict[tuple[int, int, int], dict] = {}
    for rec in records:
        if len(rec) != 5:
            raise ParseError(f"bad entry line: {' '.join(rec)}")
        matno, blkno, i, j = (int(t) for t in rec[:4])
        val = Fraction(Decimal(rec[4]))
        key = (blkno - 1, min(i, j) - 1, max(i, j) - 1)
        cell = cells.setdefault(key, {"const": Fraction(0), "terms": {}})
        if matno == 0:
            cell["const"] -= val
        else:
            v = var_ids[matno - 1]
            cell["terms"][v] = cell["terms"].get(v, 0) + val
    blocks = []
    for b, dim in enumerate(sizes):
        entries = []
        for r in range(dim):
            for c in range(r, dim):
                cell = cells.get((b, r, c))
                if cell:
                    a = Affine.of(cell["const"], cell["terms"])
                    if not a.is_zero:
                        entries.append(((r, c), a))
        blocks.append(SdpBlock(dim, tuple(entries)))
    src = meta.get("source", "")
    return SdpProgram(
        var_ids=var_ids,
        blocks=tuple(blocks),
        objective=Affine.of(Fraction(meta.get("objconst", 0)), dict(zip(var_ids, cvec))),
        kind=meta.get("kind", "value"),
        encoding=meta.get("encoding", "substitute"),
        threshold=Fraction(meta["threshold"]) if "threshold" in meta else None,
        source_hash="" if src == "-" else src,
    )


def write_exact_json(program: SdpProgram) -> str:
    return json.dumps(program.to_dict(), sort_keys=True, indent=1) + "\n"


def read_exact_json(text: str) -> SdpProgram:
    d = json.loads(text)
    blocks = []
    for b in d["blocks"]:
        entries = tuple(((e["i"], e["j"]), Affine.from_dict(e)) for e in b["entries"])
        blocks.append(SdpBlock(int(b["dim"]), entries))
    source = None
    if d.get("source") is not None:
        source = parse_circuit(json.dumps(d["source"]), "json")
    return SdpProgram(
        var_ids=tuple(d["var_ids"]),
        blocks=tuple(blocks),
        objective=Affine.from_dict(d["objective"]),
        kind=d["kind"],
        encoding=d["encoding"],
        threshold=None if d["threshold"] is None else _unpair(d["threshold"]),
        source_hash=d["source_hash"],
        source=source,
    )
