"""Command-line driver: ``acnum <command> ...``.

Exit codes: 0/1 for predicate outcomes, 2 for promise violations (undefined
circuit values), 64 usage, 65 bad input data, 66 I/O, 70 internal errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from fractions import Fraction
from pathlib import Path

from . import __version__
from .circuit import (
    BasisId,
    Circuit,
    OpCode,
    eval_exact,
    format_rat,
    parse_circuit,
    serialize_circuit,
)
from .eqcheck import EqParams, detection_census, eq_test, rounds_for_error
from .errors import AcnumError, CircuitError, InternalError, PreconditionError, PromiseViolation
from .generate import GenSpec, from_int, generate
from .lowering import lower
from .sdpgen import (
    LossyRoundingWarning,
    canonical_certificate,
    certify_infeasible,
    emit_threshold_feasibility,
    emit_value_program,
    threshold_verdict,
    write_exact_json,
    write_sdpa,
)
from .signcheck import (
    PrimeBasis,
    PrimeMode,
    Relation,
    k_star,
    parity_of_reduced,
    residues_of_int,
    sigma,
    crt_rank,
    sign_nonneg,
    compare,
)

EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_IO = 66
EXIT_INTERNAL = 70

STRICT_ERROR = 2.0**-40


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read_circuit(path: str) -> Circuit:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _IOFailure(str(exc)) from None
    return parse_circuit(text, "auto")


class _IOFailure(Exception):
    pass


def _write(path: str | None, text: str, out) -> None:
    if path is None or path == "-":
        out.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise _IOFailure(str(exc)) from None


def _dump(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("ACNUM_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"ACNUM_SEED must be an integer, got {env!r}") from None


# ---------------------------------------------------------------------------
# Commands


def cmd_eval(args, out) -> tuple[int, dict]:
    c = _read_circuit(args.file)
    res = eval_exact(c)
    report = {"command": "eval", "basis": c.basis.value, "size": c.size}
    if not res.defined:
        report["undefined_at"] = res.undefined_at
        out.write(f"{res}\n")
        return 2, report
    report["value"] = format_rat(res.value)
    out.write(report["value"] + "\n")
    return 0, report


def cmd_lower(args, out) -> tuple[int, dict]:
    c = _read_circuit(args.file)
    result = lower(c, BasisId.parse(args.to), cleanup=args.cleanup)
    _write(args.output, serialize_circuit(result.circuit, args.format), out)
    report = {
        "command": "lower",
        "target": args.to,
        "cleanup": args.cleanup,
        "input_size": c.size,
        "output_size": result.circuit.size,
        "pos_out": result.pos_out,
        "neg_out": result.neg_out,
        "reports": [r.to_dict() for r in result.reports],
    }
    if args.json_out is None:
        sidecar = f"{args.output}.json" if args.output not in (None, "-") else None
        if sidecar:
            _write(sidecar, _dump(report), out)
        else:
            sys.stderr.write(_dump(report))
    return 0, report


def cmd_eq(args, out) -> tuple[int, dict]:
    s1, s2 = _read_circuit(args.file1), _read_circuit(args.file2)
    params = EqParams(seed=_seed(args), rounds=args.rounds, error=args.error)
    verdict = eq_test(s1, s2, params)
    report = {"command": "eq", **verdict.to_dict()}
    if args.census:
        try:
            report["census"] = str(detection_census(s1, s2))
        except PreconditionError as exc:
            report["census"] = None
            report["census_skipped"] = str(exc)
    out.write(f"{verdict.outcome.value}")
    if verdict.witness is not None:
        out.write(f" (witness modulus {verdict.witness})")
    else:
        out.write(f" (error <= {verdict.error_bound:.3g} after {verdict.rounds_run} rounds)")
    out.write("\n")
    return (0 if verdict.equal else 1), report


def cmd_cmp(args, out) -> tuple[int, dict]:
    s1, s2 = _read_circuit(args.file1), _read_circuit(args.file2)
    verdict = compare(s1, s2, PrimeMode(args.mode), trace=args.trace)
    report = {"command": "cmp", "mode": args.mode, **verdict.to_dict()}
    relation = verdict.relation.value
    if args.strict and verdict.relation is Relation.GEQ:
        eq = eq_test(s1, s2, EqParams(seed=_seed(args), error=STRICT_ERROR))
        relation = "EQ" if eq.equal else "GT"
        report["strict"] = {"relation": relation, "residual_error": eq.error_bound, "eq": eq.to_dict()}
    out.write(relation + "\n")
    return (0 if verdict.relation is Relation.GEQ else 1), report


def cmd_sdp(args, out) -> tuple[int, dict]:
    c = _read_circuit(args.file)
    if args.threshold is not None:
        try:
            q = Fraction(args.threshold)
        except (ValueError, ZeroDivisionError):
            raise UsageError(f"bad threshold {args.threshold!r}; expected p/q") from None
        program = emit_threshold_feasibility(c, q, args.keep_x0)
    else:
        program = emit_value_program(c, args.keep_x0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", LossyRoundingWarning)
        text = write_sdpa(program, args.precision) if args.format == "dat-s" else write_exact_json(program)
    for w in caught:
        sys.stderr.write(f"warning: {w.message}\n")
    _write(args.output, text, out)
    report = {
        "command": "sdp",
        "kind": program.kind,
        "encoding": program.encoding,
        "n_vars": program.n_vars,
        "n_blocks": len(program.blocks),
        "source_hash": program.source_hash,
        "lossy": bool(caught),
    }
    code = 0
    if args.certify:
        if program.kind == "threshold":
            tv = threshold_verdict(c, program.threshold, args.keep_x0)
            report["feasible"] = tv.feasible
            report["lower_bound"] = format_rat(tv.lower_bound)
            code = 0 if tv.feasible else 1
        else:
            cert = canonical_certificate(c, program)
            report["canonical_certificate"] = cert.ok
    return code, report


def cmd_gen(args, out) -> tuple[int, dict]:
    weights = None
    if args.weights:
        weights = {}
        for item in args.weights.split(","):
            name, _, w = item.partition("=")
            try:
                weights[OpCode(name.strip())] = float(w)
            except ValueError:
                raise UsageError(f"bad weight {item!r}; expected op=weight") from None
    spec = GenSpec(BasisId.parse(args.basis), args.size, _seed(args), weights, args.max_bits)
    c = generate(spec)
    _write(args.output, serialize_circuit(c, args.format), out)
    return 0, {"command": "gen", "basis": c.basis.value, "size": c.size, "seed": spec.seed}


def _selftest_checks():
    b = PrimeBasis.from_primes([3, 5, 7])
    s17 = residues_of_int(17, b)
    s1 = residues_of_int(1, b)
    shifted = s1
    for _ in range(3):
        shifted = shifted.doubled(b)
    yield "xi(17) = (1,2,3)", s17.xi == (1, 2, 3)
    yield "rho(17) = 1", crt_rank(s17, b) == 1
    yield "sigma(17) = 17/16 at h = 4", b.h == 4 and sigma(s17, b).value == Fraction(17, 16)
    yield "k*(17) = 0", k_star(s17, b) == 0
    yield "xi(1) = (2,1,1), rho(1) = 1", s1.xi == (2, 1, 1) and crt_rank(s1, b) == 1
    yield "k*(1) = 3, b = 0", k_star(s1, b) == 3 and parity_of_reduced(shifted, b) == 0
    signs = {n: sign_nonneg(from_int(n), basis=b).nonneg for n in (17, -17, 1, 0)}
    yield "signs of 17, -17, 1, 0 over M = 105", signs == {17: True, -17: False, 1: True, 0: True}
    four = parse_circuit("v1 = add v0 v0\nv2 = mul v1 v1\n")
    two = parse_circuit("v1 = add v0 v0\nv2 = mul v1 v0\n")
    yield "census 4 vs 2 = 14/16", detection_census(four, two) == Fraction(14, 16)
    yield "rounds_for_error(10, 2^-20) = 271", rounds_for_error(10, 2.0**-20) == 271
    hsq = parse_circuit("v1 = add v0 v0\nv2 = hsq v1\nv3 = hsq v2\n")
    cert = canonical_certificate(hsq, emit_value_program(hsq))
    yield "canonical SDP certificate (2,2,2)", cert.ok and [ch.det for ch in cert.checks[1:]] == [0, 0]
    add = parse_circuit("v1 = add v0 v0\n")
    prog = emit_threshold_feasibility(add, Fraction(199, 100))
    yield "threshold 199/100 infeasible for value 2", certify_infeasible(prog)


def cmd_selftest(args, out) -> tuple[int, dict]:
    results = []
    for name, ok in _selftest_checks():
        results.append({"check": name, "pass": bool(ok)})
        out.write(f"{'PASS' if ok else 'FAIL'}  {name}\n")
    passed = all(r["pass"] for r in results)
    return (0 if passed else 1), {"command": "selftest", "results": results, "passed": passed}


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="RNG seed (fallback: $ACNUM_SEED)")
    common.add_argument("--json-out", metavar="PATH", help="write a JSON report to PATH")
    common.add_argument("--trace", action="store_true", help="include audit detail in reports")

    p = _Parser(prog="acnum", description="Rationals as straight-line arithmetic circuits.")
    p.add_argument("--version", action="version", version=f"acnum {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("eval", parents=[common], help="evaluate a circuit exactly")
    e.add_argument("file")

    lw = sub.add_parser("lower", parents=[common], help="lower a circuit to a smaller basis")
    lw.add_argument("file")
    lw.add_argument("--to", required=True, choices=[b.value for b in BasisId])
    lw.add_argument("--cleanup", action="store_true", help="drop gates no output depends on")
    lw.add_argument("--format", choices=["text", "json"], default="text")
    lw.add_argument("-o", "--output")

    q = sub.add_parser("eq", parents=[common], help="randomized equality test")
    q.add_argument("file1")
    q.add_argument("file2")
    q.add_argument("--error", type=float, default=1e-9)
    q.add_argument("--rounds", type=int)
    q.add_argument("--census", action="store_true", help="exhaustive single-round detection rate")

    c = sub.add_parser("cmp", parents=[common], help="decide v(file1) >= v(file2)")
    c.add_argument("file1")
    c.add_argument("file2")
    c.add_argument("--mode", choices=[m.value for m in PrimeMode], default="tight")
    c.add_argument("--strict", action="store_true", help="refine GEQ into GT/EQ")

    s = sub.add_parser("sdp", parents=[common], help="emit a semidefinite program")
    s.add_argument("file")
    s.add_argument("--threshold", metavar="P/Q")
    s.add_argument("--keep-x0", action="store_true")
    s.add_argument("--format", choices=["dat-s", "json"], default="dat-s")
    s.add_argument("--precision", type=int, default=30)
    s.add_argument("--certify", action="store_true")
    s.add_argument("-o", "--output")

    g = sub.add_parser("gen", parents=[common], help="generate a random circuit")
    g.add_argument("--basis", required=True, choices=[b.value for b in BasisId])
    g.add_argument("--size", type=int, required=True)
    g.add_argument("--weights", help="e.g. add=1,mul=2")
    g.add_argument("--max-bits", type=int)
    g.add_argument("--format", choices=["text", "json"], default="text")
    g.add_argument("-o", "--output")

    sub.add_parser("selftest", parents=[common], help="run the built-in worked vectors")
    return p


COMMANDS = {
    "eval": cmd_eval,
    "lower": cmd_lower,
    "eq": cmd_eq,
    "cmp": cmd_cmp,
    "sdp": cmd_sdp,
    "gen": cmd_gen,
    "selftest": cmd_selftest,
}


def run(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    args = build_parser().parse_args(argv)
    try:
        code, report = COMMANDS[args.command](args, out)
        report["exit_code"] = code
        if args.json_out:
            _write(args.json_out, _dump(report), out)
        return code
    except UsageError as exc:
        sys.stderr.write(f"acnum: {exc}\n")
        return EXIT_USAGE
    except _IOFailure as exc:
        sys.stderr.write(f"acnum: {exc}\n")
        return EXIT_IO
    except PromiseViolation as exc:
        sys.stderr.write(f"acnum: promise violated: {exc}\n")
        return 2
    except InternalError as exc:
        sys.stderr.write(f"acnum: internal error: {exc}\n")
        return EXIT_INTERNAL
    except (AcnumError, CircuitError, ValueError) as exc:
        sys.stderr.write(f"acnum: {exc}\n")
        return EXIT_DATA


def main() -> None:
    sys.exit(run())
