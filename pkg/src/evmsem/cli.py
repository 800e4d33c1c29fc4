"""Command-line front end.

Exit codes: 0 success/match, 1 mismatch or violated property, 2 usage or
parse errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bytecode import AsmError, assemble, disassemble_text
from .checkers import CHECKERS
from .fixtures import FixtureError, check_expectations, ingest_official_tests, parse_fixture
from .semantics import BudgetExhausted, StepBudget
from .traces import action_to_json
from .transaction import execute_transaction
from .words import bytes_to_hex, hex_to_address, hex_to_bytes, hex_to_word


def _addr_list(text):
    return [hex_to_address(a) for a in text.split(",") if a]


def cmd_run(args) -> int:
    fixture = parse_fixture(args.fixture)
    limits = StepBudget(args.max_steps)
    try:
        sigma, trace, receipt = execute_transaction(
            fixture.tx, fixture.header, fixture.pre, limits, fixture.ancestors)
    except BudgetExhausted as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(json.dumps(receipt.to_json(), indent=1))
    if args.trace:
        out = sys.stdout if args.trace == "-" else open(args.trace, "w")
        try:
            for action in trace:
                out.write(json.dumps(action_to_json(action)) + "\n")
        finally:
            if out is not sys.stdout:
                out.close()
    if args.expect:
        problems = check_expectations(fixture, sigma, receipt)
        for p in problems:
            print(f"mismatch: {p}", file=sys.stderr)
        if problems:
            return 1
        print("expectations match")
    return 0


def _parse_values(text):
    return [hex_to_word(v) if v.startswith("0x") else int(v)
            for v in text.split(",")]


def cmd_check(args) -> int:
    fixture = parse_fixture(args.fixture)
    params = fixture.checker_params   # flags override the fixture's sets
    if args.untrusted:
        params["untrusted"] = _addr_list(args.untrusted)
    if args.allowed:
        params["allowed"] = _addr_list(args.allowed)
    if args.gas_values:
        params["gas_values"] = _parse_values(args.gas_values)
    if args.component and args.values:
        cv = dict(params.get("components", {}))
        cv[args.component] = _parse_values(args.values)
        params["components"] = cv
    if args.variants:
        variants = []
        for path in sorted(Path(args.variants).iterdir()):
            if path.suffix in (".hex", ".bin"):
                variants.append(hex_to_bytes(path.read_text().strip()))
            elif path.suffix == ".easm":
                variants.append(assemble(path.read_text()))
        if not variants:
            print("error: no .hex/.easm variants in directory", file=sys.stderr)
            return 2
        params["code_variants"] = {a: variants for a in params.get("untrusted", ())}
    if args.mode:
        params["mode"] = args.mode

    checker = CHECKERS.get(args.property)
    if checker is None:
        print(f"error: unknown property {args.property!r}; choose from "
              f"{', '.join(sorted(CHECKERS))}", file=sys.stderr)
        return 2
    space = fixture.space(max_steps=args.max_steps, relaxed_gas=args.relaxed_gas)
    call_params = dict(params)
    if args.component:
        call_params["components"] = [args.component]
    verdict = checker(space, fixture.contract(), call_params)
    print(json.dumps(verdict.to_json(), indent=1))
    if args.expect:
        want = fixture.expect.get("verdicts", {}).get(args.property)
        if want is None:
            print(f"mismatch: fixture declares no expected verdict for "
                  f"{args.property}", file=sys.stderr)
            return 1
        if verdict.result != want:
            print(f"mismatch: expected {want}, got {verdict.result}", file=sys.stderr)
            return 1
        print("expectations match")
        return 0
    return 1 if verdict.violated else 0


def cmd_asm(args) -> int:
    text = Path(args.source).read_text() if args.source != "-" else sys.stdin.read()
    code = assemble(text)
    out = bytes_to_hex(code)
    if args.output:
        Path(args.output).write_text(out + "\n")
    else:
        print(out)
    return 0


def cmd_disasm(args) -> int:
    src = args.code
    if not src.startswith("0x"):
        src = Path(src).read_text().strip()
    print(disassemble_text(hex_to_bytes(src)))
    return 0


def cmd_ingest(args) -> int:
    fixtures, skipped = ingest_official_tests(args.directory)
    for f in fixtures:
        print(f"ok      {f.name}")
    for src, reason in skipped:
        print(f"skipped {src}: {reason}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evmsem")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a fixture transaction")
    p_run.add_argument("fixture")
    p_run.add_argument("--trace", metavar="FILE",
                       help="write the JSON-lines action trace (- for stdout)")
    p_run.add_argument("--expect", action="store_true",
                       help="compare against the fixture's expect section")
    p_run.add_argument("--max-steps", type=int, default=1_000_000)
    p_run.set_defaults(fn=cmd_run)

    p_check = sub.add_parser("check", help="run a security checker")
    p_check.add_argument("property")
    p_check.add_argument("fixture")
    p_check.add_argument("--untrusted", help="comma-separated addresses")
    p_check.add_argument("--allowed", help="comma-separated addresses")
    p_check.add_argument("--gas-values", help="comma-separated gas values")
    p_check.add_argument("--component",
                         help="transaction-environment component to vary")
    p_check.add_argument("--values", help="comma-separated component values")
    p_check.add_argument("--variants", metavar="DIR",
                         help="directory of .hex/.easm code variants")
    p_check.add_argument("--mode", choices=["direct", "theorem1"])
    p_check.add_argument("--relaxed-gas", action="store_true",
                         help="ignore the gas argument when comparing traces")
    p_check.add_argument("--expect", action="store_true")
    p_check.add_argument("--max-steps", type=int, default=None)
    p_check.set_defaults(fn=cmd_check)

    p_asm = sub.add_parser("asm", help="assemble a text program")
    p_asm.add_argument("source", help="assembly file (- for stdin)")
    p_asm.add_argument("-o", "--output")
    p_asm.set_defaults(fn=cmd_asm)

    p_dis = sub.add_parser("disasm", help="disassemble hex bytecode")
    p_dis.add_argument("code", help="0x-prefixed hex or a file containing it")
    p_dis.set_defaults(fn=cmd_disasm)

    p_ing = sub.add_parser("ingest", help="translate GeneralStateTest JSON")
    p_ing.add_argument("directory")
    p_ing.set_defaults(fn=cmd_ingest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (FixtureError, AsmError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
