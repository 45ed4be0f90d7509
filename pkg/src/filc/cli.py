"""Driver: parse, validate, run the configurable pass pipeline, and emit
SystemVerilog, IL text, or an interpretation result. Machine output goes
to stdout (or -o); diagnostics go to stderr. Exit status 0 iff no
errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .interp import SimError, interpret_control, interpret_structural
from .ir import Empty, count_control_statements
from .parser import ParseError, parse_program, print_program
from .pipeline import PASS_NAMES, PipelineError, canonical_pass, run_pipeline
from .verilog import EmitConfig, emit_verilog, primitives_sv


def build_arg_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="filc",
        description="Compiler and interpreter for the .fil intermediate language.",
    )
    ap.add_argument("input", help="input .fil file")
    ap.add_argument(
        "-b",
        "--backend",
        choices=["verilog", "futil", "interp"],
        default="verilog",
        help="output backend (default: verilog)",
    )
    ap.add_argument("-d", "--data", help="memory image JSON for the interp backend")
    ap.add_argument(
        "--disable",
        action="append",
        default=[],
        metavar="PASS[,PASS...]",
        help=f"disable pipeline passes (known: {', '.join(PASS_NAMES)}; "
        "'static' is an alias for compile-static)",
    )
    ap.add_argument(
        "--emit-after",
        metavar="PASS",
        help="dump IL text after the named pass and stop",
    )
    ap.add_argument(
        "--stats",
        action="store_true",
        help="print JSON stats (cells, groups, control_statements, compile_ms)",
    )
    ap.add_argument(
        "--cycle-limit",
        type=int,
        default=1_000_000,
        help="interpreter cycle limit (default 1000000)",
    )
    ap.add_argument("-o", "--output", help="output path (default: stdout)")
    return ap


def _write_output(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def main(argv: list[str] | None = None) -> int:
    args = build_arg_parser().parse_args(argv)
    try:
        text = Path(args.input).read_text()
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    try:
        prog = parse_program(text, args.input)
    except ParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    disable: set[str] = set()
    for chunk in args.disable:
        for name in chunk.split(","):
            if name.strip():
                try:
                    disable.add(canonical_pass(name))
                except ValueError as e:
                    print(f"error: {e}", file=sys.stderr)
                    return 1

    stats = {
        "cells": sum(len(c.cells) for c in prog.components),
        "groups": sum(len(c.groups) for c in prog.components),
        "control_statements": sum(
            count_control_statements(c.control) for c in prog.components
        ),
    }

    start = time.perf_counter()
    try:
        if args.emit_after is not None:
            until = canonical_pass(args.emit_after)
            result = run_pipeline(prog, disable, until=until)
            _write_output(print_program(result), args.output)
            return 0
        if args.backend == "futil":
            result = run_pipeline(prog, disable)
            out_text = print_program(result)
        elif args.backend == "verilog":
            if "remove-groups" in disable or "compile-control" in disable:
                print(
                    "error: the verilog backend needs compile-control and "
                    "remove-groups enabled",
                    file=sys.stderr,
                )
                return 1
            result = run_pipeline(prog, disable)
            config = EmitConfig(
                top=result.entrypoint, inline_primitives=args.output is None
            )
            out_text = emit_verilog(result, config)
            if args.output is not None:
                out_dir = Path(args.output).parent
                (out_dir / "primitives.sv").write_text(primitives_sv())
                # extern RTL ships next to the emitted design when present
                for ext in result.externs:
                    src_path = Path(args.input).parent / ext.path
                    if src_path.is_file() and src_path.resolve() != (
                        out_dir / src_path.name
                    ).resolve():
                        (out_dir / src_path.name).write_text(src_path.read_text())
        else:  # interp
            result = run_pipeline(prog, disable)
            image = None
            if args.data:
                with open(args.data) as f:
                    image = json.load(f)
            entry = result.component(result.entrypoint)
            lowered = entry is not None and not entry.groups and isinstance(
                entry.control, Empty
            ) and any(p == "done" for p, _ in entry.outputs)
            run = (interpret_structural if lowered else interpret_control)(
                result, image, cycle_limit=args.cycle_limit
            )
            out_text = json.dumps(run.to_json(), indent=2) + "\n"
    except (PipelineError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except SimError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    stats["compile_ms"] = round((time.perf_counter() - start) * 1000, 3)

    if args.stats:
        if args.output is not None:
            _write_output(out_text, args.output)
        sys.stdout.write(json.dumps(stats) + "\n")
        return 0
    _write_output(out_text, args.output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
