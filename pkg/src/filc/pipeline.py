"""The fixed pass pipeline with per-pass disable flags and intermediate
dumps. Order: validate, go-insertion, infer-latency, resource-share,
register-share, compile-static, compile-control, remove-groups.
"""

from __future__ import annotations

from typing import Callable, Optional

from . import passes_compile, passes_opt
from .ir import Program
from .validate import Diagnostic, validate


class PipelineError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("\n".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


def _validate_stage(prog: Program, info: dict) -> Program:
    diags = validate(prog)
    errors = [d for d in diags if d.severity == "error"]
    if errors:
        raise PipelineError(errors)
    return prog


PASSES: list[tuple[str, Callable]] = [
    ("validate", _validate_stage),
    ("go-insertion", lambda p, info: passes_compile.go_insertion(p)),
    ("infer-latency", lambda p, info: passes_opt.infer_latency(p)),
    ("resource-share", passes_opt.resource_share),
    ("register-share", passes_opt.register_share),
    ("compile-static", lambda p, info: passes_compile.compile_static(p)),
    ("compile-control", lambda p, info: passes_compile.compile_control(p)),
    ("remove-groups", lambda p, info: passes_compile.remove_groups(p)),
]

PASS_NAMES = [name for name, _ in PASSES]

ALIASES = {
    "static": "compile-static",
    "sensitive": "compile-static",
    "goinsertion": "go-insertion",
    "share": "resource-share",
}


def canonical_pass(name: str) -> str:
    name = name.strip().lower()
    name = ALIASES.get(name, name)
    if name not in PASS_NAMES:
        raise ValueError(
            f"unknown pass '{name}' (known: {', '.join(PASS_NAMES)})"
        )
    return name


def run_pipeline(
    prog: Program,
    disable: Optional[set[str]] = None,
    until: Optional[str] = None,
    info: Optional[dict] = None,
) -> Program:
    """Run the pipeline, skipping disabled passes; stop after `until`
    when given (for intermediate dumps)."""
    disabled = {canonical_pass(n) for n in (disable or set())}
    if until is not None:
        until = canonical_pass(until)
    if info is None:
        info = {}
    for name, fn in PASSES:
        if name not in disabled:
            prog = fn(prog, info)
        if name == until:
            break
    return prog
