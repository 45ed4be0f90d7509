"""Text format for the IL: parser and pretty-printer.

The file format (extension `.fil`) is the contract between frontends and
the compiler. `parse_program` turns UTF-8 text into a Program or raises
ParseError at the first syntax error; `print_program` renders canonical
text such that parse(print(p)) is structurally identical to p.

Bare decimal literals are accepted wherever a sized constant may appear
and are width-inferred: from the destination port when used as a source,
from the opposite operand when used in a comparison, and width 1 when
used as a boolean guard leaf. Printing always emits sized `W'dV`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .ir import (
    Assign,
    Cell,
    CellPort,
    Component,
    ConstPort,
    Control,
    Empty,
    Enable,
    Extern,
    ExternComponent,
    GAnd,
    GCmp,
    GNot,
    GOr,
    GPort,
    GTrue,
    GFalse,
    Group,
    Guard,
    HolePort,
    If,
    IfacePort,
    Par,
    PortRef,
    Program,
    ResolveError,
    Scope,
    Seq,
    TRUE,
    While,
    g_and,
    g_or,
)

UNSIZED = 0  # sentinel width for bare literals awaiting inference


@dataclass
class SourceSpan:
    file: str
    start: int
    end: int
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.col}"


class ParseError(Exception):
    def __init__(self, message: str, span: SourceSpan):
        super().__init__(f"{span}: {message}")
        self.message = message
        self.span = span


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*)
  | (?P<sized>[0-9]+'d[0-9]+)
  | (?P<int>[0-9]+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"[^"\n]*")
  | (?P<op>->|&&|\|\||==|!=|<=|>=|[{}()<>\[\].,;:=?!])
    """,
    re.VERBOSE,
)

KEYWORDS = {
    "component",
    "cells",
    "wires",
    "group",
    "control",
    "seq",
    "par",
    "if",
    "else",
    "while",
    "with",
    "extern",
}


@dataclass
class Token:
    kind: str  # sized | int | id | string | op | eof
    text: str
    span: SourceSpan


def tokenize(text: str, filename: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line = 1
    line_start = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            span = SourceSpan(filename, pos, pos + 1, line, pos - line_start + 1)
            raise ParseError(f"unexpected character {text[pos]!r}", span)
        kind = m.lastgroup
        value = m.group()
        if kind in ("ws", "comment"):
            line += value.count("\n")
            if "\n" in value:
                line_start = m.start() + value.rfind("\n") + 1
        else:
            span = SourceSpan(filename, m.start(), m.end(), line, m.start() - line_start + 1)
            tokens.append(Token(kind, value, span))
        pos = m.end()
    tokens.append(Token("eof", "", SourceSpan(filename, pos, pos, line, pos - line_start + 1)))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.idx = 0

    # -- token plumbing

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.idx + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        t = self.tokens[self.idx]
        if t.kind != "eof":
            self.idx += 1
        return t

    def at(self, text: str) -> bool:
        return self.peek().text == text and self.peek().kind in ("op", "id")

    def eat(self, text: str) -> Optional[Token]:
        if self.at(text):
            return self.next()
        return None

    def expect(self, text: str) -> Token:
        t = self.next()
        if t.text != text:
            raise ParseError(f"expected {text!r}, found {t.text!r}", t.span)
        return t

    def expect_id(self) -> Token:
        t = self.next()
        if t.kind != "id" or t.text in KEYWORDS:
            raise ParseError(f"expected identifier, found {t.text!r}", t.span)
        return t

    def expect_int(self) -> int:
        t = self.next()
        if t.kind != "int":
            raise ParseError(f"expected integer, found {t.text!r}", t.span)
        return int(t.text)

    # -- top level

    def program(self) -> Program:
        prog = Program(components=[], externs=[])
        if self.peek().kind == "eof":
            raise ParseError("expected 'component' or 'extern'", self.peek().span)
        while self.peek().kind != "eof":
            if self.at("extern"):
                prog.externs.append(self.extern())
            elif self.at("component"):
                prog.components.append(self.component())
            else:
                t = self.peek()
                raise ParseError(
                    f"expected 'component' or 'extern', found {t.text!r}", t.span
                )
        return prog

    def extern(self) -> Extern:
        self.expect("extern")
        t = self.next()
        if t.kind != "string":
            raise ParseError(f"expected file path string, found {t.text!r}", t.span)
        ext = Extern(path=t.text[1:-1], components=[])
        self.expect("{")
        while not self.eat("}"):
            self.expect("component")
            name = self.expect_id().text
            inputs = self.port_list()
            self.expect("->")
            outputs = self.port_list()
            self.eat(";")
            ext.components.append(ExternComponent(name, inputs, outputs))
        return ext

    def component(self) -> Component:
        self.expect("component")
        name = self.expect_id().text
        attrs: dict[str, int] = {}
        if self.at("<"):
            attrs.update(self.attributes())
        inputs = self.port_list()
        self.expect("->")
        outputs = self.port_list()
        if self.at("<"):
            attrs.update(self.attributes())
        self.expect("{")
        cells = self.cells()
        groups, continuous = self.wires()
        control = self.control()
        self.expect("}")
        return Component(
            name=name,
            inputs=inputs,
            outputs=outputs,
            cells=cells,
            groups=groups,
            continuous=continuous,
            control=control,
            attributes=attrs,
        )

    def port_list(self) -> list[tuple[str, int]]:
        self.expect("(")
        ports: list[tuple[str, int]] = []
        while not self.eat(")"):
            if ports:
                self.expect(",")
            pname = self.expect_id().text
            self.expect(":")
            ports.append((pname, self.expect_int()))
        return ports

    def attributes(self) -> dict[str, int]:
        self.expect("<")
        attrs: dict[str, int] = {}
        while not self.eat(">"):
            if attrs:
                self.expect(",")
            t = self.next()
            if t.kind != "string":
                raise ParseError(f"expected attribute key string, found {t.text!r}", t.span)
            self.expect("=")
            attrs[t.text[1:-1]] = self.expect_int()
        return attrs

    # -- cells and wires

    def cells(self) -> list[Cell]:
        self.expect("cells")
        self.expect("{")
        out: list[Cell] = []
        while not self.eat("}"):
            name = self.expect_id().text
            self.expect("=")
            proto = self.expect_id().text
            self.expect("(")
            params: list[int] = []
            while not self.eat(")"):
                if params:
                    self.expect(",")
                params.append(self.expect_int())
            self.expect(";")
            out.append(Cell(name=name, proto=proto, params=tuple(params)))
        return out

    def wires(self) -> tuple[list[Group], list[Assign]]:
        self.expect("wires")
        self.expect("{")
        groups: list[Group] = []
        continuous: list[Assign] = []
        while not self.eat("}"):
            if self.at("group"):
                groups.append(self.group())
            else:
                continuous.append(self.assignment())
        return groups, continuous

    def group(self) -> Group:
        self.expect("group")
        name = self.expect_id().text
        attrs = self.attributes() if self.at("<") else {}
        self.expect("{")
        assigns: list[Assign] = []
        while not self.eat("}"):
            assigns.append(self.assignment())
        return Group(name=name, assigns=assigns, attributes=attrs)

    def assignment(self) -> Assign:
        dst_tok = self.peek()
        dst = self.portref()
        if isinstance(dst, ConstPort):
            raise ParseError("constant cannot be assigned to", dst_tok.span)
        self.expect("=")
        expr_tok = self.peek()
        expr = self.guard_expr()
        if self.eat("?"):
            src = self.portref()
            guard = expr
        else:
            if not isinstance(expr, GPort):
                raise ParseError("expected a source port", expr_tok.span)
            src = expr.ref
            guard = TRUE
        self.expect(";")
        return Assign(dst=dst, guard=guard, src=src)

    def portref(self) -> PortRef:
        t = self.peek()
        if t.kind == "sized":
            self.next()
            width_s, value_s = t.text.split("'d")
            return ConstPort(int(width_s), int(value_s))
        if t.kind == "int":
            self.next()
            return ConstPort(UNSIZED, int(t.text))
        name = self.expect_id().text
        if self.eat("."):
            port = self.expect_id().text
            return CellPort(name, port)
        if self.at("["):
            self.expect("[")
            hole_tok = self.next()
            if hole_tok.text not in ("go", "done"):
                raise ParseError(
                    f"expected 'go' or 'done', found {hole_tok.text!r}", hole_tok.span
                )
            self.expect("]")
            return HolePort(name, hole_tok.text)
        return IfacePort(name)

    # -- guards

    def guard_expr(self) -> Guard:
        return self.guard_or()

    def guard_or(self) -> Guard:
        g = self.guard_and()
        parts = [g]
        while self.eat("||"):
            parts.append(self.guard_and())
        return g_or(*parts) if len(parts) > 1 else g

    def guard_and(self) -> Guard:
        g = self.guard_atom()
        parts = [g]
        while self.eat("&&"):
            parts.append(self.guard_atom())
        return g_and(*parts) if len(parts) > 1 else g

    def guard_atom(self) -> Guard:
        if self.eat("!"):
            return GNot(self.guard_atom())
        if self.eat("("):
            g = self.guard_or()
            self.expect(")")
            return g
        left = self.portref()
        for op in ("==", "!=", "<=", ">=", "<", ">"):
            if self.at(op):
                self.next()
                right = self.portref()
                return GCmp(op, left, right)
        return GPort(left)

    # -- control

    def control(self) -> Control:
        self.expect("control")
        return self.stmt_block()

    def stmt_block(self) -> Control:
        self.expect("{")
        stmts: list[Control] = []
        while not self.eat("}"):
            stmts.append(self.stmt())
        if not stmts:
            return Empty()
        if len(stmts) == 1:
            return stmts[0]
        return Seq(stmts)

    def stmt(self) -> Control:
        if self.at("seq") or self.at("par"):
            kind = self.next().text
            self.expect("{")
            children: list[Control] = []
            while not self.eat("}"):
                children.append(self.stmt())
            self.eat(";")
            return Seq(children) if kind == "seq" else Par(children)
        if self.at("if"):
            self.next()
            port = self.portref()
            self.expect("with")
            cond = self.expect_id().text
            then_branch = self.stmt_block()
            else_branch: Control = Empty()
            if self.eat("else"):
                else_branch = self.stmt_block()
            self.eat(";")
            return If(port, cond, then_branch, else_branch)
        if self.at("while"):
            self.next()
            port = self.portref()
            self.expect("with")
            cond = self.expect_id().text
            body = self.stmt_block()
            self.eat(";")
            return While(port, cond, body)
        name = self.expect_id().text
        self.expect(";")
        return Enable(name)


# ---------------------------------------------------------------------------
# Width inference for bare literals


def _resolve_ref(ref: PortRef, width: Optional[int]) -> PortRef:
    if isinstance(ref, ConstPort) and ref.width == UNSIZED and width:
        return ConstPort(width, ref.value)
    return ref


def _resolve_guard(g: Guard, scope: Scope) -> Guard:
    if isinstance(g, GPort):
        return GPort(_resolve_ref(g.ref, 1))
    if isinstance(g, GNot):
        return GNot(_resolve_guard(g.arg, scope))
    if isinstance(g, GAnd):
        return g_and(*(_resolve_guard(a, scope) for a in g.args))
    if isinstance(g, GOr):
        return g_or(*(_resolve_guard(a, scope) for a in g.args))
    if isinstance(g, GCmp):
        left, right = g.left, g.right
        try:
            if isinstance(left, ConstPort) and left.width == UNSIZED:
                left = _resolve_ref(left, scope.width_of(right))
            if isinstance(right, ConstPort) and right.width == UNSIZED:
                right = _resolve_ref(right, scope.width_of(left))
        except ResolveError:
            pass  # undefined references surface in validate
        return GCmp(g.op, left, right)
    return g


def _resolve_assign(a: Assign, scope: Scope) -> None:
    try:
        if isinstance(a.src, ConstPort) and a.src.width == UNSIZED:
            a.src = _resolve_ref(a.src, scope.width_of(a.dst))
    except ResolveError:
        pass
    a.guard = _resolve_guard(a.guard, scope)


def _resolve_widths(prog: Program) -> None:
    for comp in prog.components:
        scope = Scope(prog, comp)
        for _, a in comp.all_assigns():
            _resolve_assign(a, scope)


def parse_program(text: str, filename: str = "<input>") -> Program:
    """Parse IL text. Raises ParseError with a SourceSpan on the first
    syntax error; name/width violations are deferred to validate."""
    tokens = tokenize(text, filename)
    prog = _Parser(tokens).program()
    _resolve_widths(prog)
    return prog


# ---------------------------------------------------------------------------
# Pretty-printer


def _ref_str(ref: PortRef) -> str:
    if isinstance(ref, CellPort):
        return f"{ref.cell}.{ref.port}"
    if isinstance(ref, IfacePort):
        return ref.port
    if isinstance(ref, HolePort):
        return f"{ref.group}[{ref.hole}]"
    if ref.width == UNSIZED:
        return str(ref.value)
    return f"{ref.width}'d{ref.value}"


def _guard_str(g: Guard, prec: int = 0) -> str:
    # precedence: or=1, and=2, atoms=3
    if isinstance(g, GPort):
        return _ref_str(g.ref)
    if isinstance(g, GCmp):
        s = f"{_ref_str(g.left)} {g.op} {_ref_str(g.right)}"
        return f"({s})" if prec >= 3 else s
    if isinstance(g, GNot):
        return f"!{_guard_str(g.arg, 3)}"
    if isinstance(g, GAnd):
        s = " && ".join(_guard_str(a, 2) for a in g.args)
        return f"({s})" if prec > 2 else s
    if isinstance(g, GOr):
        s = " || ".join(_guard_str(a, 1) for a in g.args)
        return f"({s})" if prec > 1 else s
    if isinstance(g, GTrue):
        return "1'd1"
    if isinstance(g, GFalse):
        return "1'd0"
    raise TypeError(f"unprintable guard {g!r}")


def _assign_str(a: Assign) -> str:
    if isinstance(a.guard, GTrue):
        return f"{_ref_str(a.dst)} = {_ref_str(a.src)};"
    return f"{_ref_str(a.dst)} = {_guard_str(a.guard)} ? {_ref_str(a.src)};"


def _attrs_str(attrs: dict[str, int]) -> str:
    if not attrs:
        return ""
    inner = ", ".join(f'"{k}"={v}' for k, v in attrs.items())
    return f"<{inner}>"


def _control_lines(c: Control, indent: int) -> list[str]:
    pad = "  " * indent
    if isinstance(c, Empty):
        return []
    if isinstance(c, Enable):
        return [f"{pad}{c.group};"]
    if isinstance(c, (Seq, Par)):
        kw = "seq" if isinstance(c, Seq) else "par"
        lines = [f"{pad}{kw} {{"]
        for ch in c.children:
            lines.extend(_control_lines(ch, indent + 1))
        lines.append(f"{pad}}}")
        return lines
    if isinstance(c, If):
        lines = [f"{pad}if {_ref_str(c.port)} with {c.cond} {{"]
        lines.extend(_control_lines(c.then_branch, indent + 1))
        if isinstance(c.else_branch, Empty):
            lines.append(f"{pad}}}")
        else:
            lines.append(f"{pad}}} else {{")
            lines.extend(_control_lines(c.else_branch, indent + 1))
            lines.append(f"{pad}}}")
        return lines
    if isinstance(c, While):
        lines = [f"{pad}while {_ref_str(c.port)} with {c.cond} {{"]
        lines.extend(_control_lines(c.body, indent + 1))
        lines.append(f"{pad}}}")
        return lines
    raise TypeError(f"unprintable control {c!r}")


def _ports_str(ports: list[tuple[str, int]]) -> str:
    return ", ".join(f"{p}: {w}" for p, w in ports)


def print_program(prog: Program) -> str:
    """Render canonical text; parse(print(p)) == p structurally."""
    out: list[str] = []
    for ext in prog.externs:
        out.append(f'extern "{ext.path}" {{')
        for sig in ext.components:
            out.append(
                f"  component {sig.name}({_ports_str(sig.inputs)}) -> "
                f"({_ports_str(sig.outputs)});"
            )
        out.append("}")
    for comp in prog.components:
        attrs = _attrs_str(comp.attributes)
        attrs = f" {attrs}" if attrs else ""
        out.append(
            f"component {comp.name}({_ports_str(comp.inputs)}) -> "
            f"({_ports_str(comp.outputs)}){attrs} {{"
        )
        out.append("  cells {")
        for cell in comp.cells:
            params = ", ".join(str(p) for p in cell.params)
            out.append(f"    {cell.name} = {cell.proto}({params});")
        out.append("  }")
        out.append("  wires {")
        for grp in comp.groups:
            out.append(f"    group {grp.name}{_attrs_str(grp.attributes)} {{")
            for a in grp.assigns:
                out.append(f"      {_assign_str(a)}")
            out.append("    }")
        for a in comp.continuous:
            out.append(f"    {_assign_str(a)}")
        out.append("  }")
        body = _control_lines(comp.control, 2)
        if body:
            out.append("  control {")
            out.extend(body)
            out.append("  }")
        else:
            out.append("  control {}")
        out.append("}")
    return "\n".join(out) + "\n"
