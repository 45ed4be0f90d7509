"""In-memory form of the IL.

A Program is a set of Components plus extern declarations. A Component
holds cells (instances of primitives or other components), groups of
guarded assignments, free-floating continuous assignments, and a control
tree that schedules the groups. Everything downstream (validation,
passes, the interpreter, the Verilog backend) consumes this form.

Port references and guards are frozen (hashable, shareable); the
container types are plain mutable dataclasses. Passes deep-copy a
program before transforming it, so a validated program can be shared
freely.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

GO = "go"
DONE = "done"
CLK = "clk"
RESERVED_PORTS = (GO, DONE, CLK)


# ---------------------------------------------------------------------------
# Port references


@dataclass(frozen=True)
class CellPort:
    """A port on a named cell: `add.left`."""

    cell: str
    port: str


@dataclass(frozen=True)
class IfacePort:
    """A port on the enclosing component's interface: `lhs`."""

    port: str


@dataclass(frozen=True)
class HolePort:
    """A group's 1-bit interface signal: `foo[go]` / `foo[done]`."""

    group: str
    hole: str


@dataclass(frozen=True)
class ConstPort:
    """A sized unsigned literal: `32'd5`."""

    width: int
    value: int


PortRef = Union[CellPort, IfacePort, HolePort, ConstPort]


# ---------------------------------------------------------------------------
# Guards


@dataclass(frozen=True)
class GTrue:
    pass


@dataclass(frozen=True)
class GFalse:
    pass


@dataclass(frozen=True)
class GPort:
    ref: PortRef


@dataclass(frozen=True)
class GNot:
    arg: "Guard"


@dataclass(frozen=True)
class GAnd:
    args: tuple["Guard", ...]


@dataclass(frozen=True)
class GOr:
    args: tuple["Guard", ...]


@dataclass(frozen=True)
class GCmp:
    op: str  # ==, !=, <, >, <=, >=
    left: PortRef
    right: PortRef


Guard = Union[GTrue, GFalse, GPort, GNot, GAnd, GOr, GCmp]

TRUE = GTrue()
FALSE = GFalse()

CMP_OPS = ("==", "!=", "<", ">", "<=", ">=")


def g_and(*parts: Guard) -> Guard:
    """Conjunction: flattened and deduplicated, True units dropped,
    False annihilates."""
    args: list[Guard] = []
    for p in parts:
        if isinstance(p, GTrue):
            continue
        if isinstance(p, GFalse):
            return FALSE
        sub = p.args if isinstance(p, GAnd) else (p,)
        for s in sub:
            if s not in args:
                args.append(s)
    if not args:
        return TRUE
    if len(args) == 1:
        return args[0]
    return GAnd(tuple(args))


def g_or(*parts: Guard) -> Guard:
    """Disjunction: flattened and deduplicated, False units dropped,
    True annihilates."""
    args: list[Guard] = []
    for p in parts:
        if isinstance(p, GFalse):
            continue
        if isinstance(p, GTrue):
            return TRUE
        sub = p.args if isinstance(p, GOr) else (p,)
        for s in sub:
            if s not in args:
                args.append(s)
    if not args:
        return FALSE
    if len(args) == 1:
        return args[0]
    return GOr(tuple(args))


def guard_ports(g: Guard) -> Iterator[PortRef]:
    """Every port reference appearing anywhere in the guard."""
    if isinstance(g, GPort):
        yield g.ref
    elif isinstance(g, GNot):
        yield from guard_ports(g.arg)
    elif isinstance(g, (GAnd, GOr)):
        for a in g.args:
            yield from guard_ports(a)
    elif isinstance(g, GCmp):
        yield g.left
        yield g.right


# ---------------------------------------------------------------------------
# Structure


@dataclass
class Assign:
    dst: PortRef
    guard: Guard
    src: PortRef

    def __post_init__(self) -> None:
        if isinstance(self.dst, ConstPort):
            raise ValueError("constant cannot be an assignment destination")

    def ports(self) -> Iterator[PortRef]:
        yield self.dst
        yield self.src
        yield from guard_ports(self.guard)


@dataclass
class Cell:
    name: str
    proto: str
    params: tuple[int, ...] = ()
    attributes: dict[str, int] = field(default_factory=dict)


@dataclass
class Group:
    name: str
    assigns: list[Assign] = field(default_factory=list)
    attributes: dict[str, int] = field(default_factory=dict)

    def writes_own_done(self) -> bool:
        return any(
            isinstance(a.dst, HolePort) and a.dst.group == self.name and a.dst.hole == DONE
            for a in self.assigns
        )


# ---------------------------------------------------------------------------
# Control


@dataclass
class Empty:
    pass


@dataclass
class Enable:
    group: str


@dataclass
class Seq:
    children: list["Control"] = field(default_factory=list)


@dataclass
class Par:
    children: list["Control"] = field(default_factory=list)


@dataclass
class If:
    port: PortRef
    cond: str
    then_branch: "Control" = field(default_factory=Empty)
    else_branch: "Control" = field(default_factory=Empty)


@dataclass
class While:
    port: PortRef
    cond: str
    body: "Control" = field(default_factory=Empty)


Control = Union[Empty, Enable, Seq, Par, If, While]


def control_nodes(c: Control) -> Iterator[Control]:
    """Pre-order walk over every node of a control tree."""
    yield c
    if isinstance(c, (Seq, Par)):
        for ch in c.children:
            yield from control_nodes(ch)
    elif isinstance(c, If):
        yield from control_nodes(c.then_branch)
        yield from control_nodes(c.else_branch)
    elif isinstance(c, While):
        yield from control_nodes(c.body)


def enabled_groups(c: Control) -> set[str]:
    """Names of all groups referenced by the control tree (enables and
    `with` condition groups alike)."""
    out: set[str] = set()
    for node in control_nodes(c):
        if isinstance(node, Enable):
            out.add(node.group)
        elif isinstance(node, (If, While)):
            out.add(node.cond)
    return out


def count_control_statements(c: Control) -> int:
    """Every node except Empty counts as one control statement."""
    return sum(1 for node in control_nodes(c) if not isinstance(node, Empty))


# ---------------------------------------------------------------------------
# Components and programs


@dataclass
class Component:
    name: str
    inputs: list[tuple[str, int]] = field(default_factory=list)
    outputs: list[tuple[str, int]] = field(default_factory=list)
    cells: list[Cell] = field(default_factory=list)
    groups: list[Group] = field(default_factory=list)
    continuous: list[Assign] = field(default_factory=list)
    control: Control = field(default_factory=Empty)
    attributes: dict[str, int] = field(default_factory=dict)

    def cell(self, name: str) -> Optional[Cell]:
        for c in self.cells:
            if c.name == name:
                return c
        return None

    def group(self, name: str) -> Optional[Group]:
        for g in self.groups:
            if g.name == name:
                return g
        return None

    def all_assigns(self) -> Iterator[tuple[Optional[Group], Assign]]:
        for g in self.groups:
            for a in g.assigns:
                yield g, a
        for a in self.continuous:
            yield None, a

    def used_names(self) -> set[str]:
        names = {c.name for c in self.cells}
        names.update(g.name for g in self.groups)
        names.update(p for p, _ in self.inputs)
        names.update(p for p, _ in self.outputs)
        return names


@dataclass
class ExternComponent:
    """Signature-only component backed by an external RTL file."""

    name: str
    inputs: list[tuple[str, int]] = field(default_factory=list)
    outputs: list[tuple[str, int]] = field(default_factory=list)


@dataclass
class Extern:
    path: str
    components: list[ExternComponent] = field(default_factory=list)


@dataclass
class Program:
    components: list[Component] = field(default_factory=list)
    externs: list[Extern] = field(default_factory=list)
    entrypoint: str = "main"

    def component(self, name: str) -> Optional[Component]:
        for c in self.components:
            if c.name == name:
                return c
        return None

    def extern_component(self, name: str) -> Optional[ExternComponent]:
        for e in self.externs:
            for c in e.components:
                if c.name == name:
                    return c
        return None

    def copy(self) -> "Program":
        return copy.deepcopy(self)


# ---------------------------------------------------------------------------
# Name resolution

IN = "in"
OUT = "out"


class ResolveError(Exception):
    pass


class Scope:
    """Resolves cell prototypes and port widths within one component.

    Component instances expose their declared ports plus the implicit
    1-bit `go` input and `done` output; those interface ports only become
    textual ports of the component itself during RemoveGroups.
    """

    def __init__(self, program: Program, component: Component, library=None):
        from . import primitives  # local import to avoid a cycle

        self.program = program
        self.component = component
        self.library = library if library is not None else primitives.library()

    def cell_ports(self, cell: Cell) -> dict[str, tuple[int, str]]:
        """Map port name -> (width, direction) for a cell instance."""
        prim = self.library.get(cell.proto)
        if prim is not None:
            return prim.ports(cell.params)
        comp = self.program.component(cell.proto)
        if comp is not None:
            ports = {p: (w, IN) for p, w in comp.inputs}
            ports.update({p: (w, OUT) for p, w in comp.outputs})
            ports.setdefault(GO, (1, IN))
            ports.setdefault(DONE, (1, OUT))
            return ports
        ext = self.program.extern_component(cell.proto)
        if ext is not None:
            ports = {p: (w, IN) for p, w in ext.inputs}
            ports.update({p: (w, OUT) for p, w in ext.outputs})
            return ports
        raise ResolveError(f"unknown prototype '{cell.proto}' for cell '{cell.name}'")

    def width_of(self, ref: PortRef) -> int:
        if isinstance(ref, ConstPort):
            return ref.width
        if isinstance(ref, HolePort):
            return 1
        if isinstance(ref, IfacePort):
            for p, w in self.component.inputs + self.component.outputs:
                if p == ref.port:
                    return w
            if ref.port in (GO, DONE):
                return 1
            raise ResolveError(
                f"no interface port '{ref.port}' on component '{self.component.name}'"
            )
        cell = self.component.cell(ref.cell)
        if cell is None:
            raise ResolveError(f"no cell '{ref.cell}' in component '{self.component.name}'")
        ports = self.cell_ports(cell)
        if ref.port not in ports:
            raise ResolveError(f"cell '{ref.cell}' ({cell.proto}) has no port '{ref.port}'")
        return ports[ref.port][0]

    def direction_of(self, ref: PortRef) -> Optional[str]:
        """IN/OUT for cell and interface ports; None for holes,
        constants, and anything unresolvable."""
        if isinstance(ref, (ConstPort, HolePort)):
            return None
        if isinstance(ref, IfacePort):
            if any(p == ref.port for p, _ in self.component.inputs):
                return IN
            if any(p == ref.port for p, _ in self.component.outputs):
                return OUT
            return None
        cell = self.component.cell(ref.cell)
        if cell is None:
            return None
        try:
            ports = self.cell_ports(cell)
        except (ResolveError, ValueError):
            return None
        if ref.port not in ports:
            return None
        return ports[ref.port][1]


def clog2(n: int) -> int:
    """Bits needed to represent values 0..n-1 (at least 1)."""
    assert n >= 1
    return max(1, (n - 1).bit_length())
