"""SystemVerilog emission for fully lowered programs.

One module per component: a wire per cell port, primitive/sub-component
instantiations with the clock threaded through, and one continuous
assignment per driven port folding its guarded assignments into a
right-nested ternary chain with a '0 default. Output is deterministic:
everything is ordered by declaration.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field
from typing import Optional

from . import primitives
from .ir import (
    Assign,
    CellPort,
    Component,
    ConstPort,
    Empty,
    GAnd,
    GCmp,
    GNot,
    GOr,
    GPort,
    GTrue,
    Guard,
    IfacePort,
    IN,
    PortRef,
    Program,
    Scope,
)


class EmitError(Exception):
    pass


@dataclass
class EmitConfig:
    top: str = "main"
    inline_primitives: bool = False
    extern_files: list[str] = field(default_factory=list)


_PARAM_NAMES = {
    "std_reg": ["WIDTH"],
    "std_add": ["WIDTH"],
    "std_sub": ["WIDTH"],
    "std_lt": ["WIDTH"],
    "std_gt": ["WIDTH"],
    "std_eq": ["WIDTH"],
    "std_neq": ["WIDTH"],
    "std_le": ["WIDTH"],
    "std_ge": ["WIDTH"],
    "std_const": ["WIDTH", "VALUE"],
    "std_mem_d1": ["WIDTH", "SIZE", "ADDR_WIDTH"],
    "std_mult_seq": ["WIDTH"],
    "std_mac": ["WIDTH"],
    "std_counter": ["WIDTH"],
}

_STATEFUL = {"std_reg", "std_mem_d1", "std_mult_seq", "std_mac", "std_counter"}


class _Names:
    """Injective sanitization of (cell, port) pairs into wire names."""

    def __init__(self, reserved: set[str]):
        self.taken = set(reserved)
        self.map: dict[tuple, str] = {}

    def wire(self, cell: str, port: str) -> str:
        key = (cell, port)
        if key in self.map:
            return self.map[key]
        base = f"{cell}_{port}"
        name = base
        n = 0
        while name in self.taken:
            name = f"{base}_{n}"
            n += 1
        self.taken.add(name)
        self.map[key] = name
        return name


def primitives_sv() -> str:
    return (
        importlib.resources.files("filc").joinpath("primitives.sv").read_text()
    )


def emit_verilog(prog: Program, config: Optional[EmitConfig] = None) -> str:
    """Emit one module per component. Refuses un-lowered input."""
    config = config or EmitConfig()
    top = prog.component(config.top)
    if top is None:
        raise EmitError(f"top component '{config.top}' does not exist")
    out: list[str] = []
    if config.inline_primitives:
        out.append(primitives_sv().rstrip())
        out.append("")
    extern_files = [e.path for e in prog.externs]
    if extern_files:
        out.append("// extern RTL files to include in the build:")
        for path in extern_files:
            out.append(f"//   {path}")
        out.append("")
    for comp in prog.components:
        out.append(_emit_component(prog, comp))
        out.append("")
    return "\n".join(out).rstrip() + "\n"


def _decl(width: int, name: str, direction: str = "") -> str:
    vec = f"[{width - 1}:0] " if width > 1 else ""
    if direction:
        return f"{direction} logic {vec}{name}"
    return f"logic {vec}{name};"


def _emit_component(prog: Program, comp: Component) -> str:
    if comp.groups or not isinstance(comp.control, Empty):
        raise EmitError(
            f"component '{comp.name}' still has groups or control; lower it first"
        )
    scope = Scope(prog, comp)
    lib = primitives.library()
    iface_names = {p for p, _ in comp.inputs + comp.outputs} | {"clk"}
    names = _Names(iface_names)

    lines: list[str] = []
    ports = [_decl(w, p, "input") for p, w in comp.inputs]
    ports.append("input logic clk")
    ports += [_decl(w, p, "output") for p, w in comp.outputs]
    lines.append(f"module {comp.name}(")
    lines.append("  " + ",\n  ".join(ports))
    lines.append(");")

    # wire declarations, in cell declaration order
    cell_port_map: dict[str, dict[str, tuple[int, str]]] = {}
    for cell in comp.cells:
        pmap = scope.cell_ports(cell)
        cell_port_map[cell.name] = pmap
        for pname, (w, _d) in pmap.items():
            lines.append(f"  {_decl(w, names.wire(cell.name, pname))}")

    # instantiations
    for cell in comp.cells:
        pmap = cell_port_map[cell.name]
        conns = [f".{p}({names.wire(cell.name, p)})" for p in pmap]
        if cell.proto in lib:
            if cell.proto in _STATEFUL:
                conns.append(".clk(clk)")
            pnames = _PARAM_NAMES[cell.proto]
            params = ", ".join(
                f".{pn}({pv})" for pn, pv in zip(pnames, cell.params)
            )
            lines.append(
                f"  {cell.proto} #({params}) {cell.name} ({', '.join(conns)});"
            )
        elif prog.component(cell.proto) is not None:
            conns.append(".clk(clk)")
            lines.append(f"  {cell.proto} {cell.name} ({', '.join(conns)});")
        else:
            # extern: bare instantiation, source file listed in the header
            lines.append(f"  {cell.proto} {cell.name} ({', '.join(conns)});")

    def ref_expr(ref: PortRef) -> str:
        if isinstance(ref, ConstPort):
            return f"{ref.width}'d{ref.value}"
        if isinstance(ref, IfacePort):
            return ref.port
        if isinstance(ref, CellPort):
            return names.wire(ref.cell, ref.port)
        raise EmitError(f"hole {ref.group}[{ref.hole}] survived lowering")

    def guard_expr(g: Guard, prec: int = 0) -> str:
        if isinstance(g, GTrue):
            return "1'd1"
        if isinstance(g, GPort):
            return ref_expr(g.ref)
        if isinstance(g, GNot):
            return f"!{guard_expr(g.arg, 3)}"
        if isinstance(g, GCmp):
            s = f"{ref_expr(g.left)} {g.op} {ref_expr(g.right)}"
            return f"({s})" if prec >= 3 else s
        if isinstance(g, GAnd):
            s = " && ".join(guard_expr(a, 2) for a in g.args)
            return f"({s})" if prec > 2 else s
        if isinstance(g, GOr):
            s = " || ".join(guard_expr(a, 1) for a in g.args)
            return f"({s})" if prec > 1 else s
        raise EmitError(f"cannot emit guard {g!r}")

    # one continuous assignment per driven port, declaration order
    by_dst: dict[PortRef, list[Assign]] = {}
    dst_order: list[PortRef] = []
    for a in comp.continuous:
        if a.dst not in by_dst:
            by_dst[a.dst] = []
            dst_order.append(a.dst)
        by_dst[a.dst].append(a)

    def dst_expr(ref: PortRef) -> str:
        if isinstance(ref, IfacePort):
            return ref.port
        return names.wire(ref.cell, ref.port)

    for dst in dst_order:
        chain = "'d0"
        for a in reversed(by_dst[dst]):
            if isinstance(a.guard, GTrue):
                chain = ref_expr(a.src)
            else:
                chain = f"{guard_expr(a.guard, 3)} ? {ref_expr(a.src)} : ({chain})"
        lines.append(f"  assign {dst_expr(dst)} = {chain};")

    # undriven cell inputs and component outputs default to zero
    driven = set(by_dst)
    for cell in comp.cells:
        for pname, (_w, d) in cell_port_map[cell.name].items():
            if d == IN and CellPort(cell.name, pname) not in driven:
                lines.append(f"  assign {names.wire(cell.name, pname)} = 'd0;")
    for pname, _w in comp.outputs:
        if IfacePort(pname) not in driven:
            lines.append(f"  assign {pname} = 'd0;")

    lines.append("endmodule")
    return "\n".join(lines)
