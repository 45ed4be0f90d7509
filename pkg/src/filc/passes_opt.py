"""Control-flow-aware optimizations: combinational resource sharing,
liveness-based register sharing over parallel control-flow graphs, and
latency inference.

All three are pure program-to-program rewrites with fixed traversal
orders, so identical inputs produce identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import primitives
from .ir import (
    Cell,
    CellPort,
    Component,
    ConstPort,
    Control,
    DONE,
    Empty,
    Enable,
    GAnd,
    GCmp,
    GNot,
    GOr,
    GPort,
    GO,
    Group,
    Guard,
    HolePort,
    If,
    Par,
    PortRef,
    Program,
    Seq,
    TRUE,
    While,
    control_nodes,
    guard_ports,
)
from .passes_compile import strip_own_go


def _groups_in(node: Control) -> set[str]:
    """Groups that may execute inside a control subtree (enables plus
    condition groups)."""
    out: set[str] = set()
    for n in control_nodes(node):
        if isinstance(n, Enable):
            out.add(n.group)
        elif isinstance(n, (If, While)):
            out.add(n.cond)
    return out


# ---------------------------------------------------------------------------
# Resource sharing (combinational cells)


def build_conflict_graph(control: Control) -> set[frozenset]:
    """Edges between groups that may run in parallel: for every par node,
    each group occurring inside one child conflicts with every group
    inside each other child. seq/if/while ordering adds no edges."""
    edges: set[frozenset] = set()

    def walk(node: Control) -> None:
        if isinstance(node, Par):
            child_groups = [_groups_in(c) for c in node.children]
            for i in range(len(child_groups)):
                for j in range(i + 1, len(child_groups)):
                    for a in child_groups[i]:
                        for b in child_groups[j]:
                            if a != b:
                                edges.add(frozenset((a, b)))
        if isinstance(node, (Seq, Par)):
            for c in node.children:
                walk(c)
        elif isinstance(node, If):
            walk(node.then_branch)
            walk(node.else_branch)
        elif isinstance(node, While):
            walk(node.body)

    walk(control)
    return edges


def _proto_attributes(prog: Program, cell: Cell, library) -> dict[str, int]:
    prim = library.get(cell.proto)
    if prim is not None:
        return prim.attributes
    comp = prog.component(cell.proto)
    if comp is not None:
        return comp.attributes
    return {}


def _rename_ref(ref: PortRef, mapping: dict[str, str]) -> PortRef:
    if isinstance(ref, CellPort) and ref.cell in mapping:
        return CellPort(mapping[ref.cell], ref.port)
    return ref


def _rename_guard(g: Guard, mapping: dict[str, str]) -> Guard:
    if isinstance(g, GPort):
        return GPort(_rename_ref(g.ref, mapping))
    if isinstance(g, GNot):
        return GNot(_rename_guard(g.arg, mapping))
    if isinstance(g, GAnd):
        return GAnd(tuple(_rename_guard(a, mapping) for a in g.args))
    if isinstance(g, GOr):
        return GOr(tuple(_rename_guard(a, mapping) for a in g.args))
    if isinstance(g, GCmp):
        return GCmp(g.op, _rename_ref(g.left, mapping), _rename_ref(g.right, mapping))
    return g


def _rename_in_group(grp: Group, mapping: dict[str, str]) -> None:
    for a in grp.assigns:
        a.dst = _rename_ref(a.dst, mapping)
        a.src = _rename_ref(a.src, mapping)
        a.guard = _rename_guard(a.guard, mapping)


def _rename_control_ports(comp: Component, per_group: dict[str, dict[str, str]]) -> None:
    """The port of an if/while is produced by its condition group; follow
    that group's rename map."""

    def walk(node: Control) -> None:
        if isinstance(node, (Seq, Par)):
            for c in node.children:
                walk(c)
        elif isinstance(node, If):
            node.port = _rename_ref(node.port, per_group.get(node.cond, {}))
            walk(node.then_branch)
            walk(node.else_branch)
        elif isinstance(node, While):
            node.port = _rename_ref(node.port, per_group.get(node.cond, {}))
            walk(node.body)

    walk(comp.control)


def _cells_referenced(comp: Component) -> set[str]:
    used: set[str] = set()
    for _, a in comp.all_assigns():
        for ref in a.ports():
            if isinstance(ref, CellPort):
                used.add(ref.cell)
    for node in control_nodes(comp.control):
        if isinstance(node, (If, While)) and isinstance(node.port, CellPort):
            used.add(node.port.cell)
    return used


def resource_share(prog: Program, info: Optional[dict] = None) -> Program:
    """Greedy coloring of the group conflict graph per shareable
    prototype class; group-local rewrites; unused instances dropped."""
    prog = prog.copy()
    library = primitives.library()
    for comp in prog.components:
        edges = build_conflict_graph(comp.control)

        def conflicts(a: str, b: str) -> bool:
            return frozenset((a, b)) in edges

        classes: dict[tuple, list[str]] = {}
        for cell in comp.cells:
            if _proto_attributes(prog, cell, library).get("share") == 1:
                classes.setdefault((cell.proto, cell.params), []).append(cell.name)

        per_group: dict[str, dict[str, str]] = {g.name: {} for g in comp.groups}
        for key in sorted(classes, key=lambda k: (k[0], k[1])):
            instances = classes[key]
            index = {name: i for i, name in enumerate(instances)}
            # which groups use which instances of this class
            uses: dict[str, list[str]] = {}
            for grp in comp.groups:
                seen: list[str] = []
                for a in grp.assigns:
                    for ref in a.ports():
                        if (
                            isinstance(ref, CellPort)
                            and ref.cell in index
                            and ref.cell not in seen
                        ):
                            seen.append(ref.cell)
                if seen:
                    uses[grp.name] = sorted(seen, key=lambda n: index[n])
            assigned: dict[str, dict[str, str]] = {}  # group -> {old: rep}
            for grp in comp.groups:
                if grp.name not in uses:
                    continue
                chosen: dict[str, str] = {}
                for old in uses[grp.name]:
                    rep = None
                    for cand in instances:
                        if cand in chosen.values():
                            continue
                        clash = any(
                            conflicts(grp.name, other)
                            and cand in assigned.get(other, {}).values()
                            for other in uses
                            if other != grp.name
                        )
                        if not clash:
                            rep = cand
                            break
                    chosen[old] = rep if rep is not None else old
                assigned[grp.name] = chosen
                for old, rep in chosen.items():
                    if old != rep:
                        per_group[grp.name][old] = rep

        renamed_classes = {
            name for names in classes.values() for name in names
        }
        any_rename = False
        for grp in comp.groups:
            mapping = per_group[grp.name]
            if mapping:
                any_rename = True
                _rename_in_group(grp, mapping)
        if any_rename:
            _rename_control_ports(comp, per_group)
            used = _cells_referenced(comp)
            comp.cells = [
                c for c in comp.cells if c.name not in renamed_classes or c.name in used
            ]
        if info is not None:
            info.setdefault("resource_renames", {})[comp.name] = {
                g: m for g, m in per_group.items() if m
            }
    return prog


# ---------------------------------------------------------------------------
# Read/write sets over registers


def _register_names(comp: Component) -> list[str]:
    return [c.name for c in comp.cells if c.proto == "std_reg"]


@dataclass
class AccessSets:
    may_read: dict[str, set[str]]
    must_write: dict[str, set[str]]
    may_write: dict[str, set[str]]


def read_write_sets(comp: Component) -> AccessSets:
    """Conservative register access summaries per group: may-read from
    any out/done appearance, must-write only for the unguarded
    write_en=1 plus r.in pattern."""
    regs = set(_register_names(comp))
    may_read: dict[str, set[str]] = {}
    must_write: dict[str, set[str]] = {}
    may_write: dict[str, set[str]] = {}
    for grp in comp.groups:
        reads: set[str] = set()
        writes_in: set[str] = set()
        unguarded_we: set[str] = set()
        any_write: set[str] = set()
        for a in grp.assigns:
            refs = [a.src] + list(guard_ports(a.guard))
            for ref in refs:
                if isinstance(ref, CellPort) and ref.cell in regs and ref.port in (
                    "out",
                    "done",
                ):
                    reads.add(ref.cell)
            if isinstance(a.dst, CellPort) and a.dst.cell in regs:
                if a.dst.port == "in":
                    writes_in.add(a.dst.cell)
                    any_write.add(a.dst.cell)
                elif a.dst.port == "write_en":
                    any_write.add(a.dst.cell)
                    if (
                        isinstance(a.src, ConstPort)
                        and a.src.value == 1
                        and isinstance(strip_own_go(a.guard, grp.name), type(TRUE))
                    ):
                        unguarded_we.add(a.dst.cell)
        may_read[grp.name] = reads
        must_write[grp.name] = unguarded_we & writes_in
        may_write[grp.name] = any_write
    return AccessSets(may_read, must_write, may_write)


# ---------------------------------------------------------------------------
# Parallel control-flow graphs


@dataclass
class PcfgNode:
    id: int
    kind: str  # entry | exit | group | merge | pnode
    group: Optional[str] = None
    child_graphs: list["Pcfg"] = field(default_factory=list)
    child_controls: list[Control] = field(default_factory=list)


@dataclass
class Pcfg:
    nodes: list[PcfgNode] = field(default_factory=list)
    succs: dict[int, list[int]] = field(default_factory=dict)
    entry: int = 0
    exit: int = 1

    def new_node(self, kind: str, group: Optional[str] = None) -> PcfgNode:
        n = PcfgNode(len(self.nodes), kind, group)
        self.nodes.append(n)
        self.succs[n.id] = []
        return n

    def edge(self, a: int, b: int) -> None:
        if b not in self.succs[a]:
            self.succs[a].append(b)


def build_pcfg(control: Control) -> Pcfg:
    """Enables become nodes, seq chains, if branches and merges, while
    back-edges; each par becomes a single p-node containing one sub-graph
    per child."""
    g = Pcfg()
    entry = g.new_node("entry")
    exit_ = g.new_node("exit")
    g.entry, g.exit = entry.id, exit_.id

    def segment(node: Control, frm: int, to: int) -> None:
        if isinstance(node, Empty):
            g.edge(frm, to)
        elif isinstance(node, Enable):
            n = g.new_node("group", node.group)
            g.edge(frm, n.id)
            g.edge(n.id, to)
        elif isinstance(node, Seq):
            if not node.children:
                g.edge(frm, to)
                return
            points = [frm]
            for _ in node.children[:-1]:
                points.append(g.new_node("merge").id)
            points.append(to)
            for child, a, b in zip(node.children, points, points[1:]):
                segment(child, a, b)
        elif isinstance(node, Par):
            p = g.new_node("pnode")
            p.child_graphs = [build_pcfg(c) for c in node.children]
            p.child_controls = list(node.children)
            g.edge(frm, p.id)
            g.edge(p.id, to)
        elif isinstance(node, If):
            c = g.new_node("group", node.cond)
            m = g.new_node("merge")
            g.edge(frm, c.id)
            segment(node.then_branch, c.id, m.id)
            segment(node.else_branch, c.id, m.id)
            g.edge(m.id, to)
        elif isinstance(node, While):
            c = g.new_node("group", node.cond)
            g.edge(frm, c.id)
            segment(node.body, c.id, c.id)
            g.edge(c.id, to)
        else:
            raise TypeError(f"unknown control node {node!r}")

    segment(control, entry.id, exit_.id)
    return g


def _definite_writes(comp_sets: AccessSets, node: Control) -> set[str]:
    """Registers certainly written by executing a control subtree."""
    if isinstance(node, Enable):
        return set(comp_sets.must_write.get(node.group, set()))
    if isinstance(node, (Seq, Par)):
        out: set[str] = set()
        for c in node.children:
            out |= _definite_writes(comp_sets, c)
        return out
    if isinstance(node, If):
        return (
            set(comp_sets.must_write.get(node.cond, set()))
            | (
                _definite_writes(comp_sets, node.then_branch)
                & _definite_writes(comp_sets, node.else_branch)
            )
        )
    if isinstance(node, While):
        return set(comp_sets.must_write.get(node.cond, set()))
    return set()


def _all_reads(comp_sets: AccessSets, node: Control) -> set[str]:
    out: set[str] = set()
    for g in _groups_in(node):
        out |= comp_sets.may_read.get(g, set())
    return out


def _all_may_writes(comp_sets: AccessSets, node: Control) -> set[str]:
    out: set[str] = set()
    for g in _groups_in(node):
        out |= comp_sets.may_write.get(g, set())
    return out


@dataclass
class NodeLive:
    kind: str
    group: Optional[str]
    live_in: set[str]
    live_out: set[str]
    may_write: set[str]


@dataclass
class LivenessResult:
    records: list[NodeLive] = field(default_factory=list)
    pnode_scopes: list[list[int]] = field(default_factory=list)  # record indices


def liveness(
    pcfg: Pcfg, sets: AccessSets, exit_liveout: Optional[set] = None
) -> LivenessResult:
    """Backward may-liveness to fixpoint. A p-node reads the union of its
    children's reads and must-writes the union of their definite writes;
    each child graph is then solved with its exit live-out pinned to the
    p-node's live-out."""
    result = LivenessResult()
    _solve(pcfg, sets, exit_liveout or set(), result)
    return result


def _node_sets(sets: AccessSets, n: PcfgNode) -> tuple[set, set, set]:
    if n.kind == "group":
        return (
            set(sets.may_read.get(n.group, set())),
            set(sets.must_write.get(n.group, set())),
            set(sets.may_write.get(n.group, set())),
        )
    if n.kind == "pnode":
        reads: set[str] = set()
        musts: set[str] = set()
        mays: set[str] = set()
        for ctrl in n.child_controls:
            reads |= _all_reads(sets, ctrl)
            musts |= _definite_writes(sets, ctrl)
            mays |= _all_may_writes(sets, ctrl)
        return reads, musts, mays
    return set(), set(), set()


def _solve(pcfg: Pcfg, sets: AccessSets, exit_liveout: set, result: LivenessResult) -> list[int]:
    reads: dict[int, set] = {}
    must: dict[int, set] = {}
    mays: dict[int, set] = {}
    for n in pcfg.nodes:
        reads[n.id], must[n.id], mays[n.id] = _node_sets(sets, n)

    live_in: dict[int, set] = {n.id: set() for n in pcfg.nodes}
    live_out: dict[int, set] = {n.id: set() for n in pcfg.nodes}
    live_out[pcfg.exit] = set(exit_liveout)
    changed = True
    while changed:
        changed = False
        for n in reversed(pcfg.nodes):
            out = set(exit_liveout) if n.id == pcfg.exit else set()
            for s in pcfg.succs[n.id]:
                out |= live_in[s]
            inn = reads[n.id] | (out - must[n.id])
            if out != live_out[n.id] or inn != live_in[n.id]:
                live_out[n.id] = out
                live_in[n.id] = inn
                changed = True

    my_records: list[int] = []
    for n in pcfg.nodes:
        idx = len(result.records)
        result.records.append(
            NodeLive(n.kind, n.group, live_in[n.id], live_out[n.id], mays[n.id])
        )
        my_records.append(idx)
        if n.kind == "pnode":
            inner: list[int] = [idx]
            for child in n.child_graphs:
                inner.extend(_solve(child, sets, live_out[n.id], result))
            result.pnode_scopes.append(inner)
    return my_records


# ---------------------------------------------------------------------------
# Register sharing


def register_share(prog: Program, info: Optional[dict] = None) -> Program:
    """Merge same-width registers with non-overlapping live ranges:
    greedy coloring in declaration order, rewriting every group and the
    continuous wires; unused registers dropped."""
    prog = prog.copy()
    for comp in prog.components:
        sets = read_write_sets(comp)
        pcfg = build_pcfg(comp.control)
        live = liveness(pcfg, sets)

        regs = [c for c in comp.cells if c.proto == "std_reg"]
        conflict: set[frozenset] = set()

        def add_pairs(group_of: set) -> None:
            items = sorted(group_of)
            for i in range(len(items)):
                for j in range(i + 1, len(items)):
                    conflict.add(frozenset((items[i], items[j])))

        for rec in live.records:
            add_pairs(rec.live_in)
            add_pairs(rec.live_out)
            # def-interference: a write conflicts with anything live at
            # the node, keeping dead writes from clobbering live values
            # and keeping written registers observably distinct
            for w in rec.may_write:
                for other in rec.live_in | rec.live_out:
                    if other != w:
                        conflict.add(frozenset((w, other)))
        for grp in comp.groups:
            add_pairs(sets.may_write[grp.name])
        # Registers live anywhere inside one p-node's lifetime conflict.
        for scope in live.pnode_scopes:
            union: set[str] = set()
            for idx in scope:
                union |= live.records[idx].live_in | live.records[idx].live_out
            add_pairs(union)

        def conflicts(a: str, b: str) -> bool:
            return frozenset((a, b)) in conflict

        mapping: dict[str, str] = {}
        rep_members: dict[str, list[str]] = {}
        for cell in regs:
            chosen = None
            for cand in regs:
                if cand.name == cell.name:
                    break
                if cand.params != cell.params:
                    continue
                if cand.name not in rep_members:
                    continue
                if all(not conflicts(cell.name, m) for m in rep_members[cand.name]):
                    chosen = cand.name
                    break
            if chosen is None:
                rep_members.setdefault(cell.name, []).append(cell.name)
            else:
                rep_members[chosen].append(cell.name)
                mapping[cell.name] = chosen

        if mapping:
            for grp in comp.groups:
                _rename_in_group(grp, mapping)
            for a in comp.continuous:
                a.dst = _rename_ref(a.dst, mapping)
                a.src = _rename_ref(a.src, mapping)
                a.guard = _rename_guard(a.guard, mapping)
            per_group = {g.name: mapping for g in comp.groups}
            _rename_control_ports(comp, per_group)
            used = _cells_referenced(comp)
            comp.cells = [
                c
                for c in comp.cells
                if c.proto != "std_reg" or c.name in used or c.name not in mapping
            ]
        if info is not None:
            info.setdefault("register_renames", {})[comp.name] = dict(mapping)
    return prog


# ---------------------------------------------------------------------------
# Latency inference


def _topo_components(prog: Program) -> list[Component]:
    order: list[Component] = []
    state: dict[str, int] = {}

    def visit(comp: Component) -> None:
        state[comp.name] = 1
        for cell in comp.cells:
            sub = prog.component(cell.proto)
            if sub is not None and state.get(sub.name, 0) == 0:
                visit(sub)
        state[comp.name] = 2
        order.append(comp)

    for comp in prog.components:
        if state.get(comp.name, 0) == 0:
            visit(comp)
    return order


def _go_done_of(prog: Program, cell: Cell, library) -> Optional[tuple[str, str]]:
    prim = library.get(cell.proto)
    if prim is not None:
        if prim.go_equiv is None:
            return None
        return prim.go_equiv, DONE
    if prog.component(cell.proto) is not None:
        return GO, DONE
    ext = prog.extern_component(cell.proto)
    if ext is not None:
        has_go = any(p == GO for p, _ in ext.inputs)
        has_done = any(p == DONE for p, _ in ext.outputs)
        if has_go and has_done:
            return GO, DONE
    return None


def _proto_static(prog: Program, cell: Cell, library) -> Optional[int]:
    prim = library.get(cell.proto)
    if prim is not None:
        return prim.attributes.get("static")
    comp = prog.component(cell.proto)
    if comp is not None:
        return comp.attributes.get("static")
    return None


def infer_latency(prog: Program) -> Program:
    """Annotate groups that pulse exactly one go-equivalent cell and wire
    their done straight to that cell's done with the cell's static
    latency; components whose control is a single enable of a static
    group inherit it, feeding instances processed later."""
    prog = prog.copy()
    library = primitives.library()
    for comp in _topo_components(prog):
        go_done = {c.name: _go_done_of(prog, c, library) for c in comp.cells}
        for grp in comp.groups:
            if "static" in grp.attributes:
                continue
            pulsed: list[str] = []
            for a in grp.assigns:
                if (
                    isinstance(a.dst, CellPort)
                    and go_done.get(a.dst.cell) is not None
                    and a.dst.port == go_done[a.dst.cell][0]
                    and isinstance(a.src, ConstPort)
                    and a.src.value == 1
                    and strip_own_go(a.guard, grp.name) == TRUE
                    and a.dst.cell not in pulsed
                ):
                    pulsed.append(a.dst.cell)
            if len(pulsed) != 1:
                continue
            cell_name = pulsed[0]
            done_assigns = [
                a
                for a in grp.assigns
                if isinstance(a.dst, HolePort)
                and a.dst.group == grp.name
                and a.dst.hole == DONE
            ]
            if len(done_assigns) != 1:
                continue
            da = done_assigns[0]
            if strip_own_go(da.guard, grp.name) != TRUE:
                continue
            if not (
                isinstance(da.src, CellPort)
                and da.src.cell == cell_name
                and da.src.port == go_done[cell_name][1]
            ):
                continue
            latency = _proto_static(prog, comp.cell(cell_name), library)
            if latency is not None:
                grp.attributes["static"] = latency
        if "static" not in comp.attributes and isinstance(comp.control, Enable):
            top = comp.group(comp.control.group)
            if top is not None and "static" in top.attributes:
                comp.attributes["static"] = top.attributes["static"]
    return prog
