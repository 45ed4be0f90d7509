"""The lowering pipeline: GoInsertion, latency-sensitive compilation of
static control (Sensitive), latency-insensitive FSM compilation of all
remaining control (CompileControl), and RemoveGroups.

Compilation groups realize one control statement each; every assignment
inside a group (its done-hole drive included) is guarded by the group's
go hole, so a parent FSM can never observe a stale done from a disabled
group. After CompileControl the control tree is a single enable, and
RemoveGroups erases holes and groups entirely, leaving a flat list of
guarded assignments behind a component-level go/done handshake.
"""

from __future__ import annotations

from typing import Optional

from .ir import (
    Assign,
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
    GFalse,
    GO,
    Group,
    Guard,
    HolePort,
    If,
    IfacePort,
    Par,
    PortRef,
    Program,
    Seq,
    TRUE,
    While,
    clog2,
    g_and,
    g_or,
)


class PassError(Exception):
    pass


class NameGen:
    """Fresh prefixed names, collision-checked against every name
    already used in the component."""

    def __init__(self, taken: set[str]):
        self.taken = set(taken)
        self.counters: dict[str, int] = {}

    def fresh(self, prefix: str) -> str:
        n = self.counters.get(prefix, 0)
        while f"{prefix}{n}" in self.taken:
            n += 1
        self.counters[prefix] = n + 1
        name = f"{prefix}{n}"
        self.taken.add(name)
        return name


def _one() -> ConstPort:
    return ConstPort(1, 1)


def _go_guard(group: str) -> Guard:
    return GPort(HolePort(group, GO))


def _wrap_with_go(group: Group) -> None:
    g = _go_guard(group.name)
    for a in group.assigns:
        a.guard = g_and(g, a.guard)


def strip_own_go(guard: Guard, group_name: str) -> Guard:
    """Remove the group's own go conjunct that go_insertion added, so
    rules phrased over 'unguarded' assignments keep firing mid-pipeline."""
    own = GPort(HolePort(group_name, GO))
    if guard == own:
        return TRUE
    if isinstance(guard, GAnd):
        rest = [a for a in guard.args if a != own]
        if len(rest) != len(guard.args):
            return g_and(*rest)
    return guard


# ---------------------------------------------------------------------------
# GoInsertion


def go_insertion(prog: Program) -> Program:
    """Conjoin each group's go hole into the guards of all its contained
    assignments. Continuous wires are untouched."""
    prog = prog.copy()
    for comp in prog.components:
        for group in comp.groups:
            _wrap_with_go(group)
    return prog


# ---------------------------------------------------------------------------
# CompileControl


def compile_control(prog: Program) -> Program:
    """Bottom-up replacement of every control statement by an enable of a
    freshly generated compilation group; afterwards each component's
    control is a single enable (or Empty)."""
    prog = prog.copy()
    for comp in prog.components:
        _compile_control_comp(comp)
    return prog


def _compile_control_comp(comp: Component) -> None:
    names = NameGen(comp.used_names())

    def reg1(prefix: str) -> str:
        name = names.fresh(prefix)
        comp.cells.append(Cell(name, "std_reg", (1,)))
        return name

    def rec(node: Control) -> Control:
        if isinstance(node, (Empty, Enable)):
            return node
        if isinstance(node, Seq):
            children = [rec(c) for c in node.children]
            children = [c for c in children if not isinstance(c, Empty)]
            if not children:
                return Empty()
            return _compile_seq(comp, names, [c.group for c in children])
        if isinstance(node, Par):
            children = [rec(c) for c in node.children]
            children = [c for c in children if not isinstance(c, Empty)]
            if not children:
                return Empty()
            return _compile_par(comp, names, reg1, [c.group for c in children])
        if isinstance(node, If):
            then_c = rec(node.then_branch)
            else_c = rec(node.else_branch)
            return _compile_if(comp, names, reg1, node.port, node.cond, then_c, else_c)
        if isinstance(node, While):
            body_c = rec(node.body)
            return _compile_while(comp, names, reg1, node.port, node.cond, body_c)
        raise PassError(f"unknown control node {node!r}")

    comp.control = rec(comp.control)


def _finish_group(comp: Component, group: Group) -> Enable:
    _wrap_with_go(group)
    comp.groups.append(group)
    return Enable(group.name)


def _compile_seq(comp: Component, names: NameGen, children: list[str]) -> Enable:
    n = len(children)
    width = clog2(n + 1)
    fsm = names.fresh("fsm")
    comp.cells.append(Cell(fsm, "std_reg", (width,)))
    fsm_out = CellPort(fsm, "out")
    name = names.fresh("seq")
    grp = Group(name)

    def state(v: int) -> Guard:
        return GCmp("==", fsm_out, ConstPort(width, v))

    for i, child in enumerate(children):
        advance = g_and(state(i), GPort(HolePort(child, DONE)))
        grp.assigns.append(Assign(HolePort(child, GO), state(i), _one()))
        grp.assigns.append(Assign(CellPort(fsm, "in"), advance, ConstPort(width, i + 1)))
        grp.assigns.append(Assign(CellPort(fsm, "write_en"), advance, _one()))
    grp.assigns.append(Assign(HolePort(name, DONE), state(n), _one()))
    grp.assigns.append(Assign(CellPort(fsm, "in"), state(n), ConstPort(width, 0)))
    grp.assigns.append(Assign(CellPort(fsm, "write_en"), state(n), _one()))
    return _finish_group(comp, grp)


def _compile_par(comp: Component, names: NameGen, reg1, children: list[str]) -> Enable:
    name = names.fresh("par")
    grp = Group(name)
    pds = [reg1("pd") for _ in children]
    par_done = GPort(HolePort(name, DONE))
    for child, pd in zip(children, pds):
        child_done = GPort(HolePort(child, DONE))
        grp.assigns.append(
            Assign(HolePort(child, GO), GNot(GPort(CellPort(pd, "out"))), _one())
        )
        save = g_and(GNot(par_done), child_done)
        grp.assigns.append(Assign(CellPort(pd, "in"), save, _one()))
        grp.assigns.append(Assign(CellPort(pd, "write_en"), save, _one()))
    all_done = g_and(*(GPort(CellPort(pd, "out")) for pd in pds))
    grp.assigns.append(Assign(HolePort(name, DONE), all_done, _one()))
    for pd in pds:
        grp.assigns.append(Assign(CellPort(pd, "in"), par_done, ConstPort(1, 0)))
        grp.assigns.append(Assign(CellPort(pd, "write_en"), par_done, _one()))
    return _finish_group(comp, grp)


def _branch_done(branch: Control) -> Guard:
    if isinstance(branch, Empty):
        return TRUE
    return GPort(HolePort(branch.group, DONE))


def _compile_if(
    comp: Component,
    names: NameGen,
    reg1,
    port: PortRef,
    cond: str,
    then_c: Control,
    else_c: Control,
) -> Enable:
    name = names.fresh("if")
    cc = reg1("cc")
    cs = reg1("cs")
    grp = Group(name)
    cc_out = GPort(CellPort(cc, "out"))
    cs_out = GPort(CellPort(cs, "out"))
    computing = g_and(GNot(cc_out), GPort(HolePort(cond, DONE)))

    grp.assigns.append(Assign(HolePort(cond, GO), GNot(cc_out), _one()))
    grp.assigns.append(Assign(CellPort(cs, "in"), computing, port))
    grp.assigns.append(Assign(CellPort(cs, "write_en"), computing, _one()))
    grp.assigns.append(Assign(CellPort(cc, "in"), computing, _one()))
    grp.assigns.append(Assign(CellPort(cc, "write_en"), computing, _one()))
    if isinstance(then_c, Enable):
        grp.assigns.append(Assign(HolePort(then_c.group, GO), g_and(cc_out, cs_out), _one()))
    if isinstance(else_c, Enable):
        grp.assigns.append(
            Assign(HolePort(else_c.group, GO), g_and(cc_out, GNot(cs_out)), _one())
        )
    done_guard = g_and(
        cc_out,
        g_or(g_and(cs_out, _branch_done(then_c)), g_and(GNot(cs_out), _branch_done(else_c))),
    )
    grp.assigns.append(Assign(HolePort(name, DONE), done_guard, _one()))
    grp.assigns.append(Assign(CellPort(cc, "in"), done_guard, ConstPort(1, 0)))
    grp.assigns.append(Assign(CellPort(cc, "write_en"), done_guard, _one()))
    return _finish_group(comp, grp)


def _compile_while(
    comp: Component, names: NameGen, reg1, port: PortRef, cond: str, body_c: Control
) -> Enable:
    name = names.fresh("while")
    cc = reg1("cc")
    cs = reg1("cs")
    grp = Group(name)
    cc_out = GPort(CellPort(cc, "out"))
    cs_out = GPort(CellPort(cs, "out"))
    computing = g_and(GNot(cc_out), GPort(HolePort(cond, DONE)))

    grp.assigns.append(Assign(HolePort(cond, GO), GNot(cc_out), _one()))
    grp.assigns.append(Assign(CellPort(cs, "in"), computing, port))
    grp.assigns.append(Assign(CellPort(cs, "write_en"), computing, _one()))
    grp.assigns.append(Assign(CellPort(cc, "in"), computing, _one()))
    grp.assigns.append(Assign(CellPort(cc, "write_en"), computing, _one()))
    if isinstance(body_c, Enable):
        grp.assigns.append(Assign(HolePort(body_c.group, GO), g_and(cc_out, cs_out), _one()))
    clear = g_and(cc_out, g_or(g_and(cs_out, _branch_done(body_c)), GNot(cs_out)))
    grp.assigns.append(Assign(CellPort(cc, "in"), clear, ConstPort(1, 0)))
    grp.assigns.append(Assign(CellPort(cc, "write_en"), clear, _one()))
    grp.assigns.append(Assign(HolePort(name, DONE), g_and(cc_out, GNot(cs_out)), _one()))
    return _finish_group(comp, grp)


# ---------------------------------------------------------------------------
# Sensitive: latency-sensitive compilation of static islands


def compile_static(prog: Program) -> Program:
    """Bottom-up: compile seq/par/if whose children all carry "static"
    into counter-based FSM groups; anything else is left untouched for
    compile_control. while is never statically compiled."""
    prog = prog.copy()
    for comp in prog.components:
        _compile_static_comp(comp)
    return prog


def _static_of(comp: Component, node: Control) -> Optional[int]:
    if isinstance(node, Enable):
        grp = comp.group(node.group)
        if grp is not None and "static" in grp.attributes:
            return grp.attributes["static"]
    return None


def _compile_static_comp(comp: Component) -> None:
    names = NameGen(comp.used_names())

    def rec(node: Control) -> Control:
        if isinstance(node, (Empty, Enable)):
            return node
        if isinstance(node, Seq):
            children = [rec(c) for c in node.children]
            lats = [_static_of(comp, c) for c in children]
            if children and all(l is not None and l > 0 for l in lats):
                return _static_seq(comp, names, children, lats)
            return Seq(children)
        if isinstance(node, Par):
            children = [rec(c) for c in node.children]
            lats = [_static_of(comp, c) for c in children]
            if children and all(l is not None and l > 0 for l in lats):
                return _static_par(comp, names, children, lats)
            return Par(children)
        if isinstance(node, If):
            then_c = rec(node.then_branch)
            else_c = rec(node.else_branch)
            cond_grp = comp.group(node.cond)
            cond_lat = cond_grp.attributes.get("static") if cond_grp else None
            lt = 0 if isinstance(then_c, Empty) else _static_of(comp, then_c)
            lf = 0 if isinstance(else_c, Empty) else _static_of(comp, else_c)
            if cond_lat and lt is not None and lf is not None:
                return _static_if(
                    comp, names, node.port, node.cond, cond_lat, then_c, lt, else_c, lf
                )
            return If(node.port, node.cond, then_c, else_c)
        if isinstance(node, While):
            return While(node.port, node.cond, rec(node.body))
        raise PassError(f"unknown control node {node!r}")

    comp.control = rec(comp.control)


def _make_counter(comp: Component, names: NameGen, width: int, total: int, grp: Group):
    """Self-incrementing counter register plus its adder; returns the
    fsm cell name. Counts 0..total and resets on the done state; a
    continuous wire also clears it whenever the group is disabled, since
    a static parent's window is exactly `total` cycles and never reaches
    the done state."""
    fsm = names.fresh("fsm")
    comp.cells.append(Cell(fsm, "std_reg", (width,)))
    incr = names.fresh("fsm_incr")
    comp.cells.append(Cell(incr, "std_add", (width,)))
    fsm_out = CellPort(fsm, "out")
    running = GCmp("<", fsm_out, ConstPort(width, total))
    at_end = GCmp("==", fsm_out, ConstPort(width, total))
    grp.assigns.append(Assign(CellPort(incr, "left"), TRUE, fsm_out))
    grp.assigns.append(Assign(CellPort(incr, "right"), TRUE, ConstPort(width, 1)))
    grp.assigns.append(Assign(CellPort(fsm, "in"), running, CellPort(incr, "out")))
    grp.assigns.append(Assign(CellPort(fsm, "write_en"), running, _one()))
    grp.assigns.append(Assign(HolePort(grp.name, DONE), at_end, _one()))
    grp.assigns.append(Assign(CellPort(fsm, "in"), at_end, ConstPort(width, 0)))
    grp.assigns.append(Assign(CellPort(fsm, "write_en"), at_end, _one()))
    idle = GNot(_go_guard(grp.name))
    comp.continuous.append(Assign(CellPort(fsm, "in"), idle, ConstPort(width, 0)))
    comp.continuous.append(Assign(CellPort(fsm, "write_en"), idle, _one()))
    return fsm


def _window(fsm: str, width: int, lo: int, hi: int) -> Guard:
    out = CellPort(fsm, "out")
    return g_and(
        GCmp(">=", out, ConstPort(width, lo)), GCmp("<", out, ConstPort(width, hi))
    )


def _static_seq(comp: Component, names: NameGen, children, lats) -> Enable:
    total = sum(lats)
    width = clog2(total + 1)
    name = names.fresh("static_seq")
    grp = Group(name, attributes={"static": total})
    fsm = _make_counter(comp, names, width, total, grp)
    offset = 0
    gos = []
    for child, lat in zip(children, lats):
        gos.append(
            Assign(HolePort(child.group, GO), _window(fsm, width, offset, offset + lat), _one())
        )
        offset += lat
    grp.assigns = gos + grp.assigns
    return _finish_group(comp, grp)


def _static_par(comp: Component, names: NameGen, children, lats) -> Enable:
    total = max(lats)
    width = clog2(total + 1)
    name = names.fresh("static_par")
    grp = Group(name, attributes={"static": total})
    fsm = _make_counter(comp, names, width, total, grp)
    gos = [
        Assign(
            HolePort(child.group, GO),
            GCmp("<", CellPort(fsm, "out"), ConstPort(width, lat)),
            _one(),
        )
        for child, lat in zip(children, lats)
    ]
    grp.assigns = gos + grp.assigns
    return _finish_group(comp, grp)


def _static_if(
    comp: Component, names: NameGen, port, cond, cond_lat, then_c, lt, else_c, lf
) -> Enable:
    total = cond_lat + max(lt, lf)
    width = clog2(total + 1)
    name = names.fresh("static_if")
    grp = Group(name, attributes={"static": total})
    fsm = _make_counter(comp, names, width, total, grp)
    scs = names.fresh("scs")
    comp.cells.append(Cell(scs, "std_reg", (1,)))
    fsm_out = CellPort(fsm, "out")
    latch = GCmp("==", fsm_out, ConstPort(width, cond_lat - 1))
    head = [
        Assign(HolePort(cond, GO), _window(fsm, width, 0, cond_lat), _one()),
        Assign(CellPort(scs, "in"), latch, port),
        Assign(CellPort(scs, "write_en"), latch, _one()),
    ]
    scs_out = GPort(CellPort(scs, "out"))
    if isinstance(then_c, Enable):
        head.append(
            Assign(
                HolePort(then_c.group, GO),
                g_and(_window(fsm, width, cond_lat, cond_lat + lt), scs_out),
                _one(),
            )
        )
    if isinstance(else_c, Enable):
        head.append(
            Assign(
                HolePort(else_c.group, GO),
                g_and(_window(fsm, width, cond_lat, cond_lat + lf), GNot(scs_out)),
                _one(),
            )
        )
    grp.assigns = head + grp.assigns
    return _finish_group(comp, grp)


# ---------------------------------------------------------------------------
# RemoveGroups


def remove_groups(prog: Program) -> Program:
    """Materialize component go/done ports, inline every hole as the
    disjunction of the expressions written to it, then dissolve groups
    into the continuous wires. Control becomes Empty."""
    prog = prog.copy()
    for comp in prog.components:
        _remove_groups_comp(comp)
    return prog


def _src_as_guard(src: PortRef) -> Guard:
    if isinstance(src, ConstPort):
        return TRUE if src.value != 0 else GFalse()
    return GPort(src)


def _remove_groups_comp(comp: Component) -> None:
    control = comp.control
    if not isinstance(control, (Enable, Empty)):
        raise PassError(
            f"component '{comp.name}': control must be a single enable before "
            "RemoveGroups (pipeline misordering)"
        )
    names = NameGen(comp.used_names())
    comp.inputs.append((GO, 1))
    comp.outputs.append((DONE, 1))

    if isinstance(control, Enable):
        comp.continuous.append(Assign(HolePort(control.group, GO), TRUE, IfacePort(GO)))
        comp.continuous.append(Assign(IfacePort(DONE), TRUE, HolePort(control.group, DONE)))
    else:
        # Empty control: done is go delayed one cycle through a register,
        # so the component handshake stays well-defined.
        dr = names.fresh("done_reg")
        comp.cells.append(Cell(dr, "std_reg", (1,)))
        comp.continuous.append(Assign(CellPort(dr, "in"), TRUE, IfacePort(GO)))
        comp.continuous.append(Assign(CellPort(dr, "write_en"), TRUE, _one()))
        comp.continuous.append(Assign(IfacePort(DONE), TRUE, CellPort(dr, "out")))

    # Gather hole writes, then expand reads to fixpoint (holes may read
    # holes; the write structure is acyclic by construction).
    writes: dict[HolePort, list[tuple[Guard, PortRef]]] = {}
    for _, a in comp.all_assigns():
        if isinstance(a.dst, HolePort):
            writes.setdefault(a.dst, []).append((a.guard, a.src))

    expanded: dict[HolePort, Guard] = {}
    in_progress: set[HolePort] = set()

    def expand(hole: HolePort) -> Guard:
        if hole in expanded:
            return expanded[hole]
        if hole in in_progress:
            raise PassError(
                f"component '{comp.name}': cyclic interface-signal dependency "
                f"through {hole.group}[{hole.hole}]"
            )
        in_progress.add(hole)
        terms = [
            g_and(subst_guard(guard), _src_as_guard(src))
            for guard, src in writes.get(hole, [])
        ]
        result = g_or(*terms) if terms else GFalse()
        in_progress.discard(hole)
        expanded[hole] = result
        return result

    def subst_guard(g: Guard) -> Guard:
        if isinstance(g, GPort):
            if isinstance(g.ref, HolePort):
                return expand(g.ref)
            return g
        if isinstance(g, GNot):
            return GNot(subst_guard(g.arg))
        if isinstance(g, GAnd):
            return g_and(*(subst_guard(a) for a in g.args))
        if isinstance(g, GOr):
            return g_or(*(subst_guard(a) for a in g.args))
        return g

    def rewrite(a: Assign) -> Optional[Assign]:
        guard = subst_guard(a.guard)
        src = a.src
        if isinstance(src, HolePort):
            guard = g_and(guard, expand(src))
            src = ConstPort(1, 1)
        if isinstance(guard, GFalse):
            return None
        return Assign(a.dst, guard, src)

    new_continuous: list[Assign] = []
    for a in comp.continuous:
        if isinstance(a.dst, HolePort):
            continue
        na = rewrite(a)
        if na is not None:
            new_continuous.append(na)
    for grp in comp.groups:
        for a in grp.assigns:
            if isinstance(a.dst, HolePort):
                continue
            na = rewrite(a)
            if na is not None:
                new_continuous.append(na)
    comp.continuous = new_continuous
    comp.groups = []
    comp.control = Empty()
