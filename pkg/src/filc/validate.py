"""Structural validation: name/width invariants, the syntactic
unique-driver check, done-hole coverage, and combinational cycle
detection. Validation collects every violation rather than aborting at
the first one, and is pure: the same program always yields the same
diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import primitives
from .ir import (
    Assign,
    CellPort,
    Component,
    ConstPort,
    Empty,
    Enable,
    GAnd,
    GCmp,
    GFalse,
    GNot,
    GOr,
    GPort,
    GTrue,
    Guard,
    HolePort,
    If,
    IfacePort,
    IN,
    OUT,
    PortRef,
    Program,
    RESERVED_PORTS,
    ResolveError,
    Scope,
    While,
    control_nodes,
    enabled_groups,
    guard_ports,
)

ERROR = "error"
WARNING = "warning"


@dataclass
class Diagnostic:
    severity: str
    location: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity}: {self.location}: {self.message}"


# ---------------------------------------------------------------------------
# Guard disjointness
#
# Two guards on the same destination are accepted only when they are
# provably disjoint from their syntax alone: complementary 1-bit
# literals, or constant comparisons over a common port whose value sets
# cannot intersect. No semantic (SAT-style) reasoning.

_NEGATE = {"==": "!=", "!=": "==", "<": ">=", ">=": "<", ">": "<=", "<=": ">"}

_UNSAT = "unsat"


def _atom(op: str, subject: PortRef, value: int):
    return (op, subject, value)


def _cmp_atoms(op: str, left: PortRef, right: PortRef):
    """Normalize a comparison into constant atoms (subject op value)."""
    lconst = isinstance(left, ConstPort)
    rconst = isinstance(right, ConstPort)
    if lconst and rconst:
        ok = {
            "==": left.value == right.value,
            "!=": left.value != right.value,
            "<": left.value < right.value,
            ">": left.value > right.value,
            "<=": left.value <= right.value,
            ">=": left.value >= right.value,
        }[op]
        return set() if ok else _UNSAT
    if rconst:
        return {_atom(op, left, right.value)}
    if lconst:
        flipped = {"<": ">", ">": "<", "<=": ">=", ">=": "<="}.get(op, op)
        return {_atom(flipped, right, left.value)}
    return set()


def implied_atoms(g: Guard):
    """Constant-comparison atoms that must hold whenever the guard is
    true, or _UNSAT if the guard is syntactically unsatisfiable."""
    if isinstance(g, GTrue):
        return set()
    if isinstance(g, GFalse):
        return _UNSAT
    if isinstance(g, GPort):
        if isinstance(g.ref, ConstPort):
            return set() if g.ref.value != 0 else _UNSAT
        return {_atom("==", g.ref, 1)}
    if isinstance(g, GNot):
        inner = g.arg
        if isinstance(inner, GPort) and not isinstance(inner.ref, ConstPort):
            return {_atom("==", inner.ref, 0)}
        if isinstance(inner, GCmp):
            return _cmp_atoms(_NEGATE[inner.op], inner.left, inner.right)
        if isinstance(inner, GTrue):
            return _UNSAT
        return set()
    if isinstance(g, GCmp):
        return _cmp_atoms(g.op, g.left, g.right)
    if isinstance(g, GAnd):
        out: set = set()
        for a in g.args:
            sub = implied_atoms(a)
            if sub is _UNSAT:
                return _UNSAT
            out |= sub
        return out
    if isinstance(g, GOr):
        branch_sets = []
        for a in g.args:
            sub = implied_atoms(a)
            if sub is _UNSAT:
                continue
            branch_sets.append(sub)
        if not branch_sets:
            return _UNSAT
        common = branch_sets[0]
        for s in branch_sets[1:]:
            common = common & s
        return common
    return set()


def _implied_exprs(g: Guard) -> tuple[set, set]:
    """Whole subexpressions implied true / implied false by the guard
    (its conjuncts and their negations); lets `E && x` and `!E` be
    recognized as disjoint for an arbitrary expression E."""
    pos: set = set()
    neg: set = set()
    conjuncts = g.args if isinstance(g, GAnd) else (g,)
    for c in conjuncts:
        pos.add(c)
        if isinstance(c, GNot):
            neg.add(c.arg)
        else:
            neg.add(GNot(c))
    return pos, neg


def _conjunction_empty(atoms) -> bool:
    """Whether a set of constant atoms over one subject is unsatisfiable
    over the non-negative integers."""
    lo = 0
    hi: Optional[int] = None
    excluded: set[int] = set()
    for op, _subject, v in atoms:
        if op == "==":
            lo = max(lo, v)
            hi = v if hi is None else min(hi, v)
        elif op == "!=":
            excluded.add(v)
        elif op == "<":
            hi = v - 1 if hi is None else min(hi, v - 1)
        elif op == "<=":
            hi = v if hi is None else min(hi, v)
        elif op == ">":
            lo = max(lo, v + 1)
        elif op == ">=":
            lo = max(lo, v)
    if hi is not None and lo > hi:
        return True
    if hi is not None:
        return all(v in excluded for v in range(lo, hi + 1)) and (hi - lo) < 4096
    return False


def _pair_disjoint(g1: Guard, g2: Guard) -> bool:
    a1 = implied_atoms(g1)
    if a1 is _UNSAT:
        return True
    a2 = implied_atoms(g2)
    if a2 is _UNSAT:
        return True
    subjects = {s for _, s, _ in a1} & {s for _, s, _ in a2}
    for s in subjects:
        merged = {a for a in a1 if a[1] == s} | {a for a in a2 if a[1] == s}
        if _conjunction_empty(merged):
            return True
    pos1, neg1 = _implied_exprs(g1)
    pos2, neg2 = _implied_exprs(g2)

    def entails(pos: set, expr: Guard) -> bool:
        # g_and flattening dissolves conjunction structure, so a negated
        # conjunction is contradicted when all its parts are implied
        if expr in pos:
            return True
        return isinstance(expr, GAnd) and all(a in pos for a in expr.args)

    return any(entails(pos1, x) for x in neg2) or any(entails(pos2, x) for x in neg1)


_DNF_LIMIT = 64


def _disjuncts(g: Guard) -> list[Guard]:
    """Bounded distribution of conjunction over disjunction; hole
    expansions put disjunctions both at the top level and inside
    conjunctions. Falls back to the whole guard when too wide."""
    if isinstance(g, GOr):
        out: list[Guard] = []
        for a in g.args:
            out.extend(_disjuncts(a))
            if len(out) > _DNF_LIMIT:
                return [g]
        return out
    if isinstance(g, GAnd):
        acc: list[list[Guard]] = [[]]
        for a in g.args:
            subs = _disjuncts(a)
            acc = [prev + [s] for prev in acc for s in subs]
            if len(acc) > _DNF_LIMIT:
                return [g]
        from .ir import g_and

        return [g_and(*parts) for parts in acc]
    return [g]


def guards_disjoint(g1: Guard, g2: Guard) -> bool:
    """Syntactic disjointness: complementary literals or subexpressions,
    or contradictory constant comparisons on a shared port. Disjunctions
    (hole expansions produce them) are checked pairwise."""
    return all(
        _pair_disjoint(d1, d2) for d1 in _disjuncts(g1) for d2 in _disjuncts(g2)
    )


# ---------------------------------------------------------------------------
# Combinational cycle check


def _port_key(ref: PortRef):
    if isinstance(ref, CellPort):
        return ("c", ref.cell, ref.port)
    if isinstance(ref, IfacePort):
        return ("i", ref.port)
    if isinstance(ref, HolePort):
        return ("h", ref.group, ref.hole)
    return None


def _key_str(key) -> str:
    if key[0] == "c":
        return f"{key[1]}.{key[2]}"
    if key[0] == "i":
        return key[1]
    return f"{key[1]}[{key[2]}]"


def _instance_comb_paths(prog: Program, name: str, library, memo, stack) -> set:
    """Transitive input->output combinational paths through a component,
    from its full port graph (all groups unioned with continuous wires).
    For control-form components the synthesized done reacts to go and to
    every group's done hole, so those paths are added. Externs contribute
    no paths (their done is assumed registered)."""
    if name in memo:
        return memo[name]
    if name in stack:
        return set()  # instantiation recursion; reported separately
    comp = prog.component(name)
    if comp is None:
        return set()  # extern or unknown
    stack = stack | {name}
    edges = _comb_edges(prog, comp, library, memo, stack)
    control_form = bool(comp.groups) or not isinstance(comp.control, Empty)
    done_node = ("i", "done")
    if control_form:
        edges.append((("i", "go"), done_node))
        for grp in comp.groups:
            edges.append((("h", grp.name, "done"), done_node))
    adj: dict = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
    paths = set()
    out_names = [o for o, _ in comp.outputs]
    if "done" not in out_names:
        out_names.append("done")
    in_names = [p for p, _ in comp.inputs]
    if "go" not in in_names:
        in_names.append("go")
    for pname in in_names:
        start = ("i", pname)
        seen: set = set()
        work = [start]
        while work:
            n = work.pop()
            if n in seen:
                continue
            seen.add(n)
            work.extend(adj.get(n, ()))
        for oname in out_names:
            if ("i", oname) in seen and ("i", oname) != start:
                paths.add((pname, oname))
    memo[name] = paths
    return paths


def _comb_edges(prog: Program, comp: Component, library, memo, stack) -> list:
    edges = []
    for _, a in comp.all_assigns():
        dst = _port_key(a.dst)
        if dst is None:
            continue
        src = _port_key(a.src)
        if src is not None:
            edges.append((src, dst))
        for ref in guard_ports(a.guard):
            k = _port_key(ref)
            if k is not None:
                edges.append((k, dst))
    for cell in comp.cells:
        prim = library.get(cell.proto)
        if prim is not None:
            for i, o in prim.comb_paths(cell.params):
                edges.append((("c", cell.name, i), ("c", cell.name, o)))
        elif prog.component(cell.proto) is not None:
            for i, o in _instance_comb_paths(prog, cell.proto, library, memo, stack):
                edges.append((("c", cell.name, i), ("c", cell.name, o)))
        # externs: no combinational paths assumed
    return edges


def comb_cycle_check(
    prog: Program, comp: Component, library=None, _memo=None
) -> list[Diagnostic]:
    """Report combinational cycles in the port graph of one component.

    Edges follow each assignment's source and guard ports into its
    destination plus each cell's declared combinational paths; stateful
    elements contribute no input->output edge.
    """
    if library is None:
        library = primitives.library()
    memo = _memo if _memo is not None else {}
    edges = _comb_edges(prog, comp, library, memo, frozenset())
    adj: dict = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)

    diags: list[Diagnostic] = []
    WHITE, GRAY, BLACK = 0, 1, 2
    color: dict = {}
    reported: set = set()

    def visit(node, path):
        color[node] = GRAY
        path.append(node)
        for nxt in adj.get(node, ()):
            c = color.get(nxt, WHITE)
            if c == GRAY:
                cycle = path[path.index(nxt):] + [nxt]
                key = frozenset(cycle)
                if key not in reported:
                    reported.add(key)
                    seq = " -> ".join(_key_str(k) for k in cycle)
                    diags.append(
                        Diagnostic(
                            ERROR,
                            f"component {comp.name}",
                            f"combinational cycle: {seq}",
                        )
                    )
            elif c == WHITE:
                visit(nxt, path)
        path.pop()
        color[node] = BLACK

    for node in list(adj):
        if color.get(node, WHITE) == WHITE:
            visit(node, [])
    return diags


# ---------------------------------------------------------------------------
# Validation


def _check_assign(
    scope: Scope, comp: Component, where: str, a: Assign, diags: list[Diagnostic]
) -> None:
    def width(ref: PortRef) -> Optional[int]:
        if isinstance(ref, HolePort):
            if comp.group(ref.group) is None:
                diags.append(
                    Diagnostic(ERROR, where, f"no group '{ref.group}' for hole reference")
                )
                return None
            return 1
        try:
            return scope.width_of(ref)
        except ResolveError as e:
            diags.append(Diagnostic(ERROR, where, str(e)))
            return None

    def check_const(ref: PortRef) -> None:
        if isinstance(ref, ConstPort) and ref.width > 0 and ref.value >= (1 << ref.width):
            diags.append(
                Diagnostic(
                    ERROR, where, f"constant {ref.value} does not fit in {ref.width} bits"
                )
            )

    dw = width(a.dst)
    sw = width(a.src)
    check_const(a.src)
    if dw is not None and sw is not None and dw != sw and sw > 0:
        diags.append(
            Diagnostic(ERROR, where, f"width mismatch: dst is {dw} bits, src is {sw} bits")
        )
    ddir = scope.direction_of(a.dst)
    if ddir == OUT and isinstance(a.dst, CellPort):
        diags.append(
            Diagnostic(ERROR, where, f"cannot drive cell output port {a.dst.cell}.{a.dst.port}")
        )
    if ddir == IN and isinstance(a.dst, IfacePort):
        diags.append(
            Diagnostic(ERROR, where, f"cannot drive component input port {a.dst.port}")
        )

    def walk_guard(g: Guard) -> None:
        if isinstance(g, GPort):
            w = width(g.ref)
            check_const(g.ref)
            if w is not None and w != 1:
                diags.append(
                    Diagnostic(ERROR, where, "guard port leaves must be 1 bit wide")
                )
        elif isinstance(g, GNot):
            walk_guard(g.arg)
        elif isinstance(g, (GAnd, GOr)):
            for sub in g.args:
                walk_guard(sub)
        elif isinstance(g, GCmp):
            if isinstance(g.left, HolePort) or isinstance(g.right, HolePort):
                diags.append(
                    Diagnostic(ERROR, where, "holes may not appear in comparison operands")
                )
                return
            lw = width(g.left)
            rw = width(g.right)
            check_const(g.left)
            check_const(g.right)
            if lw and rw and lw != rw:
                diags.append(
                    Diagnostic(
                        ERROR, where, f"comparison operand widths differ ({lw} vs {rw})"
                    )
                )

    walk_guard(a.guard)


def _check_unique_drivers(
    where: str, assigns: list[Assign], diags: list[Diagnostic]
) -> None:
    by_dst: dict = {}
    for a in assigns:
        by_dst.setdefault(a.dst, []).append(a)
    for dst, group in by_dst.items():
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                if not guards_disjoint(group[i].guard, group[j].guard):
                    from .parser import _ref_str

                    diags.append(
                        Diagnostic(
                            ERROR,
                            where,
                            f"port {_ref_str(dst)} has two drivers with "
                            "overlapping guards",
                        )
                    )


def _check_control(
    scope: Scope, comp: Component, diags: list[Diagnostic]
) -> None:
    for node in control_nodes(comp.control):
        if isinstance(node, Enable):
            if comp.group(node.group) is None:
                diags.append(
                    Diagnostic(
                        ERROR,
                        f"component {comp.name}, control",
                        f"enable of unknown group '{node.group}'",
                    )
                )
        elif isinstance(node, (If, While)):
            if comp.group(node.cond) is None:
                diags.append(
                    Diagnostic(
                        ERROR,
                        f"component {comp.name}, control",
                        f"condition group '{node.cond}' does not exist",
                    )
                )
            try:
                w = scope.width_of(node.port)
                if w != 1:
                    diags.append(
                        Diagnostic(
                            ERROR,
                            f"component {comp.name}, control",
                            "condition port must be 1 bit wide",
                        )
                    )
            except ResolveError as e:
                diags.append(Diagnostic(ERROR, f"component {comp.name}, control", str(e)))


def _check_instantiation_recursion(prog: Program, diags: list[Diagnostic]) -> None:
    deps = {
        comp.name: {
            c.proto for c in comp.cells if prog.component(c.proto) is not None
        }
        for comp in prog.components
    }
    state: dict[str, int] = {}

    def visit(name: str, chain: list[str]) -> None:
        state[name] = 1
        chain.append(name)
        for dep in deps.get(name, ()):
            if state.get(dep) == 1:
                diags.append(
                    Diagnostic(
                        ERROR,
                        f"component {name}",
                        f"recursive instantiation of component '{dep}'",
                    )
                )
            elif state.get(dep, 0) == 0:
                visit(dep, chain)
        chain.pop()
        state[name] = 2

    for name in deps:
        if state.get(name, 0) == 0:
            visit(name, [])


def validate(prog: Program, library=None) -> list[Diagnostic]:
    """Full structural validation; empty result means the program is
    well-formed. Never aborts early."""
    if library is None:
        library = primitives.library()
    diags: list[Diagnostic] = []

    names_seen: set[str] = set()
    for comp in prog.components:
        if comp.name in names_seen:
            diags.append(Diagnostic(ERROR, "program", f"duplicate component '{comp.name}'"))
        names_seen.add(comp.name)
    for ext in prog.externs:
        for sig in ext.components:
            if sig.name in names_seen:
                diags.append(
                    Diagnostic(ERROR, "program", f"duplicate component '{sig.name}'")
                )
            names_seen.add(sig.name)
    entry = prog.component(prog.entrypoint)
    if entry is None:
        diags.append(
            Diagnostic(
                ERROR, "program", f"entrypoint '{prog.entrypoint}' is not a component"
            )
        )

    memo: dict = {}
    _check_instantiation_recursion(prog, diags)
    had_recursion = bool(diags) and any(
        "recursive instantiation" in d.message for d in diags
    )

    for comp in prog.components:
        where = f"component {comp.name}"
        # go/done become real ports once lowered; before that they are
        # reserved for the calling convention RemoveGroups materializes.
        lowered = not comp.groups and isinstance(comp.control, Empty)
        seen_ports: set[str] = set()
        for pname, w in comp.inputs + comp.outputs:
            if pname in seen_ports:
                diags.append(Diagnostic(ERROR, where, f"duplicate port '{pname}'"))
            seen_ports.add(pname)
            if pname in RESERVED_PORTS and not (lowered and pname != "clk"):
                diags.append(
                    Diagnostic(ERROR, where, f"port name '{pname}' is reserved")
                )
            if w < 1:
                diags.append(Diagnostic(ERROR, where, f"port '{pname}' has width {w}"))

        seen_cells: set[str] = set()
        scope = Scope(prog, comp, library)
        for cell in comp.cells:
            if cell.name in seen_cells:
                diags.append(Diagnostic(ERROR, where, f"duplicate cell '{cell.name}'"))
            seen_cells.add(cell.name)
            try:
                ports = scope.cell_ports(cell)
                for pname, (w, _dir) in ports.items():
                    if w < 1:
                        diags.append(
                            Diagnostic(
                                ERROR,
                                where,
                                f"cell '{cell.name}' port '{pname}' has width {w}",
                            )
                        )
                if (
                    prog.component(cell.proto) is not None
                    or prog.extern_component(cell.proto) is not None
                ) and cell.params:
                    diags.append(
                        Diagnostic(
                            ERROR,
                            where,
                            f"component instantiation '{cell.name}' takes no parameters",
                        )
                    )
            except (ResolveError, ValueError) as e:
                diags.append(Diagnostic(ERROR, where, str(e)))

        seen_groups: set[str] = set()
        for grp in comp.groups:
            if grp.name in seen_groups:
                diags.append(Diagnostic(ERROR, where, f"duplicate group '{grp.name}'"))
            seen_groups.add(grp.name)
            if grp.name in seen_cells:
                diags.append(
                    Diagnostic(
                        ERROR, where, f"name '{grp.name}' used for both a cell and a group"
                    )
                )

        for grp in comp.groups:
            gwhere = f"{where}, group {grp.name}"
            for a in grp.assigns:
                _check_assign(scope, comp, gwhere, a, diags)
            _check_unique_drivers(gwhere, grp.assigns, diags)
        for a in comp.continuous:
            _check_assign(scope, comp, f"{where}, wires", a, diags)
        _check_unique_drivers(f"{where}, wires", comp.continuous, diags)

        _check_control(scope, comp, diags)
        for gname in sorted(enabled_groups(comp.control)):
            grp = comp.group(gname)
            if grp is not None and not grp.writes_own_done():
                diags.append(
                    Diagnostic(
                        ERROR,
                        f"{where}, group {gname}",
                        "group is enabled by control but never drives its done hole",
                    )
                )

        if not had_recursion:
            diags.extend(comb_cycle_check(prog, comp, library, memo))

    return diags
