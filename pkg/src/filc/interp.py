"""Cycle-accurate reference interpreter.

Two entry points share one engine: `interpret_control` executes a
program's control tree (the IL's defining semantics), while
`interpret_structural` drives a fully lowered program through its
go/done ports. Each cycle computes a combinational fixpoint over the
active assignments and primitive outputs, then commits stateful cells at
the clock edge. Component instances are simulated hierarchically; an
instance of a lowered component is pure structure, an instance of a
control-form component runs its own control tree under the go/done
calling convention.

A group's assignments are active whenever its go hole reads 1: the
control runner forces go for the groups it enables, and compiled
programs raise child go holes through ordinary assignments.
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
    Control,
    DONE,
    Empty,
    Enable,
    GAnd,
    GFalse,
    GNot,
    GOr,
    GPort,
    GTrue,
    GO,
    If,
    IfacePort,
    Par,
    PortRef,
    Program,
    Seq,
    While,
)
from .primitives import SimRuntimeError


class SimError(Exception):
    def __init__(self, message: str, cycle: Optional[int] = None):
        if cycle is not None:
            message = f"cycle {cycle}: {message}"
        super().__init__(message)
        self.cycle = cycle


@dataclass
class RunResult:
    cycles: int
    memories: dict[str, list[int]]
    registers: dict[str, int]
    trace: Optional[list[list[str]]] = None

    def to_json(self) -> dict:
        out = {
            "cycles": self.cycles,
            "memories": self.memories,
            "registers": self.registers,
        }
        if self.trace is not None:
            out["trace"] = self.trace
        return out


# ---------------------------------------------------------------------------
# Value and guard evaluation


def _key(ref: PortRef):
    if isinstance(ref, CellPort):
        return ("c", ref.cell, ref.port)
    if isinstance(ref, IfacePort):
        return ("i", ref.port)
    return ("h", ref.group, ref.hole)


def _ref_value(ref: PortRef, values: dict) -> int:
    if isinstance(ref, ConstPort):
        return ref.value
    return values.get(_key(ref), 0)


def _guard_value(g, values: dict, memo: dict) -> int:
    gid = id(g)
    hit = memo.get(gid)
    if hit is not None:
        return hit
    if isinstance(g, GTrue):
        v = 1
    elif isinstance(g, GFalse):
        v = 0
    elif isinstance(g, GPort):
        v = 1 if _ref_value(g.ref, values) != 0 else 0
    elif isinstance(g, GNot):
        v = 1 - _guard_value(g.arg, values, memo)
    elif isinstance(g, GAnd):
        v = 1
        for a in g.args:
            if not _guard_value(a, values, memo):
                v = 0
                break
    elif isinstance(g, GOr):
        v = 0
        for a in g.args:
            if _guard_value(a, values, memo):
                v = 1
                break
    else:  # GCmp
        l = _ref_value(g.left, values)
        r = _ref_value(g.right, values)
        v = int(
            {
                "==": l == r,
                "!=": l != r,
                "<": l < r,
                ">": l > r,
                "<=": l <= r,
                ">=": l >= r,
            }[g.op]
        )
    memo[gid] = v
    return v


# ---------------------------------------------------------------------------
# Control runner


class _RNode:
    vacuous = False

    def start(self) -> None:
        pass

    def frontier(self, out: set) -> None:
        pass

    def done_now(self, values: dict) -> bool:
        return True

    def step(self, values: dict) -> bool:
        return True


class _RVacuous(_RNode):
    vacuous = True


class _REnable(_RNode):
    def __init__(self, group: str):
        self.group = group
        self.done_key = ("h", group, DONE)

    def frontier(self, out: set) -> None:
        out.add(self.group)

    def done_now(self, values: dict) -> bool:
        return values.get(self.done_key, 0) == 1

    def step(self, values: dict) -> bool:
        return self.done_now(values)


class _RSeq(_RNode):
    def __init__(self, children: list[_RNode]):
        self.children = children
        self.idx = 0

    def start(self) -> None:
        self.idx = 0
        self.children[0].start()

    def frontier(self, out: set) -> None:
        self.children[self.idx].frontier(out)

    def done_now(self, values: dict) -> bool:
        return self.idx == len(self.children) - 1 and self.children[self.idx].done_now(values)

    def step(self, values: dict) -> bool:
        if self.children[self.idx].step(values):
            self.idx += 1
            if self.idx >= len(self.children):
                return True
            self.children[self.idx].start()
        return False


class _RPar(_RNode):
    def __init__(self, children: list[_RNode]):
        self.children = children
        self.finished = [False] * len(children)

    def start(self) -> None:
        self.finished = [False] * len(self.children)
        for c in self.children:
            c.start()

    def frontier(self, out: set) -> None:
        for c, fin in zip(self.children, self.finished):
            if not fin:
                c.frontier(out)

    def done_now(self, values: dict) -> bool:
        return all(
            fin or c.done_now(values) for c, fin in zip(self.children, self.finished)
        )

    def step(self, values: dict) -> bool:
        for i, c in enumerate(self.children):
            if not self.finished[i] and c.step(values):
                self.finished[i] = True
        return all(self.finished)


class _RIf(_RNode):
    def __init__(self, port: PortRef, cond: str, then_n: _RNode, else_n: _RNode):
        self.port = port
        self.cond = _REnable(cond)
        self.then_n = then_n
        self.else_n = else_n
        self.in_branch = False
        self.branch: _RNode = then_n

    def start(self) -> None:
        self.in_branch = False
        self.cond.start()

    def frontier(self, out: set) -> None:
        if self.in_branch:
            self.branch.frontier(out)
        else:
            self.cond.frontier(out)

    def done_now(self, values: dict) -> bool:
        if self.in_branch:
            return self.branch.done_now(values)
        if not self.cond.done_now(values):
            return False
        chosen = self.then_n if _ref_value(self.port, values) else self.else_n
        return chosen.vacuous

    def step(self, values: dict) -> bool:
        if self.in_branch:
            return self.branch.step(values)
        if self.cond.step(values):
            chosen = self.then_n if _ref_value(self.port, values) else self.else_n
            if chosen.vacuous:
                return True
            self.branch = chosen
            self.in_branch = True
            chosen.start()
        return False


class _RWhile(_RNode):
    def __init__(self, port: PortRef, cond: str, body: _RNode):
        self.port = port
        self.cond = _REnable(cond)
        self.body = body
        self.in_body = False

    def start(self) -> None:
        self.in_body = False
        self.cond.start()

    def frontier(self, out: set) -> None:
        if self.in_body:
            self.body.frontier(out)
        else:
            self.cond.frontier(out)

    def done_now(self, values: dict) -> bool:
        if self.in_body:
            return False
        return self.cond.done_now(values) and _ref_value(self.port, values) == 0

    def step(self, values: dict) -> bool:
        if self.in_body:
            if self.body.step(values):
                self.in_body = False
                self.cond.start()
            return False
        if self.cond.step(values):
            if _ref_value(self.port, values) == 0:
                return True
            if not self.body.vacuous:
                self.in_body = True
                self.body.start()
            else:
                self.cond.start()
        return False


def _build_runner(c: Control) -> _RNode:
    if isinstance(c, Empty):
        return _RVacuous()
    if isinstance(c, Enable):
        return _REnable(c.group)
    if isinstance(c, (Seq, Par)):
        kids = [_build_runner(ch) for ch in c.children]
        kids = [k for k in kids if not k.vacuous]
        if not kids:
            return _RVacuous()
        return _RSeq(kids) if isinstance(c, Seq) else _RPar(kids)
    if isinstance(c, If):
        return _RIf(c.port, c.cond, _build_runner(c.then_branch), _build_runner(c.else_branch))
    if isinstance(c, While):
        return _RWhile(c.port, c.cond, _build_runner(c.body))
    raise TypeError(f"unknown control node {c!r}")


# ---------------------------------------------------------------------------
# Component simulator

IDLE, RUNNING = 0, 1


class _CompiledAssign:
    __slots__ = ("dst", "guard", "src", "text")

    def __init__(self, a: Assign):
        from .parser import _assign_str

        self.dst = _key(a.dst)
        self.guard = a.guard
        self.src = a.src
        self.text = _assign_str(a)


class Sim:
    """Simulator for one component instance (recursively containing
    sub-simulators for component-typed cells)."""

    def __init__(self, prog: Program, comp: Component, library=None):
        self.prog = prog
        self.comp = comp
        self.library = library if library is not None else primitives.library()
        self.lowered = any(p == DONE for p, _ in comp.outputs)

        self.behaviors: dict[str, primitives.Behavior] = {}
        self.subsims: dict[str, "Sim"] = {}
        self.sub_inputs: dict[str, list[str]] = {}
        for cell in comp.cells:
            prim = self.library.get(cell.proto)
            if prim is not None:
                if prim.behavior is None:
                    raise SimError(f"primitive '{cell.proto}' has no behavioral model")
                self.behaviors[cell.name] = prim.behavior(cell.params)
            elif prog.component(cell.proto) is not None:
                sub = Sim(prog, prog.component(cell.proto), self.library)
                self.subsims[cell.name] = sub
                ins = [p for p, _ in sub.comp.inputs]
                if GO not in ins:
                    ins.append(GO)
                self.sub_inputs[cell.name] = ins
            else:
                raise SimError(
                    f"cell '{cell.name}' instantiates extern or unknown "
                    f"component '{cell.proto}'; not interpretable"
                )

        self.states: dict[str, dict] = {}
        self.continuous = [_CompiledAssign(a) for a in comp.continuous]
        self.group_assigns: dict[str, list[_CompiledAssign]] = {
            g.name: [_CompiledAssign(a) for a in g.assigns] for g in comp.groups
        }
        self.runner: Optional[_RNode] = None if self.lowered else _build_runner(comp.control)
        self.run_state = IDLE

        n_ports = sum(
            len(Sim._cell_port_count(self, c)) for c in comp.cells
        ) + len(comp.inputs) + len(comp.outputs) + 2 * len(comp.groups) + 2
        self.max_rounds = n_ports + 2
        self._eval_cache: Optional[tuple] = None

    @staticmethod
    def _cell_port_count(sim: "Sim", cell) -> dict:
        prim = sim.library.get(cell.proto)
        if prim is not None:
            return prim.ports(cell.params)
        comp = sim.prog.component(cell.proto)
        if comp is not None:
            d = {p: None for p, _ in comp.inputs + comp.outputs}
            d.setdefault(GO, None)
            d.setdefault(DONE, None)
            return d
        return {}

    def reset(self) -> None:
        for name, beh in self.behaviors.items():
            self.states[name] = beh.reset()
        for sub in self.subsims.values():
            sub.reset()
        if self.runner is not None:
            self.runner.start()
        self.run_state = IDLE
        self._eval_cache = None

    # -- per-cycle evaluation

    def _active_assigns(self, values: dict, go: int) -> list[_CompiledAssign]:
        active = list(self.continuous)
        if self.lowered:
            return active
        forced: set[str] = set()
        if self.runner is not None and not self.runner.vacuous:
            if self.run_state == RUNNING or go == 1:
                self.runner.frontier(forced)
        for g in self.comp.groups:
            if g.name in forced or values.get(("h", g.name, GO), 0) == 1:
                active.extend(self.group_assigns[g.name])
        return active

    def _forced_holes(self, go: int) -> dict:
        forced: set[str] = set()
        if self.runner is not None and not self.runner.vacuous:
            if self.run_state == RUNNING or go == 1:
                self.runner.frontier(forced)
        return {("h", g, GO): 1 for g in forced}

    def active_group_names(self, values: dict, go: int) -> list[str]:
        names = set()
        if not self.lowered:
            forced: set[str] = set()
            if self.runner is not None and not self.runner.vacuous:
                if self.run_state == RUNNING or go == 1:
                    self.runner.frontier(forced)
            names |= forced
            for g in self.comp.groups:
                if values.get(("h", g.name, GO), 0) == 1:
                    names.add(g.name)
        return sorted(names)

    def eval_cycle(self, iface_inputs: dict[str, int], cycle: int) -> dict:
        """Combinational fixpoint for one cycle; pure (no state change)."""
        cache_key = tuple(sorted(iface_inputs.items()))
        if self._eval_cache is not None and self._eval_cache[0] == (cache_key, cycle):
            return self._eval_cache[1]
        go = iface_inputs.get(GO, 0)
        forced = self._forced_holes(go)
        prev: dict = {}
        for _ in range(self.max_rounds):
            new: dict = {}
            for p, v in iface_inputs.items():
                new[("i", p)] = v
            new.update(forced)
            for name, beh in self.behaviors.items():
                state = self.states[name]
                reader = _CellReader(name, prev)
                for pname, v in beh.comb(state, reader).items():
                    new[("c", name, pname)] = v
            for name, sub in self.subsims.items():
                ins = {
                    p: prev.get(("c", name, p), 0) for p in self.sub_inputs[name]
                }
                outs = sub.eval_as_cell(ins, cycle)
                for pname, v in outs.items():
                    new[("c", name, pname)] = v
            memo: dict = {}
            for a in self._active_assigns(prev, go):
                if _guard_value(a.guard, prev, memo):
                    new[a.dst] = _ref_value(a.src, prev)
            if new == prev:
                break
            prev = new
        else:
            raise SimError(
                f"combinational evaluation did not converge in component "
                f"'{self.comp.name}'",
                cycle,
            )
        self._check_drivers(prev, go, cycle)
        self._eval_cache = ((cache_key, cycle), prev)
        return prev

    def _check_drivers(self, values: dict, go: int, cycle: int) -> None:
        driven: dict = {}
        memo: dict = {}
        for a in self._active_assigns(values, go):
            if _guard_value(a.guard, values, memo):
                v = _ref_value(a.src, values)
                prior = driven.get(a.dst)
                if prior is not None and prior[0] != v:
                    raise SimError(
                        f"multiple drivers for port "
                        f"{'.'.join(str(x) for x in a.dst[1:])}: "
                        f"'{prior[1]}' and '{a.text}' are both active",
                        cycle,
                    )
                driven[a.dst] = (v, a.text)
        for cell in self.comp.cells:
            if cell.proto == "std_mem_d1":
                akey = ("c", cell.name, "addr0")
                if akey in driven and values.get(akey, 0) >= cell.params[1]:
                    raise SimError(
                        f"memory '{cell.name}' read at out-of-range address "
                        f"{values[akey]}",
                        cycle,
                    )

    def eval_as_cell(self, ins: dict[str, int], cycle: int) -> dict[str, int]:
        values = self.eval_cycle(ins, cycle)
        outs = {p: values.get(("i", p), 0) for p, _ in self.comp.outputs}
        if not self.lowered:
            done = 0
            if self.runner is not None and ins.get(GO, 0) == 1:
                if self.runner.vacuous:
                    done = 1
                else:
                    done = 1 if self.runner.done_now(values) else 0
            outs[DONE] = done
        return outs

    # -- commit

    def commit_cycle(self, values: dict, iface_inputs: dict[str, int], cycle: int) -> bool:
        """Clock edge: commit stateful cells, advance control. Returns
        True when this component's control completed in this cycle."""
        for name, beh in self.behaviors.items():
            reader = _CellReader(name, values)
            try:
                beh.commit(self.states[name], reader)
            except SimRuntimeError as e:
                raise SimError(f"cell '{name}': {e}", cycle) from e
        for name, sub in self.subsims.items():
            ins = {p: values.get(("c", name, p), 0) for p in self.sub_inputs[name]}
            sub.commit_as_cell(ins, cycle)
        self._eval_cache = None

        if self.lowered or self.runner is None:
            return values.get(("i", DONE), 0) == 1
        go = iface_inputs.get(GO, 0)
        if self.runner.vacuous:
            return go == 1
        if self.run_state == IDLE and go == 1:
            self.run_state = RUNNING
        if self.run_state == RUNNING:
            if self.runner.step(values):
                self.run_state = IDLE
                self.runner.start()
                return True
        return False

    def commit_as_cell(self, ins: dict[str, int], cycle: int) -> None:
        values = self.eval_cycle(ins, cycle)
        self.commit_cycle(values, ins, cycle)

    # -- state extraction

    def collect_state(self, prefix: str, memories: dict, registers: dict) -> None:
        for cell in self.comp.cells:
            name = prefix + cell.name
            if cell.proto == "std_mem_d1":
                memories[name] = list(self.states[cell.name]["data"])
            elif cell.proto == "std_reg":
                registers[name] = self.states[cell.name]["value"]
            elif cell.name in self.subsims:
                self.subsims[cell.name].collect_state(name + ".", memories, registers)


class _CellReader:
    """Callable reading a cell's input port values from the value map."""

    __slots__ = ("cell", "values")

    def __init__(self, cell: str, values: dict):
        self.cell = cell
        self.values = values

    def __call__(self, port: str) -> int:
        return self.values.get(("c", self.cell, port), 0)


# ---------------------------------------------------------------------------
# Entry points

DEFAULT_CYCLE_LIMIT = 1_000_000


def _check_no_externs(prog: Program, comp: Component, seen: set) -> None:
    if comp.name in seen:
        return
    seen.add(comp.name)
    for cell in comp.cells:
        if prog.extern_component(cell.proto) is not None:
            raise SimError(
                f"component '{comp.name}' instantiates extern '{cell.proto}'; "
                "externs cannot be interpreted"
            )
        sub = prog.component(cell.proto)
        if sub is not None:
            _check_no_externs(prog, sub, seen)


def _load_image(sim: Sim, mem_image: Optional[dict]) -> None:
    if not mem_image:
        return
    for name, data in mem_image.items():
        width = None
        if isinstance(data, dict):
            width = data.get("width")
            data = data["data"]
        cell = sim.comp.cell(name)
        if cell is None or cell.proto != "std_mem_d1":
            raise SimError(f"memory image names unknown memory '{name}'")
        if width is not None and width != cell.params[0]:
            raise SimError(
                f"memory image width {width} does not match '{name}' "
                f"({cell.params[0]} bits)"
            )
        sim.behaviors[name].load(sim.states[name], list(data))


def _run(
    prog: Program,
    mem_image: Optional[dict],
    cycle_limit: int,
    want_trace: bool,
) -> RunResult:
    entry = prog.component(prog.entrypoint)
    if entry is None:
        raise SimError(f"no entrypoint component '{prog.entrypoint}'")
    _check_no_externs(prog, entry, set())
    sim = Sim(prog, entry)
    sim.reset()
    _load_image(sim, mem_image)

    if sim.runner is not None and sim.runner.vacuous and not sim.lowered:
        memories: dict = {}
        registers: dict = {}
        sim.collect_state("", memories, registers)
        return RunResult(0, memories, registers, [] if want_trace else None)

    iface = {GO: 1}
    trace: Optional[list[list[str]]] = [] if want_trace else None
    for cycle in range(cycle_limit):
        values = sim.eval_cycle(iface, cycle)
        if trace is not None:
            trace.append(sim.active_group_names(values, 1))
        if sim.lowered:
            done = values.get(("i", DONE), 0) == 1
            sim.commit_cycle(values, iface, cycle)
        else:
            done = sim.commit_cycle(values, iface, cycle)
        if done:
            memories = {}
            registers: dict = {}
            sim.collect_state("", memories, registers)
            return RunResult(cycle + 1, memories, registers, trace)
    raise SimError(f"cycle limit {cycle_limit} exceeded without completion")


def interpret_control(
    prog: Program,
    mem_image: Optional[dict] = None,
    cycle_limit: int = DEFAULT_CYCLE_LIMIT,
    trace: bool = False,
) -> RunResult:
    """Execute the entrypoint's control tree. RunResult.cycles counts
    executed cycles (completion is observed during the final one)."""
    return _run(prog, mem_image, cycle_limit, trace)


def interpret_structural(
    prog: Program,
    mem_image: Optional[dict] = None,
    cycle_limit: int = DEFAULT_CYCLE_LIMIT,
    trace: bool = False,
) -> RunResult:
    """Drive a fully lowered entrypoint with go=1 until done reads 1."""
    entry = prog.component(prog.entrypoint)
    if entry is None:
        raise SimError(f"no entrypoint component '{prog.entrypoint}'")
    if entry.groups or not isinstance(entry.control, Empty):
        raise SimError("interpret_structural requires a lowered program")
    if not any(p == DONE for p, _ in entry.outputs):
        raise SimError("lowered component lacks a done port")
    return _run(prog, mem_image, cycle_limit, trace)


def measure_group(
    prog: Program,
    group_name: str,
    mem_image: Optional[dict] = None,
    cycle_limit: int = DEFAULT_CYCLE_LIMIT,
) -> int:
    """Cycles from activation to the group's done: runs Enable(group) in
    isolation and returns the index of the done cycle."""
    entry = prog.component(prog.entrypoint)
    if entry is None or entry.group(group_name) is None:
        raise SimError(f"no group '{group_name}' in entrypoint")
    scratch = prog.copy()
    scratch.component(scratch.entrypoint).control = Enable(group_name)
    result = _run(scratch, mem_image, cycle_limit, False)
    return result.cycles - 1
