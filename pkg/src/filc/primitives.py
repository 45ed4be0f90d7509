"""The standard cell library.

Each primitive carries its port signature, sharing/latency attributes,
declared combinational input->output paths (for cycle checking), and a
behavioral model used by the interpreter. Behaviors are deterministic
functions of the current-cycle inputs and the pre-cycle state: `comb`
produces the cycle's outputs, `commit` advances state at the clock edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .ir import IN, OUT


class SimRuntimeError(Exception):
    """Raised by behaviors on semantic violations (e.g. bad address)."""


def _mask(width: int) -> int:
    return (1 << width) - 1


# ---------------------------------------------------------------------------
# Behaviors. State is a plain dict so RunResult extraction stays simple.


class Behavior:
    stateful = False

    def __init__(self, params: tuple[int, ...]):
        self.params = params

    def reset(self) -> dict:
        return {}

    def load(self, state: dict, data: list[int]) -> None:
        raise SimRuntimeError("cell cannot be initialized from a memory image")

    def comb(self, state: dict, inputs: Callable[[str], int]) -> dict[str, int]:
        return {}

    def commit(self, state: dict, inputs: Callable[[str], int]) -> None:
        pass


class RegBehavior(Behavior):
    stateful = True

    def reset(self):
        return {"value": 0, "done": 0}

    def comb(self, state, inputs):
        return {"out": state["value"], "done": state["done"]}

    def commit(self, state, inputs):
        if inputs("write_en") == 1:
            state["value"] = inputs("in") & _mask(self.params[0])
            state["done"] = 1
        else:
            state["done"] = 0


class AddBehavior(Behavior):
    def comb(self, state, inputs):
        w = self.params[0]
        return {"out": (inputs("left") + inputs("right")) & _mask(w)}


class SubBehavior(Behavior):
    def comb(self, state, inputs):
        w = self.params[0]
        return {"out": (inputs("left") - inputs("right")) & _mask(w)}


class CmpBehavior(Behavior):
    def __init__(self, params, op):
        super().__init__(params)
        self.op = op

    def comb(self, state, inputs):
        l, r = inputs("left"), inputs("right")
        res = {
            "lt": l < r,
            "gt": l > r,
            "eq": l == r,
            "neq": l != r,
            "le": l <= r,
            "ge": l >= r,
        }[self.op]
        return {"out": int(res)}


class ConstBehavior(Behavior):
    def comb(self, state, inputs):
        return {"out": self.params[1] & _mask(self.params[0])}


class MemD1Behavior(Behavior):
    stateful = True

    def reset(self):
        return {"data": [0] * self.params[1], "done": 0}

    def load(self, state, data):
        width, length = self.params[0], self.params[1]
        if len(data) != length:
            raise SimRuntimeError(
                f"memory image has {len(data)} values, memory holds {length}"
            )
        state["data"] = [v & _mask(width) for v in data]

    def comb(self, state, inputs):
        addr = inputs("addr0")
        data = state["data"]
        # An undriven address floats to 0; reads through a driven
        # out-of-range address are flagged by the simulator core.
        value = data[addr] if addr < len(data) else 0
        return {"read_data": value, "done": state["done"]}

    def commit(self, state, inputs):
        if inputs("write_en") == 1:
            addr = inputs("addr0")
            if addr >= len(state["data"]):
                raise SimRuntimeError(f"memory write to out-of-range address {addr}")
            state["data"][addr] = inputs("write_data") & _mask(self.params[0])
            state["done"] = 1
        else:
            state["done"] = 0


class MultSeqBehavior(Behavior):
    """4-cycle multiplier: with go held, done rises exactly 4 cycles
    after activation and out presents the product from then on. Re-arms
    when go drops."""

    stateful = True
    LATENCY = 4

    def reset(self):
        return {"count": 0, "result": 0, "done": 0}

    def comb(self, state, inputs):
        return {"out": state["result"], "done": state["done"]}

    def commit(self, state, inputs):
        if inputs("go") != 1:
            state["count"] = 0
            state["done"] = 0
            return
        if state["count"] < self.LATENCY - 1:
            state["count"] += 1
            state["done"] = 0
        elif state["count"] == self.LATENCY - 1:
            w = self.params[0]
            state["result"] = (inputs("left") * inputs("right")) & _mask(w)
            state["count"] += 1
            state["done"] = 1
        else:
            # Completed; hold until go drops.
            state["done"] = 0


class MacBehavior(Behavior):
    """Multiply-accumulate: adds left*right into the accumulator once per
    contiguous go episode (re-arms on a go gap), exposing the accumulator
    combinationally on out."""

    stateful = True

    def reset(self):
        return {"acc": 0, "fired": 0, "done": 0}

    def comb(self, state, inputs):
        return {"out": state["acc"], "done": state["done"]}

    def commit(self, state, inputs):
        if inputs("go") == 1:
            if not state["fired"]:
                w = self.params[0]
                state["acc"] = (state["acc"] + inputs("left") * inputs("right")) & _mask(w)
                state["fired"] = 1
                state["done"] = 1
            else:
                state["done"] = 0
        else:
            state["fired"] = 0
            state["done"] = 0


class CounterBehavior(Behavior):
    """Free-running counter: out advances by one on every cycle incr is
    high. No handshake; used for address sequencing."""

    stateful = True

    def reset(self):
        return {"value": 0}

    def comb(self, state, inputs):
        return {"out": state["value"]}

    def commit(self, state, inputs):
        if inputs("incr") == 1:
            state["value"] = (state["value"] + 1) & _mask(self.params[0])


# ---------------------------------------------------------------------------
# Definitions


@dataclass
class PrimitiveDef:
    name: str
    arity: int  # number of integer parameters
    make_ports: Callable[[tuple[int, ...]], dict[str, tuple[int, str]]]
    attributes: dict[str, int] = field(default_factory=dict)
    go_equiv: Optional[str] = None
    comb_path_ports: list[tuple[str, str]] = field(default_factory=list)
    behavior: Optional[Callable[[tuple[int, ...]], Behavior]] = None

    def ports(self, params: tuple[int, ...]) -> dict[str, tuple[int, str]]:
        if len(params) != self.arity:
            raise ValueError(
                f"{self.name} expects {self.arity} parameter(s), got {len(params)}"
            )
        return self.make_ports(params)

    def comb_paths(self, params: tuple[int, ...]) -> list[tuple[str, str]]:
        return list(self.comb_path_ports)


def _binop_ports(p):
    w = p[0]
    return {"left": (w, IN), "right": (w, IN), "out": (w, OUT)}


def _cmp_ports(p):
    w = p[0]
    return {"left": (w, IN), "right": (w, IN), "out": (1, OUT)}


_LIBRARY: dict[str, PrimitiveDef] = {}


def _register(d: PrimitiveDef) -> None:
    _LIBRARY[d.name] = d


_register(
    PrimitiveDef(
        name="std_reg",
        arity=1,
        make_ports=lambda p: {
            "in": (p[0], IN),
            "write_en": (1, IN),
            "out": (p[0], OUT),
            "done": (1, OUT),
        },
        attributes={"static": 1},
        go_equiv="write_en",
        comb_path_ports=[],
        behavior=RegBehavior,
    )
)

_register(
    PrimitiveDef(
        name="std_add",
        arity=1,
        make_ports=_binop_ports,
        attributes={"share": 1},
        comb_path_ports=[("left", "out"), ("right", "out")],
        behavior=AddBehavior,
    )
)

_register(
    PrimitiveDef(
        name="std_sub",
        arity=1,
        make_ports=_binop_ports,
        attributes={"share": 1},
        comb_path_ports=[("left", "out"), ("right", "out")],
        behavior=SubBehavior,
    )
)

for _op, _prim in [
    ("lt", "std_lt"),
    ("gt", "std_gt"),
    ("eq", "std_eq"),
    ("neq", "std_neq"),
    ("le", "std_le"),
    ("ge", "std_ge"),
]:
    _register(
        PrimitiveDef(
            name=_prim,
            arity=1,
            make_ports=_cmp_ports,
            attributes={"share": 1},
            comb_path_ports=[("left", "out"), ("right", "out")],
            behavior=(lambda op: lambda params: CmpBehavior(params, op))(_op),
        )
    )

_register(
    PrimitiveDef(
        name="std_const",
        arity=2,
        make_ports=lambda p: {"out": (p[0], OUT)},
        comb_path_ports=[],
        behavior=ConstBehavior,
    )
)

_register(
    PrimitiveDef(
        name="std_mem_d1",
        arity=3,  # width, length, address width
        make_ports=lambda p: {
            "addr0": (p[2], IN),
            "write_data": (p[0], IN),
            "write_en": (1, IN),
            "read_data": (p[0], OUT),
            "done": (1, OUT),
        },
        attributes={"static": 1},
        go_equiv="write_en",
        comb_path_ports=[("addr0", "read_data")],
        behavior=MemD1Behavior,
    )
)

_register(
    PrimitiveDef(
        name="std_mult_seq",
        arity=1,
        make_ports=lambda p: {
            "left": (p[0], IN),
            "right": (p[0], IN),
            "go": (1, IN),
            "out": (p[0], OUT),
            "done": (1, OUT),
        },
        attributes={"static": 4, "share": 1},
        go_equiv="go",
        comb_path_ports=[],
        behavior=MultSeqBehavior,
    )
)

_register(
    PrimitiveDef(
        name="std_mac",
        arity=1,
        make_ports=lambda p: {
            "left": (p[0], IN),
            "right": (p[0], IN),
            "go": (1, IN),
            "out": (p[0], OUT),
            "done": (1, OUT),
        },
        attributes={"static": 1},
        go_equiv="go",
        comb_path_ports=[],
        behavior=MacBehavior,
    )
)

_register(
    PrimitiveDef(
        name="std_counter",
        arity=1,
        make_ports=lambda p: {"incr": (1, IN), "out": (p[0], OUT)},
        comb_path_ports=[],
        behavior=CounterBehavior,
    )
)


def library() -> dict[str, PrimitiveDef]:
    return _LIBRARY
