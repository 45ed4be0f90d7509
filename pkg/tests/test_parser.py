"""Parser and pretty-printer: grammar coverage and round-tripping."""

import pytest

from filc.ir import (
    CellPort,
    ConstPort,
    Empty,
    GAnd,
    GCmp,
    GNot,
    HolePort,
    If,
    Par,
    Seq,
    While,
)
from filc.parser import ParseError, parse_program, print_program

from corpus import fixture_paths, random_programs


def parse(src):
    return parse_program(src)


WRAP = """
component main() -> () {{
  cells {{
{cells}
  }}
  wires {{
{wires}
  }}
  control {{{control}}}
}}
"""


def wrap(cells="", wires="", control=""):
    return WRAP.format(cells=cells, wires=wires, control=control)


def test_empty_component_body_is_empty_control():
    prog = parse("component main() -> () { cells {} wires {} control {} }")
    comp = prog.component("main")
    assert comp.cells == [] and comp.groups == []
    assert isinstance(comp.control, Empty)


def test_group_attributes():
    prog = parse(
        wrap(
            cells="r = std_reg(32);",
            wires='group foo<"latency"=1> { r.in = 1; r.write_en = 1; foo[done] = r.done; }',
        )
    )
    grp = prog.component("main").group("foo")
    assert grp.attributes == {"latency": 1}


def test_bare_literal_width_inferred_from_destination():
    prog = parse(
        wrap(
            cells="r = std_reg(32);",
            wires="group g { r.in = 1; r.write_en = 1; g[done] = r.done; }",
        )
    )
    grp = prog.component("main").group("g")
    assert grp.assigns[0].src == ConstPort(32, 1)
    assert grp.assigns[1].src == ConstPort(1, 1)
    # printing always emits sized constants
    assert "32'd1" in print_program(prog)


def test_bare_literal_width_inferred_in_comparison():
    prog = parse(
        wrap(
            cells="f = std_reg(2);",
            wires="f.in = f.out == 2 ? f.out;",
        )
    )
    a = prog.component("main").continuous[0]
    assert a.guard == GCmp("==", CellPort("f", "out"), ConstPort(2, 2))


def test_hole_assignment_form():
    prog = parse(
        wrap(
            cells="x_reg = std_reg(32);",
            wires="group assign_one { x_reg.in = 1; x_reg.write_en = 1; "
            "assign_one[done] = x_reg.done; }",
        )
    )
    grp = prog.component("main").group("assign_one")
    assert grp.assigns[-1].dst == HolePort("assign_one", "done")
    assert "assign_one[done] = x_reg.done;" in print_program(prog)


def test_control_statements_parse():
    prog = parse(
        wrap(
            cells="le = std_lt(1);\nr = std_reg(1);",
            wires="group a { r.in = 1; r.write_en = 1; a[done] = r.done; }\n"
            "group c { le.left = r.out; le.right = 1; c[done] = 1; }",
            control="""
    while le.out with c {
      seq {
        par { a; a; }
        if le.out with c { a; } else { a; }
      }
    }
""",
        )
    )
    ctl = prog.component("main").control
    assert isinstance(ctl, While)
    body = ctl.body
    assert isinstance(body, Seq)
    assert isinstance(body.children[0], Par)
    assert isinstance(body.children[1], If)


def test_if_without_else_desugars_to_empty():
    prog = parse(
        wrap(
            cells="le = std_lt(1);\nr = std_reg(1);",
            wires="group a { r.in = 1; r.write_en = 1; a[done] = r.done; }\n"
            "group c { le.left = r.out; le.right = 1; c[done] = 1; }",
            control=" if le.out with c { a; } ",
        )
    )
    node = prog.component("main").control
    assert isinstance(node, If)
    assert isinstance(node.else_branch, Empty)


def test_guard_precedence_and_not():
    prog = parse(
        wrap(
            cells="r = std_reg(1);\ns = std_reg(1);",
            wires="r.in = r.out && s.out || !s.done ? s.out;\n"
            "r.write_en = !(r.out == 1) ? 1;",
        )
    )
    a0, a1 = prog.component("main").continuous
    assert a0.guard.__class__.__name__ == "GOr"
    assert isinstance(a0.guard.args[0], GAnd)
    assert isinstance(a1.guard, GNot)
    assert isinstance(a1.guard.arg, GCmp)
    # round-trip preserves the shapes
    again = parse(print_program(prog))
    assert again == prog


def test_extern_declaration():
    prog = parse(
        'extern "sqrt.sv" { component sqrt(left: 32, go: 1) -> (out: 32, done: 1); }\n'
        + wrap()
    )
    assert prog.externs[0].path == "sqrt.sv"
    sig = prog.externs[0].components[0]
    assert sig.name == "sqrt"
    assert ("done", 1) in sig.outputs
    assert parse(print_program(prog)) == prog


def test_comments_ignored():
    prog = parse("// a comment\ncomponent main() -> () { cells {} wires {} control {} }")
    assert prog.component("main") is not None


def test_first_syntax_error_has_span():
    with pytest.raises(ParseError) as exc:
        parse("component main( { }")
    assert exc.value.span.line == 1


def test_parse_is_total_error_or_program():
    for bad in ["", "component", "component main() -> ()", "cells {}", "group g {}"]:
        with pytest.raises(ParseError):
            parse(bad)


def test_constant_destination_rejected():
    with pytest.raises(ParseError):
        parse(wrap(wires="1'd1 = r.out;"))


def test_fixtures_roundtrip():
    for path in fixture_paths():
        prog = parse_program(path.read_text(), str(path))
        assert parse_program(print_program(prog)) == prog, path.name


def test_random_programs_roundtrip():
    for name, prog in random_programs(50):
        assert parse_program(print_program(prog)) == prog, name


def test_reduction_tree_fixture_shape():
    from corpus import FIXTURE_DIR

    prog = parse_program((FIXTURE_DIR / "reduction_tree.fil").read_text())
    comp = prog.component("main")
    assert {g.name for g in comp.groups} >= {"add0", "add1", "add2", "incr_idx", "cond"}
    ctl = comp.control
    assert isinstance(ctl, While) and ctl.cond == "cond"
    assert ctl.port == CellPort("le", "out")
    body = ctl.body
    assert isinstance(body, Seq)
    assert isinstance(body.children[0], Par)
    assert [c.group for c in body.children[0].children] == ["add0", "add1"]
    assert [c.group for c in body.children[1:]] == ["add2", "incr_idx"]
