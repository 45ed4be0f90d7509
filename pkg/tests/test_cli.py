"""Driver behavior: backends, pass toggles, stats, and exit codes."""

import json
import subprocess
import sys

from corpus import FIXTURE_DIR, GOLDEN_DIR

TWO_WRITES = FIXTURE_DIR / "seq_two_writes.fil"


def run_cli(*args, check=True):
    proc = subprocess.run(
        [sys.executable, "-m", "filc.cli", *args],
        capture_output=True,
        text=True,
    )
    if check:
        assert proc.returncode == 0, proc.stderr
    return proc


def test_emit_after_compile_control_matches_golden():
    proc = run_cli(
        str(TWO_WRITES), "--disable", "infer-latency,static", "--emit-after", "compile-control"
    )
    assert proc.stdout == (GOLDEN_DIR / "seq_two_writes_compile_control.fil").read_text()


def test_emit_after_each_stage(tmp_path):
    for stage, golden in [
        ("go-insertion", "seq_two_writes_go_insertion.fil"),
        ("remove-groups", "seq_two_writes_remove_groups.fil"),
    ]:
        out = tmp_path / "dump.fil"
        run_cli(
            str(TWO_WRITES),
            "--disable",
            "infer-latency,static",
            "--emit-after",
            stage,
            "-o",
            str(out),
        )
        assert out.read_text() == (GOLDEN_DIR / golden).read_text()


def test_interp_backend_json(tmp_path):
    data = tmp_path / "data.json"
    data.write_text(
        json.dumps(
            {
                "m0": {"width": 32, "data": [1, 2, 3, 4]},
                "m1": [1, 2, 3, 4],
                "m2": [1, 2, 3, 4],
                "m3": [1, 2, 3, 4],
            }
        )
    )
    proc = run_cli(
        str(FIXTURE_DIR / "reduction_tree.fil"), "-b", "interp", "-d", str(data)
    )
    result = json.loads(proc.stdout)
    assert set(result) >= {"cycles", "memories", "registers"}
    assert result["registers"]["ans"] == 40


def test_interp_defaults_to_zeroed_memories():
    proc = run_cli(str(FIXTURE_DIR / "while_sum.fil"), "-b", "interp")
    result = json.loads(proc.stdout)
    assert result["memories"]["out"] == [0]


def test_disable_static_preserves_observable_state(tmp_path):
    data = tmp_path / "data.json"
    data.write_text(json.dumps({"m": [3, 1, 4, 1]}))
    fixture = str(FIXTURE_DIR / "while_sum.fil")
    base = json.loads(run_cli(fixture, "-b", "interp", "-d", str(data)).stdout)
    nostatic = json.loads(
        run_cli(fixture, "-b", "interp", "-d", str(data), "--disable", "static").stdout
    )
    assert base["memories"] == nostatic["memories"]
    assert base["cycles"] <= nostatic["cycles"]


def test_disabling_any_optimization_preserves_observable_state(tmp_path):
    data = tmp_path / "data.json"
    data.write_text(
        json.dumps({"m0": [1, 2, 3, 4], "m1": [1, 2, 3, 4], "m2": [1, 2, 3, 4], "m3": [1, 2, 3, 4]})
    )
    fixture = str(FIXTURE_DIR / "reduction_tree.fil")
    base = json.loads(run_cli(fixture, "-b", "interp", "-d", str(data)).stdout)
    for opt in ["infer-latency", "resource-share", "register-share", "compile-static"]:
        ablated = json.loads(
            run_cli(fixture, "-b", "interp", "-d", str(data), "--disable", opt).stdout
        )
        assert ablated["memories"] == base["memories"], opt
        assert ablated["registers"]["ans"] == base["registers"]["ans"] == 40, opt


def test_verilog_backend_writes_primitives(tmp_path):
    out = tmp_path / "design.sv"
    run_cli(str(TWO_WRITES), "-b", "verilog", "-o", str(out))
    assert "module main(" in out.read_text()
    assert (tmp_path / "primitives.sv").exists()


def test_verilog_backend_copies_extern_files(tmp_path):
    src_dir = tmp_path / "src"
    out_dir = tmp_path / "build"
    src_dir.mkdir()
    out_dir.mkdir()
    design = src_dir / "design.fil"
    design.write_text((FIXTURE_DIR / "extern_decl.fil").read_text())
    (src_dir / "sqrt.sv").write_text("module sqrt(); endmodule\n")
    run_cli(str(design), "-b", "verilog", "-o", str(out_dir / "design.sv"))
    assert (out_dir / "sqrt.sv").read_text() == "module sqrt(); endmodule\n"


def test_futil_backend_prints_il():
    proc = run_cli(str(TWO_WRITES), "-b", "futil")
    assert proc.stdout.startswith("component main")
    assert "control {}" in proc.stdout


def test_stats_shape_and_counts():
    proc = run_cli(str(TWO_WRITES), "--stats")
    stats = json.loads(proc.stdout)
    assert stats["cells"] == 2
    assert stats["groups"] == 2
    # seq + two enables
    assert stats["control_statements"] == 3
    assert stats["compile_ms"] >= 0


def test_parse_error_exit_code(tmp_path):
    bad = tmp_path / "bad.fil"
    bad.write_text("component main( {")
    proc = run_cli(str(bad), check=False)
    assert proc.returncode == 1
    assert "error" in proc.stderr


def test_validate_error_exit_code(tmp_path):
    bad = tmp_path / "bad.fil"
    bad.write_text(
        """
component main() -> () {
  cells { r = std_reg(8); }
  wires { group g { r.in = 8'd1; r.write_en = 1'd1; } }
  control { g; }
}
"""
    )
    proc = run_cli(bad.as_posix(), check=False)
    assert proc.returncode == 1
    assert "done" in proc.stderr


def test_unknown_pass_rejected():
    proc = run_cli(str(TWO_WRITES), "--disable", "nonsense", check=False)
    assert proc.returncode == 1
    assert "unknown pass" in proc.stderr


def test_verilog_requires_lowering_passes():
    proc = run_cli(str(TWO_WRITES), "--disable", "remove-groups", check=False)
    assert proc.returncode == 1
