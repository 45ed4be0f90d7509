"""Compiler toolchain for the .fil hardware intermediate language:
structural cells/wires/groups plus an imperative control tree, lowered
through FSM synthesis to flat guarded assignments and SystemVerilog,
with a cycle-accurate interpreter as the semantic reference.
"""

__version__ = "0.1.0"
