"""Front-to-IR compile pipeline."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .ir import IrProgram, lower
from .lexer import tokenize
from .parser import parse
from .resolver import CheckedProgram, resolve
from .worker import LeafBinding, binding_of_decl

SCRIPT_SUFFIX = ".mf"


@dataclass
class CompiledScript:
    ir: IrProgram
    bindings: dict[str, LeafBinding]
    checked: CheckedProgram


def compile_source(source: str) -> CompiledScript:
    checked = resolve(parse(tokenize(source)))
    ir = lower(checked)
    bindings = {name: binding_of_decl(decl) for name, decl in checked.leaves.items()}
    return CompiledScript(ir, bindings, checked)


def compile_file(path) -> CompiledScript:
    return compile_source(Path(path).read_text(encoding="utf-8"))
