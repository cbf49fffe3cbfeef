"""AST node definitions.

Node equality ignores source positions so structural comparisons (and the
pretty-print round-trip property) work as expected.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .values import ScalarType


class ExecKind(enum.Enum):
    TEMPLATE = "template"
    NATIVE = "native"
    GUEST_EVAL = "guest"


@dataclass
class Node:
    pass


@dataclass
class Expr(Node):
    pass


@dataclass
class Literal(Expr):
    value: object  # int | float | str
    type: ScalarType
    line: int = field(compare=False, default=0)
    column: int = field(compare=False, default=0)


@dataclass
class Ident(Expr):
    name: str
    line: int = field(compare=False, default=0)
    column: int = field(compare=False, default=0)


@dataclass
class Call(Expr):
    name: str
    args: list[Expr]
    line: int = field(compare=False, default=0)
    column: int = field(compare=False, default=0)


@dataclass
class BinOp(Expr):
    op: str  # + - * / %
    left: Expr
    right: Expr
    line: int = field(compare=False, default=0)
    column: int = field(compare=False, default=0)


@dataclass
class UnaryOp(Expr):
    op: str  # -
    operand: Expr
    line: int = field(compare=False, default=0)
    column: int = field(compare=False, default=0)


@dataclass
class Stmt(Node):
    pass


@dataclass
class VarDecl(Stmt):
    name: str
    var_type: ScalarType
    init: Expr | None = None
    priority: int = 0
    line: int = field(compare=False, default=0)
    column: int = field(compare=False, default=0)


@dataclass
class Assign(Stmt):
    target: str
    expr: Expr
    priority: int = 0
    line: int = field(compare=False, default=0)
    column: int = field(compare=False, default=0)


@dataclass
class CallStmt(Stmt):
    call: Call
    priority: int = 0
    line: int = field(compare=False, default=0)
    column: int = field(compare=False, default=0)


@dataclass
class Foreach(Stmt):
    index_var: str
    range_start: int
    range_end: int  # inclusive
    body: list[Stmt]
    priority: int = 0
    line: int = field(compare=False, default=0)
    column: int = field(compare=False, default=0)


@dataclass
class Param(Node):
    name: str
    type: ScalarType


@dataclass
class LeafDecl(Stmt):
    outputs: list[Param]
    name: str
    inputs: list[Param]
    package_name: str | None
    package_version: str | None
    exec_kind: ExecKind
    template: str | None
    line: int = field(compare=False, default=0)
    column: int = field(compare=False, default=0)


@dataclass
class FuncDef(Stmt):
    outputs: list[Param]
    name: str
    inputs: list[Param]
    body: list[Stmt]
    line: int = field(compare=False, default=0)
    column: int = field(compare=False, default=0)


@dataclass
class Program(Node):
    statements: list[Stmt]
