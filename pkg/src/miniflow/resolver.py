"""Name and type checking for parsed programs.

Enforces the source-level write-once discipline: every variable is declared
once per scope, assigned exactly once in the scope that declares it, and never
reassigned. Rejecting unassigned variables up front guarantees every future
eventually resolves, so quiescence coincides with completion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ResolveError
from .nodes import (
    Assign,
    BinOp,
    Call,
    CallStmt,
    Expr,
    Foreach,
    FuncDef,
    Ident,
    LeafDecl,
    Literal,
    Program,
    Stmt,
    UnaryOp,
    VarDecl,
)
from .values import ScalarType

TRACE_BUILTIN = "trace"

_NUMERIC = (ScalarType.INT, ScalarType.FLOAT)


@dataclass
class CheckedProgram:
    program: Program
    leaves: dict[str, LeafDecl]
    funcs: dict[str, FuncDef]
    top_level_vars: list[tuple[str, ScalarType]]
    # Inferred type per expression node (keyed by id; nodes stay alive via program).
    expr_types: dict[int, ScalarType] = field(repr=False, default_factory=dict)


class _Scope:
    def __init__(self, parent: "_Scope | None" = None, func_barrier: bool = False):
        self.parent = parent
        self.func_barrier = func_barrier
        self.vars: dict[str, ScalarType] = {}
        self.assigned: set[str] = set()

    def lookup(self, name: str) -> ScalarType | None:
        scope: _Scope | None = self
        while scope is not None:
            if name in scope.vars:
                return scope.vars[name]
            if scope.func_barrier:
                return None
            scope = scope.parent
        return None

    def declared_anywhere(self, name: str) -> bool:
        return self.lookup(name) is not None


class _Resolver:
    def __init__(self, program: Program):
        self.program = program
        self.leaves: dict[str, LeafDecl] = {}
        self.funcs: dict[str, FuncDef] = {}
        self.expr_types: dict[int, ScalarType] = {}
        self.top_level_vars: list[tuple[str, ScalarType]] = []

    def run(self) -> CheckedProgram:
        top = _Scope()
        for stmt in self.program.statements:
            self.check_stmt(stmt, top, top_level=True)
        self.finish_scope(top)
        return CheckedProgram(self.program, self.leaves, self.funcs,
                              self.top_level_vars, self.expr_types)

    # -- statements ---------------------------------------------------------

    def check_stmt(self, stmt: Stmt, scope: _Scope, top_level: bool = False) -> None:
        if isinstance(stmt, LeafDecl):
            self.declare_callable(stmt.name, stmt.line, stmt.column)
            self.leaves[stmt.name] = stmt
        elif isinstance(stmt, FuncDef):
            self.check_func(stmt)
        elif isinstance(stmt, VarDecl):
            self.declare_var(stmt.name, stmt.var_type, scope, stmt.line, stmt.column)
            if top_level:
                self.top_level_vars.append((stmt.name, stmt.var_type))
            if stmt.init is not None:
                t = self.check_expr(stmt.init, scope)
                if t is not stmt.var_type:
                    raise ResolveError(
                        f"cannot initialize {stmt.var_type.value} {stmt.name!r} "
                        f"with {t.value} value", stmt.line, stmt.column)
                scope.assigned.add(stmt.name)
        elif isinstance(stmt, Assign):
            self.check_assign(stmt, scope)
        elif isinstance(stmt, CallStmt):
            self.check_call(stmt.call, scope, statement=True)
        elif isinstance(stmt, Foreach):
            self.check_foreach(stmt, scope)
        else:
            raise AssertionError(f"unknown statement {stmt!r}")

    def check_assign(self, stmt: Assign, scope: _Scope) -> None:
        if stmt.target in scope.vars:
            if stmt.target in scope.assigned:
                raise ResolveError(f"double assignment to {stmt.target!r}",
                                   stmt.line, stmt.column)
            declared = scope.vars[stmt.target]
        elif scope.lookup(stmt.target) is not None:
            raise ResolveError(
                f"cannot assign to {stmt.target!r}: declared in an enclosing scope "
                "(each loop iteration would store it again)", stmt.line, stmt.column)
        else:
            raise ResolveError(f"unbound identifier {stmt.target!r}", stmt.line, stmt.column)
        t = self.check_expr(stmt.expr, scope)
        if t is not declared:
            raise ResolveError(
                f"cannot assign {t.value} value to {declared.value} {stmt.target!r}",
                stmt.line, stmt.column)
        scope.assigned.add(stmt.target)

    def check_foreach(self, stmt: Foreach, scope: _Scope) -> None:
        body_scope = _Scope(parent=scope)
        self.declare_var(stmt.index_var, ScalarType.INT, body_scope, stmt.line, stmt.column)
        body_scope.assigned.add(stmt.index_var)  # bound per iteration
        for inner in stmt.body:
            self.check_stmt(inner, body_scope)
        self.finish_scope(body_scope)

    def check_func(self, func: FuncDef) -> None:
        self.declare_callable(func.name, func.line, func.column)
        body_scope = _Scope(func_barrier=True)
        seen = set()
        for p in list(func.inputs) + list(func.outputs):
            if p.name in seen:
                raise ResolveError(f"duplicate parameter {p.name!r} in func {func.name!r}",
                                   func.line, func.column)
            seen.add(p.name)
            self.declare_var(p.name, p.type, body_scope, func.line, func.column)
        for p in func.inputs:
            body_scope.assigned.add(p.name)  # bound at the call site
        for inner in func.body:
            self.check_stmt(inner, body_scope)
        self.finish_scope(body_scope)
        # Registered after its body is checked, so recursion is unbound.
        self.funcs[func.name] = func

    # -- expressions --------------------------------------------------------

    def check_expr(self, expr: Expr, scope: _Scope) -> ScalarType:
        t = self._infer(expr, scope)
        self.expr_types[id(expr)] = t
        return t

    def _infer(self, expr: Expr, scope: _Scope) -> ScalarType:
        if isinstance(expr, Literal):
            return expr.type
        if isinstance(expr, Ident):
            t = scope.lookup(expr.name)
            if t is None:
                if expr.name in self.leaves or expr.name in self.funcs:
                    raise ResolveError(f"{expr.name!r} is a function, not a value",
                                       expr.line, expr.column)
                raise ResolveError(f"unbound identifier {expr.name!r}", expr.line, expr.column)
            return t
        if isinstance(expr, Call):
            return self.check_call(expr, scope, statement=False)
        if isinstance(expr, BinOp):
            lt = self.check_expr(expr.left, scope)
            rt = self.check_expr(expr.right, scope)
            return self._binop_type(expr, lt, rt)
        if isinstance(expr, UnaryOp):
            t = self.check_expr(expr.operand, scope)
            if t not in _NUMERIC:
                raise ResolveError(f"unary '-' needs a numeric operand, got {t.value}",
                                   expr.line, expr.column)
            return t
        raise AssertionError(f"unknown expression {expr!r}")

    def _binop_type(self, expr: BinOp, lt: ScalarType, rt: ScalarType) -> ScalarType:
        op = expr.op
        if lt is ScalarType.STRING and rt is ScalarType.STRING and op == "+":
            return ScalarType.STRING
        if lt in _NUMERIC and rt in _NUMERIC:
            if op == "%" and (lt is ScalarType.FLOAT or rt is ScalarType.FLOAT):
                raise ResolveError("'%' requires integer operands", expr.line, expr.column)
            if lt is ScalarType.FLOAT or rt is ScalarType.FLOAT:
                return ScalarType.FLOAT
            return ScalarType.INT
        raise ResolveError(f"operator {op!r} not defined for {lt.value} and {rt.value}",
                           expr.line, expr.column)

    def check_call(self, call: Call, scope: _Scope, statement: bool) -> ScalarType:
        if call.name == TRACE_BUILTIN:
            if not statement:
                raise ResolveError("trace(...) produces no value", call.line, call.column)
            for arg in call.args:
                self.check_expr(arg, scope)
            self.expr_types[id(call)] = ScalarType.INT  # unused
            return ScalarType.INT
        decl = self.leaves.get(call.name) or self.funcs.get(call.name)
        if decl is None:
            raise ResolveError(f"call to undefined function {call.name!r}",
                               call.line, call.column)
        params = decl.inputs
        if len(call.args) != len(params):
            raise ResolveError(
                f"{call.name!r} takes {len(params)} argument(s), got {len(call.args)}",
                call.line, call.column)
        for arg, param in zip(call.args, params):
            at = self.check_expr(arg, scope)
            if at is not param.type:
                raise ResolveError(
                    f"argument {param.name!r} of {call.name!r} expects {param.type.value}, "
                    f"got {at.value}", call.line, call.column)
        if not statement:
            if len(decl.outputs) != 1:
                raise ResolveError(
                    f"{call.name!r} has {len(decl.outputs)} outputs and cannot be "
                    "used in an expression", call.line, call.column)
            t = decl.outputs[0].type
            self.expr_types[id(call)] = t
            return t
        self.expr_types[id(call)] = decl.outputs[0].type if decl.outputs else ScalarType.INT
        return ScalarType.INT

    # -- helpers ------------------------------------------------------------

    def declare_var(self, name: str, var_type: ScalarType, scope: _Scope,
                    line: int, column: int) -> None:
        if name in self.leaves or name in self.funcs or name == TRACE_BUILTIN:
            raise ResolveError(f"{name!r} is already a function name", line, column)
        if name in scope.vars:
            raise ResolveError(f"{name!r} is already declared in this scope", line, column)
        if scope.declared_anywhere(name):
            raise ResolveError(f"{name!r} shadows a variable from an enclosing scope",
                               line, column)
        scope.vars[name] = var_type

    def declare_callable(self, name: str, line: int, column: int) -> None:
        if name == TRACE_BUILTIN:
            raise ResolveError(f"{name!r} is a builtin and cannot be redefined", line, column)
        if name in self.leaves or name in self.funcs:
            raise ResolveError(f"function {name!r} is already declared", line, column)

    def finish_scope(self, scope: _Scope) -> None:
        for name in scope.vars:
            if name not in scope.assigned:
                raise ResolveError(
                    f"variable {name!r} is declared but never assigned; "
                    "its future would never resolve")


def resolve(program: Program) -> CheckedProgram:
    """Check names, arities, scalar types, and the write-once rule."""
    return _Resolver(program).run()
