"""Dataflow IR: futures plus rules guarded by input availability.

A checked program lowers to one future per declared variable (per iteration
for loop-locals, plus temporaries for nested expressions) and one rule per
call or assignment. Literal initializers become entry stores that are applied
before any rule fires. The dependency graph is acyclic by construction:
write-once plus declare-before-use admits no cycles.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .errors import CycleError, LowerError
from .lexer import encode_string_literal
from .nodes import (
    Assign,
    BinOp,
    Call,
    CallStmt,
    ExecKind,
    Expr,
    Foreach,
    FuncDef,
    Ident,
    LeafDecl,
    Literal,
    Stmt,
    UnaryOp,
    VarDecl,
)
from .resolver import TRACE_BUILTIN, CheckedProgram
from .tasks import WORK_GENERIC, WORK_GUEST
from .values import ScalarType


@dataclass(frozen=True)
class EmitLeafTask:
    binding: str
    input_fids: tuple[int, ...]
    output_fids: tuple[int, ...]
    priority: int = 0
    work_type: int = WORK_GENERIC


@dataclass(frozen=True)
class StoreLiteral:
    fid: int
    value: object


@dataclass(frozen=True)
class Inline:
    op: str  # add sub mul div mod neg concat copy trace
    input_fids: tuple[int, ...]
    output_fid: int | None


Action = EmitLeafTask | StoreLiteral | Inline


@dataclass(frozen=True)
class RuleSpec:
    rule_id: int
    inputs: frozenset[int]
    action: object

    def free_inputs(self) -> frozenset[int]:
        if isinstance(self.action, StoreLiteral):
            return frozenset()
        return frozenset(self.action.input_fids)


@dataclass
class IrProgram:
    future_count: int
    future_types: list[ScalarType]
    future_names: list[str | None]
    rules: list[RuleSpec]
    entry_stores: list[tuple[int, object]]
    top_level: list[tuple[str, int]] = field(default_factory=list)

    def outputs_of(self, rule: RuleSpec) -> tuple[int, ...]:
        act = rule.action
        if isinstance(act, EmitLeafTask):
            return act.output_fids
        if isinstance(act, StoreLiteral):
            return (act.fid,)
        if isinstance(act, Inline):
            return () if act.output_fid is None else (act.output_fid,)
        raise AssertionError(f"unknown action {act!r}")


class Lowering:
    """Stateful lowering context; `lower()` is the module-level entry point."""

    def __init__(self, checked: CheckedProgram):
        self.checked = checked
        self.future_types: list[ScalarType] = []
        self.future_names: list[str | None] = []
        self.rules: list[RuleSpec] = []
        self.entry_stores: list[tuple[int, object]] = []
        self.top_level: list[tuple[str, int]] = []

    def new_future(self, ftype: ScalarType, name: str | None = None) -> int:
        fid = len(self.future_types)
        self.future_types.append(ftype)
        self.future_names.append(name)
        return fid

    def add_rule(self, action) -> RuleSpec:
        if isinstance(action, StoreLiteral):
            inputs = frozenset()
            outputs = (action.fid,)
        else:
            inputs = frozenset(action.input_fids)
            outputs = action.output_fids if isinstance(action, EmitLeafTask) else (
                () if action.output_fid is None else (action.output_fid,))
        for out in outputs:
            if out in inputs:
                raise LowerError(f"rule output future {out} is also an input")
        rule = RuleSpec(len(self.rules), inputs, action)
        self.rules.append(rule)
        return rule

    def finish(self) -> IrProgram:
        ir = IrProgram(len(self.future_types), self.future_types, self.future_names,
                       self.rules, self.entry_stores, self.top_level)
        validate_ir(ir)
        return ir

    # -- statements ---------------------------------------------------------

    def lower_statements(self, stmts: list[Stmt], env: dict[str, int],
                         prio: int = 0, suffix: str = "", top_level: bool = False) -> None:
        for stmt in stmts:
            self.lower_stmt(stmt, env, prio, suffix, top_level)

    def lower_stmt(self, stmt: Stmt, env: dict[str, int], prio: int,
                   suffix: str, top_level: bool = False) -> None:
        eff_prio = stmt.priority if getattr(stmt, "priority", 0) else prio
        if isinstance(stmt, (LeafDecl, FuncDef)):
            return
        if isinstance(stmt, VarDecl):
            fid = self.new_future(stmt.var_type, stmt.name + suffix)
            env[stmt.name] = fid
            if top_level:
                self.top_level.append((stmt.name, fid))
            if stmt.init is not None:
                self.lower_expr_into(stmt.init, fid, env, eff_prio)
            return
        if isinstance(stmt, Assign):
            self.lower_expr_into(stmt.expr, env[stmt.target], env, eff_prio)
            return
        if isinstance(stmt, CallStmt):
            self.lower_call_stmt(stmt.call, env, eff_prio, suffix)
            return
        if isinstance(stmt, Foreach):
            self.expand_foreach(stmt, env, eff_prio, suffix)
            return
        raise AssertionError(f"unknown statement {stmt!r}")

    def expand_foreach(self, loop: Foreach, env: dict[str, int], prio: int = 0,
                       suffix: str = "") -> None:
        """Statically unroll a loop: one independent body instantiation per
        index value, each with fresh loop-local futures. An empty range
        ([a:b] with a > b) produces nothing."""
        for k in range(loop.range_start, loop.range_end + 1):
            iter_suffix = f"{suffix}@{k}"
            iter_env = dict(env)
            idx_fid = self.new_future(ScalarType.INT, loop.index_var + iter_suffix)
            self.entry_stores.append((idx_fid, k))
            iter_env[loop.index_var] = idx_fid
            self.lower_statements(loop.body, iter_env, prio, iter_suffix)

    def lower_call_stmt(self, call: Call, env: dict[str, int], prio: int,
                        suffix: str = "") -> None:
        if call.name == TRACE_BUILTIN:
            fids = tuple(self.lower_expr(a, env, prio) for a in call.args)
            self.add_rule(Inline("trace", fids, None))
            return
        leaf = self.checked.leaves.get(call.name)
        if leaf is not None:
            arg_fids = tuple(self.lower_expr(a, env, prio) for a in call.args)
            out_fids = tuple(self.new_future(p.type) for p in leaf.outputs)
            self.emit_leaf(leaf, arg_fids, out_fids, prio)
            return
        func = self.checked.funcs[call.name]
        out_fids = tuple(self.new_future(p.type) for p in func.outputs)
        self.inline_func(func, call, out_fids, env, prio, suffix)

    # -- expressions --------------------------------------------------------

    def expr_type(self, expr: Expr) -> ScalarType:
        return self.checked.expr_types[id(expr)]

    def lower_expr(self, expr: Expr, env: dict[str, int], prio: int) -> int:
        if isinstance(expr, Ident):
            return env[expr.name]
        fid = self.new_future(self.expr_type(expr))
        self.lower_expr_into(expr, fid, env, prio)
        return fid

    def lower_expr_into(self, expr: Expr, target: int, env: dict[str, int], prio: int) -> None:
        if isinstance(expr, Literal):
            self.entry_stores.append((target, expr.value))
            return
        if isinstance(expr, Ident):
            self.add_rule(Inline("copy", (env[expr.name],), target))
            return
        if isinstance(expr, Call):
            leaf = self.checked.leaves.get(expr.name)
            if leaf is not None:
                arg_fids = tuple(self.lower_expr(a, env, prio) for a in expr.args)
                self.emit_leaf(leaf, arg_fids, (target,), prio)
                return
            func = self.checked.funcs[expr.name]
            self.inline_func(func, expr, (target,), env, prio)
            return
        if isinstance(expr, BinOp):
            left = self.lower_expr(expr.left, env, prio)
            right = self.lower_expr(expr.right, env, prio)
            op = {"+": "add", "-": "sub", "*": "mul", "/": "div", "%": "mod"}[expr.op]
            if op == "add" and self.expr_type(expr) is ScalarType.STRING:
                op = "concat"
            self.add_rule(Inline(op, (left, right), target))
            return
        if isinstance(expr, UnaryOp):
            operand = self.lower_expr(expr.operand, env, prio)
            self.add_rule(Inline("neg", (operand,), target))
            return
        raise AssertionError(f"unknown expression {expr!r}")

    def emit_leaf(self, leaf: LeafDecl, arg_fids: tuple[int, ...],
                  out_fids: tuple[int, ...], prio: int) -> None:
        work = WORK_GENERIC if leaf.exec_kind is ExecKind.NATIVE else WORK_GUEST
        self.add_rule(EmitLeafTask(leaf.name, arg_fids, out_fids, prio, work))

    def inline_func(self, func: FuncDef, call: Call, out_fids: tuple[int, ...],
                    env: dict[str, int], prio: int, suffix: str = "") -> None:
        """Expand a composite function body at the call site with fresh futures."""
        arg_fids = [self.lower_expr(a, env, prio) for a in call.args]
        body_env = {p.name: fid for p, fid in zip(func.inputs, arg_fids)}
        for p, fid in zip(func.outputs, out_fids):
            body_env[p.name] = fid
        self.lower_statements(func.body, body_env, prio, suffix=f"{suffix}@{func.name}")


def lower(checked: CheckedProgram) -> IrProgram:
    """Lower a checked program to an executable dataflow program."""
    ctx = Lowering(checked)
    ctx.lower_statements(checked.program.statements, {}, top_level=True)
    return ctx.finish()


def validate_ir(ir: IrProgram) -> None:
    """Assert IR invariants: single writer per future, actions consistent,
    and acyclicity (via topo_order)."""
    writers: dict[int, int] = {}
    stored = set()
    for fid, _ in ir.entry_stores:
        if fid in stored:
            raise LowerError(f"future {fid} entry-stored twice")
        stored.add(fid)
    for rule in ir.rules:
        if rule.free_inputs() != rule.inputs:
            raise LowerError(f"rule {rule.rule_id} input set does not match its action")
        for out in ir.outputs_of(rule):
            if out in writers:
                raise LowerError(f"future {out} written by rules {writers[out]} and {rule.rule_id}")
            if out in stored:
                raise LowerError(f"future {out} both entry-stored and rule-written")
            writers[out] = rule.rule_id
    topo_order(ir)


def topo_order(ir: IrProgram) -> list[int]:
    """Rule ids in an order where every rule follows the producers of its
    inputs. Raises CycleError if the graph is cyclic (an invariant violation,
    not a user error)."""
    producer: dict[int, int] = {}
    for rule in ir.rules:
        for out in ir.outputs_of(rule):
            producer[out] = rule.rule_id
    available = {fid for fid, _ in ir.entry_stores}
    remaining: dict[int, set[int]] = {}
    dependents: dict[int, list[int]] = {}
    ready: list[int] = []
    for rule in ir.rules:
        missing = {f for f in rule.inputs if f not in available}
        remaining[rule.rule_id] = missing
        if not missing:
            heapq.heappush(ready, rule.rule_id)
        for fid in missing:
            dependents.setdefault(fid, []).append(rule.rule_id)
    rules_by_id = {r.rule_id: r for r in ir.rules}
    order: list[int] = []
    while ready:
        rid = heapq.heappop(ready)
        order.append(rid)
        for out in ir.outputs_of(rules_by_id[rid]):
            for dep in dependents.get(out, ()):
                missing = remaining[dep]
                missing.discard(out)
                if not missing:
                    heapq.heappush(ready, dep)
    if len(order) != len(ir.rules):
        raise CycleError("dependency cycle among rules; single-assignment invariant violated")
    return order


def dump_ir(ir: IrProgram) -> str:
    """Deterministic textual dump used by golden tests."""
    lines = [f"futures: {ir.future_count}"]
    for fid in range(ir.future_count):
        name = ir.future_names[fid]
        label = f" {name}" if name else ""
        lines.append(f"future {fid}: {ir.future_types[fid].value}{label}")
    for fid, value in ir.entry_stores:
        lines.append(f"store {fid} = {_render_literal(value)}")
    for rule in ir.rules:
        lines.append(f"rule {rule.rule_id}: {_render_fids(sorted(rule.inputs))} "
                     f"-> {_render_action(rule.action)}")
    return "\n".join(lines) + "\n"


def _render_literal(value) -> str:
    if isinstance(value, str):
        return encode_string_literal(value)
    return repr(value)


def _render_fids(fids) -> str:
    return "[" + ", ".join(str(f) for f in fids) + "]"


def _render_action(action) -> str:
    if isinstance(action, EmitLeafTask):
        return (f"emit {action.binding}({_render_fids(action.input_fids)}) "
                f"-> {_render_fids(action.output_fids)} "
                f"type={action.work_type} prio={action.priority}")
    if isinstance(action, StoreLiteral):
        return f"store({action.fid}, {_render_literal(action.value)})"
    if isinstance(action, Inline):
        out = action.output_fid if action.output_fid is not None else "none"
        return f"inline {action.op}({_render_fids(action.input_fids)}) -> {out}"
    raise AssertionError(f"unknown action {action!r}")
