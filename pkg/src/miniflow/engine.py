"""Dataflow engine: the write-once future store and rule firing.

The engine is owned by one logical thread. External events (task completions)
must arrive serialized; every mutation happens inside `store`,
`on_task_complete`, or `start`, each of which drains an internal worklist so
rule firing is iterative, never recursive.

`run_local` is the sequential reference oracle: it executes the same IR in
topological order against a plain dict and shares none of the engine's firing
machinery.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

from .errors import DoubleStoreError, EngineError, LeafError, MarshalError, TypeMismatchError
from .events import EventLog
from .ir import EmitLeafTask, Inline, IrProgram, StoreLiteral, topo_order
from .tasks import TaskDescriptor
from .values import ScalarType, ensure_type, render_value

# Counts violations of the "a rule never observes an unset input" assertion.
# The check is always active; the acceptance suite requires zero trips.
PREMATURE_FIRE_TRIPS = 0


@dataclass
class FutureCell:
    value_type: ScalarType
    is_set: bool = False
    value: object = None
    subscribers: set[int] = field(default_factory=set)


class Engine:
    def __init__(self, ir: IrProgram, emit_task=None, log: EventLog | None = None,
                 trace_fn=None):
        self.ir = ir
        self.log = log or EventLog()
        self.emit_task = emit_task or (lambda task: None)
        self.trace_fn = trace_fn or _default_trace
        self.cells = [FutureCell(t) for t in ir.future_types]
        self.pending: dict[int, int] = {}  # rule id -> count of unset inputs
        self.rules_by_id = {r.rule_id: r for r in ir.rules}
        self.fired: set[int] = set()
        self.in_flight: dict[int, EmitLeafTask] = {}
        self.completed_tasks: set[int] = set()
        self.failure: LeafError | None = None
        self.started = False
        for rule in ir.rules:
            self.pending[rule.rule_id] = len(rule.inputs)
            for fid in rule.inputs:
                self.cells[fid].subscribers.add(rule.rule_id)

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> set[int]:
        """Apply entry stores and fire all rules that become eligible."""
        self.started = True
        fireable = [rid for rid, remaining in self.pending.items() if remaining == 0]
        for fid, value in self.ir.entry_stores:
            fireable.extend(self._apply_store(fid, value))
        return self._pump(fireable)

    def is_quiescent(self) -> bool:
        if not self.started:
            return False
        if self.in_flight:
            return False
        if self.failure is not None:
            return True  # aborted and drained
        return all(remaining > 0 for remaining in self.pending.values())

    def final_store(self) -> dict[int, object]:
        return {fid: cell.value for fid, cell in enumerate(self.cells) if cell.is_set}

    # -- events -------------------------------------------------------------

    def store(self, fid: int, value) -> set[int]:
        """Store a value into a future; returns the set of rules fired as a
        consequence (directly or via cascades)."""
        fireable = self._apply_store(fid, value)
        return self._pump(fireable)

    def on_task_complete(self, task_id: int, outputs, error: str | None = None) -> set[int]:
        if task_id in self.completed_tasks:
            raise EngineError(f"duplicate completion for task {task_id}")
        if task_id not in self.in_flight:
            raise EngineError(f"completion for unknown task {task_id}")
        action = self.in_flight.pop(task_id)
        self.completed_tasks.add(task_id)
        self.log.emit("complete", task=task_id, rule=task_id, outputs=len(outputs))
        if error is not None:
            failure = LeafError(error, task_id=task_id, binding=action.binding)
            if self.failure is None:
                self.failure = failure
            return set()
        if self.failure is not None:
            return set()  # draining after abort; discard late results
        if len(outputs) != len(action.output_fids):
            raise EngineError(
                f"task {task_id} returned {len(outputs)} outputs, "
                f"rule declares {len(action.output_fids)}")
        fireable: list[int] = []
        for fid, value in zip(action.output_fids, outputs):
            fireable.extend(self._apply_store(fid, value))
        return self._pump(fireable)

    # -- internals ----------------------------------------------------------

    def _apply_store(self, fid: int, value) -> list[int]:
        if not 0 <= fid < len(self.cells):
            raise EngineError(f"store to nonexistent future {fid}")
        cell = self.cells[fid]
        if cell.is_set:
            raise DoubleStoreError(fid)
        try:
            value = ensure_type(value, cell.value_type)
        except MarshalError as exc:
            raise TypeMismatchError(f"store to future {fid}: {exc}") from None
        cell.is_set = True
        cell.value = value
        self.log.emit("store", fid=fid)
        fireable = []
        for rid in sorted(cell.subscribers):
            self.pending[rid] -= 1
            if self.pending[rid] == 0:
                fireable.append(rid)
        cell.subscribers.clear()
        return fireable

    def _pump(self, fireable: list[int]) -> set[int]:
        fired: set[int] = set()
        queue = list(fireable)
        while queue:
            rid = queue.pop(0)
            if self.failure is not None:
                break
            queue.extend(self._fire(rid))
            fired.add(rid)
        return fired

    def _fire(self, rule_id: int) -> list[int]:
        global PREMATURE_FIRE_TRIPS
        if rule_id in self.fired:
            raise EngineError(f"rule {rule_id} fired twice")
        rule = self.rules_by_id[rule_id]
        for fid in rule.inputs:
            if not self.cells[fid].is_set:
                PREMATURE_FIRE_TRIPS += 1
                raise EngineError(
                    f"rule {rule_id} fired with unset input future {fid}")
        self.fired.add(rule_id)
        self.pending.pop(rule_id, None)
        self.log.emit("fire", rule=rule_id)
        action = rule.action
        if isinstance(action, StoreLiteral):
            return self._apply_store(action.fid, action.value)
        if isinstance(action, Inline):
            return self._exec_inline(rule_id, action)
        if isinstance(action, EmitLeafTask):
            values = tuple(self.cells[fid].value for fid in action.input_fids)
            task = TaskDescriptor(task_id=rule_id, work_type=action.work_type,
                                  priority=action.priority, binding=action.binding,
                                  inputs=values, output_fids=action.output_fids)
            self.in_flight[rule_id] = action
            self.log.emit("emit", task=rule_id, rule=rule_id, binding=action.binding,
                          prio=action.priority)
            self.emit_task(task)
            return []
        raise AssertionError(f"unknown action {action!r}")

    def _exec_inline(self, rule_id: int, action: Inline) -> list[int]:
        args = [self.cells[fid].value for fid in action.input_fids]
        op = action.op
        self.log.emit("inline", rule=rule_id, op=op)
        try:
            if op == "trace":
                self.trace_fn(args)
                return []
            result = _inline_op(op, args)
        except ZeroDivisionError:
            raise EngineError(f"division by zero in rule {rule_id}") from None
        return self._apply_store(action.output_fid, result)


def _inline_op(op: str, args: list):
    if op == "add":
        return args[0] + args[1]
    if op == "concat":
        return args[0] + args[1]
    if op == "sub":
        return args[0] - args[1]
    if op == "mul":
        return args[0] * args[1]
    if op == "div":
        a, b = args
        if isinstance(a, int) and isinstance(b, int):
            return _trunc_div(a, b)
        return a / b
    if op == "mod":
        a, b = args
        return a - _trunc_div(a, b) * b
    if op == "neg":
        return -args[0]
    if op == "copy":
        return args[0]
    raise EngineError(f"unknown inline op {op!r}")


def _trunc_div(a: int, b: int) -> int:
    # C-style division truncating toward zero.
    q = a // b
    if q < 0 and q * b != a:
        q += 1
    return q


def _default_trace(args) -> None:
    print(format_trace(args), file=sys.stderr)


def format_trace(args) -> str:
    if args and isinstance(args[0], str) and "%" in args[0]:
        try:
            return args[0] % tuple(args[1:])
        except (TypeError, ValueError):
            pass
    return " ".join(render_value(a) for a in args)


# ---------------------------------------------------------------------------
# Sequential reference oracle
# ---------------------------------------------------------------------------


def run_local(ir: IrProgram, execute_leaf, trace_out: list | None = None) -> dict[int, object]:
    """Execute an IR sequentially in topological order against a plain dict.

    `execute_leaf(binding_name, input_values, n_outputs)` must run the leaf
    synchronously and return its outputs in order. This function is the
    independent oracle for distributed-equivalence tests; it deliberately
    avoids the Engine's cells, pending counts, and firing machinery.
    """
    store: dict[int, object] = {}
    for fid, value in ir.entry_stores:
        if fid in store:
            raise DoubleStoreError(fid)
        store[fid] = ensure_type(value, ir.future_types[fid])
    rules_by_id = {r.rule_id: r for r in ir.rules}
    for rid in topo_order(ir):
        action = rules_by_id[rid].action
        if isinstance(action, StoreLiteral):
            if action.fid in store:
                raise DoubleStoreError(action.fid)
            store[action.fid] = ensure_type(action.value, ir.future_types[action.fid])
        elif isinstance(action, Inline):
            args = [store[f] for f in action.input_fids]
            if action.op == "trace":
                if trace_out is not None:
                    trace_out.append(format_trace(args))
                continue
            result = _local_op(action.op, args, rid)
            if action.output_fid in store:
                raise DoubleStoreError(action.output_fid)
            store[action.output_fid] = ensure_type(
                result, ir.future_types[action.output_fid])
        elif isinstance(action, EmitLeafTask):
            inputs = [store[f] for f in action.input_fids]
            try:
                outputs = execute_leaf(action.binding, inputs, len(action.output_fids))
            except LeafError:
                raise
            except Exception as exc:  # surface rule id with the failure
                raise LeafError(str(exc), task_id=rid, binding=action.binding) from exc
            if len(outputs) != len(action.output_fids):
                raise LeafError(
                    f"returned {len(outputs)} outputs, expected {len(action.output_fids)}",
                    task_id=rid, binding=action.binding)
            for fid, value in zip(action.output_fids, outputs):
                if fid in store:
                    raise DoubleStoreError(fid)
                store[fid] = ensure_type(value, ir.future_types[fid])
        else:
            raise AssertionError(f"unknown action {action!r}")
    return store


def _local_op(op: str, args: list, rid: int):
    """Inline op semantics, written independently of the engine's table."""
    a = args[0]
    b = args[1] if len(args) > 1 else None
    try:
        if op in ("add", "concat"):
            return a + b
        if op == "sub":
            return a - b
        if op == "mul":
            return a * b
        if op == "div":
            if isinstance(a, int) and isinstance(b, int):
                sign = -1 if (a < 0) != (b < 0) else 1
                return sign * (abs(a) // abs(b))
            return a / b
        if op == "mod":
            sign = -1 if a < 0 else 1
            return sign * (abs(a) % abs(b))
        if op == "neg":
            return -a
        if op == "copy":
            return a
    except ZeroDivisionError:
        raise EngineError(f"division by zero in rule {rid}") from None
    raise EngineError(f"unknown inline op {op!r}")
