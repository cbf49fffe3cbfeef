"""Deterministic scheduling simulator.

Runs an IR against the real Engine but completes in-flight tasks in an order
chosen by a seeded RNG, exploring interleavings that real threads may never
hit. Used by the determinism/confluence property tests: for deterministic
leaves, every schedule must produce the same final store.
"""

from __future__ import annotations

import random

from .engine import Engine
from .events import EventLog
from .worker import Policy, WorkerRuntime


def run_sim(compiled, seed: int = 0, workers: int = 1, backend: str = "toy",
            policy: Policy = Policy.REINITIALIZE, natives: dict | None = None,
            log: EventLog | None = None) -> dict[int, object]:
    """Execute to quiescence under one randomized schedule; returns the final
    future store. Worker assignment is also randomized so policy effects on
    multi-worker placement are exercised."""
    rng = random.Random(seed)
    runtimes = []
    for k in range(workers):
        runtime = WorkerRuntime(f"sim{k}", backend=backend, policy=policy)
        for name, fn in (natives or {}).items():
            runtime.register_native(name, fn)
        for binding in compiled.bindings.values():
            runtime.register_binding(binding)
        runtimes.append(runtime)

    pending_tasks = []
    engine = Engine(compiled.ir, emit_task=pending_tasks.append, log=log or EventLog())
    engine.start()
    while pending_tasks:
        index = rng.randrange(len(pending_tasks))
        task = pending_tasks.pop(index)
        runtime = rng.choice(runtimes)
        result = runtime.exec_task(task)
        engine.on_task_complete(result.task_id, result.outputs, result.error)
        if engine.failure is not None and not engine.in_flight:
            break
    if engine.failure is not None:
        raise engine.failure
    assert engine.is_quiescent(), "simulator drained all tasks but engine is not quiescent"
    return engine.final_store()
