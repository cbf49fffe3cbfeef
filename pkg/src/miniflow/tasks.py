"""Task descriptors exchanged between engine, server, and workers."""

from __future__ import annotations

from dataclasses import dataclass

WORK_GENERIC = 0
WORK_GUEST = 1
ANY_WORK_TYPE = -1


@dataclass(frozen=True)
class TaskDescriptor:
    """Self-contained unit of leaf work: every input value is materialized, so
    a worker needs nothing beyond its registered bindings to execute it."""

    task_id: int
    work_type: int
    priority: int
    binding: str
    inputs: tuple
    output_fids: tuple[int, ...]
    target: str | None = None


@dataclass(frozen=True)
class TaskStats:
    worker_id: str
    started: float
    finished: float
    generation: int = 0


@dataclass(frozen=True)
class TaskResult:
    task_id: int
    outputs: tuple
    error: str | None = None
    stats: TaskStats | None = None
