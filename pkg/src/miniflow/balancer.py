"""Task server: queues tasks by work type and hands them to workers on demand.

The server is a message-serialized state machine; one owner thread calls
these methods in message-arrival order. Delivery back to workers happens
through callables injected at construction, so the same state machine drives
in-process queues, sockets, and the deterministic simulator.

Queue discipline: higher priority first, FIFO among equal priorities.
Blocked workers are served FIFO by arrival. A task may carry a target worker
id, in which case only that worker can receive it.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field

from .errors import ProtocolError, ServerShutdownError
from .events import EventLog
from .tasks import ANY_WORK_TYPE, TaskDescriptor, TaskResult

# Counts violations of the work-conserving invariant (a worker left blocked
# while an eligible task sits queued). Always checked; acceptance requires 0.
WORK_CONSERVING_TRIPS = 0


@dataclass(order=True)
class _QueuedTask:
    sort_key: tuple[int, int]
    task: TaskDescriptor = field(compare=False)


@dataclass
class _Waiter:
    seq: int
    worker_id: str
    work_type: int  # ANY_WORK_TYPE means any type the worker registered


class TaskServer:
    def __init__(self, deliver_task, deliver_shutdown, forward_result,
                 log: EventLog | None = None):
        """deliver_task(worker_id, task); deliver_shutdown(worker_id);
        forward_result(TaskResult) pushes a completion toward the engine."""
        self.deliver_task = deliver_task
        self.deliver_shutdown = deliver_shutdown
        self.forward_result = forward_result
        self.log = log or EventLog()
        self.workers: dict[str, set[int]] = {}
        self.queues: dict[int, list[_QueuedTask]] = {}
        self.waiters: list[_Waiter] = []
        self.in_dispatch: dict[int, str] = {}
        self.completed: set[int] = set()
        self.seen_tasks: set[int] = set()
        self.shutting_down = False
        self.shutdown_sent: set[str] = set()
        self._seq = itertools.count()

    # -- messages -----------------------------------------------------------

    def register_worker(self, worker_id: str, work_types) -> None:
        if worker_id in self.workers:
            raise ProtocolError(f"worker {worker_id!r} registered twice")
        self.workers[worker_id] = set(work_types)
        self.log.emit("register", worker=worker_id)

    def put(self, task: TaskDescriptor) -> None:
        """Queue a task, or dispatch it immediately to a blocked worker."""
        if self.shutting_down:
            raise ServerShutdownError(f"put of task {task.task_id} after shutdown")
        if task.task_id in self.seen_tasks:
            raise ProtocolError(f"task id {task.task_id} put twice")
        self.seen_tasks.add(task.task_id)
        self.log.emit("put", task=task.task_id, type=task.work_type, prio=task.priority)
        waiter = self._match_waiter(task)
        if waiter is not None:
            self.waiters.remove(waiter)
            self._dispatch(task, waiter.worker_id)
        else:
            queue = self.queues.setdefault(task.work_type, [])
            entry = _QueuedTask((-task.priority, next(self._seq)), task)
            _heap_push(queue, entry)
        self._check_work_conserving()

    def request(self, worker_id: str, work_type: int = ANY_WORK_TYPE) -> None:
        """A worker asks for a task; either a task or a shutdown signal is
        delivered, now or when one becomes available."""
        if worker_id not in self.workers:
            raise ProtocolError(f"get from unregistered worker {worker_id!r}")
        if self.shutting_down:
            self._send_shutdown(worker_id)
            return
        task = self._pick_task(worker_id, work_type)
        if task is not None:
            self._dispatch(task, worker_id)
        else:
            self.waiters.append(_Waiter(next(self._seq), worker_id, work_type))
        self._check_work_conserving()

    def complete(self, worker_id: str, result: TaskResult) -> None:
        task_id = result.task_id
        if task_id in self.completed:
            raise ProtocolError(f"task {task_id} completed twice")
        if task_id not in self.in_dispatch:
            raise ProtocolError(f"completion for task {task_id} that is not dispatched")
        if self.in_dispatch[task_id] != worker_id:
            raise ProtocolError(
                f"task {task_id} completed by {worker_id!r}, "
                f"was dispatched to {self.in_dispatch[task_id]!r}")
        del self.in_dispatch[task_id]
        self.completed.add(task_id)
        stats = result.stats
        if stats is not None:
            self.log.emit("done", task=task_id, worker=worker_id,
                          start=stats.started, end=stats.finished, gen=stats.generation)
        else:
            self.log.emit("done", task=task_id, worker=worker_id)
        self.forward_result(result)

    def quiesce(self) -> None:
        """Engine reports global quiescence; begin the shutdown handshake."""
        self.log.emit("quiesce")
        self.shutdown()

    def shutdown(self) -> None:
        if self.shutting_down:
            return
        self.shutting_down = True
        self.log.emit("shutdown")
        for waiter in list(self.waiters):
            self._send_shutdown(waiter.worker_id)
        self.waiters.clear()

    def all_workers_released(self) -> bool:
        return self.shutting_down and self.shutdown_sent == set(self.workers)

    # -- internals ----------------------------------------------------------

    def _send_shutdown(self, worker_id: str) -> None:
        if worker_id not in self.shutdown_sent:
            self.shutdown_sent.add(worker_id)
            self.log.emit("release", worker=worker_id)
            self.deliver_shutdown(worker_id)

    def _dispatch(self, task: TaskDescriptor, worker_id: str) -> None:
        self.in_dispatch[task.task_id] = worker_id
        self.log.emit("dispatch", task=task.task_id, worker=worker_id)
        self.deliver_task(worker_id, task)

    def _match_waiter(self, task: TaskDescriptor) -> _Waiter | None:
        """FIFO among blocked workers that can run this task."""
        for waiter in self.waiters:
            if task.target is not None and waiter.worker_id != task.target:
                continue
            if waiter.work_type == ANY_WORK_TYPE:
                if task.work_type not in self.workers[waiter.worker_id]:
                    continue
            elif waiter.work_type != task.work_type:
                continue
            return waiter
        return None

    def _pick_task(self, worker_id: str, work_type: int) -> TaskDescriptor | None:
        """Highest-priority eligible queued task; FIFO within a priority."""
        if work_type == ANY_WORK_TYPE:
            types = self.workers[worker_id]
        else:
            types = {work_type}
        best_queue = None
        best_key = None
        for wt in types:
            queue = self.queues.get(wt)
            entry = _peek_eligible(queue, worker_id)
            if entry is not None and (best_key is None or entry.sort_key < best_key):
                best_key = entry.sort_key
                best_queue = (queue, entry)
        if best_queue is None:
            return None
        queue, entry = best_queue
        _heap_remove(queue, entry)
        return entry.task

    def _check_work_conserving(self) -> None:
        global WORK_CONSERVING_TRIPS
        for waiter in self.waiters:
            if waiter.work_type == ANY_WORK_TYPE:
                types = self.workers[waiter.worker_id]
            else:
                types = {waiter.work_type}
            for wt in types:
                for entry in self.queues.get(wt, ()):
                    target = entry.task.target
                    if target is None or target == waiter.worker_id:
                        WORK_CONSERVING_TRIPS += 1
                        raise ProtocolError(
                            f"work-conserving violation: worker {waiter.worker_id!r} "
                            f"blocked while task {entry.task.task_id} is queued")


# Queues are binary heaps keyed on (-priority, put order). Targeted tasks mean
# a worker sometimes takes an entry that is not the heap root, so removal may
# rebuild the heap; queues are short, so this stays cheap.


def _heap_push(queue: list[_QueuedTask], entry: _QueuedTask) -> None:
    heapq.heappush(queue, entry)


def _peek_eligible(queue, worker_id: str) -> _QueuedTask | None:
    if not queue:
        return None
    eligible = [e for e in queue if e.task.target is None or e.task.target == worker_id]
    if not eligible:
        return None
    return min(eligible)


def _heap_remove(queue: list[_QueuedTask], entry: _QueuedTask) -> None:
    queue.remove(entry)
    heapq.heapify(queue)
