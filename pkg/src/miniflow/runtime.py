"""Role assembly: one engine, one task server, N workers, run to quiescence.

Threads mode wires the roles with in-process queue pairs; processes mode
spawns each worker as a forked OS process and carries every message over TCP
loopback sockets. The server is a thread in the calling process in both
modes; the engine runs on the calling thread itself.

Shutdown handshake: the engine detects quiescence and sends Quiesce; the
server releases every worker (immediately if blocked, else at its next get),
and once all workers are released it acknowledges the engine with
ShutdownSignal.
"""

from __future__ import annotations

import multiprocessing
import queue
import threading
from dataclasses import dataclass, field

from .balancer import TaskServer
from .compiler import CompiledScript, compile_source
from .engine import Engine
from .errors import MiniflowError, TransportError
from .events import EventLog
from .tasks import ANY_WORK_TYPE, TaskResult, WORK_GENERIC, WORK_GUEST
from .transport import (
    Complete,
    GetRequest,
    PutTask,
    Quiesce,
    RegisterWorker,
    ShutdownSignal,
    SocketListener,
    TaskAssign,
    connect,
    inproc_pair,
    parse_address,
)
from .worker import Policy, WorkerRuntime

DEFAULT_WORK_TYPES = (WORK_GENERIC, WORK_GUEST)
_READY_TIMEOUT = 30.0


@dataclass
class RunConfig:
    workers: int = 1
    mode: str = "threads"  # threads | processes
    policy: Policy = Policy.REINITIALIZE
    backend: str = "pyexec"
    guest_path: list[str] | None = None
    natives: dict = field(default_factory=dict)
    listen: str = "127.0.0.1:0"
    trace_fn: object = None


@dataclass
class RunResult:
    ok: bool
    error: str | None
    values: list[tuple[str, object]]
    store: dict[int, object]
    events: list[str]

    def value_lines(self) -> list[str]:
        from .values import render_value
        return [f"{name} = {render_value(value)}" for name, value in self.values]


def build_worker_runtime(worker_id: str, compiled: CompiledScript,
                         config: RunConfig, log=None) -> WorkerRuntime:
    runtime = WorkerRuntime(worker_id, backend=config.backend, policy=config.policy,
                            guest_path=config.guest_path, log=log)
    for name, fn in config.natives.items():
        runtime.register_native(name, fn)
    for binding in compiled.bindings.values():
        runtime.register_binding(binding)
    return runtime


def worker_loop(conn, runtime: WorkerRuntime, work_types=DEFAULT_WORK_TYPES) -> None:
    """Demand-driven worker: request, execute, report, repeat until released."""
    try:
        conn.send(RegisterWorker(runtime.worker_id, tuple(work_types)))
        while True:
            conn.send(GetRequest(ANY_WORK_TYPE, runtime.worker_id))
            try:
                msg = conn.recv()
            except TransportError:
                break
            if isinstance(msg, ShutdownSignal):
                break
            if isinstance(msg, TaskAssign):
                result = runtime.exec_task(msg.task)
                conn.send(Complete(runtime.worker_id, result))
            else:
                raise TransportError(f"worker received unexpected {type(msg).__name__}")
    finally:
        conn.close()


class _ServerHost:
    """Runs the TaskServer state machine on one thread, fed by an inbox that
    per-connection pump threads fill, so client messages stay serialized."""

    def __init__(self, log: EventLog, expected_workers: int):
        self.log = log
        self.expected_workers = expected_workers
        self.inbox: queue.Queue = queue.Queue()
        self.worker_conns: dict[str, object] = {}
        self.conn_workers: dict[int, str] = {}
        self.engine_conn = None
        self.ready = threading.Event()
        self.error: Exception | None = None
        self.server = TaskServer(self._deliver_task, self._deliver_shutdown,
                                 self._forward_result, log)
        self.thread = threading.Thread(target=self._loop, name="miniflow-server", daemon=True)

    def start(self) -> None:
        self.thread.start()

    def attach(self, conn) -> None:
        threading.Thread(target=self._pump, args=(conn,), daemon=True).start()

    def _pump(self, conn) -> None:
        while True:
            try:
                msg = conn.recv()
            except TransportError:
                self.inbox.put(("closed", conn, None))
                return
            self.inbox.put(("msg", conn, msg))

    def _deliver_task(self, worker_id, task) -> None:
        self.worker_conns[worker_id].send(TaskAssign(task))

    def _deliver_shutdown(self, worker_id) -> None:
        self.worker_conns[worker_id].send(ShutdownSignal())

    def _forward_result(self, result: TaskResult) -> None:
        self.engine_conn.send(Complete("server", result))

    def _loop(self) -> None:
        acked = False
        try:
            while not acked:
                kind, conn, msg = self.inbox.get()
                if kind == "closed":
                    self._handle_closed(conn)
                elif isinstance(msg, RegisterWorker):
                    self.server.register_worker(msg.worker_id, msg.work_types)
                    self.worker_conns[msg.worker_id] = conn
                    self.conn_workers[id(conn)] = msg.worker_id
                    if len(self.worker_conns) == self.expected_workers:
                        self.ready.set()
                elif isinstance(msg, GetRequest):
                    self.server.request(msg.worker_id, msg.work_type)
                elif isinstance(msg, Complete):
                    self.server.complete(msg.worker_id, msg.result)
                elif isinstance(msg, PutTask):
                    self.engine_conn = conn
                    self.server.put(msg.task)
                elif isinstance(msg, Quiesce):
                    self.engine_conn = conn
                    self.server.quiesce()
                else:
                    raise TransportError(f"server received unexpected {type(msg).__name__}")
                if (self.server.shutting_down and self.server.all_workers_released()
                        and self.engine_conn is not None):
                    self.engine_conn.send(ShutdownSignal())
                    acked = True
        except Exception as exc:  # surfaced after join
            self.error = exc
            self.ready.set()
            for conn in list(self.worker_conns.values()) + [self.engine_conn]:
                if conn is None:
                    continue
                try:
                    conn.send(ShutdownSignal())
                except Exception:
                    pass

    def _handle_closed(self, conn) -> None:
        """A worker connection died; fail its in-dispatch tasks so the engine
        aborts instead of waiting forever."""
        worker_id = self.conn_workers.get(id(conn))
        if worker_id is None or self.server.shutting_down:
            return
        for task_id, dispatched_to in list(self.server.in_dispatch.items()):
            if dispatched_to == worker_id:
                result = TaskResult(task_id, (), error=f"worker {worker_id} disconnected")
                self.server.complete(worker_id, result)


def run_engine_loop(compiled: CompiledScript, conn, log: EventLog, trace_fn=None) -> Engine:
    engine = Engine(compiled.ir, emit_task=lambda task: conn.send(PutTask(task)),
                    log=log, trace_fn=trace_fn)
    engine.start()
    while not engine.is_quiescent():
        msg = conn.recv()
        if isinstance(msg, Complete):
            result = msg.result
            engine.on_task_complete(result.task_id, result.outputs, result.error)
        elif isinstance(msg, ShutdownSignal):
            raise TransportError("server shut down before quiescence")
        else:
            raise TransportError(f"engine received unexpected {type(msg).__name__}")
    log.emit("quiesce_detected", in_flight=0)
    conn.send(Quiesce())
    while True:
        msg = conn.recv()
        if isinstance(msg, ShutdownSignal):
            break
    return engine


def run_compiled(compiled: CompiledScript, config: RunConfig | None = None) -> RunResult:
    config = config or RunConfig()
    if config.workers < 1:
        raise ValueError("worker count must be >= 1")
    # Fail fast on registration problems (e.g. a native binding with no host
    # function) before any worker process or thread is spawned.
    build_worker_runtime("probe", compiled, config)
    if config.mode == "threads":
        engine, log = _run_threads(compiled, config)
    elif config.mode == "processes":
        engine, log = _run_processes(compiled, config)
    else:
        raise ValueError(f"unknown mode {config.mode!r}")
    store = engine.final_store()
    if engine.failure is not None:
        return RunResult(False, str(engine.failure), [], store, log.lines())
    values = [(name, store[fid]) for name, fid in compiled.ir.top_level]
    return RunResult(True, None, values, store, log.lines())


def run_source(source: str, config: RunConfig | None = None) -> RunResult:
    return run_compiled(compile_source(source), config)


def _run_threads(compiled: CompiledScript, config: RunConfig):
    log = EventLog()
    host = _ServerHost(log, config.workers)
    worker_threads = []
    for k in range(config.workers):
        worker_id = f"w{k}"
        runtime = build_worker_runtime(worker_id, compiled, config, log)
        near, far = inproc_pair()
        host.attach(far)
        thread = threading.Thread(target=worker_loop, args=(near, runtime),
                                  name=f"miniflow-{worker_id}", daemon=True)
        worker_threads.append(thread)
    engine_near, engine_far = inproc_pair()
    host.attach(engine_far)
    host.start()
    for thread in worker_threads:
        thread.start()
    if not host.ready.wait(_READY_TIMEOUT):
        raise TransportError("workers failed to register in time")
    _raise_host_error(host)
    try:
        engine = run_engine_loop(compiled, engine_near, log, config.trace_fn)
    finally:
        engine_near.close()
    for thread in worker_threads:
        thread.join(timeout=_READY_TIMEOUT)
    host.thread.join(timeout=_READY_TIMEOUT)
    _raise_host_error(host)
    return engine, log


def _worker_process_main(address, worker_id, compiled, config):
    conn = connect(address)
    runtime = build_worker_runtime(worker_id, compiled, config, log=None)
    worker_loop(conn, runtime)


def _run_processes(compiled: CompiledScript, config: RunConfig):
    log = EventLog()
    host = _ServerHost(log, config.workers)
    listener = SocketListener(*parse_address(config.listen))
    address = listener.address
    ctx = multiprocessing.get_context("fork")
    procs = []
    # Forked before any runtime thread starts; each child inherits the
    # compiled script and native functions directly.
    for k in range(config.workers):
        proc = ctx.Process(target=_worker_process_main,
                           args=(address, f"w{k}", compiled, config),
                           name=f"miniflow-w{k}", daemon=True)
        proc.start()
        procs.append(proc)

    accept_count = config.workers + 1  # workers plus the engine client
    def _accept_loop():
        for _ in range(accept_count):
            try:
                host.attach(listener.accept())
            except TransportError:
                return

    accept_thread = threading.Thread(target=_accept_loop, daemon=True)
    accept_thread.start()
    host.start()
    engine_conn = connect(address)
    try:
        if not host.ready.wait(_READY_TIMEOUT):
            raise TransportError("worker processes failed to register in time")
        _raise_host_error(host)
        engine = run_engine_loop(compiled, engine_conn, log, config.trace_fn)
    finally:
        engine_conn.close()
        listener.close()
    for proc in procs:
        proc.join(timeout=_READY_TIMEOUT)
        if proc.is_alive():
            proc.terminate()
    host.thread.join(timeout=_READY_TIMEOUT)
    accept_thread.join(timeout=_READY_TIMEOUT)
    _raise_host_error(host)
    return engine, log


def _raise_host_error(host: _ServerHost) -> None:
    if host.error is not None:
        raise MiniflowError(f"server failure: {host.error}") from host.error
