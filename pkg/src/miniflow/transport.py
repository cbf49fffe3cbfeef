"""Message layer connecting engine, server, and workers.

Frame format (bit-exact): 4-byte little-endian length, then a 1-byte message
tag, then the body; the length covers tag plus body. Scalars travel as tagged
values (int = signed 64-bit LE, float = IEEE-754 bits, string = u32 length +
UTF-8, blob = the blob wire encoding).

Two interchangeable connection kinds expose the same send/recv contract:
in-process queue pairs (threads mode) and TCP loopback sockets (processes
mode). Delivery per connection is reliable, ordered, exactly-once; a peer
disconnect surfaces as TransportError.
"""

from __future__ import annotations

import queue
import socket
import struct
import threading
from dataclasses import dataclass

from .blob import Blob, decode_blob, encode_blob
from .errors import DecodeError, TransportError
from .tasks import TaskDescriptor, TaskResult, TaskStats

MAX_FRAME = 64 * 1024 * 1024  # guards against garbage length prefixes

TAG_PUT_TASK = 1
TAG_GET_REQUEST = 2
TAG_TASK_ASSIGN = 3
TAG_COMPLETE = 4
TAG_SHUTDOWN = 5
TAG_REGISTER_WORKER = 6
TAG_QUIESCE = 7


@dataclass(frozen=True)
class PutTask:
    task: TaskDescriptor


@dataclass(frozen=True)
class GetRequest:
    work_type: int
    worker_id: str


@dataclass(frozen=True)
class TaskAssign:
    task: TaskDescriptor


@dataclass(frozen=True)
class Complete:
    worker_id: str
    result: TaskResult


@dataclass(frozen=True)
class ShutdownSignal:
    pass


@dataclass(frozen=True)
class RegisterWorker:
    worker_id: str
    work_types: tuple[int, ...]


@dataclass(frozen=True)
class Quiesce:
    pass


WireMessage = (PutTask | GetRequest | TaskAssign | Complete
               | ShutdownSignal | RegisterWorker | Quiesce)


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------


def encode(msg) -> bytes:
    """Message -> framed bytes (length prefix + tag + body)."""
    body = bytearray()
    if isinstance(msg, PutTask):
        tag = TAG_PUT_TASK
        _w_task(body, msg.task)
    elif isinstance(msg, GetRequest):
        tag = TAG_GET_REQUEST
        body += struct.pack("<q", msg.work_type)
        _w_str(body, msg.worker_id)
    elif isinstance(msg, TaskAssign):
        tag = TAG_TASK_ASSIGN
        _w_task(body, msg.task)
    elif isinstance(msg, Complete):
        tag = TAG_COMPLETE
        _w_str(body, msg.worker_id)
        _w_result(body, msg.result)
    elif isinstance(msg, ShutdownSignal):
        tag = TAG_SHUTDOWN
    elif isinstance(msg, RegisterWorker):
        tag = TAG_REGISTER_WORKER
        _w_str(body, msg.worker_id)
        body += struct.pack("<I", len(msg.work_types))
        for wt in msg.work_types:
            body += struct.pack("<q", wt)
    elif isinstance(msg, Quiesce):
        tag = TAG_QUIESCE
    else:
        raise DecodeError(f"cannot encode {type(msg).__name__}")
    return struct.pack("<I", 1 + len(body)) + bytes([tag]) + bytes(body)


def decode(frame: bytes):
    """Framed bytes -> message; strict about truncation and trailing bytes."""
    if len(frame) < 5:
        raise DecodeError(f"frame too short ({len(frame)} bytes)")
    (length,) = struct.unpack_from("<I", frame, 0)
    if length != len(frame) - 4:
        raise DecodeError(f"frame length field {length} does not match body {len(frame) - 4}")
    tag = frame[4]
    r = _Reader(frame, 5)
    if tag == TAG_PUT_TASK:
        msg = PutTask(_r_task(r))
    elif tag == TAG_GET_REQUEST:
        work_type = r.i64()
        msg = GetRequest(work_type, r.str())
    elif tag == TAG_TASK_ASSIGN:
        msg = TaskAssign(_r_task(r))
    elif tag == TAG_COMPLETE:
        worker = r.str()
        msg = Complete(worker, _r_result(r))
    elif tag == TAG_SHUTDOWN:
        msg = ShutdownSignal()
    elif tag == TAG_REGISTER_WORKER:
        worker = r.str()
        count = r.u32()
        msg = RegisterWorker(worker, tuple(r.i64() for _ in range(count)))
    elif tag == TAG_QUIESCE:
        msg = Quiesce()
    else:
        raise DecodeError(f"unknown message tag {tag}")
    if r.pos != len(frame):
        raise DecodeError(f"{len(frame) - r.pos} trailing bytes after message")
    return msg


class _Reader:
    def __init__(self, buf: bytes, pos: int = 0):
        self.buf = buf
        self.pos = pos

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise DecodeError("truncated frame")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def i64(self) -> int:
        return struct.unpack("<q", self.take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def str(self) -> str:
        n = self.u32()
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError(f"invalid UTF-8 in string field: {exc}") from None


def _w_str(body: bytearray, s: str) -> None:
    data = s.encode("utf-8")
    body += struct.pack("<I", len(data))
    body += data


VALUE_INT = 1
VALUE_FLOAT = 2
VALUE_STRING = 3
VALUE_BLOB = 4


def _w_value(body: bytearray, value) -> None:
    if isinstance(value, bool):
        value = int(value)
    if isinstance(value, int):
        body.append(VALUE_INT)
        body += struct.pack("<q", value)
    elif isinstance(value, float):
        body.append(VALUE_FLOAT)
        body += struct.pack("<d", value)
    elif isinstance(value, str):
        body.append(VALUE_STRING)
        _w_str(body, value)
    elif isinstance(value, Blob):
        body.append(VALUE_BLOB)
        body += encode_blob(value)
    else:
        raise DecodeError(f"cannot encode value of type {type(value).__name__}")


def _r_value(r: _Reader):
    kind = r.u8()
    if kind == VALUE_INT:
        return r.i64()
    if kind == VALUE_FLOAT:
        return r.f64()
    if kind == VALUE_STRING:
        return r.str()
    if kind == VALUE_BLOB:
        try:
            blob, end = decode_blob(r.buf, r.pos)
        except Exception as exc:
            raise DecodeError(f"bad blob field: {exc}") from None
        r.pos = end
        return blob
    raise DecodeError(f"unknown value tag {kind}")


def _w_values(body: bytearray, values) -> None:
    body += struct.pack("<I", len(values))
    for value in values:
        _w_value(body, value)


def _r_values(r: _Reader) -> tuple:
    count = r.u32()
    return tuple(_r_value(r) for _ in range(count))


def _w_task(body: bytearray, task: TaskDescriptor) -> None:
    body += struct.pack("<q", task.task_id)
    body += struct.pack("<q", task.work_type)
    body += struct.pack("<q", task.priority)
    _w_str(body, task.binding)
    _w_values(body, task.inputs)
    body += struct.pack("<I", len(task.output_fids))
    for fid in task.output_fids:
        body += struct.pack("<q", fid)
    if task.target is None:
        body.append(0)
    else:
        body.append(1)
        _w_str(body, task.target)


def _r_task(r: _Reader) -> TaskDescriptor:
    task_id = r.i64()
    work_type = r.i64()
    priority = r.i64()
    binding = r.str()
    inputs = _r_values(r)
    n_out = r.u32()
    output_fids = tuple(r.i64() for _ in range(n_out))
    target = r.str() if r.u8() else None
    return TaskDescriptor(task_id, work_type, priority, binding, inputs, output_fids, target)


def _w_result(body: bytearray, result: TaskResult) -> None:
    body += struct.pack("<q", result.task_id)
    _w_values(body, result.outputs)
    if result.error is None:
        body.append(0)
    else:
        body.append(1)
        _w_str(body, result.error)
    if result.stats is None:
        body.append(0)
    else:
        body.append(1)
        _w_str(body, result.stats.worker_id)
        body += struct.pack("<d", result.stats.started)
        body += struct.pack("<d", result.stats.finished)
        body += struct.pack("<q", result.stats.generation)


def _r_result(r: _Reader) -> TaskResult:
    task_id = r.i64()
    outputs = _r_values(r)
    error = r.str() if r.u8() else None
    stats = None
    if r.u8():
        stats = TaskStats(r.str(), r.f64(), r.f64(), r.i64())
    return TaskResult(task_id, outputs, error, stats)


# ---------------------------------------------------------------------------
# Connections
# ---------------------------------------------------------------------------


class _Closed:
    pass


_CLOSED = _Closed()


class InProcConnection:
    """One endpoint of an in-process duplex channel; messages pass by object."""

    def __init__(self, inbox: queue.Queue, outbox: queue.Queue):
        self._inbox = inbox
        self._outbox = outbox
        self._closed = False

    def send(self, msg) -> None:
        if self._closed:
            raise TransportError("send on closed connection")
        self._outbox.put(msg)

    def recv(self):
        msg = self._inbox.get()
        if msg is _CLOSED:
            self._inbox.put(_CLOSED)  # keep subsequent recvs failing too
            raise TransportError("peer closed connection")
        return msg

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._outbox.put(_CLOSED)


def inproc_pair() -> tuple[InProcConnection, InProcConnection]:
    a_to_b: queue.Queue = queue.Queue()
    b_to_a: queue.Queue = queue.Queue()
    return InProcConnection(b_to_a, a_to_b), InProcConnection(a_to_b, b_to_a)


class SocketConnection:
    """Length-prefixed frames over a stream socket. Sends are serialized by a
    lock so any thread may send; recv is owned by one reader."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self._send_lock = threading.Lock()
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)

    def send(self, msg) -> None:
        frame = encode(msg)
        try:
            with self._send_lock:
                self.sock.sendall(frame)
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from None

    def recv(self):
        header = self._read_exactly(4)
        (length,) = struct.unpack("<I", header)
        if length == 0 or length > MAX_FRAME:
            raise TransportError(f"invalid frame length {length}")
        body = self._read_exactly(length)
        return decode(header + body)

    def _read_exactly(self, n: int) -> bytes:
        chunks = []
        remaining = n
        while remaining:
            try:
                chunk = self.sock.recv(remaining)
            except OSError as exc:
                raise TransportError(f"recv failed: {exc}") from None
            if not chunk:
                raise TransportError("peer closed connection")
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    def close(self) -> None:
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


class SocketListener:
    def __init__(self, host: str = "127.0.0.1", port: int = 0, backlog: int = 64):
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self.sock.bind((host, port))
        self.sock.listen(backlog)

    @property
    def address(self) -> tuple[str, int]:
        return self.sock.getsockname()

    def accept(self) -> SocketConnection:
        try:
            conn, _ = self.sock.accept()
        except OSError as exc:
            raise TransportError(f"accept failed: {exc}") from None
        return SocketConnection(conn)

    def close(self) -> None:
        self.sock.close()


def connect(address: tuple[str, int], timeout: float = 10.0) -> SocketConnection:
    try:
        sock = socket.create_connection(address, timeout=timeout)
        sock.settimeout(None)
    except OSError as exc:
        raise TransportError(f"connect to {address} failed: {exc}") from None
    return SocketConnection(sock)


def parse_address(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise TransportError(f"bad listen address {text!r}, expected host:port")
    return host, int(port)
