import hashlib
import random
import struct
import threading

import pytest

from miniflow.blob import Blob, ElemType
from miniflow.errors import DecodeError, TransportError
from miniflow.tasks import TaskDescriptor, TaskResult, TaskStats
from miniflow.transport import (
    Complete,
    GetRequest,
    PutTask,
    Quiesce,
    RegisterWorker,
    ShutdownSignal,
    SocketListener,
    TaskAssign,
    connect,
    decode,
    encode,
    inproc_pair,
    parse_address,
)


def sample_task(rng=None):
    rng = rng or random.Random(0)
    inputs = []
    for _ in range(rng.randrange(4)):
        kind = rng.randrange(4)
        if kind == 0:
            inputs.append(rng.randint(-(2**63), 2**63 - 1))
        elif kind == 1:
            inputs.append(struct.unpack("<d", rng.getrandbits(64).to_bytes(8, "little"))[0])
        elif kind == 2:
            inputs.append("".join(chr(rng.randint(32, 0x24F)) for _ in range(rng.randrange(8))))
        else:
            n = rng.randrange(5) * 8
            data = rng.getrandbits(8 * n).to_bytes(n, "little") if n else b""
            inputs.append(Blob(data, ElemType.F64, (n // 8,)))
    return TaskDescriptor(
        task_id=rng.randrange(10**6),
        work_type=rng.choice([0, 1]),
        priority=rng.randint(-5, 5),
        binding=rng.choice(["f", "g", "kernel_x"]),
        inputs=tuple(inputs),
        output_fids=tuple(rng.randrange(100) for _ in range(rng.randrange(3))),
        target=rng.choice([None, "w0", "w3"]),
    )


def sample_messages(seed=0, count=200):
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        kind = rng.randrange(7)
        if kind == 0:
            out.append(PutTask(sample_task(rng)))
        elif kind == 1:
            out.append(GetRequest(rng.choice([-1, 0, 1]), f"w{rng.randrange(8)}"))
        elif kind == 2:
            out.append(TaskAssign(sample_task(rng)))
        elif kind == 3:
            stats = None
            if rng.random() < 0.7:
                stats = TaskStats(f"w{rng.randrange(8)}", rng.random() * 100,
                                  rng.random() * 200, rng.randrange(50))
            error = None if rng.random() < 0.8 else "guest error: boom"
            outputs = tuple(sample_task(rng).inputs)
            out.append(Complete(f"w{rng.randrange(8)}",
                                TaskResult(rng.randrange(10**6), outputs, error, stats)))
        elif kind == 4:
            out.append(ShutdownSignal())
        elif kind == 5:
            out.append(RegisterWorker(f"w{rng.randrange(8)}",
                                      tuple(sorted(set(rng.choice([0, 1])
                                                       for _ in range(rng.randrange(1, 3)))))))
        else:
            out.append(Quiesce())
    return out


# -- encode/decode -------------------------------------------------------------


def equal_messages(a, b):
    return a == b  # frozen dataclasses compare structurally; NaN floats excluded


def test_shutdown_signal_is_five_byte_frame():
    frame = encode(ShutdownSignal())
    assert len(frame) == 5
    assert struct.unpack("<I", frame[:4])[0] == 1


def test_decode_encode_identity_generated_messages():
    for msg in sample_messages(seed=1, count=1000):
        frame = encode(msg)
        assert decode(frame) == msg


def test_decode_rejects_unknown_tag():
    frame = bytearray(encode(ShutdownSignal()))
    frame[4] = 0xFF
    with pytest.raises(DecodeError, match="unknown message tag"):
        decode(bytes(frame))


def test_decode_rejects_truncation():
    frame = encode(PutTask(sample_task()))
    with pytest.raises(DecodeError):
        decode(frame[: len(frame) - 1])
    with pytest.raises(DecodeError):
        decode(frame[:3])


def test_decode_rejects_trailing_bytes():
    frame = encode(Quiesce()) + b"\x00"
    with pytest.raises(DecodeError):
        decode(frame)


def test_float_bits_preserved_through_wire():
    nan_payload = struct.unpack("<d", b"\x01\x02\x03\x04\x05\x06\xf9\x7f")[0]
    msg = Complete("w0", TaskResult(1, (nan_payload,), None, None))
    decoded = decode(encode(msg))
    (out,) = decoded.result.outputs
    assert struct.pack("<d", out) == struct.pack("<d", nan_payload)


# -- in-process connections ------------------------------------------------------


def test_inproc_round_trip_and_ordering():
    a, b = inproc_pair()
    msgs = sample_messages(seed=2, count=50)
    for m in msgs:
        a.send(m)
    received = [b.recv() for _ in msgs]
    assert received == msgs


def test_inproc_close_surfaces_as_transport_error():
    a, b = inproc_pair()
    a.close()
    with pytest.raises(TransportError):
        b.recv()
    with pytest.raises(TransportError):
        b.recv()  # stays failed


# -- socket connections ----------------------------------------------------------


@pytest.fixture
def socket_pair():
    listener = SocketListener()
    accepted = {}

    def _accept():
        accepted["conn"] = listener.accept()

    thread = threading.Thread(target=_accept)
    thread.start()
    client = connect(listener.address)
    thread.join()
    server = accepted["conn"]
    yield client, server
    client.close()
    server.close()
    listener.close()


def test_socket_round_trip_byte_identical_payload(socket_pair):
    client, server = socket_pair
    task = sample_task()
    client.send(PutTask(task))
    received = server.recv()
    assert received == PutTask(task)


def test_socket_ordering_two_sends(socket_pair):
    client, server = socket_pair
    a = PutTask(sample_task(random.Random(1)))
    b = GetRequest(0, "w1")
    client.send(a)
    client.send(b)
    assert server.recv() == a
    assert server.recv() == b


def test_socket_one_mib_blob_delivered_intact(socket_pair):
    client, server = socket_pair
    payload = random.Random(9).getrandbits(8 * 2**20).to_bytes(2**20, "little")
    checksum = hashlib.sha256(payload).hexdigest()
    task = TaskDescriptor(1, 0, 0, "big", (Blob(payload),), (0,))
    client.send(TaskAssign(task))
    received = server.recv()
    (blob,) = received.task.inputs
    assert hashlib.sha256(blob.data).hexdigest() == checksum
    assert len(blob.data) == 2**20


def test_socket_peer_disconnect_is_fatal(socket_pair):
    client, server = socket_pair
    client.close()
    with pytest.raises(TransportError):
        server.recv()


def test_socket_many_messages_in_order(socket_pair):
    client, server = socket_pair
    msgs = sample_messages(seed=3, count=300)
    sender = threading.Thread(target=lambda: [client.send(m) for m in msgs])
    sender.start()
    received = [server.recv() for _ in msgs]
    sender.join()
    assert received == msgs


def test_parse_address():
    assert parse_address("127.0.0.1:8080") == ("127.0.0.1", 8080)
    with pytest.raises(TransportError):
        parse_address("nonsense")
