"""Binary blobs: length-delimited byte buffers with optional element-type and shape tags.

Blobs are immutable values. Reinterpretation changes tags, never bytes; all
multi-byte encodings are little-endian regardless of host byte order so blobs
stay portable across workers.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

from .errors import BlobError


class ElemType(enum.Enum):
    U8 = "u8"
    I32 = "i32"
    I64 = "i64"
    F64 = "f64"

    @property
    def size(self) -> int:
        return _ELEM_SIZES[self]

    @property
    def wire_tag(self) -> int:
        return _WIRE_TAGS[self]


_ELEM_SIZES = {ElemType.U8: 1, ElemType.I32: 4, ElemType.I64: 8, ElemType.F64: 8}
_WIRE_TAGS = {ElemType.U8: 1, ElemType.I32: 2, ElemType.I64: 3, ElemType.F64: 4}
_TAG_TO_ELEM = {tag: et for et, tag in _WIRE_TAGS.items()}


@dataclass(frozen=True)
class Blob:
    """Immutable byte buffer. If elem_type is set, len(data) must be a multiple
    of the element size; if shape is also set, product(shape) * elem size must
    equal len(data) (row-major layout)."""

    data: bytes
    elem_type: ElemType | None = None
    shape: tuple[int, ...] | None = None

    def __post_init__(self):
        if not isinstance(self.data, bytes):
            object.__setattr__(self, "data", bytes(self.data))
        if self.shape is not None and self.elem_type is None:
            raise BlobError("shape tag requires an element type tag")
        if self.elem_type is not None:
            size = self.elem_type.size
            if len(self.data) % size != 0:
                raise BlobError(
                    f"blob length {len(self.data)} is not a multiple of "
                    f"{self.elem_type.value} element size {size}"
                )
            if self.shape is not None:
                if any(d < 0 for d in self.shape):
                    raise BlobError(f"negative dimension in shape {self.shape}")
                expected = _product(self.shape) * size
                if expected != len(self.data):
                    raise BlobError(
                        f"shape {list(self.shape)} of {self.elem_type.value} "
                        f"needs {expected} bytes, blob has {len(self.data)}"
                    )

    def __len__(self) -> int:
        return len(self.data)

    def __repr__(self) -> str:
        tag = f" {self.elem_type.value}" if self.elem_type else ""
        shp = f"{list(self.shape)}" if self.shape is not None else ""
        return f"<blob {len(self.data)} bytes{tag}{shp}>"


def _product(dims: tuple[int, ...]) -> int:
    n = 1
    for d in dims:
        n *= d
    return n


def blob_of_string(s: str) -> Blob:
    """Exact UTF-8 encoding, no terminator byte."""
    return Blob(s.encode("utf-8"), ElemType.U8)


def string_of_blob(b: Blob) -> str:
    try:
        return b.data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise BlobError(f"blob payload is not valid UTF-8: {exc}") from None


def blob_of_f64s(values) -> Blob:
    data = struct.pack(f"<{len(values)}d", *values)
    return Blob(data, ElemType.F64)


def f64s_of_blob(b: Blob) -> list[float]:
    if b.elem_type not in (None, ElemType.F64):
        raise BlobError(f"blob tagged {b.elem_type.value}, not f64")
    if len(b.data) % 8 != 0:
        raise BlobError(f"blob length {len(b.data)} is not divisible by 8")
    return list(struct.unpack(f"<{len(b.data) // 8}d", b.data))


def blob_of_i64s(values) -> Blob:
    data = struct.pack(f"<{len(values)}q", *values)
    return Blob(data, ElemType.I64)


def i64s_of_blob(b: Blob) -> list[int]:
    if b.elem_type not in (None, ElemType.I64):
        raise BlobError(f"blob tagged {b.elem_type.value}, not i64")
    if len(b.data) % 8 != 0:
        raise BlobError(f"blob length {len(b.data)} is not divisible by 8")
    return list(struct.unpack(f"<{len(b.data) // 8}q", b.data))


def blob_of_i32s(values) -> Blob:
    data = struct.pack(f"<{len(values)}i", *values)
    return Blob(data, ElemType.I32)


def i32s_of_blob(b: Blob) -> list[int]:
    if b.elem_type not in (None, ElemType.I32):
        raise BlobError(f"blob tagged {b.elem_type.value}, not i32")
    if len(b.data) % 4 != 0:
        raise BlobError(f"blob length {len(b.data)} is not divisible by 4")
    return list(struct.unpack(f"<{len(b.data) // 4}i", b.data))


def reinterpret(b: Blob, elem_type: ElemType | None, shape=None) -> Blob:
    """Retag a blob without copying or transforming its bytes.

    Raises BlobError when the requested tags are inconsistent with the byte
    count, reporting expected vs. actual sizes.
    """
    shape_t = tuple(shape) if shape is not None else None
    return Blob(b.data, elem_type, shape_t)


def transposed(b: Blob) -> Blob:
    """Explicit 2-D transpose helper for column-major interop; copies bytes."""
    if b.elem_type is None or b.shape is None or len(b.shape) != 2:
        raise BlobError("transpose requires an elem type and a 2-D shape")
    rows, cols = b.shape
    size = b.elem_type.size
    out = bytearray(len(b.data))
    for r in range(rows):
        for c in range(cols):
            src = (r * cols + c) * size
            dst = (c * rows + r) * size
            out[dst:dst + size] = b.data[src:src + size]
    return Blob(bytes(out), b.elem_type, (cols, rows))


def encode_blob(b: Blob) -> bytes:
    """Wire encoding: 8-byte LE payload length, 1-byte elem tag (0 = none),
    1-byte rank, rank x 8-byte LE dims, payload."""
    parts = [struct.pack("<Q", len(b.data))]
    parts.append(bytes([b.elem_type.wire_tag if b.elem_type else 0]))
    dims = b.shape if b.shape is not None else ()
    rank = len(dims)
    if rank > 255:
        raise BlobError(f"rank {rank} exceeds wire limit")
    parts.append(bytes([rank]))
    for d in dims:
        parts.append(struct.pack("<Q", d))
    parts.append(b.data)
    return b"".join(parts)


def decode_blob(buf: bytes, offset: int = 0) -> tuple[Blob, int]:
    """Decode a wire blob; returns (blob, next offset)."""
    try:
        (length,) = struct.unpack_from("<Q", buf, offset)
        offset += 8
        tag = buf[offset]
        offset += 1
        rank = buf[offset]
        offset += 1
        dims = []
        for _ in range(rank):
            (d,) = struct.unpack_from("<Q", buf, offset)
            dims.append(d)
            offset += 8
        payload = bytes(buf[offset:offset + length])
        if len(payload) != length:
            raise BlobError("truncated blob payload")
        offset += length
    except (struct.error, IndexError):
        raise BlobError("truncated blob header") from None
    if tag == 0:
        elem = None
        if rank:
            raise BlobError("blob with shape but no element type")
        shape = None
    else:
        if tag not in _TAG_TO_ELEM:
            raise BlobError(f"unknown blob element tag {tag}")
        elem = _TAG_TO_ELEM[tag]
        shape = tuple(dims) if rank else None
    return Blob(payload, elem, shape), offset
