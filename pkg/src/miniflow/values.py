"""Scalar values crossing binding boundaries: int, float, string, blob.

Values are represented as native Python objects (int, float, str, Blob) plus
a ScalarType tag wherever a declared type is needed. Ints are constrained to
signed 64-bit so every value survives the wire encoding unchanged.
"""

from __future__ import annotations

import enum
import struct

from .blob import Blob
from .errors import MarshalError

I64_MIN = -(2**63)
I64_MAX = 2**63 - 1


class ScalarType(enum.Enum):
    INT = "int"
    FLOAT = "float"
    STRING = "string"
    BLOB = "blob"

    @classmethod
    def parse(cls, name: str) -> "ScalarType":
        for st in cls:
            if st.value == name:
                return st
        raise MarshalError(f"unknown scalar type {name!r}")


Value = int | float | str | Blob

_PY_TYPES = {
    ScalarType.INT: int,
    ScalarType.FLOAT: float,
    ScalarType.STRING: str,
    ScalarType.BLOB: Blob,
}


def type_of(value) -> ScalarType:
    if isinstance(value, bool):
        return ScalarType.INT
    if isinstance(value, int):
        return ScalarType.INT
    if isinstance(value, float):
        return ScalarType.FLOAT
    if isinstance(value, str):
        return ScalarType.STRING
    if isinstance(value, Blob):
        return ScalarType.BLOB
    raise MarshalError(f"value of host type {type(value).__name__} is not a scalar")


def type_name(value) -> str:
    try:
        return type_of(value).value
    except MarshalError:
        return type(value).__name__


def ensure_type(value, expected: ScalarType):
    """Check a value against a declared scalar type; returns the normalized value.

    Bools normalize to ints. No other conversion is applied; a mismatch raises
    MarshalError naming expected and actual types.
    """
    if expected is ScalarType.INT:
        if isinstance(value, bool):
            value = int(value)
        if isinstance(value, int):
            if not I64_MIN <= value <= I64_MAX:
                raise MarshalError(f"int {value} outside signed 64-bit range")
            return value
    elif isinstance(value, _PY_TYPES[expected]) and not isinstance(value, bool):
        return value
    raise MarshalError(f"expected {expected.value}, got {type_name(value)}")


def float_bits(x: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", x))[0]


def float_from_bits(bits: int) -> float:
    return struct.unpack("<d", struct.pack("<Q", bits))[0]


def canonical_key(value):
    """Comparison key that is bit-exact for floats (distinguishes 0.0/-0.0, NaNs)."""
    st = type_of(value)
    if st is ScalarType.FLOAT:
        return ("float", float_bits(value))
    if st is ScalarType.BLOB:
        return ("blob", value.data, value.elem_type, value.shape)
    return (st.value, value)


def render_value(value) -> str:
    """Human-facing rendering used for `name = value` result lines."""
    st = type_of(value)
    if st is ScalarType.FLOAT:
        return repr(value)
    if st is ScalarType.BLOB:
        return repr(value)
    return str(value)
