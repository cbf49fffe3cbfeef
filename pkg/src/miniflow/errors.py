"""Exception hierarchy shared by all miniflow components."""

from __future__ import annotations


class MiniflowError(Exception):
    """Base class for every error raised by miniflow."""


class SourceError(MiniflowError):
    """Compile-stage error carrying a source position."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})" if line else message)


class LexError(SourceError):
    pass


class ParseError(SourceError):
    pass


class ResolveError(SourceError):
    pass


class TemplateError(MiniflowError):
    """Malformed code template or unresolved slot."""


class LowerError(MiniflowError):
    """Internal error while lowering a checked program."""


class CycleError(MiniflowError):
    """Dependency cycle detected where the IR invariant guarantees none."""


class DoubleStoreError(MiniflowError):
    """A second store was attempted on a write-once future."""

    def __init__(self, future_id: int):
        self.future_id = future_id
        super().__init__(f"double store to future {future_id}")


class TypeMismatchError(MiniflowError):
    pass


class EngineError(MiniflowError):
    pass


class LeafError(MiniflowError):
    """A leaf task failed on a worker; carries the guest diagnostic."""

    def __init__(self, message: str, task_id: int | None = None, binding: str | None = None):
        self.task_id = task_id
        self.binding = binding
        prefix = ""
        if task_id is not None:
            prefix += f"task {task_id}"
        if binding:
            prefix += f" ({binding})" if prefix else binding
        super().__init__(f"{prefix}: {message}" if prefix else message)


class GuestError(MiniflowError):
    """Raised when guest code evaluation fails; message is the guest diagnostic."""


class MarshalError(MiniflowError):
    pass


class BlobError(MiniflowError):
    pass


class DecodeError(MiniflowError):
    """A wire frame could not be decoded."""


class TransportError(MiniflowError):
    """Connection-level failure (peer disconnect, short read)."""


class ProtocolError(MiniflowError):
    """A balancer client violated the task protocol."""


class ServerShutdownError(MiniflowError):
    """Operation rejected because the server is shutting down."""


class PackageError(MiniflowError):
    """Guest package could not be located or loaded."""
