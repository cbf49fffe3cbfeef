"""miniflow: a compact distributed dataflow scripting runtime.

Scripts in a small C-like language compile to write-once futures and
dataflow rules; an engine fires rules as inputs arrive and ships leaf tasks
through a demand-driven task server to workers, which run code templates,
native host functions, or embedded guest-interpreter fragments.
"""

from .blob import Blob, ElemType, blob_of_f64s, blob_of_string, f64s_of_blob, reinterpret, string_of_blob
from .compiler import CompiledScript, compile_file, compile_source
from .engine import Engine, run_local
from .errors import MiniflowError
from .ir import IrProgram, dump_ir, lower, topo_order
from .runtime import RunConfig, RunResult, run_compiled, run_source
from .values import ScalarType
from .worker import LeafBinding, Policy, WorkerRuntime

__version__ = "0.1.0"

__all__ = [
    "Blob", "ElemType", "blob_of_f64s", "blob_of_string", "f64s_of_blob",
    "reinterpret", "string_of_blob",
    "CompiledScript", "compile_file", "compile_source",
    "Engine", "run_local",
    "MiniflowError",
    "IrProgram", "dump_ir", "lower", "topo_order",
    "RunConfig", "RunResult", "run_compiled", "run_source",
    "ScalarType",
    "LeafBinding", "Policy", "WorkerRuntime",
    "__version__",
]
