"""Worker runtime: executes leaf tasks.

Three execution kinds:

* Template: input values are rendered into the code template at `<<slot>>`
  positions; each output slot becomes a fresh token variable (_o0, _o1, ...)
  that the guest code assigns and the runtime reads back.
* GuestEval: inputs are bound as guest variables under their declared names,
  the fragment runs as-is (slots, if any, collapse to the bare names), and
  outputs are read back by declared name.
* Native: a host-registered function is invoked directly.

One guest interpreter per worker, created lazily at the first guest task.
After every task the lifecycle policy either retains the environment or tears
it down and builds a fresh one (generation + 1).
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass

from .blob import Blob
from .errors import GuestError, LeafError, MarshalError, PackageError
from .guest import GuestBackend, make_backend
from .nodes import ExecKind, LeafDecl
from .packages import find_package
from .tasks import TaskDescriptor, TaskResult, TaskStats
from .templates import substitute_slots
from .values import I64_MAX, I64_MIN, ScalarType, type_name


class Policy(enum.Enum):
    RETAIN = "retain"
    REINITIALIZE = "reinit"


@dataclass(frozen=True)
class LeafBinding:
    name: str
    input_names: tuple[str, ...]
    input_types: tuple[ScalarType, ...]
    output_names: tuple[str, ...]
    output_types: tuple[ScalarType, ...]
    exec_kind: ExecKind
    template: str | None = None
    package: tuple[str, str] | None = None


def binding_of_decl(decl: LeafDecl) -> LeafBinding:
    package = None
    if decl.package_name is not None:
        package = (decl.package_name, decl.package_version)
    return LeafBinding(
        name=decl.name,
        input_names=tuple(p.name for p in decl.inputs),
        input_types=tuple(p.type for p in decl.inputs),
        output_names=tuple(p.name for p in decl.outputs),
        output_types=tuple(p.type for p in decl.outputs),
        exec_kind=decl.exec_kind,
        template=decl.template,
        package=package,
    )


@dataclass(frozen=True)
class OutputToken:
    """Placeholder for an output slot during template substitution."""
    index: int

    @property
    def token(self) -> str:
        return f"_o{self.index}"


class GuestInterpreter:
    """Backend environment handle plus its reinitialization count."""

    def __init__(self, backend: GuestBackend, policy: Policy):
        self.backend = backend
        self.policy = policy
        self.env = backend.init()
        self.generation = 0
        self.loaded_packages: set[tuple[str, str]] = set()

    def reinitialize(self) -> None:
        self.backend.finalize(self.env)
        self.env = self.backend.init()
        self.generation += 1
        self.loaded_packages.clear()


def default_natives() -> dict:
    """Host functions every worker registers out of the box."""
    return {
        "identity_blob": lambda b: b,
        "sleep_ms": _sleep_ms,
    }


def _sleep_ms(n: int) -> int:
    time.sleep(n / 1000.0)
    return n


class WorkerRuntime:
    def __init__(self, worker_id: str = "local", backend: str | GuestBackend = "pyexec",
                 policy: Policy = Policy.REINITIALIZE, guest_path=None, log=None):
        self.worker_id = worker_id
        self.backend = backend if isinstance(backend, GuestBackend) else make_backend(backend)
        self.policy = policy
        self.guest_path = guest_path
        self.log = log
        self.bindings: dict[str, LeafBinding] = {}
        self.natives: dict[str, object] = dict(default_natives())
        self.interp: GuestInterpreter | None = None
        self.serving = False

    # -- registration (before serving) --------------------------------------

    def register_native(self, name: str, fn) -> None:
        if self.serving:
            raise LeafError("cannot register natives once the worker is serving")
        self.natives[name] = fn

    def register_binding(self, binding: LeafBinding) -> None:
        if self.serving:
            raise LeafError("cannot register bindings once the worker is serving")
        if binding.name in self.bindings:
            raise LeafError(f"binding {binding.name!r} registered twice")
        if binding.exec_kind is ExecKind.NATIVE and binding.name not in self.natives:
            raise LeafError(f"native binding {binding.name!r} has no registered host function")
        if binding.exec_kind in (ExecKind.TEMPLATE, ExecKind.GUEST_EVAL) and binding.template is None:
            raise LeafError(f"binding {binding.name!r} of kind {binding.exec_kind.value} "
                            "requires a template")
        self.bindings[binding.name] = binding

    def register_decls(self, decls) -> None:
        for decl in decls:
            self.register_binding(binding_of_decl(decl))

    def lookup(self, name: str) -> LeafBinding:
        binding = self.bindings.get(name)
        if binding is None:
            raise LeafError(f"no binding registered for {name!r}")
        return binding

    # -- execution ----------------------------------------------------------

    def exec_task(self, task: TaskDescriptor) -> TaskResult:
        """Execute a task and package the outcome; never raises for leaf-level
        failures, so the worker loop can report them upstream."""
        started = time.monotonic()
        generation = self.interp.generation if self.interp else 0
        try:
            outputs = self.exec_leaf(task)
            error = None
        except (LeafError, MarshalError, GuestError, PackageError) as exc:
            outputs = ()
            error = str(exc)
        finished = time.monotonic()
        if self.interp is not None:
            generation = self.interp.generation
        stats = TaskStats(self.worker_id, started, finished, generation)
        self.end_task_lifecycle()
        return TaskResult(task.task_id, tuple(outputs), error, stats)

    def exec_leaf(self, task: TaskDescriptor) -> tuple:
        self.serving = True
        binding = self.lookup(task.binding)
        if len(task.inputs) != len(binding.input_types):
            raise LeafError(
                f"takes {len(binding.input_types)} inputs, got {len(task.inputs)}",
                task_id=task.task_id, binding=binding.name)
        inputs = []
        for name, declared, value in zip(binding.input_names, binding.input_types, task.inputs):
            try:
                inputs.append(self.unmarshal(value, declared))
            except MarshalError as exc:
                raise LeafError(f"input {name!r}: {exc}",
                                task_id=task.task_id, binding=binding.name) from None
        try:
            if binding.exec_kind is ExecKind.NATIVE:
                raw = self._exec_native(binding, inputs)
            elif binding.exec_kind is ExecKind.TEMPLATE:
                raw = self._exec_template(binding, inputs)
            else:
                raw = self._exec_guest(binding, inputs)
        except (GuestError, PackageError) as exc:
            raise LeafError(str(exc), task_id=task.task_id, binding=binding.name) from exc
        outputs = []
        for name, declared, value in zip(binding.output_names, binding.output_types, raw):
            try:
                outputs.append(self.unmarshal(value, declared))
            except MarshalError as exc:
                raise LeafError(f"output {name!r}: {exc}",
                                task_id=task.task_id, binding=binding.name) from None
        assert len(outputs) == len(binding.output_types)
        return tuple(outputs)

    def _exec_native(self, binding: LeafBinding, inputs: list) -> tuple:
        fn = self.natives[binding.name]
        try:
            result = fn(*inputs)
        except Exception as exc:
            raise LeafError(f"native {binding.name!r} raised {type(exc).__name__}: {exc}",
                            binding=binding.name) from exc
        n = len(binding.output_types)
        if n == 0:
            return ()
        if n == 1:
            return (result,)
        if not isinstance(result, (tuple, list)) or len(result) != n:
            raise LeafError(f"native {binding.name!r} must return {n} outputs",
                            binding=binding.name)
        return tuple(result)

    def _exec_template(self, binding: LeafBinding, inputs: list) -> tuple:
        interp = self._ensure_interpreter()
        self._ensure_package(interp, binding)
        env: dict[str, object] = dict(zip(binding.input_names, inputs))
        tokens = {}
        for index, name in enumerate(binding.output_names):
            token = OutputToken(index)
            env[name] = token
            tokens[name] = token
        blob_vars: dict[str, Blob] = {}
        code = self.substitute_template(binding.template, env, blob_vars)
        for var, value in blob_vars.items():
            interp.backend.bind_var(interp.env, var, value)
        interp.backend.eval(interp.env, code)
        return tuple(interp.backend.read_var(interp.env, tokens[name].token)
                     for name in binding.output_names)

    def _exec_guest(self, binding: LeafBinding, inputs: list) -> tuple:
        code = substitute_slots(binding.template, lambda name: name)
        outputs = self.guest_eval(code, dict(zip(binding.input_names, inputs)),
                                  binding.output_names, binding=binding)
        return tuple(outputs[name] for name in binding.output_names)

    def guest_eval(self, code: str, inputs: dict, output_names, binding=None) -> dict:
        """Bind inputs as guest variables, evaluate the fragment, and read the
        named outputs back."""
        interp = self._ensure_interpreter()
        if binding is not None:
            self._ensure_package(interp, binding)
        for name, value in inputs.items():
            interp.backend.bind_var(interp.env, name, self.marshal(value))
        interp.backend.eval(interp.env, code)
        return {name: interp.backend.read_var(interp.env, name) for name in output_names}

    def end_task_lifecycle(self) -> None:
        """Apply the interpreter policy after a task: retain the environment
        untouched, or tear it down and create a fresh one."""
        if self.interp is None:
            return
        if self.policy is Policy.REINITIALIZE:
            self.interp.reinitialize()
            if self.log is not None:
                self.log.emit("interp_reinit", worker=self.worker_id,
                              gen=self.interp.generation)

    # -- marshaling ----------------------------------------------------------

    def marshal(self, value):
        """Host value -> guest representation. Both shipped backends consume
        host scalars directly, so this validates and passes through."""
        if isinstance(value, bool):
            return int(value)
        if isinstance(value, (int, float, str, Blob)):
            if isinstance(value, int) and not I64_MIN <= value <= I64_MAX:
                raise MarshalError(f"int {value} outside signed 64-bit range")
            return value
        raise MarshalError(f"cannot marshal host value of type {type_name(value)}")

    def unmarshal(self, value, expected: ScalarType):
        """Guest value -> declared scalar type. Ints widen to float where a
        float is declared; anything else must match exactly."""
        if expected is ScalarType.INT:
            if isinstance(value, bool):
                value = int(value)
            if isinstance(value, int):
                if not I64_MIN <= value <= I64_MAX:
                    raise MarshalError(f"int {value} outside signed 64-bit range")
                return value
        elif expected is ScalarType.FLOAT:
            if isinstance(value, bool):
                return float(int(value))
            if isinstance(value, float):
                return value
            if isinstance(value, int):
                return float(value)
        elif expected is ScalarType.STRING:
            if isinstance(value, str):
                return value
        elif expected is ScalarType.BLOB:
            if isinstance(value, Blob):
                return value
        raise MarshalError(f"expected {expected.value}, got {type_name(value)}")

    # -- template substitution ----------------------------------------------

    def substitute_template(self, template: str, env: dict,
                            blob_vars: dict | None = None) -> str:
        """Replace each `<<name>>` slot with the guest rendering of env[name]:
        numbers as literals, strings quoted and escaped, blobs as handle
        tokens (recorded in blob_vars for pre-binding), outputs as their
        token variables."""
        collected: dict[str, Blob] = blob_vars if blob_vars is not None else {}

        def render(name: str) -> str:
            if name not in env:
                raise LeafError(f"template slot <<{name}>> has no value")
            value = env[name]
            if isinstance(value, OutputToken):
                return value.token
            if isinstance(value, bool):
                return str(int(value))
            if isinstance(value, int):
                return str(value)
            if isinstance(value, float):
                return _render_float(value)
            if isinstance(value, str):
                return _guest_string_literal(value)
            if isinstance(value, Blob):
                var = f"__blob_{len(collected)}"
                collected[var] = value
                return var
            raise LeafError(f"cannot render {type_name(value)} into a template")

        return substitute_slots(template, render)

    # -- internals ----------------------------------------------------------

    def _ensure_interpreter(self) -> GuestInterpreter:
        if self.interp is None:
            self.interp = GuestInterpreter(self.backend, self.policy)
            if self.log is not None:
                self.log.emit("interp_init", worker=self.worker_id, backend=self.backend.name)
        return self.interp

    def _ensure_package(self, interp: GuestInterpreter, binding: LeafBinding) -> None:
        if binding.package is None or binding.package in interp.loaded_packages:
            return
        name, version = binding.package
        package = find_package(name, version, self.guest_path)
        for source in package.read_sources():
            interp.backend.eval(interp.env, source)
        interp.loaded_packages.add(binding.package)


def _render_float(value: float) -> str:
    if value != value:
        return 'float("nan")'
    if value == float("inf"):
        return 'float("inf")'
    if value == float("-inf"):
        return '-float("inf")'
    return repr(value)


def _guest_string_literal(value: str) -> str:
    out = ['"']
    for c in value:
        if c == '"':
            out.append('\\"')
        elif c == "\\":
            out.append("\\\\")
        elif c == "\n":
            out.append("\\n")
        elif c == "\t":
            out.append("\\t")
        elif c == "\r":
            out.append("\\r")
        else:
            out.append(c)
    out.append('"')
    return "".join(out)


def make_local_executor(bindings, natives=None, backend="toy",
                        policy: Policy = Policy.REINITIALIZE, guest_path=None):
    """Build the synchronous leaf executor used by the sequential oracle."""
    runtime = WorkerRuntime("oracle", backend=backend, policy=policy, guest_path=guest_path)
    for name, fn in (natives or {}).items():
        runtime.register_native(name, fn)
    for binding in bindings.values():
        runtime.register_binding(binding)

    def execute(binding_name: str, inputs, n_outputs: int):
        task = TaskDescriptor(task_id=-1, work_type=0, priority=0,
                              binding=binding_name, inputs=tuple(inputs),
                              output_fids=tuple(range(n_outputs)))
        outputs = runtime.exec_leaf(task)
        runtime.end_task_lifecycle()
        return outputs

    return execute
