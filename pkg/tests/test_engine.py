import pytest

import miniflow.engine as engine_mod
from miniflow.compiler import compile_source
from miniflow.engine import Engine, run_local
from miniflow.errors import DoubleStoreError, EngineError, LeafError, TypeMismatchError
from miniflow.sim import run_sim
from miniflow.values import canonical_key
from miniflow.worker import make_local_executor
from program_gen import generate_program

LEAVES = """
leaf (int o) f () guest "o = 1";
leaf (int o) g (int v) guest "o = v + 10";
"""

FRAGMENT = LEAVES + "int x; x = f(); int y = g(x); int z = g(x);"


def fresh_engine(source, tasks=None):
    compiled = compile_source(source)
    sink = tasks if tasks is not None else []
    engine = Engine(compiled.ir, emit_task=sink.append)
    return compiled, engine, sink


def test_init_fires_zero_input_rule_leaves_g_pending():
    compiled, engine, tasks = fresh_engine(FRAGMENT)
    fired = engine.start()
    assert fired == {0}
    assert len(tasks) == 1 and tasks[0].binding == "f"
    # Both g rules pending with one unset input.
    assert engine.pending == {1: 1, 2: 1}
    assert not engine.is_quiescent()


def test_empty_program_quiescent_immediately():
    _, engine, _ = fresh_engine("")
    engine.start()
    assert engine.is_quiescent()


def test_entry_store_applied_at_init():
    compiled, engine, _ = fresh_engine("int c = 5;")
    engine.start()
    assert engine.final_store() == {0: 5}
    assert engine.is_quiescent()


def test_store_fires_both_subscribers():
    compiled, engine, tasks = fresh_engine(FRAGMENT)
    engine.start()
    fired = engine.on_task_complete(tasks[0].task_id, (7,))
    assert fired == {1, 2}
    assert len(tasks) == 3
    assert {t.binding for t in tasks[1:]} == {"g"}


def test_double_store_errors_and_identifies_future():
    compiled, engine, _ = fresh_engine("int c = 5;")
    engine.start()
    with pytest.raises(DoubleStoreError) as err:
        engine.store(0, 6)
    assert err.value.future_id == 0
    assert engine.final_store()[0] == 5  # state unchanged


def test_store_type_mismatch():
    compiled, engine, _ = fresh_engine(LEAVES + "int c = g(5);")
    engine.start()
    with pytest.raises(TypeMismatchError):
        engine.store(0, "wrong")


def test_store_with_no_subscribers_keeps_state_consistent():
    compiled, engine, tasks = fresh_engine(LEAVES + "int x = f();")
    engine.start()
    fired = engine.on_task_complete(tasks[0].task_id, (3,))
    assert fired == set()
    assert engine.is_quiescent()
    assert engine.final_store() == {0: 3}


def test_completion_with_zero_outputs_only_decrements_in_flight():
    compiled, engine, tasks = fresh_engine('leaf () poke (int a) guest "t = a";\npoke(1);')
    engine.start()
    assert len(engine.in_flight) == 1
    engine.on_task_complete(tasks[0].task_id, ())
    assert not engine.in_flight
    assert engine.is_quiescent()


def test_duplicate_completion_rejected_state_unchanged():
    compiled, engine, tasks = fresh_engine(LEAVES + "int x = f();")
    engine.start()
    engine.on_task_complete(tasks[0].task_id, (3,))
    before = engine.final_store()
    with pytest.raises(EngineError, match="duplicate completion"):
        engine.on_task_complete(tasks[0].task_id, (4,))
    assert engine.final_store() == before


def test_unknown_task_completion_rejected():
    compiled, engine, _ = fresh_engine(FRAGMENT)
    engine.start()
    with pytest.raises(EngineError, match="unknown task"):
        engine.on_task_complete(999, ())


def test_single_fire_per_rule_over_run():
    compiled, engine, tasks = fresh_engine(FRAGMENT)
    engine.start()
    engine.on_task_complete(0, (1,))
    engine.on_task_complete(1, (11,))
    engine.on_task_complete(2, (11,))
    assert engine.fired == {0, 1, 2}
    assert engine.is_quiescent()
    assert engine.final_store() == {0: 1, 1: 11, 2: 11}


def test_leaf_error_aborts_run_with_rule_and_task_id():
    compiled, engine, tasks = fresh_engine(FRAGMENT)
    engine.start()
    engine.on_task_complete(tasks[0].task_id, (), error="guest exploded")
    assert engine.failure is not None
    assert "task 0" in str(engine.failure)
    assert engine.is_quiescent()  # drained after abort


def test_no_new_tasks_after_failure():
    compiled, engine, tasks = fresh_engine(FRAGMENT)
    engine.start()
    engine.on_task_complete(0, (), error="boom")
    assert len(tasks) == 1  # the two g tasks were never emitted


# -- run_local oracle ---------------------------------------------------------


def local_store(source, backend="toy"):
    compiled = compile_source(source)
    executor = make_local_executor(compiled.bindings, backend=backend)
    return compiled, run_local(compiled.ir, executor)


def test_run_local_fragment():
    compiled, store = local_store(FRAGMENT)
    by_name = {compiled.ir.future_names[fid]: v for fid, v in store.items()}
    assert by_name == {"x": 1, "y": 11, "z": 11}


def test_run_local_pipeline_loop():
    source = """
leaf (int o) f (int i) guest "o = i";
leaf (int o) g (int t) guest "o = t * 2";
foreach i in [0:9] { int t = f(i); int v = g(t); }
"""
    compiled, store = local_store(source)
    values = {compiled.ir.future_names[fid]: v for fid, v in store.items()}
    for k in range(10):
        assert values[f"v@{k}"] == 2 * k


def test_run_local_empty_program():
    _, store = local_store("")
    assert store == {}


def test_run_local_propagates_leaf_error_with_rule_id():
    source = 'leaf (int o) bad (int a) guest "o = a / 0";\nint x = bad(1);'
    compiled = compile_source(source)
    executor = make_local_executor(compiled.bindings, backend="toy")
    with pytest.raises(LeafError, match="division by zero"):
        run_local(compiled.ir, executor)


def named_values(compiled, store):
    return {name: store[fid] for name, fid in compiled.ir.top_level}


def test_run_local_inline_arithmetic_matches_hand_computation():
    compiled, store = local_store("int a = 10; int b = a / 3; int c = a % 3; int d = -a * 2;")
    assert named_values(compiled, store) == {"a": 10, "b": 3, "c": 1, "d": -20}


def test_run_local_c_style_division():
    compiled, store = local_store("int a = -7 / 2; int b = 7 / -2; int c = -7 % 2;")
    assert named_values(compiled, store) == {"a": -3, "b": -3, "c": -1}


# -- determinism / confluence -------------------------------------------------


def stores_equal(a, b):
    if set(a) != set(b):
        return False
    return all(canonical_key(a[f]) == canonical_key(b[f]) for f in a)


@pytest.mark.parametrize("source_seed", [0, 1, 2])
def test_sim_schedules_match_oracle_100_seeds(source_seed):
    source = generate_program(source_seed)
    compiled = compile_source(source)
    executor = make_local_executor(compiled.bindings, backend="toy")
    expected = run_local(compiled.ir, executor)
    for schedule_seed in range(100):
        for workers in (1, 3):
            got = run_sim(compiled, seed=schedule_seed, workers=workers)
            assert stores_equal(got, expected), (
                f"schedule {schedule_seed} workers {workers} diverged")


def test_premature_fire_assertion_counter_exists():
    assert engine_mod.PREMATURE_FIRE_TRIPS == 0
