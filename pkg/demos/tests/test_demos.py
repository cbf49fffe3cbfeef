"""Demo package tests: drive the runtime exclusively through its public
surfaces (the miniflow CLI, MINIFLOW_GUEST_PATH, package.mfpkg manifests,
and .mf scripts)."""

import os
import subprocess
import sys
from pathlib import Path

import pytest

DEMOS = Path(__file__).resolve().parents[1]
PACKAGES = DEMOS / "packages"
SCRIPTS = DEMOS / "scripts"


def run_cli(script, *args, guest_path=str(PACKAGES), timeout=120):
    env = dict(os.environ)
    if guest_path is not None:
        env["MINIFLOW_GUEST_PATH"] = guest_path
    else:
        env.pop("MINIFLOW_GUEST_PATH", None)
    return subprocess.run(
        [sys.executable, "-m", "miniflow.cli", "run", str(SCRIPTS / script), *args],
        capture_output=True, text=True, timeout=timeout, env=env)


def parse_values(stdout):
    out = {}
    for line in stdout.splitlines():
        name, _, value = line.partition(" = ")
        out[name] = value
    return out


# -- trapezoid -----------------------------------------------------------------


def reference_trapezoid(a, b, n):
    # Independent quadrature oracle, written against the rule directly.
    h = (b - a) / n
    acc = (a * a + b * b) / 2.0
    for k in range(1, n):
        x = a + k * h
        acc += x * x
    return acc * h


def test_trapezoid_prints_third_within_1e6():
    proc = run_cli("trapezoid.mf")
    assert proc.returncode == 0, proc.stderr
    value = float(parse_values(proc.stdout)["integral"])
    assert abs(value - 1.0 / 3.0) < 1e-6
    assert value == pytest.approx(reference_trapezoid(0.0, 1.0, 1000), abs=1e-12)


@pytest.mark.parametrize("workers", ["1", "4", "8"])
def test_trapezoid_identical_across_worker_counts(workers):
    base = run_cli("trapezoid.mf", "--workers", "1")
    proc = run_cli("trapezoid.mf", "--workers", workers)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout == base.stdout


def test_trapezoid_processes_mode_matches():
    base = run_cli("trapezoid.mf", "--workers", "1")
    proc = run_cli("trapezoid.mf", "--workers", "4", "--mode", "processes")
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout == base.stdout


def test_trapezoid_edge_cases(tmp_path):
    script = tmp_path / "edges.mf"
    script.write_text(
        'leaf (float r) trapezoid (float a, float b, int n) '
        'package "demo_kernels" "1.0" guest "r = trapezoid(a, b, n)";\n'
        "float single_panel = trapezoid(0.0, 1.0, 1);\n"
        "float zero_width = trapezoid(0.0, 0.0, 10);\n")
    env = dict(os.environ, MINIFLOW_GUEST_PATH=str(PACKAGES))
    proc = subprocess.run(
        [sys.executable, "-m", "miniflow.cli", "run", str(script)],
        capture_output=True, text=True, timeout=60, env=env)
    assert proc.returncode == 0, proc.stderr
    values = parse_values(proc.stdout)
    assert float(values["single_panel"]) == 0.5  # endpoints 0 and 1 of x^2
    assert float(values["zero_width"]) == 0.0


# -- blob sum ------------------------------------------------------------------


def test_blob_sum_series_and_fixed_order_probe():
    proc = run_cli("blob_sum.mf", "--workers", "4")
    assert proc.returncode == 0, proc.stderr
    values = parse_values(proc.stdout)
    assert float(values["total"]) == sum(float(k) for k in range(6))
    # Left-to-right fold oracle; any reordering would give +/-1.0 instead.
    oracle = 0.0
    for x in (1e16, 1.0, -1e16):
        oracle += x
    assert float(values["probe"]) == oracle == 0.0


@pytest.mark.parametrize("workers", ["1", "8"])
def test_blob_sum_identical_across_worker_counts(workers):
    base = run_cli("blob_sum.mf", "--workers", "1")
    proc = run_cli("blob_sum.mf", "--workers", workers)
    assert proc.stdout == base.stdout


def test_blob_sum_edge_cases(tmp_path):
    script = tmp_path / "edges.mf"
    script.write_text(
        'leaf (blob b) make_series (int n) package "demo_kernels" "1.0" '
        'guest "b = make_series(n)";\n'
        'leaf (float s) sum_blob (blob b) package "demo_kernels" "1.0" '
        'guest "s = sum_blob(b)";\n'
        "blob empty = make_series(0);\n"
        "float zero = sum_blob(empty);\n"
        "blob three = make_series(4);\n"
        "float six = sum_blob(three);\n")
    env = dict(os.environ, MINIFLOW_GUEST_PATH=str(PACKAGES))
    proc = subprocess.run(
        [sys.executable, "-m", "miniflow.cli", "run", str(script)],
        capture_output=True, text=True, timeout=60, env=env)
    assert proc.returncode == 0, proc.stderr
    values = parse_values(proc.stdout)
    assert float(values["zero"]) == 0.0
    assert float(values["six"]) == 6.0  # 0+1+2+3


# -- accumulator (retain policy) -------------------------------------------------


def test_accumulator_matches_sequential_fold_under_retain():
    proc = run_cli("accumulate.mf", "--workers", "1", "--policy", "retain")
    assert proc.returncode == 0, proc.stderr
    values = parse_values(proc.stdout)
    assert int(values["a3"]) == 5 + 7 + 11 + 2
    assert [int(values[k]) for k in ("z", "a0", "a1", "a2", "a3")] == [0, 5, 12, 23, 25]


def test_accumulator_processes_mode():
    proc = run_cli("accumulate.mf", "--workers", "1", "--policy", "retain",
                   "--mode", "processes")
    assert proc.returncode == 0, proc.stderr
    assert int(parse_values(proc.stdout)["a3"]) == 25


def test_accumulator_fails_under_reinitialize():
    # Each task gets a fresh interpreter, so the running total is gone.
    proc = run_cli("accumulate.mf", "--workers", "1", "--policy", "reinit")
    assert proc.returncode == 3
    assert "_total" in proc.stderr or "acc" in proc.stderr


# -- packaging surface ------------------------------------------------------------


def test_missing_guest_path_is_a_runtime_error():
    proc = run_cli("trapezoid.mf", guest_path=None)
    assert proc.returncode == 3
    assert "demo_kernels" in proc.stderr


def test_guest_error_surfaces_diagnostic(tmp_path):
    bad = tmp_path / "bad.mf"
    bad.write_text(
        'leaf (float r) trapezoid (float a, float b, int n) '
        'package "demo_kernels" "1.0" guest "r = trapezoid(a, b, n)";\n'
        "float x = trapezoid(0.0, 1.0, 0);\n")
    env = dict(os.environ, MINIFLOW_GUEST_PATH=str(PACKAGES))
    proc = subprocess.run(
        [sys.executable, "-m", "miniflow.cli", "run", str(bad)],
        capture_output=True, text=True, timeout=60, env=env)
    assert proc.returncode == 3
    assert "n must be >= 1" in proc.stderr
