# Guest-side numerical kernels preloaded into the worker interpreter via
# package.mfpkg. Only the scalar/blob boundary types cross in or out; blob
# contents are reached through the accessor functions the runtime exposes
# (blob_f64s, blob_of_f64s, blob_elem_type, ...). No third-party imports so
# any bare interpreter can run these.


def trapezoid(a, b, n):
    """Trapezoid-rule integral of x^2 over [a, b] with n panels."""
    if n < 1:
        raise ValueError("trapezoid: n must be >= 1")
    h = (b - a) / n
    total = 0.5 * (a * a + b * b)
    for k in range(1, n):
        x = a + k * h
        total += x * x
    return total * h


def make_series(n):
    """Blob of the f64 values 0.0, 1.0, ..., n-1."""
    return blob_of_f64s([float(k) for k in range(n)])  # noqa: F821


def cancellation_probe():
    """Values whose sum depends on accumulation order: left-to-right is 0.0."""
    return blob_of_f64s([1e16, 1.0, -1e16])  # noqa: F821


def sum_blob(b):
    """Left-to-right sum of an f64-tagged blob."""
    if blob_elem_type(b) != "f64":  # noqa: F821
        raise ValueError("sum_blob: blob must be tagged f64")
    total = 0.0
    for x in blob_f64s(b):  # noqa: F821
        total += x
    return total


def acc_reset():
    """Zero the worker-resident accumulator (needs the retain policy)."""
    global _total
    _total = 0
    return 0


def acc_add(v):
    """Add into the worker-resident accumulator and return the running total."""
    global _total
    _total += v
    return _total
