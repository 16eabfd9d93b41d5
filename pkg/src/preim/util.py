"""Small shared helpers: CSV writing and the optional thread pool."""

import csv
import os
from concurrent.futures import ThreadPoolExecutor


def float_repr(x):
    """Format a float with 17 significant digits (binary round-trip exact)."""
    return format(float(x), ".17g")


def write_csv(path, rows, header=None):
    """Write rows to ``path`` with LF line endings; floats use 17 digits."""
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if header is not None:
            writer.writerow(header)
        for row in rows:
            writer.writerow(
                [float_repr(v) if isinstance(v, float) else v for v in row]
            )


def write_matrix_csv(path, matrix):
    """Dump a 2D array, one row per line, 17-significant-digit floats."""
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        for row in matrix:
            fh.write(",".join(float_repr(v) for v in row))
            fh.write("\n")


def worker_count():
    """Worker-thread cap from the PREIM_THREADS environment variable."""
    raw = os.environ.get("PREIM_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Map ``fn`` over ``items`` preserving order, threaded if allowed."""
    items = list(items)
    workers = worker_count()
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
