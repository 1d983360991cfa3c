"""Remaining-useful-life estimation for run-to-failure sensor fleets.

Thin wrapper around the C++ core. `run` drives the full CLI in-process;
the rest are direct bindings for the pieces most useful from python.
"""

import sys

from rulforge._core import (
    __version__,
    evaluate,
    ewma_smooth,
    mae,
    predict,
    r2,
    rmse,
    run,
)

__all__ = [
    "__version__",
    "evaluate",
    "ewma_smooth",
    "mae",
    "main",
    "predict",
    "r2",
    "rmse",
    "run",
]


def main() -> int:
    """Console entry point; mirrors the standalone binary."""
    code, out, err = run(sys.argv[1:])
    if out:
        sys.stdout.write(out)
    if err:
        sys.stderr.write(err)
    return code
