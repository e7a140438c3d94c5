"""Grid-then-golden-section maximization on a periodic domain."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

_INV_PHI = (math.sqrt(5) - 1) / 2


def golden_section_max(f: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def periodic_argmax(f_vec: Callable[[np.ndarray], np.ndarray], period: float,
                    grid_size: int = 1024, rel_tol: float = 1e-10) -> float:
    """Argmax of a ``period``-periodic function, returned in ``[0, period)``.

    ``f_vec`` must accept an array of abscissae.
    """
    grid = np.arange(grid_size) * (period / grid_size)
    vals = f_vec(grid)
    i = int(np.argmax(vals))
    h = period / grid_size
    x = golden_section_max(lambda v: float(f_vec(np.array([v]))[0]), grid[i] - h, grid[i] + h,
                           rel_tol * period)
    # the grid point may still win when the refinement bracket is flat
    if float(f_vec(np.array([x]))[0]) < vals[i]:
        x = grid[i]
    return x % period
