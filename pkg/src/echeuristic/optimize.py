"""One-dimensional maximization: dense grid scan plus golden-section polish."""

from __future__ import annotations

import math

import numpy as np

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(f, a: float, b: float, tol: float = 1e-10, max_iter: int = 200):
    """Maximize a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``.

    The bracket shrinks until its width is below ``tol``.  Endpoint values
    are compared too, so a monotone ``f`` returns the better endpoint.
    """
    lo, hi = float(a), float(b)
    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INVPHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INVPHI * (hi - lo)
            f2 = f(x2)
    best_x, best_f = (x1, f1) if f1 >= f2 else (x2, f2)
    for x in (a, b):
        fx = f(x)
        if fx > best_f:
            best_x, best_f = x, fx
    return best_x, best_f


def grid_refine_max(f, a: float, b: float, n_grid: int = 4096, tol: float = 1e-10):
    """Global max of a cheap, possibly multimodal ``f`` on ``[a, b]``.

    ``f`` must accept arrays.  The coarse grid picks the winning bracket
    (ties go to the smallest ``x``) and golden section refines inside it.
    """
    x = np.linspace(a, b, n_grid)
    vals = np.asarray(f(x), dtype=float)
    i = int(np.argmax(vals))
    lo, hi = x[max(i - 1, 0)], x[min(i + 1, n_grid - 1)]
    xr, fr = golden_section_max(lambda s: float(f(np.array([s]))[0]), lo, hi, tol=tol)
    if fr > vals[i]:
        return float(xr), float(fr)
    return float(x[i]), float(vals[i])
