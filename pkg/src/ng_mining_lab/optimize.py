"""Bounded scalar maximization: coarse grid, then golden-section refinement."""

import math

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
DEFAULT_GRID = 1025


def golden_section_max(f, lo, hi, tol=1e-9, max_iter=200):
    """Maximize a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``.

    The bracket is shrunk until its width is at most ``tol``. Endpoints are
    compared at the end so a monotone ``f`` returns the boundary itself.
    """
    a, b = float(lo), float(hi)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    x, fx = (c, fc) if fc >= fd else (d, fd)
    for edge in (lo, hi):
        fe = f(edge)
        if fe > fx:
            x, fx = float(edge), fe
    return x, fx


def grid_golden_max(f_vec, lo, hi, tol=1e-9, n_grid=DEFAULT_GRID):
    """Argmax of ``f_vec`` over ``[lo, hi]``.

    ``f_vec`` must accept a numpy array. A grid of ``n_grid`` points locates
    the bracket around the best node, which golden section then narrows to
    ``tol``. The grid guards against kinks that would mislead a pure
    bracketing search.
    """
    if hi <= lo:
        return float(lo), float(f_vec(np.array([lo]))[0])
    xs = np.linspace(lo, hi, n_grid)
    ys = np.asarray(f_vec(xs), dtype=float)
    i = int(np.argmax(ys))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, n_grid - 1)]

    def f(x):
        return float(f_vec(np.array([x]))[0])

    x, fx = golden_section_max(f, a, b, tol=tol)
    if ys[i] > fx:
        return float(xs[i]), float(ys[i])
    return x, fx
