"""Principal branch of the Lambert W function.

Real arguments only. Halley iteration from a branch-point series or a
logarithmic asymptotic start; non-convergence is an error, never a silent
best effort.
"""

import math

MAX_ITER = 50
BRANCH_POINT = -math.exp(-1.0)
_BRANCH_SLACK = 1e-15


class LambertDomainError(ValueError):
    pass


class LambertConvergenceError(ArithmeticError):
    pass


def _initial_guess(x: float) -> float:
    if x < -0.25:
        # series about the branch point: W = -1 + p - p^2/3 + 11/72 p^3
        p = math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
        return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
    if x < 3.0:
        return math.log1p(x)  # decent on [-1/4, 3] and exact at 0
    lx = math.log(x)
    llx = math.log(lx)
    return lx - llx + llx / lx


def lambert_w0(x: float) -> float:
    """Return ``y >= -1`` with ``y * exp(y) == x``.

    Accurate to a relative error of about 1e-15 away from the branch point.

    >>> lambert_w0(math.e)
    1.0
    """
    x = float(x)
    if math.isnan(x):
        raise LambertDomainError("W0 of NaN")
    if x < BRANCH_POINT:
        if x >= BRANCH_POINT - _BRANCH_SLACK:
            return -1.0
        raise LambertDomainError(f"W0 undefined for x = {x!r} < -1/e")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return math.inf
    if x == BRANCH_POINT:
        return -1.0

    w = _initial_guess(x)
    last_step = math.inf
    for _ in range(MAX_ITER):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            return -1.0
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w_new = w - step
        if w_new <= -1.0:
            # halley overshoot near the branch point; bisect towards -1
            w_new = 0.5 * (w - 1.0)
        delta = abs(w_new - w)
        if delta <= 4e-16 * max(1.0, abs(w_new)):
            return w_new
        # near -1/e the iteration bottoms out at round-off rather than 4e-16
        if delta >= last_step and delta < 1e-7 * max(1.0, abs(w_new)):
            return w_new
        last_step = delta
        w = w_new
    raise LambertConvergenceError(f"W0({x!r}) did not converge in {MAX_ITER} iterations")


def lambert_w0_exp(log_x: float) -> float:
    """``W0(exp(log_x))`` without forming ``exp(log_x)``.

    Solves ``w + log(w) = log_x`` by Newton's method when the argument would
    overflow or lose precision; defers to :func:`lambert_w0` otherwise.
    """
    log_x = float(log_x)
    if log_x < 500.0:
        return lambert_w0(math.exp(log_x))
    w = log_x - math.log(log_x)
    for _ in range(MAX_ITER):
        step = (w + math.log(w) - log_x) * w / (w + 1.0)
        w -= step
        if abs(step) <= 4e-16 * w:
            return w
    raise LambertConvergenceError(f"W0(exp({log_x!r})) did not converge")
