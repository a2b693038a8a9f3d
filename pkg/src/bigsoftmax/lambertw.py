"""Principal-branch Lambert W for nonnegative arguments.

The implicit proximal update reduces to scalar equations of the form
w * exp(w) = z with z >= 0, where z is often only representable through
its logarithm.  Both entry points run Halley's iteration; the log-space
variant never forms exp(log_z) when it would overflow.
"""

import math
from typing import NamedTuple

from .errors import DomainError

_E = math.e
_MAX_ITERS = 50
_REL_TOL = 1e-12
# exp() overflows just above 709; stay clear of it when delegating.
_LOG_DELEGATE_MAX = 700.0


class LambertWResult(NamedTuple):
    value: float
    iterations: int
    converged: bool


def _halley_we(x: float, w: float) -> tuple[float, int, bool]:
    # Halley on f(w) = w e^w - x, from initial guess w.
    tol = _REL_TOL * max(1.0, x)
    for it in range(1, _MAX_ITERS + 1):
        ew = math.exp(w)
        f = w * ew - x
        if abs(f) <= tol:
            return w, it - 1, True
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        w -= f / denom
        ew = math.exp(w)
        f = w * ew - x
        if abs(f) <= tol:
            return w, it, True
    return w, _MAX_ITERS, abs(f) <= tol


def _halley_log(log_x: float, w: float) -> tuple[float, int, bool]:
    # Halley on h(w) = w + log w - log_x; |h| ~ relative residual of w e^w = x.
    for it in range(1, _MAX_ITERS + 1):
        h = w + math.log(w) - log_x
        if abs(h) <= _REL_TOL:
            return w, it - 1, True
        hp = 1.0 + 1.0 / w
        hpp = -1.0 / (w * w)
        w -= 2.0 * h * hp / (2.0 * hp * hp - h * hpp)
        h = w + math.log(w) - log_x
        if abs(h) <= _REL_TOL:
            return w, it, True
    return w, _MAX_ITERS, abs(h) <= _REL_TOL


def _w0(x: float) -> tuple[float, int, bool]:
    if x == 0.0:
        return 0.0, 0, True
    if x <= _E:
        guess = math.log1p(x)
    else:
        lx = math.log(x)
        guess = lx - math.log(lx)
    return _halley_we(x, guess)


def _w0_exp(log_x: float) -> tuple[float, int, bool]:
    if log_x == -math.inf:
        return 0.0, 0, True
    if log_x <= _LOG_DELEGATE_MAX:
        return _w0(math.exp(log_x))
    guess = log_x - math.log(log_x)
    return _halley_log(log_x, guess)


def lambert_w0(x: float) -> LambertWResult:
    """Solve w * exp(w) = x for the principal branch, x >= 0.

    Parameters
    ----------
    x : float
        Nonnegative, finite argument.

    Returns
    -------
    LambertWResult
        value with residual |w e^w - x| <= 1e-12 * max(1, x), the Halley
        iteration count, and a convergence flag.
    """
    x = float(x)
    if not math.isfinite(x) or x < 0.0:
        raise DomainError(f"lambert_w0 requires finite x >= 0, got {x!r}")
    return LambertWResult(*_w0(x))


def lambert_w0_exp(log_x: float) -> LambertWResult:
    """Solve w + log w = log_x, i.e. W0(exp(log_x)) without forming exp(log_x).

    Accepts any finite log_x (and -inf, which maps to 0).  Agrees with
    lambert_w0(exp(log_x)) wherever the exponential is representable.
    """
    log_x = float(log_x)
    if math.isnan(log_x) or log_x == math.inf:
        raise DomainError(f"lambert_w0_exp requires log_x < inf, got {log_x!r}")
    return LambertWResult(*_w0_exp(log_x))


def w0_exp_value(log_x: float) -> float:
    """Bare-float fast path for inner loops; same math as lambert_w0_exp."""
    if math.isnan(log_x):
        raise DomainError("lambert_w0_exp received nan")
    return _w0_exp(log_x)[0]
