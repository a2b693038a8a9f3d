"""Bracketed scalar root finding (Brent's method).

Classic Brent: bisection safeguarded by secant / inverse quadratic
interpolation.  Hand-rolled rather than wrapped so the iteration count is
ours to report; the proximal solver asserts a budget on it.
"""

import math

from .errors import SolverError

_EPS = 2.220446049250313e-16


def brent(f, a: float, b: float, xtol: float = 1e-10, max_iters: int = 200):
    """Find a root of f in [a, b]; f(a) and f(b) must straddle zero.

    Returns (root, iterations) where iterations counts function
    evaluations after the two endpoint evaluations.  Terminates when the
    bracket half-width falls below 2*eps*|b| + xtol.
    """
    fa = f(a)
    fb = f(b)
    if fa == 0.0:
        return a, 0
    if fb == 0.0:
        return b, 0
    if (fa > 0.0) == (fb > 0.0):
        raise SolverError(
            f"brent: no sign change on [{a!r}, {b!r}] (f: {fa!r}, {fb!r})")

    c, fc = a, fa
    e = d = b - a
    iters = 0
    while iters < max_iters:
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol = 2.0 * _EPS * abs(b) + xtol
        m = 0.5 * (c - b)
        if abs(m) <= tol or fb == 0.0:
            return b, iters
        if abs(e) < tol or abs(fa) <= abs(fb):
            # interpolation making no progress: bisect
            e = d = m
        else:
            s = fb / fa
            if a == c:
                p = 2.0 * m * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0.0:
                q = -q
            else:
                p = -p
            s, e = e, d
            if 2.0 * p < 3.0 * m * q - abs(tol * q) and p < abs(0.5 * s * q):
                d = p / q
            else:
                e = d = m
        a, fa = b, fb
        if abs(d) > tol:
            b += d
        elif m > 0.0:
            b += tol
        else:
            b -= tol
        fb = f(b)
        iters += 1
        if (fb > 0.0) == (fc > 0.0):
            c, fc = a, fa
            e = d = b - a
    raise SolverError(f"brent: no convergence in {max_iters} iterations "
                      f"(bracket [{min(b, c)!r}, {max(b, c)!r}])")


def expand_to_bracket(f, x0: float, increasing: bool, step: float = 1.0,
                      max_doublings: int = 200):
    """Geometrically widen around x0 until f changes sign.

    `increasing` states the known monotonicity of f, which fixes the
    search direction from sign(f(x0)).  Returns (lo, hi, f_lo, f_hi).
    """
    f0 = f(x0)
    if f0 == 0.0:
        return x0, x0, 0.0, 0.0
    go_up = (f0 < 0.0) == increasing
    a, fa = x0, f0
    for _ in range(max_doublings):
        x = x0 + step if go_up else x0 - step
        fx = f(x)
        if fx == 0.0:
            return x, x, 0.0, 0.0
        if (fx > 0.0) != (fa > 0.0):
            return (a, x, fa, fx) if go_up else (x, a, fx, fa)
        a, fa = x, fx
        step *= 2.0
    raise SolverError(f"no sign change within {step!r} of {x0!r}")
