"""Scalar solvers: safeguarded Newton/bisection and golden-section search."""

import math

from .errors import ConvergenceError

MAX_ITER = 200
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def expand_bracket(f, lo, hi, step=4.0, max_expand=60):
    """Widen ``[lo, hi]`` outwards until ``f`` changes sign.

    ``f`` must be increasing. Returns ``(lo, hi, f(lo), f(hi))``.
    """
    flo, fhi = f(lo), f(hi)
    for _ in range(max_expand):
        if flo <= 0.0 <= fhi:
            return lo, hi, flo, fhi
        if flo > 0.0:
            lo, hi, fhi = lo - step * (hi - lo), lo, flo
            flo = f(lo)
        else:
            lo, hi, flo = hi, hi + step * (hi - lo), fhi
            fhi = f(hi)
    raise ConvergenceError(f"could not bracket a root starting from [{lo}, {hi}]")


def newton_bisect(f, df, lo, hi, xtol=1e-13, max_iter=MAX_ITER):
    """Root of an increasing function ``f`` on a sign-changing bracket.

    Newton steps are taken from the midpoint estimate and rejected in favour
    of bisection whenever they leave the current bracket.
    """
    lo, hi, flo, fhi = expand_bracket(f, lo, hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fx = f(x)
        if fx == 0.0:
            return x
        if fx < 0.0:
            lo = x
        else:
            hi = x
        d = df(x)
        x_new = x - fx / d if d > 0.0 else lo - 1.0
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= xtol * max(1.0, abs(x_new)) or hi - lo <= xtol * max(1.0, abs(x_new)):
            return x_new
        x = x_new
    raise ConvergenceError(f"no convergence after {max_iter} iterations (bracket [{lo}, {hi}])")


def golden_section(f, lo, hi, xtol=1e-9, max_iter=MAX_ITER):
    """Minimiser of a unimodal ``f`` on ``[lo, hi]``. Returns ``(x, f(x))``."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= xtol:
            x = 0.5 * (a + b)
            return x, f(x)
        # ties move toward the lower end
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    raise ConvergenceError(f"golden-section search did not converge on [{lo}, {hi}]")
