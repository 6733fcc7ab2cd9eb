"""One-dimensional root and minimum search used by the pulse solvers."""
from __future__ import annotations

import math

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def bisect_root(h, lo, hi, x_tol, f_tol=0.0, max_iter=200):
    """Bisection for a sign change of h on [lo, hi].

    h may return -inf/+inf (coded infeasible sides are fine). Stops when
    the bracket is narrower than x_tol or |h| <= f_tol at the midpoint.
    Returns (x, h(x)) for the best midpoint seen.
    """
    h_lo = h(lo)
    h_hi = h(hi)
    if h_lo == 0.0:
        return lo, 0.0
    if h_hi == 0.0:
        return hi, 0.0
    if (h_lo > 0.0) == (h_hi > 0.0):
        raise ValueError("no sign change on the bracket")
    x_best, h_best = (lo, h_lo) if abs(h_lo) < abs(h_hi) else (hi, h_hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        h_mid = h(mid)
        if math.isfinite(h_mid) and abs(h_mid) < abs(h_best):
            x_best, h_best = mid, h_mid
        if f_tol > 0.0 and abs(h_mid) <= f_tol:
            return mid, h_mid
        if (h_mid > 0.0) == (h_lo > 0.0):
            lo, h_lo = mid, h_mid
        else:
            hi, h_hi = mid, h_mid
        if hi - lo <= x_tol:
            break
    return x_best, h_best


def golden_section_min(f, lo, hi, x_tol=1e-8, max_iter=200):
    """Golden-section minimum of a unimodal f on [lo, hi].

    Non-finite values are treated as +inf so the probe interval shrinks
    away from infeasible edges. Returns (x_min, f(x_min)).
    """

    def val(x):
        v = f(x)
        return v if math.isfinite(v) else math.inf

    a, b = lo, hi
    c = b - (b - a) * _INV_PHI
    d = a + (b - a) * _INV_PHI
    fc, fd = val(c), val(d)
    for _ in range(max_iter):
        if abs(b - a) <= x_tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - (b - a) * _INV_PHI
            fc = val(c)
        else:
            a, c, fc = c, d, fd
            d = a + (b - a) * _INV_PHI
            fd = val(d)
    x = c if fc < fd else d
    return x, min(fc, fd)
