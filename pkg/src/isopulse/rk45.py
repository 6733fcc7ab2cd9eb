"""Adaptive Dormand-Prince 5(4) integrator with dense output.

Self-contained explicit Runge-Kutta pair; no external solver dependency.
The dense interpolant is the standard quartic used with this tableau, so
states can be queried at arbitrary times inside any accepted step.
"""
from __future__ import annotations

import numpy as np

from .errors import StepFailureError

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = (
    np.array([], float),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
)
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# difference between the 5th and the embedded 4th order weights
_E = np.array([
    35 / 384 - 5179 / 57600,
    0.0,
    500 / 1113 - 7571 / 16695,
    125 / 192 - 393 / 640,
    -2187 / 6784 + 92097 / 339200,
    11 / 84 - 187 / 2100,
    -1 / 40,
])
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

MIN_STEP = 1e-12


class DenseSegment:
    """Polynomial interpolant over one accepted step [t0, t1]."""

    __slots__ = ("t0", "t1", "h", "y0", "q")

    def __init__(self, t0, h, y0, q):
        self.t0 = t0
        self.t1 = t0 + h
        self.h = h
        self.y0 = y0
        self.q = q  # (n, 4) interpolation coefficients

    def eval(self, t):
        s = (t - self.t0) / self.h
        sv = np.array([s, s * s, s ** 3, s ** 4])
        return self.y0 + self.h * (self.q @ sv)


class Dopri5:
    """Step-by-step driver; callers own the loop and may stop at events."""

    def __init__(self, f, t0, y0, rtol=1e-9, atol=1e-9, max_step=np.inf,
                 min_step=MIN_STEP, first_step=None):
        self.f = f
        self.t = float(t0)
        self.y = np.array(y0, dtype=float)
        self.rtol = rtol
        self.atol = atol
        self.max_step = max_step
        self.min_step = min_step
        self.k_last = np.asarray(f(self.t, self.y), float)
        self.h = first_step if first_step is not None else self._initial_step()
        self.nsteps = 0

    def _initial_step(self):
        scale = self.atol + np.abs(self.y) * self.rtol
        d0 = np.sqrt(np.mean((self.y / scale) ** 2))
        d1 = np.sqrt(np.mean((self.k_last / scale) ** 2))
        h0 = 1e-6 if d1 < 1e-5 else 0.01 * d0 / max(d1, 1e-300)
        return min(max(h0, 1e-10), self.max_step)

    def step(self, t_bound):
        """Advance one accepted step, never past t_bound.

        Returns the DenseSegment covering the step. Raises StepFailureError
        when error control pushes the step below min_step.
        """
        f = self.f
        t, y = self.t, self.y
        k = np.empty((7, y.size))
        k[0] = self.k_last
        h = min(self.h, self.max_step, t_bound - t)
        if h <= 0:
            raise ValueError("step() called at or past t_bound")
        while True:
            for i in range(1, 6):
                k[i] = f(t + _C[i] * h, y + h * (_A[i] @ k[:i]))
            y_new = y + h * (_B @ k[:6])
            k[6] = f(t + h, y_new)
            scale = self.atol + np.maximum(np.abs(y), np.abs(y_new)) * self.rtol
            err = np.sqrt(np.mean(((h * (_E @ k)) / scale) ** 2))
            if err <= 1.0:
                break
            h *= max(0.2, 0.9 * err ** -0.2)
            if h < self.min_step:
                raise StepFailureError(
                    f"step size {h:.3e} below minimum at t={t:.6g}")
        grow = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        self.h = min(max(h * grow, self.min_step), self.max_step)
        seg = DenseSegment(t, h, y, k.T @ _P)
        self.t = t + h
        self.y = y_new
        self.k_last = k[6]
        self.nsteps += 1
        return seg


def bisect_crossing(seg, g, t_lo, t_hi, t_tol=1e-10):
    """Locate a sign change of g(state) inside one dense segment.

    Assumes g(seg.eval(t_lo)) and g(seg.eval(t_hi)) have opposite signs
    (zero counts with its side). Returns the crossing time.
    """
    g_lo = g(seg.eval(t_lo))
    for _ in range(200):
        if t_hi - t_lo <= t_tol:
            break
        t_mid = 0.5 * (t_lo + t_hi)
        g_mid = g(seg.eval(t_mid))
        if (g_mid > 0.0) == (g_lo > 0.0):
            t_lo, g_lo = t_mid, g_mid
        else:
            t_hi = t_mid
    return 0.5 * (t_lo + t_hi)
