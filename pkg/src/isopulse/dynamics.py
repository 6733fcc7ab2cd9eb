"""Models, orthant partial orders, pulse inputs and the numerical flow map.

The built-in bistable two-gene circuit (mutual repression with Hill
kinetics) lives here, together with a sampled vector-field monotonicity
check used as a numerical stand-in for a symbolic certificate.
"""
from __future__ import annotations

import bisect
import json
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import COMPLETED, LEFT_DOMAIN, STEP_FAILURE, StepFailureError
from .rk45 import Dopri5


@dataclass(frozen=True)
class OrthantOrder:
    """Partial order induced by a sign-reflected nonnegative orthant."""

    signs: tuple

    def __post_init__(self):
        if not all(s in (1, -1) for s in self.signs):
            raise ValueError("order signs must be +1 or -1")

    @property
    def dim(self):
        return len(self.signs)

    def reflect(self, x):
        """Map into coordinates where the order is the standard orthant."""
        return np.asarray(x, float) * np.asarray(self.signs, float)

    def leq(self, x, y, slack=0.0):
        """x <= y in the order, allowing a componentwise slack >= 0."""
        d = self.reflect(y) - self.reflect(x)
        return bool(np.all(d >= -slack))

    def ll(self, x, y):
        """Strict componentwise inequality in the order."""
        d = self.reflect(y) - self.reflect(x)
        return bool(np.all(d > 0.0))

    def interval_contains(self, lo, hi, x, slack=0.0):
        return self.leq(lo, x, slack) and self.leq(x, hi, slack)

    def meet(self, x, y):
        """Greatest lower bound of x and y in the order."""
        s = np.asarray(self.signs, float)
        return np.minimum(self.reflect(x), self.reflect(y)) * s

    def join(self, x, y):
        """Least upper bound of x and y in the order."""
        s = np.asarray(self.signs, float)
        return np.maximum(self.reflect(x), self.reflect(y)) * s


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in raw coordinates."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, float))
        object.__setattr__(self, "hi", np.asarray(self.hi, float))
        if np.any(self.lo > self.hi):
            raise ValueError("box lower corner exceeds upper corner")

    def contains(self, x, slack=0.0):
        x = np.asarray(x, float)
        return bool(np.all(x >= self.lo - slack) and np.all(x <= self.hi + slack))

    def sample(self, rng, n):
        return rng.uniform(self.lo, self.hi, size=(n, self.lo.size))

    @property
    def diameter(self):
        return float(np.linalg.norm(self.hi - self.lo))


@dataclass(frozen=True)
class VectorFieldModel:
    """Controlled vector field dx/dt = f(x, p, u) with its orders and domain."""

    name: str
    state_dim: int
    param_dim: int
    input_dim: int
    field: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    state_order: OrthantOrder
    param_order: OrthantOrder
    input_order: OrthantOrder
    state_domain: Box

    def __post_init__(self):
        if self.state_order.dim != self.state_dim:
            raise ValueError("state order dimension mismatch")
        if self.param_order.dim != self.param_dim:
            raise ValueError("parameter order dimension mismatch")
        if self.input_order.dim != self.input_dim:
            raise ValueError("input order dimension mismatch")

    def f(self, x, p, u):
        return np.asarray(self.field(x, p, u), float)

    def jacobian_x(self, x, p, u=None, h_rel=1e-6):
        """Central finite-difference state Jacobian."""
        if u is None:
            u = np.zeros(self.input_dim)
        x = np.asarray(x, float)
        J = np.empty((self.state_dim, self.state_dim))
        for j in range(self.state_dim):
            h = h_rel * (1.0 + abs(x[j]))
            xp = x.copy()
            xm = x.copy()
            xp[j] += h
            xm[j] -= h
            J[:, j] = (self.f(xp, p, u) - self.f(xm, p, u)) / (2.0 * h)
        return J

    def jacobian_p(self, x, p, u=None, h_rel=1e-6):
        if u is None:
            u = np.zeros(self.input_dim)
        p = np.asarray(p, float)
        J = np.empty((self.state_dim, self.param_dim))
        for j in range(self.param_dim):
            h = h_rel * (1.0 + abs(p[j]))
            pp = p.copy()
            pm = p.copy()
            pp[j] += h
            pm[j] -= h
            J[:, j] = (self.f(x, pp, u) - self.f(x, pm, u)) / (2.0 * h)
        return J

    def jacobian_u(self, x, p, u, h_rel=1e-6):
        u = np.asarray(u, float)
        J = np.empty((self.state_dim, self.input_dim))
        for j in range(self.input_dim):
            h = h_rel * (1.0 + abs(u[j]))
            up = u.copy()
            um = u.copy()
            up[j] += h
            um[j] -= h
            J[:, j] = (self.f(x, p, up) - self.f(x, p, um)) / (2.0 * h)
        return J


@dataclass(frozen=True)
class PulseInput:
    """Rectangular pulse: magnitude on one channel for 0 <= t <= length."""

    channel: int
    magnitude: float
    length: float

    def __post_init__(self):
        if self.magnitude < 0.0 or self.length < 0.0:
            raise ValueError("pulse magnitude and length must be >= 0")

    def vector(self, input_dim, on):
        u = np.zeros(input_dim)
        if on:
            u[self.channel] = self.magnitude
        return u

    def at(self, t, input_dim):
        # closed on the left interval: u(length) is still the magnitude
        return self.vector(input_dim, 0.0 <= t <= self.length)


def pulse_signal(pulse: PulseInput, input_dim: int = 1):
    """Time-indexed input function for a pulse (exact piecewise constant)."""

    def u(t):
        return pulse.at(t, input_dim)

    return u


@dataclass
class IntegratorOptions:
    rtol: float = 1e-9
    atol: float = 1e-9
    max_step: float = np.inf
    min_step: float = 1e-12


class Trajectory:
    """Write-once record of one integration run with dense query support."""

    def __init__(self, times, states, inputs, terminal_status, segments):
        self.times = np.asarray(times, float)
        self.states = np.asarray(states, float)
        self.inputs = np.asarray(inputs, float)
        self.terminal_status = terminal_status
        self._segments = segments
        self._seg_t0 = [s.t0 for s in segments]

    @property
    def final_state(self):
        return self.states[-1]

    @property
    def final_time(self):
        return float(self.times[-1])

    def state_at(self, t):
        """Dense-output state at any time inside the integrated span."""
        if not self._segments:
            return self.states[0].copy()
        if t <= self.times[0]:
            return self.states[0].copy()
        if t >= self.times[-1]:
            return self.states[-1].copy()
        i = bisect.bisect_right(self._seg_t0, t) - 1
        i = max(0, min(i, len(self._segments) - 1))
        return self._segments[i].eval(t)

    def sample(self, times):
        return np.array([self.state_at(t) for t in times])


def _normalize_input(inp, input_dim):
    """Return (segments, u_of_t) where segments split at discontinuities."""
    if inp is None:
        const = np.zeros(input_dim)
        return [(None, const)], lambda t: const
    if isinstance(inp, PulseInput):
        on = inp.vector(input_dim, True)
        off = inp.vector(input_dim, False)
        return [(inp.length, on), (None, off)], lambda t: inp.at(t, input_dim)
    arr = np.asarray(inp, float)
    if arr.ndim == 1 and arr.size == input_dim and not callable(inp):
        return [(None, arr)], lambda t: arr
    # arbitrary time-indexed callable; no known discontinuities
    return [(None, inp)], inp


def integrate(model: VectorFieldModel, x0, p, inp, t_end,
              opts: Optional[IntegratorOptions] = None) -> Trajectory:
    """Numerical flow map over [0, t_end] under the given input.

    A PulseInput is integrated in two exact segments split at its length so
    the discontinuity never crosses a step. The state-domain exit is
    non-fatal; the trajectory ends at the first sample outside the domain
    with terminal_status LEFT_DOMAIN.
    """
    if t_end <= 0.0:
        raise ValueError("t_end must be positive")
    x0 = np.asarray(x0, float)
    if not model.state_domain.contains(x0):
        raise ValueError("initial state outside the model domain")
    opts = opts or IntegratorOptions()
    pieces, u_of_t = _normalize_input(inp, model.input_dim)

    times = [0.0]
    states = [x0.copy()]
    segments = []
    status = COMPLETED

    t_now = 0.0
    x_now = x0
    for t_switch, u_piece in pieces:
        t_stop = t_end if t_switch is None else min(t_switch, t_end)
        if t_stop <= t_now + 1e-15:
            continue
        if callable(u_piece):
            rhs = lambda t, y: model.f(y, p, u_piece(t))
        else:
            rhs = lambda t, y, _u=u_piece: model.f(y, p, _u)
        stepper = Dopri5(rhs, t_now, x_now, rtol=opts.rtol, atol=opts.atol,
                         max_step=opts.max_step, min_step=opts.min_step)
        try:
            while stepper.t < t_stop - 1e-15:
                seg = stepper.step(t_stop)
                segments.append(seg)
                times.append(stepper.t)
                states.append(stepper.y.copy())
                if not model.state_domain.contains(stepper.y):
                    status = LEFT_DOMAIN
                    break
        except StepFailureError:
            status = STEP_FAILURE
        t_now = stepper.t
        x_now = stepper.y
        if status != COMPLETED:
            break

    inputs = np.array([np.asarray(u_of_t(t), float) for t in times])
    return Trajectory(times, states, inputs, status, segments)


# ---------------------------------------------------------------------------
# Sampled Kamke-Mueller monotonicity check

@dataclass
class MonotonicityReport:
    """Outcome of a sampled vector-field cooperativity check.

    PASS is numerical evidence (min over samples of the sign-critical
    Jacobian entries in reflected coordinates), not a proof.
    """

    passed: bool
    min_offdiag_state: float
    min_param: float
    min_input: float
    n_samples: int
    witness: Optional[dict] = None
    tolerance: float = -1e-9


def check_kamke_muller(model: VectorFieldModel, p_range, n_samples,
                       u_max=10.0, seed=0) -> MonotonicityReport:
    """Sample Jacobians in reflected coordinates and report the worst entries.

    p_range is a pair (p_a, p_b); sampling covers the componentwise
    envelope of the two corners regardless of the parameter order's signs.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    p_a, p_b = (np.asarray(v, float) for v in p_range)
    p_lo, p_hi = np.minimum(p_a, p_b), np.maximum(p_a, p_b)
    sx = np.asarray(model.state_order.signs, float)
    sp = np.asarray(model.param_order.signs, float)
    su = np.asarray(model.input_order.signs, float)

    worst = {"state": np.inf, "param": np.inf, "input": np.inf}
    witness = None
    for _ in range(n_samples):
        x = rng.uniform(model.state_domain.lo, model.state_domain.hi)
        p = rng.uniform(p_lo, p_hi)
        u = rng.uniform(0.0, u_max, size=model.input_dim)

        jx = sx[:, None] * model.jacobian_x(x, p, u) * sx[None, :]
        off = jx[~np.eye(model.state_dim, dtype=bool)]
        m_state = float(off.min()) if off.size else np.inf
        jp = sx[:, None] * model.jacobian_p(x, p, u) * sp[None, :]
        m_param = float(jp.min())
        ju = sx[:, None] * model.jacobian_u(x, p, u) * su[None, :]
        m_input = float(ju.min())

        m_here = min(m_state, m_param, m_input)
        if m_here < min(worst["state"], worst["param"], worst["input"]):
            witness = {"x": x, "p": p, "u": u, "value": m_here}
        worst["state"] = min(worst["state"], m_state)
        worst["param"] = min(worst["param"], m_param)
        worst["input"] = min(worst["input"], m_input)

    tol = -1e-9
    passed = all(v >= tol for v in worst.values())
    return MonotonicityReport(passed, worst["state"], worst["param"],
                              worst["input"], n_samples,
                              None if passed else witness, tol)


# ---------------------------------------------------------------------------
# Built-in model: two-gene mutual-repression circuit

_HILL_EXP_1 = 4.0    # repression exponent acting on gene 1
_DEGRADE_1 = 1.0     # linear degradation rate of gene 1
_HILL_EXP_2 = 3.0    # repression exponent acting on gene 2
_DEGRADE_2 = 2.0     # linear degradation rate of gene 2

TOGGLE_Q_MIN = np.array([1.8, 950.0, 1.2, 1050.0])
TOGGLE_Q_INT = np.array([2.0, 1000.0, 1.0, 1000.0])
TOGGLE_Q_MAX = np.array([2.2, 1050.0, 0.7, 950.0])


def _toggle_field(x, q, u):
    x1, x2 = x[0], x[1]
    return np.array([
        q[0] + q[1] / (1.0 + x2 ** _HILL_EXP_1) - _DEGRADE_1 * x1 + u[0],
        q[2] + q[3] / (1.0 + x1 ** _HILL_EXP_2) - _DEGRADE_2 * x2 + u[1],
    ])


def toggle_switch_model() -> VectorFieldModel:
    """Two-gene toggle circuit with free basal/repression rates q.

    q = (basal_1, repression_1, basal_2, repression_2); Hill exponents and
    degradation rates are fixed. Cooperative for the orders below on the
    nonnegative orthant.
    """
    return VectorFieldModel(
        name="toggle_switch",
        state_dim=2,
        param_dim=4,
        input_dim=2,
        field=_toggle_field,
        state_order=OrthantOrder((1, -1)),
        param_order=OrthantOrder((1, 1, -1, -1)),
        input_order=OrthantOrder((1, -1)),
        state_domain=Box(np.zeros(2), np.full(2, 2000.0)),
    )


_BUILTINS = {"toggle_switch": toggle_switch_model}


def model_to_config(model: VectorFieldModel, params=None):
    """JSON-ready description; only built-in fields can be reloaded."""
    builtin = model.name if model.name in _BUILTINS else None
    return {
        "name": model.name,
        "state_dim": model.state_dim,
        "param_dim": model.param_dim,
        "input_dim": model.input_dim,
        "orders": {
            "state": list(model.state_order.signs),
            "param": list(model.param_order.signs),
            "input": list(model.input_order.signs),
        },
        "domain": {"lo": list(model.state_domain.lo),
                   "hi": list(model.state_domain.hi)},
        "builtin": builtin,
        "params": list(np.asarray(params, float)) if params is not None else None,
    }


def model_from_config(doc) -> tuple[VectorFieldModel, Optional[np.ndarray]]:
    """Rebuild a model from its JSON document.

    Custom vector fields are not expression-parsed; anything without a
    recognized builtin tag is rejected.
    """
    builtin = doc.get("builtin")
    if builtin not in _BUILTINS:
        raise ValueError(f"config does not name a built-in vector field: {builtin!r}")
    model = _BUILTINS[builtin]()
    for key, want in (("state_dim", model.state_dim),
                      ("param_dim", model.param_dim),
                      ("input_dim", model.input_dim)):
        if key in doc and doc[key] != want:
            raise ValueError(f"config {key}={doc[key]} conflicts with builtin {builtin}")
    params = doc.get("params")
    return model, (np.asarray(params, float) if params is not None else None)


def load_model_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_config(json.load(fh))
