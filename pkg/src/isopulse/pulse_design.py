"""Pulse control function, static pulse programs and the closed-loop policy.

The pulse control function r(x, mu, tau) is the eigenfunction value at the
endpoint of a rectangular pulse. Endpoints outside the attraction basin
carry a Diverged marker; for the optimization logic a below-basin endpoint
codes as -inf (undershoot) and an above-basin endpoint as +inf.
"""
from __future__ import annotations

import math
import multiprocessing as mp
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import (IntegratorOptions, PulseInput, VectorFieldModel,
                       integrate)
from .errors import (COMPLETED, CONVERGED, DIVERGED, SIDE_ABOVE, SIDE_BELOW,
                     DomainError, InfeasibleError, ToleranceNotMetError)
from .search import bisect_root, golden_section_min
from .spectral import LaplaceOptions, SpectralData, laplace_average_s1

ACTIVATION_ISOSTABLE = "isostable_reached"
ACTIVATION_BUDGET = "budget_saturated"
ACTIVATION_BOTH = "both"


@dataclass
class PulseControlEvaluation:
    """One evaluation of the pulse control function."""

    x: np.ndarray
    mu: float
    tau: float
    p: np.ndarray
    r: Optional[float]
    status: str
    side: str
    endpoint: Optional[np.ndarray] = None
    truncation_time: float = 0.0

    @property
    def diverged(self):
        return self.status == DIVERGED

    def coded(self):
        """Finite r, or signed infinity for out-of-basin endpoints."""
        if not self.diverged:
            return self.r
        return -math.inf if self.side == SIDE_BELOW else math.inf


@dataclass
class PulseDesign:
    """Solution of the static pulse program."""

    mu: float
    tau: float
    gamma_star: float
    t_conv: float
    active_constraint: str
    epsilon: float
    budget: float
    r_value: float
    conv_ratio: float   # t_conv / tau, large means the pulse is short vs the decay

    def as_dict(self):
        return {
            "mu": self.mu,
            "tau": self.tau,
            "gamma_star": self.gamma_star,
            "t_conv": self.t_conv,
            "active_constraint": self.active_constraint,
            "epsilon": self.epsilon,
            "budget": self.budget,
            "r_value": self.r_value,
            "conv_ratio": self.conv_ratio,
        }


def r_eval(model: VectorFieldModel, p, spec: SpectralData, x, mu, tau,
           channel=0, lap_opts: Optional[LaplaceOptions] = None,
           int_opts: Optional[IntegratorOptions] = None) -> PulseControlEvaluation:
    """Eigenfunction value at the endpoint of a (mu, tau) pulse from x."""
    if mu < 0.0 or tau < 0.0:
        raise DomainError("pulse magnitude and length must be >= 0")
    x = np.asarray(x, float)
    p = np.asarray(p, float)
    if tau == 0.0:
        endpoint = x.copy()
    else:
        int_opts = int_opts or IntegratorOptions(rtol=1e-12, atol=1e-12)
        traj = integrate(model, x, p, PulseInput(channel, mu, tau), tau, int_opts)
        endpoint = traj.final_state
        if traj.terminal_status != COMPLETED:
            side = _side_of(model, spec, endpoint)
            return PulseControlEvaluation(x, mu, tau, p, None, DIVERGED, side,
                                          endpoint)
    sample = laplace_average_s1(model, p, spec, endpoint, lap_opts)
    return PulseControlEvaluation(x, mu, tau, p, sample.value, sample.status,
                                  sample.side, endpoint, sample.truncation_time)


def _side_of(model, spec, y):
    from .spectral import _order_side
    return _order_side(model, y, spec.x_star)


# ---------------------------------------------------------------------------
# Grids of r over (mu, tau)

@dataclass
class RField:
    """r sampled on a (mu, tau) grid; values are nan where diverged."""

    mu_values: np.ndarray
    tau_values: np.ndarray
    r: np.ndarray        # shape (n_mu, n_tau)
    status: np.ndarray   # strings
    side: np.ndarray     # strings

    def coded(self):
        out = self.r.copy()
        div = self.status == DIVERGED
        out[div & (self.side == SIDE_BELOW)] = -np.inf
        out[div & (self.side != SIDE_BELOW)] = np.inf
        return out


def _r_column(model, p, spec, x, mu, taus, channel, lap_opts, int_opts):
    """All pulse endpoints for one magnitude from a single forced run.

    The pulse endpoint at length tau equals the constantly forced flow at
    time tau, so one dense integration serves the whole column.
    """
    taus = np.asarray(taus, float)
    t_top = float(taus.max())
    vals = np.full(taus.size, np.nan)
    stats = np.empty(taus.size, object)
    sides = np.empty(taus.size, object)
    exit_state = x
    if t_top == 0.0:
        endpoints = [x.copy() for _ in taus]
    else:
        traj = integrate(model, x, p, PulseInput(channel, mu, t_top), t_top,
                         int_opts or IntegratorOptions(rtol=1e-12, atol=1e-12))
        t_ok = traj.final_time if traj.terminal_status != COMPLETED else t_top
        endpoints = []
        for tau in taus:
            if tau <= t_ok:
                endpoints.append(traj.state_at(tau))
            else:
                endpoints.append(None)  # ran out of the domain
        exit_state = traj.final_state
    for k, tau in enumerate(taus):
        ep = endpoints[k]
        if ep is None:
            stats[k] = DIVERGED
            sides[k] = _side_of(model, spec, exit_state)
            continue
        sample = laplace_average_s1(model, p, spec, ep, lap_opts)
        stats[k] = sample.status
        sides[k] = sample.side
        if sample.status == CONVERGED:
            vals[k] = sample.value
    return vals, stats, sides


_POOL: dict = {}


def _col_init(model, p, spec, x, taus, channel, lap_opts, int_opts):
    _POOL.update(model=model, p=p, spec=spec, x=x, taus=taus, channel=channel,
                 lap_opts=lap_opts, int_opts=int_opts)


def _col_eval(mu):
    st = _POOL
    return _r_column(st["model"], st["p"], st["spec"], st["x"], mu,
                     st["taus"], st["channel"], st["lap_opts"], st["int_opts"])


def r_field(model, p, spec, x, mu_values, tau_values, channel=0,
            lap_opts=None, int_opts=None, workers=1) -> RField:
    """Evaluate r on the tensor grid mu_values x tau_values."""
    x = np.asarray(x, float)
    mu_values = np.asarray(mu_values, float)
    tau_values = np.asarray(tau_values, float)
    if workers > 1:
        ctx = mp.get_context("fork")
        with ctx.Pool(workers, initializer=_col_init,
                      initargs=(model, p, spec, x, tau_values, channel,
                                lap_opts, int_opts)) as pool:
            cols = pool.map(_col_eval, list(mu_values))
    else:
        _col_init(model, p, spec, x, tau_values, channel, lap_opts, int_opts)
        cols = [_col_eval(mu) for mu in mu_values]
    r = np.stack([c[0] for c in cols])
    status = np.stack([c[1] for c in cols])
    side = np.stack([c[2] for c in cols])
    return RField(mu_values, tau_values, r, status, side)


# ---------------------------------------------------------------------------
# Static program

def convergence_time(r_value, lambda1, epsilon):
    """Unforced decay time from level |r| down to the target level."""
    if epsilon <= 0.0:
        raise DomainError("epsilon must be positive")
    if lambda1 >= 0.0:
        raise DomainError("lambda1 must be negative")
    if not (r_value <= -epsilon):
        raise DomainError("r must lie at or beyond the target level")
    return float(math.log(abs(r_value) / epsilon) / abs(lambda1))


def solve_static_program(model, p, spec, x, epsilon, e_max, channel=0,
                         bracket=None, n_scan=33, r_tol=1e-7,
                         lap_opts=None, int_opts=None) -> PulseDesign:
    """Minimum-time pulse to the -epsilon isostable under a fuel budget.

    The objective log|r| + |lambda1| tau decreases in both pulse
    parameters, so the optimum sits where a constraint activates. The
    search runs along the budget hyperbola mu = e_max / tau:

    * a sign change of r + epsilon there is the frontier/budget
      intersection (both constraints active, located by bisection);
    * r + epsilon < 0 throughout means the budget alone binds and the
      one-dimensional objective along the hyperbola is minimized by
      golden section;
    * r + epsilon > 0 throughout means the budget never binds; the
      cheapest admissible pulse sits on the frontier at the shortest
      length, located by bisection in mu.
    """
    if epsilon <= 0.0 or e_max <= 0.0:
        raise DomainError("epsilon and the budget must be positive")
    x = np.asarray(x, float)
    lam = abs(spec.lambda1)
    if bracket is None:
        bracket = (1e-3, 50.0 / lam)
    tau_lo, tau_hi = bracket

    start = laplace_average_s1(model, p, spec, x, lap_opts)
    if start.status == CONVERGED and start.value >= -epsilon:
        raise DomainError("start must lie strictly below the target level")
    if start.status == DIVERGED and start.side == SIDE_ABOVE:
        raise DomainError("start lies above the attraction basin")

    cache: dict = {}

    def ev(mu, tau):
        key = (round(mu, 12), round(tau, 12))
        if key not in cache:
            cache[key] = r_eval(model, p, spec, x, mu, tau, channel,
                                lap_opts, int_opts)
        return cache[key]

    def h_on_hyperbola(tau):
        return ev(e_max / tau, tau).coded() + epsilon

    taus = np.geomspace(tau_lo, tau_hi, n_scan)
    hs = np.array([h_on_hyperbola(t) for t in taus])

    sign_change = None
    for k in range(len(taus) - 1):
        if (hs[k] > 0.0) != (hs[k + 1] > 0.0):
            sign_change = k
            break

    if sign_change is not None:
        tau_star, h_star = bisect_root(h_on_hyperbola, taus[sign_change],
                                       taus[sign_change + 1],
                                       x_tol=1e-12, f_tol=r_tol)
        if abs(h_star) > 1e-6 and not math.isfinite(h_star):
            raise ToleranceNotMetError(
                "could not localize the frontier on the budget hyperbola")
        mu_star = e_max / tau_star
        r_star = ev(mu_star, tau_star).coded()
        active = ACTIVATION_BOTH
    elif np.all(hs < 0.0):
        finite = [k for k in range(len(taus)) if math.isfinite(hs[k])]
        if not finite:
            raise InfeasibleError(
                "every probed pulse on the budget hyperbola leaves the basin")

        def objective(tau):
            val = ev(e_max / tau, tau).coded()
            if not math.isfinite(val) or val > -epsilon:
                return math.inf
            return math.log(abs(val)) + lam * tau

        objs = [objective(t) for t in taus]
        k_best = int(np.argmin(objs))
        lo = taus[max(0, k_best - 1)]
        hi = taus[min(len(taus) - 1, k_best + 1)]
        tau_star, _ = golden_section_min(objective, lo, hi, x_tol=1e-9)
        if not math.isfinite(objective(tau_star)):
            tau_star = taus[k_best]
        mu_star = e_max / tau_star
        r_star = ev(mu_star, tau_star).coded()
        active = ACTIVATION_BUDGET
    else:
        # overshoot everywhere on the hyperbola: budget is slack and the
        # frontier is the only active constraint; shortest pulse wins
        tau_star = tau_lo

        def h_mu(mu):
            return ev(mu, tau_star).coded() + epsilon

        if h_mu(0.0) >= 0.0:
            raise InfeasibleError("frontier unreachable at the shortest length")
        mu_star, h_star = bisect_root(h_mu, 0.0, e_max / tau_star,
                                      x_tol=1e-14, f_tol=r_tol)
        r_star = ev(mu_star, tau_star).coded()
        active = (ACTIVATION_BOTH
                  if abs(mu_star * tau_star - e_max) <= 1e-9
                  else ACTIVATION_ISOSTABLE)

    if active != ACTIVATION_BUDGET and abs(r_star + epsilon) <= 1e-6:
        r_star = -epsilon  # frontier designs sit numerically on the level
    if not math.isfinite(r_star) or r_star > -epsilon + 1e-6:
        raise ToleranceNotMetError(
            f"solution violates the level constraint: r={r_star:.3e}")
    gamma = math.log(abs(r_star)) + lam * tau_star
    t_conv = (gamma - math.log(epsilon)) / lam
    return PulseDesign(float(mu_star), float(tau_star), gamma, t_conv, active,
                       epsilon, e_max, float(r_star),
                       t_conv / tau_star if tau_star > 0 else math.inf)


# ---------------------------------------------------------------------------
# Closed-loop policy

class ClosedLoopPolicy:
    """State feedback: full magnitude below the trigger level, zero above.

    Eigenfunction queries are memoized on a 1e-9 state grid. Below-basin
    query points count as arbitrarily low level (the pulse stays on);
    above-basin or unclassifiable points switch the input off and are
    recorded in flagged_events.
    """

    def __init__(self, model, p, spec, mu, beta, channel=0, lap_opts=None):
        if mu <= 0.0:
            raise DomainError("policy magnitude must be positive")
        self.model = model
        self.p = np.asarray(p, float)
        self.spec = spec
        self.mu = mu
        self.beta = beta
        self.channel = channel
        self.lap_opts = lap_opts
        self.flagged_events: list = []
        self._cache: dict = {}

    def s1(self, x):
        key = tuple(np.round(np.asarray(x, float) / 1e-9).astype(np.int64))
        if key not in self._cache:
            self._cache[key] = laplace_average_s1(self.model, self.p,
                                                  self.spec, x, self.lap_opts)
        return self._cache[key]

    def __call__(self, x):
        u = np.zeros(self.model.input_dim)
        sample = self.s1(x)
        if sample.status == DIVERGED:
            if sample.side == SIDE_BELOW:
                u[self.channel] = self.mu
            else:
                self.flagged_events.append(np.asarray(x, float))
            return u
        if sample.value < self.beta:
            u[self.channel] = self.mu
        return u


def closed_loop_policy(model, p, spec, mu, beta, channel=0,
                       lap_opts=None) -> ClosedLoopPolicy:
    return ClosedLoopPolicy(model, p, spec, mu, beta, channel, lap_opts)


def run_closed_loop(model, p, spec, policy: ClosedLoopPolicy, x0, t_end,
                    int_opts=None, t_tol=1e-6):
    """Simulate under the closed-loop policy.

    The level crossing is an event: the input is constant until the policy
    flips at a step endpoint, the switch time is then localized on the
    dense output, and the run continues with the input off. Returns
    (trajectory, switch_time); switch_time is None if the policy never
    switched.
    """
    from .dynamics import Trajectory
    from .rk45 import Dopri5, bisect_crossing

    int_opts = int_opts or IntegratorOptions(rtol=1e-10, atol=1e-10)
    x0 = np.asarray(x0, float)
    u_on = policy(x0)
    if u_on[policy.channel] == 0.0:
        traj = integrate(model, x0, p, None, t_end, int_opts)
        return traj, None

    rhs_on = lambda t, y: model.f(y, p, u_on)
    stepper = Dopri5(rhs_on, 0.0, x0, rtol=int_opts.rtol, atol=int_opts.atol)
    times, states, inputs, segs = [0.0], [x0.copy()], [u_on.copy()], []
    t_switch = None
    while stepper.t < t_end - 1e-12:
        seg = stepper.step(t_end)
        segs.append(seg)
        times.append(stepper.t)
        states.append(stepper.y.copy())
        inputs.append(u_on.copy())
        if policy(stepper.y)[policy.channel] == 0.0:
            level = lambda y: (policy.s1(y).value if policy.s1(y).status == CONVERGED
                               else -np.inf) - policy.beta
            t_switch = bisect_crossing(seg, level, seg.t0, seg.t1, t_tol)
            x_switch = seg.eval(t_switch)
            times[-1] = t_switch
            states[-1] = x_switch
            inputs[-1] = np.zeros(model.input_dim)
            break
    if t_switch is None:
        return Trajectory(times, states, inputs, COMPLETED, segs), None

    tail = integrate(model, x_switch, p, None, t_end - t_switch, int_opts)
    for k in range(1, len(tail.times)):
        times.append(t_switch + tail.times[k])
        states.append(tail.states[k])
        inputs.append(np.zeros(model.input_dim))
    segs.extend(_shift_segments(tail, t_switch))
    return Trajectory(times, states, inputs, tail.terminal_status, segs), t_switch


def _shift_segments(traj, dt):
    from .rk45 import DenseSegment
    out = []
    for s in traj._segments:
        out.append(DenseSegment(s.t0 + dt, s.h, s.y0, s.q))
    return out


# ---------------------------------------------------------------------------
# Finite-difference derivative probes

def grad_r_fd(model, p, spec, x, mu, tau, h_rel=1e-4, channel=0,
              lap_opts=None, int_opts=None):
    """Central-difference derivatives of r in (mu, tau, x).

    Raises DomainError when any stencil point leaves the domain of r.
    """
    x = np.asarray(x, float)

    def val(xx, m, t):
        e = r_eval(model, p, spec, xx, m, t, channel, lap_opts, int_opts)
        if e.diverged:
            raise DomainError("finite-difference stencil leaves dom(r)")
        return e.r

    h_mu = h_rel * (1.0 + abs(mu))
    h_tau = h_rel * (1.0 + abs(tau))
    dr_dmu = (val(x, mu + h_mu, tau) - val(x, max(mu - h_mu, 0.0), tau)) / (
        (mu + h_mu) - max(mu - h_mu, 0.0))
    dr_dtau = (val(x, mu, tau + h_tau) - val(x, mu, max(tau - h_tau, 0.0))) / (
        (tau + h_tau) - max(tau - h_tau, 0.0))
    grad_x = np.empty(x.size)
    for i in range(x.size):
        h = h_rel * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        grad_x[i] = (val(xp, mu, tau) - val(xm, mu, tau)) / (2.0 * h)
    return float(dr_dmu), float(dr_dtau), grad_x
