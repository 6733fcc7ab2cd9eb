"""Worst-case pulse analysis under interval parametric uncertainty.

For a parameter order-interval [p1, p2] the monotone flow sandwiches every
intermediate behavior between the two vertex systems, so value functions,
admissible pulse sets and convergence-time fields are computed at the two
vertices only, each with its own spectral data.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .contour import marching_squares, polyline_intersections
from .dynamics import IntegratorOptions, PulseInput, VectorFieldModel, integrate
from .errors import COMPLETED, CONVERGED, DomainError, UnreachableError
from .pulse_design import RField, r_field
from .rk45 import Dopri5, bisect_crossing
from .spectral import SpectralData, laplace_average_s1


@dataclass
class LevelSetTarget:
    """Target set {g(x) = beta} for an order-increasing scalar g."""

    g: Callable[[np.ndarray], float]
    beta: float
    name: str = "g"

    def check_increasing(self, model, points, h_rel=1e-5, slack=1e-9):
        """Sampled finite-difference gradient test in reflected coordinates."""
        signs = np.asarray(model.state_order.signs, float)
        for x in points:
            x = np.asarray(x, float)
            for i in range(x.size):
                h = h_rel * (1.0 + abs(x[i]))
                xp, xm = x.copy(), x.copy()
                xp[i] += h
                xm[i] -= h
                d = (self.g(xp) - self.g(xm)) / (2.0 * h)
                if d * signs[i] < -slack:
                    return False
        return True


def min_time_to_levelset(model: VectorFieldModel, p, target: LevelSetTarget,
                         x, mu, channel=0, spec: Optional[SpectralData] = None,
                         t_max=None, t_tol=1e-8,
                         int_opts: Optional[IntegratorOptions] = None) -> float:
    """Minimum time to reach {g = beta} with input capped at mu.

    For an increasing target the optimal input is constant: full magnitude
    when starting below the level, zero when starting above. The crossing
    is located on the integrator's dense output.
    """
    x = np.asarray(x, float)
    g0 = float(target.g(x))
    if g0 == target.beta:
        raise DomainError("start lies exactly on the target level")
    if t_max is None:
        if spec is None:
            raise ValueError("provide t_max or spectral data for its default")
        t_max = 100.0 / abs(spec.lambda1)
    int_opts = int_opts or IntegratorOptions(rtol=1e-10, atol=1e-10)

    u = np.zeros(model.input_dim)
    if g0 < target.beta:
        u[channel] = mu
    rhs = lambda t, y: model.f(y, p, u)
    level = lambda y: float(target.g(y)) - target.beta
    stepper = Dopri5(rhs, 0.0, x, rtol=int_opts.rtol, atol=int_opts.atol)
    sign0 = level(x) > 0.0
    while stepper.t < t_max:
        seg = stepper.step(t_max)
        if (level(stepper.y) > 0.0) != sign0 or level(stepper.y) == 0.0:
            return float(bisect_crossing(seg, level, seg.t0, seg.t1, t_tol))
        if not model.state_domain.contains(stepper.y):
            break
    raise UnreachableError(
        f"no crossing of {target.name}={target.beta:g} within t={t_max:g}")


def value_bounds(model, p1, p2, target, x, mu, channel=0, spec1=None,
                 spec2=None, t_max=None, int_opts=None):
    """(upper, lower) bracket of the min-time value over p in [p1, p2]."""
    if target.g(np.asarray(x, float)) >= target.beta:
        raise DomainError("value bounds require a start below the level")
    upper = min_time_to_levelset(model, p1, target, x, mu, channel, spec1,
                                 t_max, int_opts=int_opts)
    lower = min_time_to_levelset(model, p2, target, x, mu, channel, spec2,
                                 t_max, int_opts=int_opts)
    return upper, lower


# ---------------------------------------------------------------------------
# Convergence-time fields and their level sets

@dataclass
class TimeField:
    """Predicted convergence time on a (mu, tau) grid for one parameter.

    By default only the approach side of the frontier (r < 0) is kept,
    where the level-set reading of the time field is the one that orders
    across parameters. include_overshoot=True keeps the magnitude reading
    |r| on the far side of the fold as well; those branches are where the
    vertex level sets can tangle at coarse target levels.
    """

    mu_values: np.ndarray
    tau_values: np.ndarray
    values: np.ndarray      # nan where masked
    epsilon: float
    lambda1: float

    @classmethod
    def from_r_field(cls, rf: RField, epsilon, lambda1,
                     include_overshoot=False):
        T = np.full(rf.r.shape, np.nan)
        ok = np.isfinite(rf.r)
        if not include_overshoot:
            ok &= rf.r < 0.0
        T[ok] = np.log(np.abs(rf.r[ok]) / epsilon) / abs(lambda1)
        return cls(rf.mu_values, rf.tau_values, T, epsilon, lambda1)

    def contours(self, sigma):
        return marching_squares(self.mu_values, self.tau_values, self.values,
                                float(sigma), mask=~np.isfinite(self.values))


@dataclass
class IntersectionReport:
    """Crossings between two convergence-time level sets."""

    sigma: float
    suppressed: bool
    points: list
    mu_range: Optional[tuple]

    @property
    def has_intersections(self):
        return not self.suppressed and len(self.points) > 0


def levelset_intersection_check(field1: TimeField, field2: TimeField,
                                sigma) -> IntersectionReport:
    """Report crossings of the two sigma-level sets on a shared grid.

    Identical fields produce coincident contours; that degenerate case is
    suppressed by an exact-equality guard.
    """
    if field1.values.shape != field2.values.shape or \
            not np.array_equal(field1.mu_values, field2.mu_values) or \
            not np.array_equal(field1.tau_values, field2.tau_values):
        raise ValueError("fields must share the same (mu, tau) grid")
    same = np.array_equal(np.nan_to_num(field1.values, nan=-1.0),
                          np.nan_to_num(field2.values, nan=-1.0))
    if same:
        return IntersectionReport(float(sigma), True, [], None)
    lines1 = field1.contours(sigma)
    lines2 = field2.contours(sigma)
    pts = []
    for a in lines1:
        for b in lines2:
            pts.extend(polyline_intersections(a, b))
    mu_range = (min(p[0] for p in pts), max(p[0] for p in pts)) if pts else None
    return IntersectionReport(float(sigma), False, pts, mu_range)


# ---------------------------------------------------------------------------
# Admissible pulse sets and the order-interval target

@dataclass
class UncertaintyEnvelope:
    """Admissible (mu, tau) samples and the target order-interval corners."""

    p1: np.ndarray
    p2: np.ndarray
    spec1: SpectralData
    spec2: SpectralData
    epsilon: float
    sigma: float
    mu_values: np.ndarray
    tau_values: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    member: np.ndarray        # bool mask on the grid
    diverged: np.ndarray      # bool mask: excluded because either r diverged
    threshold1: float
    threshold2: float
    z1: np.ndarray
    z2: np.ndarray
    order_bounded: bool

    def members(self):
        idx = np.argwhere(self.member)
        return [(float(self.mu_values[i]), float(self.tau_values[j]))
                for i, j in idx]


def isostable_ray_point(model, p, spec, epsilon, side=-1, lap_opts=None):
    """Point of the epsilon-isostable on the dominant ray from x*.

    side -1 selects the negative branch (x* - c v1). Below the numerical
    resolution of the eigenfunction the linear parameterization s1 = -c is
    exact to O(c^2) and is used directly.
    """
    if epsilon <= 0.0:
        raise DomainError("epsilon must be positive")
    if epsilon < 1e-6:
        # below the eigenfunction's numerical resolution the linear
        # parameterization s1(x* + side*c*v1) = side*c is exact to O(c^2)
        return spec.x_star + side * epsilon * spec.v1

    def m(c):
        s = laplace_average_s1(model, p, spec, spec.x_star + side * c * spec.v1,
                               lap_opts)
        if s.status != CONVERGED:
            return math.inf  # walked out of the basin: past the level
        return side * s.value - epsilon

    hi = 2.0 * epsilon
    while m(hi) < 0.0 and hi < 64.0 * epsilon:
        hi *= 2.0
    from .search import bisect_root
    try:
        c_star, _ = bisect_root(m, 0.0, hi, x_tol=1e-9 * (1.0 + epsilon))
    except ValueError:
        c_star = epsilon
    return spec.x_star + side * c_star * spec.v1


def admissible_set(model, p1, p2, x, epsilon, sigma, mu_values, tau_values,
                   spec1: SpectralData, spec2: SpectralData, channel=0,
                   lap_opts=None, int_opts=None, workers=1) -> UncertaintyEnvelope:
    """Grid membership in the robust pulse set for p in [p1, p2].

    A pulse belongs to the band between the two sigma-level sets of the
    vertex convergence-time fields: the fast vertex p2 has already passed
    its mark, r(p2) >= -eps * e^{|lambda1(p2)| sigma}, while the slow
    vertex p1 has not, r(p1) <= -eps * e^{|lambda1(p1)| sigma}. Each
    vertex uses its own spectral data. After the pulse plus a settle time
    sigma the flow for any interior parameter then satisfies the vertex
    eigenfunction bounds down to the e^{-|lambda1| sigma} scale and lands
    in the order interval [z1, z2]. Level-set crossings between the two
    fields withdraw the order-bounding guarantee.
    """
    if epsilon <= 0.0:
        raise DomainError("epsilon must be positive")
    if sigma < 0.0:
        raise DomainError("sigma must be nonnegative")
    if not model.param_order.leq(p1, p2):
        raise DomainError("p1 must precede p2 in the parameter order")
    rf1 = r_field(model, p1, spec1, x, mu_values, tau_values, channel,
                  lap_opts, int_opts, workers)
    rf2 = r_field(model, p2, spec2, x, mu_values, tau_values, channel,
                  lap_opts, int_opts, workers)
    thr1 = -epsilon * math.exp(abs(spec1.lambda1) * sigma)
    thr2 = -epsilon * math.exp(abs(spec2.lambda1) * sigma)
    fin = np.isfinite(rf1.r) & np.isfinite(rf2.r)
    member = fin & (rf1.r <= thr1) & (rf2.r >= thr2)
    diverged = ~np.isfinite(rf1.r) | ~np.isfinite(rf2.r)

    z1 = isostable_ray_point(model, p1, spec1, epsilon, side=-1,
                             lap_opts=lap_opts)
    z2 = isostable_ray_point(model, p2, spec2, epsilon, side=-1,
                             lap_opts=lap_opts)
    tf1 = TimeField.from_r_field(rf1, epsilon, spec1.lambda1)
    tf2 = TimeField.from_r_field(rf2, epsilon, spec2.lambda1)
    try:
        report = levelset_intersection_check(tf1, tf2, sigma)
        order_bounded = not report.has_intersections
    except ValueError:
        order_bounded = True
    return UncertaintyEnvelope(np.asarray(p1, float), np.asarray(p2, float),
                               spec1, spec2, epsilon, sigma,
                               np.asarray(mu_values, float),
                               np.asarray(tau_values, float),
                               rf1.r, rf2.r, member, diverged, thr1, thr2,
                               z1, z2, order_bounded)


@dataclass
class MembershipRow:
    p: np.ndarray
    endpoint: np.ndarray
    s1_at_p1: Optional[float]
    s1_at_p2: Optional[float]
    ineq1_slack: float    # s1(endpoint, p1) + epsilon, must be >= 0
    ineq2_slack: float    # -epsilon - s1(endpoint, p2), must be >= 0
    box_slack: float      # min order margin inside [z1, z2]
    ok: bool


@dataclass
class MembershipReport:
    rows: list
    slack: float

    @property
    def all_ok(self):
        return all(r.ok for r in self.rows)


def verify_membership(model, p_samples, x, mu, tau, sigma, epsilon,
                      envelope: UncertaintyEnvelope, channel=0, slack=1e-6,
                      lap_opts=None, int_opts=None) -> MembershipReport:
    """Simulate the pulse at sampled parameters and test the target bounds.

    The flow at time tau + sigma must satisfy both vertex eigenfunction
    inequalities and land in the order interval [z1, z2].
    """
    x = np.asarray(x, float)
    int_opts = int_opts or IntegratorOptions(rtol=1e-12, atol=1e-12)
    rows = []
    refl = model.state_order.reflect
    for p in p_samples:
        p = np.asarray(p, float)
        traj = integrate(model, x, p, PulseInput(channel, mu, tau),
                         tau + sigma, int_opts)
        endpoint = traj.final_state
        s_p1 = laplace_average_s1(model, envelope.p1, envelope.spec1, endpoint,
                                  lap_opts)
        s_p2 = laplace_average_s1(model, envelope.p2, envelope.spec2, endpoint,
                                  lap_opts)
        v1 = s_p1.value if s_p1.status == CONVERGED else None
        v2 = s_p2.value if s_p2.status == CONVERGED else None
        ineq1 = (v1 + epsilon) if v1 is not None else -math.inf
        ineq2 = (-epsilon - v2) if v2 is not None else -math.inf
        lo_margin = float(np.min(refl(endpoint) - refl(envelope.z1)))
        hi_margin = float(np.min(refl(envelope.z2) - refl(endpoint)))
        box_slack = min(lo_margin, hi_margin)
        ok = (traj.terminal_status == COMPLETED and ineq1 >= -slack
              and ineq2 >= -slack and box_slack >= -slack)
        rows.append(MembershipRow(p, endpoint, v1, v2, ineq1, ineq2,
                                  box_slack, ok))
    return MembershipReport(rows, slack)
