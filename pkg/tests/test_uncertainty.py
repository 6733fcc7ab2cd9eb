"""Value bounds, admissible pulse sets and level-set diagnostics."""
import math

import numpy as np
import pytest

import isopulse as ip
from isopulse.errors import DomainError, UnreachableError
from isopulse.uncertainty import TimeField
from conftest import make_scalar_model


@pytest.fixture(scope="module")
def coord_target():
    return ip.LevelSetTarget(lambda x: x[0] - x[1], 100.0, "x1-x2")


def test_min_time_scalar_closed_form():
    model = make_scalar_model()
    target = ip.LevelSetTarget(lambda x: x[0], 1.0, "x")
    # x(t) = 2 (1 - e^{-t}) crosses 1 at ln 2
    t = ip.min_time_to_levelset(model, [0.0], target, [0.0], 2.0, t_max=20.0)
    assert abs(t - math.log(2.0)) < 1e-6
    # start above the level: unforced decay from 2 crosses 1 at ln 2
    t2 = ip.min_time_to_levelset(model, [0.0], target, [2.0], 5.0, t_max=20.0)
    assert abs(t2 - math.log(2.0)) < 1e-6


def test_min_time_unreachable():
    model = make_scalar_model()
    target = ip.LevelSetTarget(lambda x: x[0], 10.0, "x")
    with pytest.raises(UnreachableError):
        ip.min_time_to_levelset(model, [0.0], target, [0.0], 2.0, t_max=30.0)


def test_min_time_matches_r_crossing(tg_int, toggle):
    # with the eigenfunction as target, the value agrees with the pulse
    # length solving r = beta at the same magnitude
    beta, mu = -100.0, 4.0

    def g(x):
        s = ip.laplace_average_s1(toggle, tg_int.q, tg_int.spec, x, tg_int.lap)
        return -np.inf if s.diverged else s.value

    target = ip.LevelSetTarget(g, beta, "s1")
    t_direct = ip.min_time_to_levelset(toggle, tg_int.q, target, tg_int.low,
                                       mu, spec=tg_int.spec)
    from isopulse.search import bisect_root
    h = lambda tau: ip.r_eval(toggle, tg_int.q, tg_int.spec, tg_int.low, mu,
                              tau, lap_opts=tg_int.lap).coded() - beta
    tau_cross, _ = bisect_root(h, t_direct * 0.5, t_direct * 1.5, x_tol=1e-8)
    assert abs(t_direct - tau_cross) <= 2e-2 * t_direct


def test_level_target_increasing_check(toggle):
    good = ip.LevelSetTarget(lambda x: x[0] - x[1], 0.0)
    bad = ip.LevelSetTarget(lambda x: x[0] + x[1], 0.0)
    pts = [np.array([5.0, 5.0]), np.array([100.0, 3.0])]
    assert good.check_increasing(toggle, pts)
    assert not bad.check_increasing(toggle, pts)


def test_value_bounds_degenerate(coord_target, tg_int, toggle):
    up, lo = ip.value_bounds(toggle, tg_int.q, tg_int.q, coord_target,
                             tg_int.low, 5.0, spec1=tg_int.spec,
                             spec2=tg_int.spec)
    assert abs(up - lo) < 1e-8


def test_value_bounds_sandwich(coord_target, toggle, tg_min, tg_int, tg_max):
    rng = np.random.default_rng(2)
    for _ in range(5):
        w = rng.uniform(0.0, 1.0)
        q = (1 - w) * ip.TOGGLE_Q_MIN + w * ip.TOGGLE_Q_MAX
        mu = rng.uniform(3.0, 6.0)
        up, lo = ip.value_bounds(toggle, ip.TOGGLE_Q_MIN, ip.TOGGLE_Q_MAX,
                                 coord_target, tg_int.low, mu,
                                 spec1=tg_min.spec, spec2=tg_max.spec)
        mid = ip.min_time_to_levelset(toggle, q, coord_target, tg_int.low, mu,
                                      spec=tg_int.spec)
        assert lo - 1e-6 * up <= mid <= up + 1e-6 * up


def test_value_ordering_prop(toggle, tg_min, tg_max):
    # premise z >= y, mu >= nu, p2 >= p1, alpha <= beta implies
    # V(z, mu, alpha, p2) <= V(y, nu, beta, p1)
    rng = np.random.default_rng(9)
    order = toggle.state_order
    count = 0
    while count < 10:
        y = np.array([2.0 + rng.uniform(0, 2), 50.0 + rng.uniform(0, 10)])
        z = np.clip(y + rng.uniform(0, 3, 2) * np.array([1.0, -1.0]), 0.0, None)
        nu = rng.uniform(3.0, 5.0)
        mu = nu + rng.uniform(0.0, 2.0)
        beta = rng.uniform(50.0, 300.0)
        alpha = beta - rng.uniform(0.0, 40.0)
        g = lambda x: x[0] - x[1]
        if max(g(z), g(y)) >= min(alpha, beta):
            continue
        t_fast = ip.min_time_to_levelset(
            toggle, ip.TOGGLE_Q_MAX, ip.LevelSetTarget(g, alpha), z, mu,
            spec=tg_max.spec)
        t_slow = ip.min_time_to_levelset(
            toggle, ip.TOGGLE_Q_MIN, ip.LevelSetTarget(g, beta), y, nu,
            spec=tg_min.spec)
        assert t_fast <= t_slow + 1e-6
        count += 1


@pytest.fixture(scope="module")
def small_envelope(toggle, tg_min, tg_max, tg_int):
    mus = np.linspace(2.5, 6.5, 9)
    taus = np.linspace(6.0, 16.0, 21)
    return ip.admissible_set(toggle, ip.TOGGLE_Q_MIN, ip.TOGGLE_Q_MAX,
                             tg_int.low, 1e-14, 30.0, mus, taus,
                             tg_min.spec, tg_max.spec,
                             lap_opts=ip.LaplaceOptions(
                                 other_equilibria=(tg_min.low,)))


def test_admissible_set_nonempty_between_contours(small_envelope):
    env = small_envelope
    assert env.member.sum() >= 3
    # members lie between the sigma-level sets of the vertex time fields:
    # past the fast vertex crossing, short of the slow vertex crossing
    tf1 = TimeField.from_r_field(
        _as_rfield(env.mu_values, env.tau_values, env.r1), env.epsilon,
        env.spec1.lambda1)
    tf2 = TimeField.from_r_field(
        _as_rfield(env.mu_values, env.tau_values, env.r2), env.epsilon,
        env.spec2.lambda1)
    for i, j in np.argwhere(env.member):
        assert tf1.values[i, j] >= env.sigma - 1e-9
        if env.r2[i, j] < 0.0:
            # the decay-time reading of the fast-vertex condition only
            # applies on the negative side of the frontier
            assert tf2.values[i, j] <= env.sigma + 1e-9


def test_admissible_set_box_structure(small_envelope):
    # each member is sandwiched between the two single-parameter level
    # sets along its magnitude column, at grid resolution
    env = small_envelope
    sig = env.sigma
    tf1 = TimeField.from_r_field(
        _as_rfield(env.mu_values, env.tau_values, env.r1), env.epsilon,
        env.spec1.lambda1).values
    tf2 = TimeField.from_r_field(
        _as_rfield(env.mu_values, env.tau_values, env.r2), env.epsilon,
        env.spec2.lambda1).values
    dt = env.tau_values[1] - env.tau_values[0]
    for i, j in np.argwhere(env.member):
        tau = env.tau_values[j]
        t_fast = _column_crossing(tf2[i], env.tau_values, sig)
        t_slow = _column_crossing(tf1[i], env.tau_values, sig)
        if t_fast is not None:
            assert t_fast <= tau + dt
        if t_slow is not None:
            assert tau <= t_slow + dt


def _column_crossing(col, taus, sigma):
    for k in range(len(col) - 1):
        a, b = col[k], col[k + 1]
        if np.isfinite(a) and np.isfinite(b) and (a - sigma) * (b - sigma) <= 0:
            w = (sigma - a) / (b - a) if b != a else 0.5
            return taus[k] + w * (taus[k + 1] - taus[k])
    return None


def _as_rfield(mus, taus, r):
    from isopulse.pulse_design import RField
    status = np.where(np.isfinite(r), "converged", "diverged")
    side = np.where(np.isfinite(r), "", "below")
    return RField(mus, taus, r, status, side)


def test_sigma_zero_collapses_thresholds(toggle, tg_min, tg_max, tg_int):
    mus = np.array([4.0])
    taus = np.array([8.0, 12.0])
    env = ip.admissible_set(toggle, ip.TOGGLE_Q_MIN, ip.TOGGLE_Q_MAX,
                            tg_int.low, 1e-14, 0.0, mus, taus,
                            tg_min.spec, tg_max.spec,
                            lap_opts=ip.LaplaceOptions(
                                other_equilibria=(tg_min.low,)))
    assert abs(env.threshold1 + 1e-14) < 1e-20
    assert abs(env.threshold2 + 1e-14) < 1e-20


def test_degenerate_interval_reduces_to_levelset(toggle, tg_int):
    # with p1 = p2 the two membership conditions pinch onto r = threshold,
    # i.e. the sigma-level set of the time field: the sign change of
    # (r - threshold) along each column brackets the contour crossing
    mus = np.array([3.0, 4.0, 5.0])
    taus = np.linspace(6.0, 14.0, 17)
    env = ip.admissible_set(toggle, tg_int.q, tg_int.q, tg_int.low, 1e-14,
                            34.0, mus, taus, tg_int.spec, tg_int.spec,
                            lap_opts=tg_int.lap)
    assert abs(env.threshold1 - env.threshold2) < 1e-18
    tf = TimeField.from_r_field(
        _as_rfield(env.mu_values, env.tau_values, env.r1), env.epsilon,
        env.spec1.lambda1)
    dt = taus[1] - taus[0]
    seen = 0
    for i in range(len(mus)):
        t_cross = _column_crossing(tf.values[i], taus, env.sigma)
        if t_cross is None:
            continue
        col = env.r1[i]
        hits = [k for k in range(len(taus) - 1)
                if np.isfinite(col[k]) and np.isfinite(col[k + 1])
                and (col[k] - env.threshold1) * (col[k + 1] - env.threshold1) <= 0]
        assert hits, mus[i]
        assert any(abs(taus[k] - t_cross) <= 2 * dt for k in hits)
        seen += 1
    assert seen >= 2


def test_membership_verification(small_envelope, toggle, tg_int):
    env = small_envelope
    members = env.members()
    assert members
    mu, tau = members[len(members) // 2]
    samples = [ip.TOGGLE_Q_MIN, ip.TOGGLE_Q_MAX, ip.TOGGLE_Q_INT,
               0.75 * ip.TOGGLE_Q_MIN + 0.25 * ip.TOGGLE_Q_MAX,
               0.25 * ip.TOGGLE_Q_MIN + 0.75 * ip.TOGGLE_Q_MAX]
    rep = ip.verify_membership(toggle, samples, tg_int.low, mu, tau,
                               env.sigma, env.epsilon, env)
    assert rep.all_ok
    # vertex rows mirror the two one-sided inequalities
    assert rep.rows[0].ineq1_slack >= -1e-6
    assert rep.rows[1].ineq2_slack >= -1e-6


def test_target_corners_near_equilibria(small_envelope, tg_min, tg_max):
    env = small_envelope
    assert np.linalg.norm(env.z1 - tg_min.spec.x_star) < 1e-6
    assert np.linalg.norm(env.z2 - tg_max.spec.x_star) < 1e-6


def test_isostable_ray_point_moderate_level(toggle, tg_int):
    z = ip.isostable_ray_point(toggle, tg_int.q, tg_int.spec, 5.0, side=-1,
                               lap_opts=tg_int.lap)
    s = ip.laplace_average_s1(toggle, tg_int.q, tg_int.spec, z, tg_int.lap)
    assert abs(s.value + 5.0) < 1e-3


def test_intersection_check_identical_suppressed(small_envelope):
    env = small_envelope
    tf = TimeField.from_r_field(
        _as_rfield(env.mu_values, env.tau_values, env.r1), env.epsilon,
        env.spec1.lambda1)
    report = ip.levelset_intersection_check(tf, tf, 30.0)
    assert report.suppressed
    assert not report.has_intersections


def test_intersection_small_vs_large_epsilon(small_envelope):
    # small epsilon: the approach-side level sets are ordered; at
    # epsilon = 1e-2 the magnitude level sets (both branches of the fold)
    # cross, ruling out monotonicity of the time field
    env = small_envelope
    rf1 = _as_rfield(env.mu_values, env.tau_values, env.r1)
    rf2 = _as_rfield(env.mu_values, env.tau_values, env.r2)
    crossings_small = []
    for sig in (28.0, 30.0, 32.0):
        t1 = TimeField.from_r_field(rf1, 1e-14, env.spec1.lambda1)
        t2 = TimeField.from_r_field(rf2, 1e-14, env.spec2.lambda1)
        crossings_small.append(
            ip.levelset_intersection_check(t1, t2, sig).has_intersections)
    assert not any(crossings_small)
    t1 = TimeField.from_r_field(rf1, 1e-2, env.spec1.lambda1,
                                include_overshoot=True)
    t2 = TimeField.from_r_field(rf2, 1e-2, env.spec2.lambda1,
                                include_overshoot=True)
    found = any(
        ip.levelset_intersection_check(t1, t2, sig).has_intersections
        for sig in (3.0, 4.0, 5.0, 6.0))
    assert found
