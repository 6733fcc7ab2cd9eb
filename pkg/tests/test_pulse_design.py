"""Pulse control function, static programs, policy and derivative probes."""
import math

import numpy as np
import pytest

import isopulse as ip
from isopulse.errors import DomainError
from isopulse.pulse_design import (ACTIVATION_BOTH, ACTIVATION_BUDGET,
                                   ACTIVATION_ISOSTABLE)
from conftest import make_scalar_model


@pytest.fixture(scope="module")
def scalar():
    model = make_scalar_model()
    spec = ip.dominant_spectrum(model, [0.0], [0.0])
    return model, spec


def scalar_r_closed_form(x0, mu, tau):
    # x(t) = mu + (x0 - mu) e^{-t}; the eigenfunction is the identity
    return mu + (x0 - mu) * math.exp(-tau)


def test_r_eval_zero_length(tg_int, toggle):
    x = tg_int.high - 2.0 * tg_int.spec.v1
    base = ip.laplace_average_s1(toggle, tg_int.q, tg_int.spec, x, tg_int.lap)
    ev = ip.r_eval(toggle, tg_int.q, tg_int.spec, x, 3.0, 0.0,
                   lap_opts=tg_int.lap)
    assert abs(ev.r - base.value) < 1e-9 * abs(base.value)


def test_r_eval_zero_magnitude_decays(tg_int, toggle):
    x = tg_int.high - 5.0 * tg_int.spec.v1
    base = ip.laplace_average_s1(toggle, tg_int.q, tg_int.spec, x, tg_int.lap)
    for t in (1.0, 3.0):
        ev = ip.r_eval(toggle, tg_int.q, tg_int.spec, x, 0.0, t,
                       lap_opts=tg_int.lap)
        expected = base.value * math.exp(tg_int.spec.lambda1 * t)
        assert abs(ev.r - expected) < 1e-6 * abs(expected)


def test_r_eval_matches_scalar_closed_form(scalar):
    model, spec = scalar
    for mu, tau in [(1.0, 0.5), (3.0, 2.0), (0.2, 4.0)]:
        ev = ip.r_eval(model, [0.0], spec, [-2.0], mu, tau)
        assert abs(ev.r - scalar_r_closed_form(-2.0, mu, tau)) < 1e-7


def test_r_field_columns_match_point_evals(tg_int, toggle):
    mus = np.array([3.0, 5.0])
    taus = np.array([2.0, 6.0, 10.0])
    rf = ip.r_field(toggle, tg_int.q, tg_int.spec, tg_int.low, mus, taus,
                    lap_opts=tg_int.lap)
    for i, mu in enumerate(mus):
        for j, tau in enumerate(taus):
            ev = ip.r_eval(toggle, tg_int.q, tg_int.spec, tg_int.low, mu, tau,
                           lap_opts=tg_int.lap)
            if ev.diverged:
                assert not np.isfinite(rf.r[i, j])
            else:
                assert abs(rf.r[i, j] - ev.r) <= 1e-6 * max(1.0, abs(ev.r))


def test_r_field_frontier_shape(tg_int, toggle):
    # the signed field has a sign frontier: diverged floor for weak pulses,
    # negative band, then positive overshoot for strong/long pulses
    mus = np.linspace(0.0, 10.0, 6)
    taus = np.linspace(0.0, 25.0, 6)
    rf = ip.r_field(toggle, tg_int.q, tg_int.spec, tg_int.low, mus, taus,
                    lap_opts=tg_int.lap)
    coded = rf.coded()
    assert np.isneginf(coded[0]).all()          # mu = 0 never switches
    assert (coded[-1] > 0.0).any()              # strong pulses overshoot
    finite = np.isfinite(rf.r)
    assert (rf.r[finite] < 0.0).any()           # and a negative band exists


def test_convergence_time_values():
    assert ip.convergence_time(-0.1, -1.0, 0.1) == 0.0
    assert abs(ip.convergence_time(-0.1 * math.e, -1.0, 0.1) - 1.0) < 1e-12
    with pytest.raises(DomainError):
        ip.convergence_time(-0.05, -1.0, 0.1)
    with pytest.raises(DomainError):
        ip.convergence_time(-1.0, -1.0, 0.0)


def test_static_program_scalar_generous_budget(scalar):
    model, spec = scalar
    d = ip.solve_static_program(model, [0.0], spec, [-2.0], 0.1, 10.0)
    ev = ip.r_eval(model, [0.0], spec, [-2.0], d.mu, d.tau)
    assert abs(ev.r + 0.1) <= 1e-6
    assert d.active_constraint == ACTIVATION_ISOSTABLE
    assert d.mu * d.tau <= 10.0 + 1e-9
    # grid oracle: no feasible grid point beats the design beyond the
    # local Lipschitz bound of the grid
    _assert_beats_grid(model, [0.0], spec, np.array([-2.0]), 0.1, 10.0, d,
                       mu_hi=2500.0, tau_hi=8.0)


def test_static_program_scalar_tiny_budget(scalar):
    model, spec = scalar
    d = ip.solve_static_program(model, [0.0], spec, [-2.0], 0.1, 0.5)
    assert abs(d.mu * d.tau - 0.5) <= 1e-9
    assert d.active_constraint in (ACTIVATION_BUDGET, ACTIVATION_BOTH)


def test_static_program_toggle_budget_saturated(tg_int, toggle):
    d = ip.solve_static_program(toggle, tg_int.q, tg_int.spec, tg_int.low,
                                1e-2, 20.0, lap_opts=tg_int.lap)
    assert d.active_constraint == ACTIVATION_BUDGET
    assert abs(d.mu * d.tau - 20.0) <= 1e-9
    assert d.r_value < -1e-2


def test_static_program_toggle_frontier(tg_int, toggle):
    d = ip.solve_static_program(toggle, tg_int.q, tg_int.spec, tg_int.low,
                                1e-14, 50.0, lap_opts=tg_int.lap)
    assert d.active_constraint == ACTIVATION_BOTH
    ev = ip.r_eval(toggle, tg_int.q, tg_int.spec, tg_int.low, d.mu, d.tau,
                   lap_opts=tg_int.lap)
    assert abs(ev.coded() + 1e-14) <= 1e-6
    assert abs(d.mu * d.tau - 50.0) <= 1e-9


def test_static_program_rejects_bad_start(tg_int, toggle):
    with pytest.raises(DomainError):
        ip.solve_static_program(toggle, tg_int.q, tg_int.spec, tg_int.high,
                                1e-3, 10.0, lap_opts=tg_int.lap)


def _assert_beats_grid(model, p, spec, x, epsilon, e_max, design,
                       mu_hi, tau_hi, n=25):
    lam = abs(spec.lambda1)
    mus = np.linspace(0.0, mu_hi, n)
    taus = np.linspace(1e-3, tau_hi, n)
    rf = ip.r_field(model, p, spec, x, mus, taus)
    obj = np.full(rf.r.shape, np.inf)
    feasible = (np.isfinite(rf.r) & (rf.r <= -epsilon)
                & (np.outer(mus, taus) <= e_max))
    tau_grid = np.broadcast_to(taus[None, :], rf.r.shape)
    obj[feasible] = np.log(np.abs(rf.r[feasible])) + lam * tau_grid[feasible]
    best = obj.min()
    if not np.isfinite(best):
        return
    i, j = np.unravel_index(np.argmin(obj), obj.shape)
    # local Lipschitz bound from neighboring finite differences
    slack = _local_lipschitz(obj, i, j, mus, taus)
    assert design.gamma_star <= best + slack


def _local_lipschitz(obj, i, j, mus, taus):
    vals = []
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        ii, jj = i + di, j + dj
        if 0 <= ii < obj.shape[0] and 0 <= jj < obj.shape[1] and \
                np.isfinite(obj[ii, jj]):
            vals.append(abs(obj[ii, jj] - obj[i, j]))
    return max(vals) if vals else 1.0


def test_closed_loop_policy_branches(tg_int, toggle):
    x_in = tg_int.high - 1.0 * tg_int.spec.v1     # s1 = -1
    level = ip.laplace_average_s1(toggle, tg_int.q, tg_int.spec, x_in,
                                  tg_int.lap).value
    # s1(x) = beta - 1: strictly below the level, pulse on
    policy = ip.closed_loop_policy(toggle, tg_int.q, tg_int.spec, mu=2.5,
                                   beta=level + 1.0, lap_opts=tg_int.lap)
    assert policy(x_in)[0] == 2.5
    # s1(x) = beta exactly: the >= branch switches off
    policy2 = ip.closed_loop_policy(toggle, tg_int.q, tg_int.spec, mu=2.5,
                                    beta=level, lap_opts=tg_int.lap)
    assert policy2(x_in)[0] == 0.0
    # below-basin query keeps the pulse on (switching use case)
    assert policy(tg_int.low)[0] == 2.5


def test_closed_loop_crossing_matches_min_time(tg_int, toggle):
    beta = -50.0
    mu = 4.0
    policy = ip.closed_loop_policy(toggle, tg_int.q, tg_int.spec, mu=mu,
                                   beta=beta, lap_opts=tg_int.lap)
    traj, t_switch = ip.run_closed_loop(toggle, tg_int.q, tg_int.spec, policy,
                                        tg_int.low, 20.0)
    assert t_switch is not None

    def g(x):
        s = ip.laplace_average_s1(toggle, tg_int.q, tg_int.spec, x, tg_int.lap)
        return -np.inf if s.diverged else s.value

    target = ip.LevelSetTarget(g, beta, "s1")
    t_min = ip.min_time_to_levelset(toggle, tg_int.q, target, tg_int.low, mu,
                                    spec=tg_int.spec)
    assert abs(t_switch - t_min) <= 0.02 * t_min
    # after switching the level is never crossed back (input stays off)
    tail = traj.sample(np.linspace(t_switch + 0.1, traj.final_time, 20))
    for state in tail:
        s = ip.laplace_average_s1(toggle, tg_int.q, tg_int.spec, state,
                                  tg_int.lap)
        assert s.value >= beta - 1e-3 * abs(beta)


def test_grad_r_signs_toggle(tg_int, toggle):
    rng = np.random.default_rng(4)
    lam = tg_int.spec.lambda1
    checked = 0
    while checked < 6:
        mu = rng.uniform(3.0, 7.0)
        tau = rng.uniform(2.0, 10.0)
        ev = ip.r_eval(toggle, tg_int.q, tg_int.spec, tg_int.low, mu, tau,
                       lap_opts=tg_int.lap)
        if ev.diverged or ev.r >= 0.0:
            continue
        dmu, dtau, gx = ip.grad_r_fd(toggle, tg_int.q, tg_int.spec,
                                     tg_int.low, mu, tau, lap_opts=tg_int.lap)
        refl = toggle.state_order.reflect(gx)
        assert dmu > 0.0
        assert dtau > 0.0
        assert np.all(refl > 0.0)
        assert dtau - lam * ev.r > -1e-6
        checked += 1


def test_objective_monotone_along_mu(tg_int, toggle):
    # log|r| + |lambda1| tau is non-increasing in the magnitude where r < 0
    tau = 6.0
    lam = abs(tg_int.spec.lambda1)
    prev = None
    for mu in np.linspace(3.0, 6.0, 7):
        ev = ip.r_eval(toggle, tg_int.q, tg_int.spec, tg_int.low, mu, tau,
                       lap_opts=tg_int.lap)
        if ev.diverged or ev.r >= 0.0:
            prev = None
            continue
        val = math.log(abs(ev.r)) + lam * tau
        if prev is not None:
            assert val <= prev + 1e-8
        prev = val
