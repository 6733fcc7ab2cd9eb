"""Event-based regulation around the saddle inside an order-interval box.

No constant input stabilizes a point inside the box (only saddles live
there), so containment is enforced by firing precomputed pulses whenever
the drifting flow leaves the box: an exit toward the upper attractor is
answered on the down channel, aiming at a deep isostable of the upper
equilibrium computed at the lowest parameter vertex; exits toward the
lower attractor are answered symmetrically on the up channel at the
highest vertex. Those vertex targets are the outermost sets that are safe
for every parameter in the interval, so a fired pulse never throws the
flow across the true separatrix.

A fired pulse is terminated early once the calibration-vertex
eigenfunction crosses the target level (firing is a minimum-time reach,
with the pulse window as an upper bound), and its magnitude is the table
value raised to at least the face-reversal floor so the escape is turned
around immediately at every parameter in the interval.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import IntegratorOptions, Trajectory, VectorFieldModel
from .errors import (CONVERGED, SIDE_ABOVE, SIDE_BELOW,
                     NoFeasibleAnchorError, RunawayStateError)
from .pulse_design import r_eval
from .rk45 import Dopri5, bisect_crossing
from .search import bisect_root
from .spectral import (LaplaceOptions, SpectralData, dominant_spectrum,
                       laplace_average_s1, stable_extremes)

EXIT_DURING_U1 = "exit_during_u1_phase"   # drifting toward the upper attractor
EXIT_DURING_U2 = "exit_during_u2_phase"   # drifting toward the lower attractor


@dataclass(frozen=True)
class BoxConstraint:
    """Axis-aligned containment box in raw coordinates."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, float))
        object.__setattr__(self, "hi", np.asarray(self.hi, float))
        if np.any(self.lo > self.hi):
            raise ValueError("box corners out of order")

    def contains(self, x, slack=0.0):
        x = np.asarray(x, float)
        return bool(np.all(x >= self.lo - slack) and np.all(x <= self.hi + slack))

    def violation(self, x):
        """Signed distance to the box: negative inside, positive outside."""
        x = np.asarray(x, float)
        return float(np.max(np.maximum(self.lo - x, x - self.hi)))

    def inflate(self, factor):
        center = 0.5 * (self.lo + self.hi)
        half = 0.5 * (self.hi - self.lo) * factor
        return BoxConstraint(center - half, center + half)

    def boundary_points(self, n):
        """n points equispaced along the box perimeter, lower corner first."""
        w, h = self.hi[0] - self.lo[0], self.hi[1] - self.lo[1]
        per = 2.0 * (w + h)
        pts = []
        for k in range(n):
            s = per * k / n
            if s < w:
                pts.append((self.lo[0] + s, self.lo[1]))
            elif s < w + h:
                pts.append((self.hi[0], self.lo[1] + (s - w)))
            elif s < 2 * w + h:
                pts.append((self.hi[0] - (s - w - h), self.hi[1]))
            else:
                pts.append((self.lo[0], self.hi[1] - (s - 2 * w - h)))
        return np.asarray(pts, float)

    def exit_faces(self, x):
        """Faces ordered by how strongly x violates them (worst first)."""
        x = np.asarray(x, float)
        faces = []
        for i in range(x.size):
            faces.append((x[i] - self.hi[i], ("hi", i)))
            faces.append((self.lo[i] - x[i], ("lo", i)))
        faces.sort(key=lambda f: -f[0])
        return [f[1] for f in faces]


@dataclass
class AnchorTable:
    """Boundary anchors with precomputed pulse data per channel.

    mu_down steers from the anchor to the deep negative isostable of the
    upper equilibrium at q_low (fired on upward exits, channel_down);
    mu_up symmetrically targets the deep positive isostable of the lower
    equilibrium at q_high. floor_down / floor_up are the smallest
    magnitudes that reverse the anchor's face velocity at both parameter
    vertices; infeasible anchors carry nan magnitudes.
    """

    anchors: np.ndarray
    xi_upper: float
    delta: float
    mu_cap: float
    channel_up: int
    channel_down: int
    q_low: np.ndarray
    q_high: np.ndarray
    spec_upper: SpectralData
    spec_lower: SpectralData
    mu_down: np.ndarray
    xi_lower_down: np.ndarray
    feasible_down: np.ndarray
    floor_down: np.ndarray
    mu_up: np.ndarray
    xi_lower_up: np.ndarray
    feasible_up: np.ndarray
    floor_up: np.ndarray
    face_floors: dict

    @property
    def level(self):
        return 1.0 / self.delta

    def as_dict(self):
        return {
            "anchors": [list(a) for a in self.anchors],
            "xi_upper": self.xi_upper,
            "delta": self.delta,
            "mu_cap": self.mu_cap,
            "channel_up": self.channel_up,
            "channel_down": self.channel_down,
            "q_low": list(self.q_low),
            "q_high": list(self.q_high),
            "spec_upper": self.spec_upper.as_dict(),
            "spec_lower": self.spec_lower.as_dict(),
            "mu_down": list(self.mu_down),
            "xi_lower_down": list(self.xi_lower_down),
            "feasible_down": [bool(b) for b in self.feasible_down],
            "floor_down": list(self.floor_down),
            "mu_up": list(self.mu_up),
            "xi_lower_up": list(self.xi_lower_up),
            "feasible_up": [bool(b) for b in self.feasible_up],
            "floor_up": list(self.floor_up),
            "face_floors": {f"{side}{i}": v
                            for (side, i), v in self.face_floors.items()},
        }


@dataclass
class RegulationEvent:
    time: float
    kind: str
    state: np.ndarray
    anchor_index: int
    channel: int
    mu: float
    window: tuple
    cut_time: Optional[float] = None

    def as_dict(self):
        return {
            "time": self.time,
            "kind": self.kind,
            "state": list(self.state),
            "anchor_index": self.anchor_index,
            "channel": self.channel,
            "mu": self.mu,
            "window": list(self.window),
            "cut_time": self.cut_time,
        }


def _smallest_mu(evaluate, mu_cap, h_zero, f_tol=1e-9):
    """Smallest magnitude whose margin reaches zero on [0, mu_cap].

    The margin decreases with magnitude. A -inf margin at zero means even
    the unforced flow leaves the target basin from this anchor: no
    magnitude can help, the anchor is infeasible for this channel. Deep
    target levels sit on a numerical cliff (the level band is narrower
    than magnitude resolution), so when the level cannot be sampled the
    passed-side bracket end is returned: the smallest representable
    magnitude that reaches or passes the target.
    """
    if h_zero == -math.inf:
        return math.nan, False
    if h_zero <= 0.0:
        return 0.0, True
    lo, hi = 0.0, mu_cap
    h_hi = evaluate(hi)
    if h_hi > 0.0:
        return math.nan, False
    for _ in range(120):
        if hi - lo <= 1e-11 * (1.0 + mu_cap):
            break
        mid = 0.5 * (lo + hi)
        h_mid = evaluate(mid)
        if abs(h_mid) <= f_tol:
            return mid, True
        if h_mid > 0.0:
            lo = mid
        else:
            hi = mid
    return hi, True


def _first_reach_time(h_of_tau, xi_upper):
    """Pulse length at which the target level is first met.

    Shallow anchors cross the level from the box side at a length found by
    bisection. Anchors starting beyond the level only rejoin it as the
    decay catches up at the end of the window, so the window length is the
    honest bound there.
    """
    h0 = h_of_tau(1e-9)
    if h0 <= 0.0:
        return xi_upper
    h_top = h_of_tau(xi_upper)
    if h_top > 0.0:
        return xi_upper
    tau, _ = bisect_root(h_of_tau, 1e-9, xi_upper, x_tol=1e-8)
    return float(tau)


def _face_reversal(model, x, face, channel, q_pair, mu_cap, margin_v=1.0):
    """Smallest magnitude making the face velocity at x point inward.

    face is ("lo"|"hi", axis). Returns 0 when the face velocity is already
    inward at both parameter vertices, and 0 as a harmless fallback when
    the channel does not actuate the face axis at all (the level cut still
    bounds the pulse then).
    """
    x = np.asarray(x, float)
    side, i = face
    inward = -1.0 if side == "hi" else 1.0
    floor = 0.0
    for q in q_pair:
        def margin(mu):
            u = np.zeros(model.input_dim)
            u[channel] = mu
            return inward * model.f(x, q, u)[i] - margin_v

        m0 = margin(0.0)
        if m0 >= 0.0:
            continue
        m_cap = margin(mu_cap)
        if m_cap <= m0 + 1e-12:
            continue  # face axis not actuated by this channel
        if m_cap < 0.0:
            floor = max(floor, mu_cap)
            continue
        mu, _ = bisect_root(margin, 0.0, mu_cap, x_tol=1e-9 * (1 + mu_cap))
        floor = max(floor, mu)
    return floor


def _reversal_floor(model, box, anchor, channel, direction, q_pair,
                    mu_cap, margin_v=1.0):
    """Largest face-reversal magnitude over the anchor's outward faces.

    direction is the order sense of the exits this channel answers (+1 for
    upward exits, -1 for downward); only faces of that sense contribute.
    """
    anchor = np.asarray(anchor, float)
    signs = np.asarray(model.state_order.signs, float)
    floor = 0.0
    for i in range(anchor.size):
        on_lo = abs(anchor[i] - box.lo[i]) < 1e-9
        on_hi = abs(anchor[i] - box.hi[i]) < 1e-9
        if not (on_lo or on_hi):
            continue
        side = "hi" if on_hi else "lo"
        face_up = (on_hi and signs[i] > 0) or (on_lo and signs[i] < 0)
        if face_up != (direction > 0):
            continue
        floor = max(floor, _face_reversal(model, anchor, (side, i), channel,
                                          q_pair, mu_cap, margin_v))
    return floor


def _face_floor_table(model, box, channel_up, channel_down, q_pair, mu_cap,
                      n_samples=9, margin_v=1.0):
    """Per-face reversal floors maximized over sampled face points.

    A pulse that only reverses the escape at its firing point can stall as
    the state slides along the face into regions of stronger outward
    drift; the face-wide floor dominates the drift along the whole
    corridor for every parameter vertex.
    """
    signs = np.asarray(model.state_order.signs, float)
    floors = {}
    for i in range(len(box.lo)):
        for side in ("lo", "hi"):
            face_up = (side == "hi" and signs[i] > 0) or \
                      (side == "lo" and signs[i] < 0)
            channel = channel_down if face_up else channel_up
            worst = 0.0
            for t in np.linspace(0.0, 1.0, n_samples):
                x = box.lo + t * (box.hi - box.lo)
                x[i] = box.lo[i] if side == "lo" else box.hi[i]
                worst = max(worst, _face_reversal(model, x, (side, i),
                                                  channel, q_pair, mu_cap,
                                                  margin_v))
            floors[(side, i)] = worst
    return floors


def precompute_boundary_pulses(model: VectorFieldModel, q_low, q_high,
                               box: BoxConstraint, delta, n_anchors,
                               xi_upper, mu_cap=50.0,
                               spec_upper: Optional[SpectralData] = None,
                               spec_lower: Optional[SpectralData] = None,
                               lap_opts=None, int_opts=None) -> AnchorTable:
    """Anchor table for the event scheme.

    spec_upper is the spectral data of the upper stable equilibrium at
    q_low, spec_lower that of the lower stable equilibrium at q_high; both
    are located automatically when not given. Magnitudes are the smallest
    values reaching the 1/delta isostable within the pulse window,
    found by bisection; anchors that need more than mu_cap are flagged
    infeasible and skipped at selection time.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must be in (0, 1)")
    if n_anchors < 4:
        raise ValueError("need at least 4 anchors")
    q_low = np.asarray(q_low, float)
    q_high = np.asarray(q_high, float)
    if spec_upper is None:
        _, upper_eq = stable_extremes(model, q_low)
        spec_upper = dominant_spectrum(model, q_low, upper_eq)
    if spec_lower is None:
        lower_eq, _ = stable_extremes(model, q_high)
        spec_lower = dominant_spectrum(model, q_high, lower_eq)
    lap_opts = lap_opts or LaplaceOptions(
        other_equilibria=(spec_upper.x_star, spec_lower.x_star))

    level = 1.0 / delta
    anchors = box.boundary_points(n_anchors)
    n = len(anchors)
    mu_down = np.full(n, math.nan)
    mu_up = np.full(n, math.nan)
    xi_low_down = np.full(n, math.nan)
    xi_low_up = np.full(n, math.nan)
    ok_down = np.zeros(n, bool)
    ok_up = np.zeros(n, bool)
    floor_down = np.zeros(n)
    floor_up = np.zeros(n)

    ch_up, ch_down = 0, 1

    for i, a in enumerate(anchors):
        # down branch: push toward the deep negative isostable of the upper
        # equilibrium; r decreases with the down-channel magnitude
        def h_down(mu, tau=xi_upper):
            e = r_eval(model, q_low, spec_upper, a, mu, tau, ch_down,
                       lap_opts, int_opts)
            c = e.coded()
            return c + level if math.isfinite(c) else (
                -math.inf if e.side == SIDE_BELOW else math.inf)

        mu_i, ok = _smallest_mu(lambda m: h_down(m), mu_cap, h_down(0.0))
        ok_down[i] = ok and math.isfinite(mu_i)
        if ok_down[i]:
            mu_down[i] = mu_i
            xi_low_down[i] = _first_reach_time(
                lambda tau: h_down(mu_i, tau), xi_upper)
            floor_down[i] = _reversal_floor(model, box, a, ch_down, +1,
                                            (q_low, q_high), mu_cap)

        # up branch: push toward the deep positive isostable of the lower
        # equilibrium; the margin is level - r, decreasing in magnitude
        def h_up(mu, tau=xi_upper):
            e = r_eval(model, q_high, spec_lower, a, mu, tau, ch_up,
                       lap_opts, int_opts)
            c = e.coded()
            return level - c if math.isfinite(c) else (
                -math.inf if e.side == SIDE_ABOVE else math.inf)

        mu_i, ok = _smallest_mu(lambda m: h_up(m), mu_cap, h_up(0.0))
        ok_up[i] = ok and math.isfinite(mu_i)
        if ok_up[i]:
            mu_up[i] = mu_i
            xi_low_up[i] = _first_reach_time(
                lambda tau: h_up(mu_i, tau), xi_upper)
            floor_up[i] = _reversal_floor(model, box, a, ch_up, -1,
                                          (q_low, q_high), mu_cap)

    face_floors = _face_floor_table(model, box, ch_up, ch_down,
                                    (q_low, q_high), mu_cap)
    return AnchorTable(anchors, float(xi_upper), float(delta), float(mu_cap),
                       ch_up, ch_down, q_low, q_high, spec_upper, spec_lower,
                       mu_down, xi_low_down, ok_down, floor_down,
                       mu_up, xi_low_up, ok_up, floor_up, face_floors)


def nearest_anchor(x, table: AnchorTable, channel: Optional[int] = None):
    """Index of the closest feasible anchor (Euclidean, ties to lowest)."""
    if channel == table.channel_down:
        feasible = table.feasible_down
    elif channel == table.channel_up:
        feasible = table.feasible_up
    else:
        feasible = table.feasible_down | table.feasible_up
    if not np.any(feasible):
        raise NoFeasibleAnchorError("no feasible anchor for the request")
    d = np.linalg.norm(table.anchors - np.asarray(x, float), axis=1)
    d = np.where(feasible, d, np.inf)
    return int(np.argmin(d))


def _exit_direction(box, order, x):
    """'up' when the state left toward the upper attractor, else 'down'.

    Classified by the most-violated box face mapped through the state
    order; exact on-boundary states resolve to the crossing face.
    """
    signs = np.asarray(order.signs, float)
    side, i = box.exit_faces(x)[0]
    face_up = (side == "hi" and signs[i] > 0) or (side == "lo" and signs[i] < 0)
    return "up" if face_up else "down"


class _LevelCut:
    """Early-termination test: calibration eigenfunction past the level."""

    def __init__(self, model, table, channel, lap_opts=None):
        self.model = model
        self.table = table
        self.down = channel == table.channel_down
        if self.down:
            self.q = table.q_low
            self.spec = table.spec_upper
            self.other = table.spec_lower.x_star
        else:
            self.q = table.q_high
            self.spec = table.spec_lower
            self.other = table.spec_upper.x_star
        self.lap = lap_opts or LaplaceOptions(other_equilibria=(self.other,))

    def reached(self, x):
        s = laplace_average_s1(self.model, self.q, self.spec, x, self.lap)
        if s.status != CONVERGED:
            # walked past the separatrix of the calibration vertex
            return s.side == (SIDE_BELOW if self.down else SIDE_ABOVE)
        return (s.value <= -self.table.level if self.down
                else s.value >= self.table.level)


def event_regulate(model: VectorFieldModel, q_true, box: BoxConstraint,
                   table: AnchorTable, t_end, x0, detect_tol=1e-6,
                   runaway_factor=2.0, mu_margin=2.0, cut_check_dt=0.25,
                   int_opts=None):
    """Run the event scheme at a fixed true parameter.

    Drifting segments are monitored for box exits (dense-output bisection
    at detect_tol); each exit fires the nearest feasible anchor's pulse on
    the opposite channel. The applied magnitude is the anchor magnitude
    scaled by mu_margin and raised to the anchor's reversal floor, and the
    pulse ends at the target-level crossing or at the window end,
    whichever comes first. Leaving the runaway box aborts with
    RunawayStateError. Returns (trajectory, events).
    """
    int_opts = int_opts or IntegratorOptions(rtol=1e-10, atol=1e-10)
    q_true = np.asarray(q_true, float)
    x = np.asarray(x0, float)
    runaway = box.inflate(runaway_factor)
    times = [0.0]
    states = [x.copy()]
    inputs = [np.zeros(model.input_dim)]
    segments = []
    events: list = []
    t_now = 0.0
    cuts = {table.channel_down: _LevelCut(model, table, table.channel_down),
            table.channel_up: _LevelCut(model, table, table.channel_up)}

    def record(t, y, u):
        times.append(t)
        states.append(np.asarray(y, float).copy())
        inputs.append(np.asarray(u, float).copy())

    def runaway_abort(t):
        traj = Trajectory(times, states, inputs, "runaway", segments)
        raise RunawayStateError(
            f"state left the {runaway_factor:g}x safety box at t={t:.4g}",
            trajectory=traj, events=events)

    while t_now < t_end - 1e-12:
        # drift phase: unforced flow, monitored for box exit
        rhs = lambda t, y: model.f(y, q_true, np.zeros(model.input_dim))
        stepper = Dopri5(rhs, t_now, x, rtol=int_opts.rtol, atol=int_opts.atol)
        exit_time = None
        if box.violation(x) > detect_tol:
            exit_time, exit_state = t_now, x.copy()
        while exit_time is None and stepper.t < t_end - 1e-12:
            seg = stepper.step(t_end)
            segments.append(seg)
            inside_before = box.violation(seg.y0) <= 0.0
            outside_now = box.violation(stepper.y) > 0.0
            record(stepper.t, stepper.y, np.zeros(model.input_dim))
            if not runaway.contains(stepper.y):
                runaway_abort(stepper.t)
            if inside_before and outside_now:
                t_x = bisect_crossing(seg, box.violation, seg.t0, seg.t1,
                                      detect_tol)
                exit_time, exit_state = t_x, seg.eval(t_x)
                # truncate the overshooting sample so times stay increasing
                times[-1] = exit_time
                states[-1] = np.asarray(exit_state, float).copy()
        if exit_time is None:
            break

        direction = _exit_direction(box, model.state_order, exit_state)
        if direction == "up":
            channel, kind = table.channel_down, EXIT_DURING_U1
            mus, floors = table.mu_down, table.floor_down
        else:
            channel, kind = table.channel_up, EXIT_DURING_U2
            mus, floors = table.mu_up, table.floor_up
        idx = nearest_anchor(exit_state, table, channel)
        # raise the anchor magnitude to the face-wide reversal floor so the
        # escape cannot stall and slide along the face at any parameter
        exit_face = box.exit_faces(exit_state)[0]
        face_floor = table.face_floors.get(exit_face, 0.0)
        mu = min(max(mu_margin * mus[idx], floors[idx], face_floor),
                 table.mu_cap)
        window = (exit_time, min(exit_time + table.xi_upper, t_end))
        event = RegulationEvent(float(exit_time), kind,
                                np.asarray(exit_state, float), idx,
                                channel, float(mu), window)
        events.append(event)

        # pulse phase: box monitor suspended; the pulse is cut early once
        # the calibration eigenfunction passes the target level
        u_vec = np.zeros(model.input_dim)
        u_vec[channel] = mu
        rhs_p = lambda t, y: model.f(y, q_true, u_vec)
        stepper = Dopri5(rhs_p, exit_time, exit_state, rtol=int_opts.rtol,
                         atol=int_opts.atol)
        check_next = exit_time + cut_check_dt
        while stepper.t < window[1] - 1e-12:
            seg = stepper.step(window[1])
            segments.append(seg)
            record(stepper.t, stepper.y, u_vec)
            if not runaway.contains(stepper.y):
                runaway_abort(stepper.t)
            if stepper.t >= check_next:
                if cuts[channel].reached(stepper.y):
                    event.cut_time = float(stepper.t)
                    break
                check_next = stepper.t + cut_check_dt
        t_now = stepper.t
        x = stepper.y.copy()

    traj = Trajectory(times, states, inputs, "completed", segments)
    return traj, events
