"""Command-line front end: reproducible experiment runs with persisted artifacts.

Each subcommand wraps one library workflow and writes delimited data
(CSV, RFC 4180, 17 significant digits), JSON (UTF-8, sorted keys) and
static SVG figures into the output directory, followed by a manifest with
content hashes and stage timings.

Exit codes: 0 success, 2 validation, 3 infeasible, 4 regulation failure,
5 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .dynamics import (Box, IntegratorOptions, PulseInput, check_kamke_muller,
                       integrate, load_model_config)
from .errors import (CONVERGED, DomainError, DominanceViolatedError,
                     InfeasibleError, IsopulseError, NoConvergenceError,
                     RunawayStateError, StepFailureError, ToleranceNotMetError,
                     UnreachableError)
from .pulse_design import r_field, solve_static_program
from .regulator import BoxConstraint, event_regulate, precompute_boundary_pulses
from .spectral import (LaplaceOptions, dominant_spectrum, find_equilibria,
                       grid_seeds, laplace_average_s1, sample_s1_grid,
                       stable_extremes, STABLE)
from .uncertainty import (TimeField, admissible_set, levelset_intersection_check)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_REGULATION = 4
EXIT_NUMERICAL = 5


def _fmt(v):
    return format(float(v), ".17g")


def _floats(text):
    return np.array([float(tok) for tok in text.split(",") if tok != ""])


def default_workers():
    env = os.environ.get("ISOPULSE_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


class Workspace:
    """Output directory with a manifest of everything written into it."""

    def __init__(self, out_dir, config_snapshot):
        self.dir = out_dir
        os.makedirs(out_dir, exist_ok=True)
        self.artifacts = []
        self.timings = []
        self.config = config_snapshot
        self._t0 = time.perf_counter()
        self._stage_start = self._t0
        self._stage = None

    def stage(self, name):
        now = time.perf_counter()
        if self._stage is not None:
            self.timings.append({"stage": self._stage,
                                 "seconds": now - self._stage_start})
        self._stage = name
        self._stage_start = now

    def path(self, name):
        return os.path.join(self.dir, name)

    def _register(self, name):
        full = self.path(name)
        digest = hashlib.sha256(open(full, "rb").read()).hexdigest()
        self.artifacts.append({"name": name, "sha256": digest,
                               "bytes": os.path.getsize(full)})

    def write_csv(self, name, header, rows):
        with open(self.path(name), "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([c if isinstance(c, str) else _fmt(c)
                                 for c in row])
        self._register(name)

    def write_json(self, name, obj):
        with open(self.path(name), "w", encoding="utf-8") as fh:
            json.dump(obj, fh, sort_keys=True, indent=2)
            fh.write("\n")
        self._register(name)

    def write_figure(self, name, render):
        render(self.path(name))
        self._register(name)

    def finalize(self):
        self.stage("finalize")
        manifest = {
            "version": __version__,
            "config": self.config,
            "timings": self.timings,
            "artifacts": self.artifacts,
        }
        with open(self.path("manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, sort_keys=True, indent=2)
            fh.write("\n")


def _load_model(args):
    if not os.path.exists(args.model):
        raise FileNotFoundError(f"model config not found: {args.model}")
    model, q_default = load_model_config(args.model)
    q = _floats(args.q) if getattr(args, "q", None) else q_default
    if q is None:
        raise DomainError("no parameter vector: pass --q or set params in the config")
    if q.size != model.param_dim:
        raise DomainError(f"expected {model.param_dim} parameters, got {q.size}")
    return model, q


def _int_opts(args):
    return IntegratorOptions(rtol=args.rtol, atol=args.atol)


def _config_snapshot(args):
    skip = {"func"}
    return {k: (list(v) if isinstance(v, np.ndarray) else v)
            for k, v in vars(args).items() if k not in skip}


def _traj_rows(traj, at_times=None):
    if at_times is None:
        times = traj.times
        states = traj.states
        inputs = traj.inputs
    else:
        times = np.asarray(at_times, float)
        states = traj.sample(times)
        inputs = np.array([traj.inputs[min(np.searchsorted(traj.times, t),
                                           len(traj.times) - 1)]
                           for t in times])
    for k in range(len(times)):
        yield [times[k], *states[k], *inputs[k]]


def _traj_header(model):
    return (["t"] + [f"x{i+1}" for i in range(model.state_dim)]
            + [f"u{i+1}" for i in range(model.input_dim)])


# ---------------------------------------------------------------------------
# Subcommands

def cmd_simulate(args):
    model, q = _load_model(args)
    ws = Workspace(args.out, _config_snapshot(args))
    ws.stage("simulate")
    if args.x0:
        x0 = _floats(args.x0)
    else:
        x0, _ = stable_extremes(model, q)
    pulse = None
    if args.mu is not None:
        pulse = PulseInput(args.channel, args.mu, args.tau)
    traj = integrate(model, x0, q, pulse, args.t_end, _int_opts(args))
    at = _floats(args.at_times) if args.at_times else None
    ws.stage("write")
    ws.write_csv("trajectory.csv", _traj_header(model), _traj_rows(traj, at))
    ws.write_json("run.json", {
        "terminal_status": traj.terminal_status,
        "final_state": [float(v) for v in traj.final_state],
        "final_time": traj.final_time,
    })
    if args.svg:
        from . import plots
        ws.write_figure("timeseries.svg",
                        lambda p: plots.save_time_series(p, traj))
        if model.state_dim == 2:
            ws.write_figure("phase.svg",
                            lambda p: plots.save_phase_plane(p, traj=traj))
    ws.finalize()
    return EXIT_OK


def cmd_spectral(args):
    model, q = _load_model(args)
    ws = Workspace(args.out, _config_snapshot(args))
    ws.stage("equilibria")
    if args.seed_box:
        sb = _floats(args.seed_box)
        lo, hi = sb[:model.state_dim], sb[model.state_dim:]
    else:
        lo, hi = model.state_domain.lo, model.state_domain.hi
    seeds = grid_seeds(lo, hi, args.seed_grid)
    eqs = find_equilibria(model, q, seeds)
    ws.stage("spectra")
    spectra = []
    for x, kind in eqs:
        entry = {"state": [float(v) for v in x], "stability": kind}
        if kind == STABLE:
            try:
                entry["spectral_data"] = dominant_spectrum(model, q, x).as_dict()
            except DominanceViolatedError as exc:
                entry["spectral_data_error"] = str(exc)
        spectra.append(entry)
    ws.write_json("spectral.json", {"parameters": list(map(float, q)),
                                    "equilibria": spectra})
    if args.field_resolution:
        ws.stage("field")
        if not args.field_bbox:
            raise DomainError("--field-bbox is required with --field-resolution")
        bb = _floats(args.field_bbox)
        bbox = Box(bb[:2], bb[2:])
        stable = [e for e in eqs if e[1] == STABLE]
        refl = model.state_order.reflect
        stable.sort(key=lambda e: tuple(refl(e[0])))
        target = stable[-1][0] if args.target == "max" else stable[0][0]
        spec = dominant_spectrum(model, q, target)
        others = [e[0] for e in eqs if not np.allclose(e[0], target)]
        lap = LaplaceOptions(other_equilibria=others)
        field = sample_s1_grid(model, q, spec, bbox,
                               args.field_resolution, lap, args.workers)
        ws.write_csv("s1_field.csv", ["x1", "x2", "s1", "status"],
                     ([r[0], r[1], r[2], r[3]] for r in field.rows()))
    ws.finalize()
    return EXIT_OK


def _spectrum_for_target(model, q, which):
    low, high = stable_extremes(model, q)
    target = high if which == "max" else low
    other = low if which == "max" else high
    spec = dominant_spectrum(model, q, target)
    return spec, other


def cmd_design(args):
    if args.epsilon <= 0.0 or args.budget <= 0.0:
        raise DomainError("epsilon and budget must be positive")
    model, q = _load_model(args)
    ws = Workspace(args.out, _config_snapshot(args))
    ws.stage("spectral")
    spec, other_eq = _spectrum_for_target(model, q, args.target)
    x0 = _floats(args.x0) if args.x0 else other_eq
    lap = LaplaceOptions(other_equilibria=(other_eq,))
    ws.stage("solve")
    design = solve_static_program(model, q, spec, x0, args.epsilon,
                                  args.budget, channel=args.channel,
                                  lap_opts=lap)
    ws.write_json("design.json", design.as_dict())
    ws.stage("field")
    if args.field_resolution:
        mus = np.linspace(0.0, args.mu_max or 2.0 * design.mu,
                          args.field_resolution)
        taus = np.linspace(0.0, args.tau_max or 2.0 * design.tau,
                           args.field_resolution)
        rf = r_field(model, q, spec, x0, mus, taus, args.channel, lap,
                     workers=args.workers)
        rows = []
        for i, mu in enumerate(rf.mu_values):
            for j, tau in enumerate(rf.tau_values):
                rows.append([mu, tau, rf.r[i, j], rf.status[i, j]])
        ws.write_csv("r_field.csv", ["mu", "tau", "r", "status"], rows)
        if args.svg:
            from . import plots
            tf = TimeField.from_r_field(rf, args.epsilon, spec.lambda1)
            finite = tf.values[np.isfinite(tf.values)]
            if finite.size:
                sigmas = np.quantile(finite, [0.25, 0.5, 0.75])
                ws.write_figure("t_contours.svg",
                                lambda p: plots.save_time_field_contours(
                                    p, [(tf, "predicted time")], sigmas,
                                    design=design))
    ws.finalize()
    return EXIT_OK


def cmd_envelope(args):
    model, _ = _load_model(args)
    q_lo = _floats(args.q_lo)
    q_hi = _floats(args.q_hi)
    ws = Workspace(args.out, _config_snapshot(args))
    ws.stage("spectral")
    spec_lo, other_lo = _spectrum_for_target(model, q_lo, "max")
    spec_hi, _ = _spectrum_for_target(model, q_hi, "max")
    x0 = _floats(args.x0) if args.x0 else other_lo
    mu_rng = _floats(args.mu_range)
    tau_rng = _floats(args.tau_range)
    mus = np.linspace(mu_rng[0], mu_rng[1], args.grid)
    taus = np.linspace(tau_rng[0], tau_rng[1], args.grid)
    lap = LaplaceOptions(other_equilibria=(other_lo,))
    ws.stage("envelope")
    env = admissible_set(model, q_lo, q_hi, x0, args.epsilon, args.sigma,
                         mus, taus, spec_lo, spec_hi, channel=args.channel,
                         lap_opts=lap, workers=args.workers)
    rows = []
    for tag, r in (("p1", env.r1), ("p2", env.r2)):
        for i, mu in enumerate(mus):
            for j, tau in enumerate(taus):
                status = CONVERGED if np.isfinite(r[i, j]) else "diverged"
                rows.append([mu, tau, r[i, j], status, tag])
    ws.write_csv("r_fields.csv", ["mu", "tau", "r", "status", "p_tag"], rows)
    ws.write_json("envelope.json", {
        "p1": list(map(float, env.p1)),
        "p2": list(map(float, env.p2)),
        "epsilon": env.epsilon,
        "sigma": env.sigma,
        "threshold_p1": env.threshold1,
        "threshold_p2": env.threshold2,
        "mu_values": [float(v) for v in mus],
        "tau_values": [float(v) for v in taus],
        "member": [[bool(b) for b in row] for row in env.member],
        "z1": [float(v) for v in env.z1],
        "z2": [float(v) for v in env.z2],
        "order_bounded": env.order_bounded,
    })
    ws.stage("intersections")
    tf1 = TimeField.from_r_field(
        _rf_like(env.mu_values, env.tau_values, env.r1), args.epsilon,
        spec_lo.lambda1)
    tf2 = TimeField.from_r_field(
        _rf_like(env.mu_values, env.tau_values, env.r2), args.epsilon,
        spec_hi.lambda1)
    report = levelset_intersection_check(tf1, tf2, args.sigma)
    ws.write_json("intersections.json", {
        "sigma": report.sigma,
        "suppressed": report.suppressed,
        "count": len(report.points),
        "points": [[float(a), float(b)] for a, b in report.points],
        "mu_range": (list(map(float, report.mu_range))
                     if report.mu_range else None),
    })
    if args.svg:
        from . import plots
        fields = [(tf1, "q lower"), (tf2, "q upper")]
        if args.q_mid:
            q_mid = _floats(args.q_mid)
            spec_mid, other_mid = _spectrum_for_target(model, q_mid, "max")
            rf_mid = r_field(model, q_mid, spec_mid, x0, mus, taus,
                             args.channel,
                             LaplaceOptions(other_equilibria=(other_mid,)),
                             workers=args.workers)
            fields.insert(1, (TimeField.from_r_field(rf_mid, args.epsilon,
                                                     spec_mid.lambda1),
                              "q middle"))
        ws.write_figure("t_contours.svg",
                        lambda p: plots.save_time_field_contours(
                            p, fields, [args.sigma]))
    ws.finalize()
    return EXIT_OK


def _rf_like(mus, taus, r):
    from .pulse_design import RField
    status = np.where(np.isfinite(r), CONVERGED, "diverged")
    side = np.where(np.isfinite(r), "", "below")
    return RField(mus, taus, r, status, side)


def cmd_regulate(args):
    model, _ = _load_model(args)
    if args.n_anchors < 4:
        raise DomainError("need at least 4 anchors")
    q_lo = _floats(args.q_lo)
    q_hi = _floats(args.q_hi)
    q_true = _floats(args.q_true)
    bb = _floats(args.box)
    box = BoxConstraint(bb[:2], bb[2:])
    ws = Workspace(args.out, _config_snapshot(args))
    ws.stage("anchors")
    table = precompute_boundary_pulses(model, q_lo, q_hi, box, args.delta,
                                       args.n_anchors, args.xi_upper,
                                       mu_cap=args.mu_cap)
    ws.write_json("anchors.json", table.as_dict())
    n_bad = int((~table.feasible_down).sum() + (~table.feasible_up).sum())
    if n_bad:
        print(f"warning: {n_bad} anchor/channel pairs infeasible at "
              f"mu_cap={args.mu_cap:g}", file=sys.stderr)
    ws.stage("regulate")
    x0 = _floats(args.x0) if args.x0 else 0.5 * (box.lo + box.hi)
    try:
        traj, events = event_regulate(model, q_true, box, table, args.t_end,
                                      x0, int_opts=_int_opts(args))
        failed = False
    except RunawayStateError as exc:
        traj, events = exc.trajectory, exc.events
        failed = True
    ws.stage("write")
    ws.write_csv("trajectory.csv", _traj_header(model), _traj_rows(traj))
    ws.write_json("events.json", {
        "failed": failed,
        "events": [e.as_dict() for e in events],
    })
    if args.svg:
        from . import plots
        ws.write_figure("phase.svg",
                        lambda p: plots.save_phase_plane(p, traj=traj, box=box))
    ws.finalize()
    if failed:
        print("regulation failed: runaway state", file=sys.stderr)
        return EXIT_REGULATION
    return EXIT_OK


def cmd_check(args):
    model, q = _load_model(args)
    q_lo = _floats(args.q_lo) if args.q_lo else q
    q_hi = _floats(args.q_hi) if args.q_hi else q
    ws = Workspace(args.out, _config_snapshot(args))
    rng = np.random.default_rng(args.seed)
    results = {}

    ws.stage("kamke_muller")
    report = check_kamke_muller(model, (q_lo, q_hi), args.samples,
                                u_max=args.u_max, seed=args.seed)
    results["kamke_muller"] = {
        "passed": report.passed,
        "min_offdiag_state": report.min_offdiag_state,
        "min_param": report.min_param,
        "min_input": report.min_input,
    }
    print(f"kamke_muller: {'PASS' if report.passed else 'FAIL'} "
          f"(state {report.min_offdiag_state:.2e}, param {report.min_param:.2e}, "
          f"input {report.min_input:.2e})")

    ws.stage("flow_monotonicity")
    mono_ok = _flow_monotonicity_trials(model, q_lo, q_hi, rng,
                                        n_trials=args.trials,
                                        u_max=args.u_max)
    results["flow_monotonicity"] = {"passed": mono_ok}
    print(f"flow_monotonicity: {'PASS' if mono_ok else 'FAIL'}")

    ws.stage("eigenfunction_decay")
    decay_ok = _decay_property(model, q)
    results["eigenfunction_decay"] = {"passed": decay_ok}
    print(f"eigenfunction_decay: {'PASS' if decay_ok else 'FAIL'}")

    ws.write_json("check.json", results)
    ws.finalize()
    all_ok = all(v["passed"] for v in results.values())
    return EXIT_OK if all_ok else EXIT_NUMERICAL


def _flow_monotonicity_trials(model, q_lo, q_hi, rng, n_trials=20,
                              horizon=10.0, n_times=50, u_max=2.0,
                              slack=1e-6):
    so, po, io = model.state_order, model.param_order, model.input_order
    dom = model.state_domain
    span = dom.hi - dom.lo
    opts = IntegratorOptions(rtol=1e-10, atol=1e-10)
    times = np.linspace(0.0, horizon, n_times)
    for _ in range(n_trials):
        x = rng.uniform(dom.lo + 0.05 * span, dom.lo + 0.6 * span)
        y = so.join(x, x + rng.uniform(0.0, 0.05) * span * rng.uniform(
            0, 1, model.state_dim) * np.asarray(so.signs, float))
        y = np.clip(y, dom.lo, dom.hi)
        pa = rng.uniform(np.minimum(q_lo, q_hi), np.maximum(q_lo, q_hi))
        pb = rng.uniform(np.minimum(q_lo, q_hi), np.maximum(q_lo, q_hi))
        p1, p2 = po.meet(pa, pb), po.join(pa, pb)
        ua = rng.uniform(0.0, u_max, model.input_dim)
        ub = rng.uniform(0.0, u_max, model.input_dim)
        u1, u2 = io.meet(ua, ub), io.join(ua, ub)
        u1 = np.clip(u1, 0.0, None)
        u2 = np.clip(u2, 0.0, None)
        ta = integrate(model, x, p1, u1, horizon, opts)
        tb = integrate(model, y, p2, u2, horizon, opts)
        if ta.terminal_status != "completed" or tb.terminal_status != "completed":
            continue
        sa = ta.sample(times)
        sb = tb.sample(times)
        gap = so.reflect(sb) - so.reflect(sa)
        if gap.min() < -slack:
            return False
    return True


def _decay_property(model, q, rel_tol=1e-4):
    low, high = stable_extremes(model, q)
    spec = dominant_spectrum(model, q, high)
    lap = LaplaceOptions(other_equilibria=(low,))
    x = spec.x_star - 0.5 * spec.v1
    base = laplace_average_s1(model, q, spec, x, lap)
    if base.status != CONVERGED:
        return False
    traj = integrate(model, x, q, None, 10.0 / abs(spec.lambda1),
                     IntegratorOptions(rtol=1e-12, atol=1e-12))
    for t in np.linspace(0.5, 9.5, 10) / abs(spec.lambda1):
        s = laplace_average_s1(model, q, spec, traj.state_at(t), lap)
        if s.status != CONVERGED:
            return False
        expected = base.value * np.exp(spec.lambda1 * t)
        if abs(s.value - expected) > rel_tol * abs(expected) + 1e-12:
            return False
    return True


# ---------------------------------------------------------------------------
# Parser

def build_parser():
    parser = argparse.ArgumentParser(
        prog="isopulse",
        description="Pulse-based switching and regulation for bistable "
                    "monotone systems.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--model", required=True, help="model config JSON")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--rtol", type=float, default=1e-9)
        sp.add_argument("--atol", type=float, default=1e-9)
        sp.add_argument("--workers", type=int, default=default_workers())
        sp.add_argument("--svg", action=argparse.BooleanOptionalAction,
                        default=True, help="emit SVG figures")

    sp = sub.add_parser("simulate", help="integrate one trajectory")
    common(sp)
    sp.add_argument("--q", help="parameter vector, comma separated")
    sp.add_argument("--x0", help="initial state (default: lower stable equilibrium)")
    sp.add_argument("--mu", type=float, help="pulse magnitude")
    sp.add_argument("--tau", type=float, default=0.0, help="pulse length")
    sp.add_argument("--channel", type=int, default=0)
    sp.add_argument("--t-end", type=float, required=True)
    sp.add_argument("--at-times", help="exact sample times, comma separated")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("spectral", help="equilibria and dominant spectral data")
    common(sp)
    sp.add_argument("--q")
    sp.add_argument("--seed-grid", type=int, default=6)
    sp.add_argument("--seed-box", help="x1lo,x2lo,x1hi,x2hi for Newton seeds")
    sp.add_argument("--target", choices=["max", "min"], default="max")
    sp.add_argument("--field-resolution", type=int,
                    help="also sample the eigenfunction on a grid")
    sp.add_argument("--field-bbox", help="x1lo,x2lo,x1hi,x2hi")
    sp.set_defaults(func=cmd_spectral)

    sp = sub.add_parser("design", help="solve the static pulse program")
    common(sp)
    sp.add_argument("--q")
    sp.add_argument("--x0")
    sp.add_argument("--epsilon", type=float, required=True)
    sp.add_argument("--budget", type=float, required=True)
    sp.add_argument("--channel", type=int, default=0)
    sp.add_argument("--target", choices=["max", "min"], default="max")
    sp.add_argument("--field-resolution", type=int, default=21)
    sp.add_argument("--mu-max", type=float)
    sp.add_argument("--tau-max", type=float)
    sp.set_defaults(func=cmd_design)

    sp = sub.add_parser("envelope", help="robust pulse set under parameter bounds")
    common(sp)
    sp.add_argument("--q-lo", required=True)
    sp.add_argument("--q-hi", required=True)
    sp.add_argument("--q-mid", help="optional middle parameter for the overlay")
    sp.add_argument("--x0")
    sp.add_argument("--epsilon", type=float, required=True)
    sp.add_argument("--sigma", type=float, required=True)
    sp.add_argument("--mu-range", required=True, help="lo,hi")
    sp.add_argument("--tau-range", required=True, help="lo,hi")
    sp.add_argument("--grid", type=int, default=25)
    sp.add_argument("--channel", type=int, default=0)
    sp.set_defaults(func=cmd_envelope)

    sp = sub.add_parser("regulate", help="event-based containment around the saddle")
    common(sp)
    sp.add_argument("--q-true", required=True)
    sp.add_argument("--q-lo", required=True)
    sp.add_argument("--q-hi", required=True)
    sp.add_argument("--box", required=True, help="lo1,lo2,hi1,hi2")
    sp.add_argument("--delta", type=float, default=0.01)
    sp.add_argument("--n-anchors", type=int, default=32)
    sp.add_argument("--xi-upper", type=float, default=10.0)
    sp.add_argument("--mu-cap", type=float, default=50.0)
    sp.add_argument("--t-end", type=float, required=True)
    sp.add_argument("--x0")
    sp.set_defaults(func=cmd_regulate)

    sp = sub.add_parser("check", help="run the sampled property suites")
    common(sp)
    sp.add_argument("--q")
    sp.add_argument("--q-lo")
    sp.add_argument("--q-hi")
    sp.add_argument("--samples", type=int, default=200)
    sp.add_argument("--trials", type=int, default=20)
    sp.add_argument("--u-max", type=float, default=2.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_check)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DomainError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except RunawayStateError as exc:
        print(f"regulation failure: {exc}", file=sys.stderr)
        return EXIT_REGULATION
    except (StepFailureError, DominanceViolatedError, NoConvergenceError,
            ToleranceNotMetError, UnreachableError, IsopulseError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
