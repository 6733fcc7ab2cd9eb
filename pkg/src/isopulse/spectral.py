"""Equilibria, dominant spectral data and the leading Koopman eigenfunction.

The eigenfunction is evaluated pointwise by exponentially rescaled
trajectory averages of the left-eigenvector observable. The estimate
e^{-lambda1 t} w1'(phi(t,x) - x*) converges as transients decay but is
eventually polluted by the amplified equilibrium/integration error, so the
stopping logic accepts either the requested tolerance or the estimate's
plateau once the trajectory is deep in the linear zone.
"""
from __future__ import annotations

import multiprocessing as mp
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .contour import marching_squares
from .dynamics import Box, VectorFieldModel
from .errors import (CONVERGED, DIVERGED, SIDE_ABOVE, SIDE_BELOW, SIDE_UNKNOWN,
                     DomainError, DominanceViolatedError, EmptyLevelSetError,
                     StepFailureError)
from .rk45 import Dopri5

STABLE = "stable"
SADDLE = "saddle"
UNSTABLE = "unstable"

_EIG_REAL_TOL = 1e-9
_GAP_TOL = 1e-8


@dataclass(frozen=True)
class SpectralData:
    """Dominant spectral triple at a stable equilibrium.

    v1 has unit Euclidean norm and is sign-fixed to be nonnegative in
    reflected coordinates; w1 is scaled so that w1' v1 = 1, which makes the
    eigenfunction gradient at the equilibrium equal to w1.
    """

    x_star: np.ndarray
    jacobian: np.ndarray
    lambda1: float
    spectral_gap: float
    v1: np.ndarray
    w1: np.ndarray

    def as_dict(self):
        return {
            "x_star": list(self.x_star),
            "jacobian": [list(row) for row in self.jacobian],
            "lambda1": self.lambda1,
            "spectral_gap": self.spectral_gap,
            "v1": list(self.v1),
            "w1": list(self.w1),
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(np.asarray(doc["x_star"], float),
                   np.asarray(doc["jacobian"], float),
                   float(doc["lambda1"]), float(doc["spectral_gap"]),
                   np.asarray(doc["v1"], float), np.asarray(doc["w1"], float))


@dataclass
class EigenfunctionSample:
    """Pointwise eigenfunction estimate with its convergence diagnostics."""

    x: np.ndarray
    value: Optional[float]
    truncation_time: float
    residual: float
    status: str
    side: str = SIDE_UNKNOWN
    probe_final: Optional[np.ndarray] = None

    @property
    def diverged(self):
        return self.status == DIVERGED


@dataclass
class LaplaceOptions:
    """Controls for the trajectory-average eigenfunction evaluation."""

    tol: float = 1e-8
    abs_floor: float = 1e-9
    t_max: Optional[float] = None          # default 40 / |lambda1|
    radius: Optional[float] = None         # default from known equilibria
    check_dt: Optional[float] = None       # default 1 / |lambda1|
    rtol: float = 1e-12
    atol: float = 1e-12
    other_equilibria: Sequence = ()

    def with_overrides(self, **kw):
        return replace(self, **kw)


def _newton_root(model, p, x0, f_tol, max_iter):
    """Damped Newton iteration; returns the root or None."""
    u0 = np.zeros(model.input_dim)
    x = np.asarray(x0, float).copy()
    fx = model.f(x, p, u0)
    norm = np.max(np.abs(fx))
    for _ in range(max_iter):
        if norm <= f_tol:
            return x
        J = model.jacobian_x(x, p)
        try:
            step = np.linalg.solve(J, -fx)
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        for _ in range(30):
            x_try = x + lam * step
            f_try = model.f(x_try, p, u0)
            n_try = np.max(np.abs(f_try))
            if n_try < norm or n_try <= f_tol:
                x, fx, norm = x_try, f_try, n_try
                break
            lam *= 0.5
        else:
            return None
    return x if norm <= f_tol else None


def _polish_root(model, p, x):
    """Extra Newton sweeps in extended precision.

    The eigenfunction average amplifies the equilibrium residual by
    e^{|lambda1| t}; polishing to the representation floor buys several
    digits of usable range. Falls back silently for fields that reject
    longdouble inputs.
    """
    u0 = np.zeros(model.input_dim)
    J = model.jacobian_x(x, p)
    try:
        xl = x.astype(np.longdouble)
        pl = np.asarray(p, np.longdouble)
        ul = u0.astype(np.longdouble)
        for _ in range(4):
            fl = np.asarray(model.field(xl, pl, ul), np.longdouble)
            xl = xl - np.linalg.solve(J, fl.astype(float)).astype(np.longdouble)
        x_new = xl.astype(float)
        if np.max(np.abs(model.f(x_new, p, u0))) <= np.max(np.abs(model.f(x, p, u0))) * 4 + 1e-30:
            return x_new
    except Exception:
        pass
    return x


def classify_equilibrium(model, p, x, zero_tol=1e-9):
    ev = np.linalg.eigvals(model.jacobian_x(x, p))
    re = ev.real
    if np.all(re < -zero_tol):
        return STABLE
    if np.all(re > zero_tol):
        return UNSTABLE
    return SADDLE


def find_equilibria(model: VectorFieldModel, p, seeds, f_tol=1e-9,
                    max_iter=80, dedupe_tol=1e-6):
    """Damped-Newton roots of the unforced field from a list of seeds.

    Non-converging seeds are skipped. Converged roots are deduplicated at
    relative distance dedupe_tol, polished in extended precision, and
    returned as (state, stability) sorted by the first coordinate.
    """
    if len(seeds) == 0:
        raise ValueError("seeds must be non-empty")
    roots = []
    for seed in seeds:
        x = _newton_root(model, p, seed, f_tol, max_iter)
        if x is None or not np.all(np.isfinite(x)):
            continue
        if not model.state_domain.contains(x, slack=1e-9):
            continue
        if any(np.linalg.norm(x - r) <= dedupe_tol * (1.0 + np.linalg.norm(r))
               for r in roots):
            continue
        roots.append(x)
    out = []
    for x in roots:
        x = _polish_root(model, p, x)
        out.append((x, classify_equilibrium(model, p, x)))
    out.sort(key=lambda pair: tuple(pair[0]))
    return out


def grid_seeds(lo, hi, n_per_axis):
    axes = [np.linspace(lo[i], hi[i], n_per_axis) for i in range(len(lo))]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def stable_extremes(model: VectorFieldModel, p, seeds=None):
    """(lowest, highest) stable equilibria in the state order."""
    if seeds is None:
        seeds = grid_seeds(model.state_domain.lo, model.state_domain.hi, 6)
    eqs = [x for x, kind in find_equilibria(model, p, seeds) if kind == STABLE]
    if len(eqs) < 2:
        raise ValueError("expected at least two stable equilibria")
    refl = model.state_order.reflect
    eqs.sort(key=lambda x: tuple(refl(x)))
    return eqs[0], eqs[-1]


def dominant_spectrum(model: VectorFieldModel, p, x_star,
                      gap_tol=_GAP_TOL) -> SpectralData:
    """Dominant eigenvalue and eigenvector pair at a stable equilibrium.

    Raises DominanceViolatedError when the leading eigenvalue is complex or
    the gap to the next real part is below gap_tol.
    """
    x_star = np.asarray(x_star, float)
    resid = np.max(np.abs(model.f(x_star, p, np.zeros(model.input_dim))))
    if resid > 1e-6:
        raise ValueError(f"x_star is not an equilibrium (|f|={resid:.2e})")
    J = model.jacobian_x(x_star, p)
    ev, V = np.linalg.eig(J)
    order = np.argsort(-ev.real)
    ev = ev[order]
    V = V[:, order]
    lam1 = ev[0]
    if abs(lam1.imag) > _EIG_REAL_TOL * max(1.0, abs(lam1.real)):
        raise DominanceViolatedError(
            f"leading eigenvalue is complex: {lam1:.6g}")
    if len(ev) > 1:
        gap = float(lam1.real - ev[1].real)
        if gap <= gap_tol:
            raise DominanceViolatedError(
                f"spectral gap {gap:.3e} below {gap_tol:.0e}")
    else:
        gap = float("inf")
    if lam1.real >= 0.0:
        raise ValueError("x_star is not exponentially stable")

    v1 = V[:, 0].real.copy()
    v1 /= np.linalg.norm(v1)
    refl = model.state_order.reflect(v1)
    if refl.sum() < 0.0:
        v1 = -v1
    evl, W = np.linalg.eig(J.T)
    w1 = W[:, np.argmin(np.abs(evl - lam1))].real.copy()
    w1 = w1 / float(w1 @ v1)
    return SpectralData(x_star, J, float(lam1.real), gap, v1, w1)


def isostable_time(alpha1, alpha2, lambda1):
    """Travel time between isostable levels alpha1 -> alpha2 < alpha1."""
    if alpha1 <= 0.0 or alpha2 <= 0.0:
        raise DomainError("isostable levels must be positive")
    if alpha2 >= alpha1:
        raise DomainError("travel time requires alpha2 < alpha1")
    if lambda1 >= 0.0:
        raise DomainError("lambda1 must be negative")
    return float(np.log(alpha1 / alpha2) / abs(lambda1))


def _order_side(model, y, x_star):
    if model.state_order.leq(y, x_star, slack=1e-9 * (1 + np.max(np.abs(x_star)))):
        return SIDE_BELOW
    if model.state_order.leq(x_star, y, slack=1e-9 * (1 + np.max(np.abs(x_star)))):
        return SIDE_ABOVE
    return SIDE_UNKNOWN


def _default_radius(model, spec, opts):
    pts = [spec.x_star] + [np.asarray(e, float) for e in opts.other_equilibria]
    if len(pts) > 1:
        lo = np.min(pts, axis=0)
        hi = np.max(pts, axis=0)
        diam = float(np.linalg.norm(hi - lo))
        if diam > 0.0:
            return 4.0 * diam
    return 2.0 * model.state_domain.diameter


def laplace_average_s1(model: VectorFieldModel, p, spec: SpectralData, x,
                       opts: Optional[LaplaceOptions] = None) -> EigenfunctionSample:
    """Eigenfunction value at x from the rescaled trajectory average.

    Checkpoints are spaced one dominant time constant apart; the run stops
    at the requested tolerance, at the estimate plateau inside the linear
    zone, or with a Diverged marker when the trajectory leaves the basin
    (domain exit, divergence radius, capture by a known other equilibrium,
    or sustained growth of the distance to the equilibrium).
    """
    opts = opts or LaplaceOptions()
    x = np.asarray(x, float)
    lam1, w1, x_star = spec.lambda1, spec.w1, spec.x_star
    check_dt = opts.check_dt or 1.0 / abs(lam1)
    t_max = opts.t_max or 40.0 / abs(lam1)
    radius = opts.radius or _default_radius(model, spec, opts)
    scale = 1.0 + float(np.linalg.norm(x_star))
    others = [np.asarray(e, float) for e in opts.other_equilibria
              if np.linalg.norm(np.asarray(e, float) - x_star) > 1e-6 * scale]

    if not model.state_domain.contains(x):
        return EigenfunctionSample(x, None, 0.0, np.inf, DIVERGED,
                                   _order_side(model, x, x_star), x)

    rhs = lambda t, y: model.f(y, p, np.zeros(model.input_dim))
    stepper = Dopri5(rhs, 0.0, x, rtol=opts.rtol, atol=opts.atol)
    est_prev = float(w1 @ (x - x_star))
    best_est, best_change, best_t = est_prev, np.inf, 0.0
    dist_hist = [float(np.linalg.norm(x - x_star))]
    hard_stop = 4.0 * t_max
    t_next = check_dt

    def finish(est, t, change):
        res = change / (abs(est) + opts.abs_floor)
        return EigenfunctionSample(x, est, t, res, CONVERGED, probe_final=stepper.y.copy())

    def diverged():
        y = stepper.y.copy()
        return EigenfunctionSample(x, None, stepper.t, np.inf, DIVERGED,
                                   _order_side(model, y, x_star), y)

    while stepper.t < hard_stop:
        try:
            seg = stepper.step(hard_stop)
        except StepFailureError:
            return diverged()
        if not model.state_domain.contains(stepper.y):
            return diverged()
        while t_next <= seg.t1 + 1e-12:
            y_q = seg.eval(t_next) if t_next < seg.t1 else stepper.y
            dist = float(np.linalg.norm(y_q - x_star))
            if dist > radius:
                return diverged()
            for eq in others:
                if np.linalg.norm(y_q - eq) < 1e-3 * (1.0 + np.linalg.norm(eq)):
                    return diverged()
            est = float(np.exp(-lam1 * t_next) * (w1 @ (y_q - x_star)))
            change = abs(est - est_prev)
            if change <= opts.tol * abs(est) + opts.abs_floor:
                return finish(est, t_next, change)
            if change < best_change:
                best_est, best_change, best_t = est, change, t_next
            elif dist <= 1e-3 * scale and change > 2.0 * best_change:
                # amplified-noise regime: the estimate stopped improving
                return finish(best_est, best_t, best_change)
            dist_hist.append(dist)
            if len(dist_hist) > 9:
                ref = dist_hist[-9]
                if (dist > 1.01 * ref and dist > 0.25 * scale
                        and best_change > 0.1 * abs(best_est)):
                    return diverged()
            if t_next >= t_max and dist >= dist_hist[max(0, len(dist_hist) - 6)] * 0.999:
                return diverged()
            est_prev = est
            t_next += check_dt
    return finish(best_est, best_t, best_change)


# ---------------------------------------------------------------------------
# Grid sampling and level sets

@dataclass
class ScalarField2D:
    """Eigenfunction samples on a rectangular grid (ij indexing)."""

    x_coords: np.ndarray
    y_coords: np.ndarray
    values: np.ndarray    # shape (nx, ny); nan where diverged
    status: np.ndarray    # same shape, strings

    def rows(self):
        for i, xv in enumerate(self.x_coords):
            for j, yv in enumerate(self.y_coords):
                yield xv, yv, self.values[i, j], self.status[i, j]


_POOL_STATE: dict = {}


def _pool_init(model, p, spec, opts):
    _POOL_STATE.update(model=model, p=p, spec=spec, opts=opts)


def _pool_eval(points):
    st = _POOL_STATE
    out = []
    for pt in points:
        s = laplace_average_s1(st["model"], st["p"], st["spec"], pt, st["opts"])
        out.append((s.value if not s.diverged else np.nan, s.status))
    return out


def sample_s1_grid(model, p, spec, bbox: Box, shape, lap_opts=None,
                   workers=1) -> ScalarField2D:
    """Evaluate the eigenfunction on a grid, optionally across processes."""
    nx, ny = (shape, shape) if np.isscalar(shape) else shape
    xs = np.linspace(bbox.lo[0], bbox.hi[0], nx)
    ys = np.linspace(bbox.lo[1], bbox.hi[1], ny)
    pts = [np.array([xv, yv]) for xv in xs for yv in ys]
    lap_opts = lap_opts or LaplaceOptions()
    if workers > 1:
        chunks = [pts[i::workers * 4] for i in range(workers * 4)]
        ctx = mp.get_context("fork")
        with ctx.Pool(workers, initializer=_pool_init,
                      initargs=(model, p, spec, lap_opts)) as pool:
            results = pool.map(_pool_eval, chunks)
        flat: list = [None] * len(pts)
        for ci, chunk in enumerate(chunks):
            for k in range(len(chunk)):
                flat[ci + k * workers * 4] = results[ci][k]
    else:
        _pool_init(model, p, spec, lap_opts)
        flat = _pool_eval(pts)
    values = np.array([v for v, _ in flat]).reshape(nx, ny)
    status = np.array([s for _, s in flat]).reshape(nx, ny)
    return ScalarField2D(xs, ys, values, status)


def isostable_levelset(model, p, spec, alpha, bbox: Box, resolution,
                       lap_opts=None, workers=1):
    """Polyline(s) of the eigenfunction level set s1 = alpha in 2-D.

    For state dimension other than two the raw sampled field is returned
    instead of polylines.
    """
    n = (resolution, resolution) if np.isscalar(resolution) else resolution
    if min(n) < 8:
        raise ValueError("resolution must be at least 8 per axis")
    field = sample_s1_grid(model, p, spec, bbox, n, lap_opts, workers)
    if model.state_dim != 2:
        return field
    mask = field.status != CONVERGED
    lines = marching_squares(field.x_coords, field.y_coords, field.values,
                             float(alpha), mask=mask)
    if not lines:
        raise EmptyLevelSetError(f"no crossing of level {alpha:g} on the grid")
    return lines
