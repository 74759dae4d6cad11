"""Log-barrier interior point method for R-optimal design weights.

The outer loop solves ``min phi(w) + h(w, t)`` on the simplex for
``t_k = t1 * lam**(k-1)``, warm-starting each stage from the previous one,
and stops as soon as ``max_j d(w, j) <= delta``.  The simplex equality is
removed by eliminating the last weight, and each stage is solved by BFGS
with a backtracking line search that never leaves the open simplex.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, asdict

import numpy as np

from .information import (
    InfeasibleWeightsError,
    InfoContext,
    SingularInformationError,
    expand_reduced,
    info_matrix,
    log_loss,
    phi1_and_grad,
    reduced_hessian_diag,
    sensitivities,
)
from .equivalence import support_points
from .model import DesignSpace

log = logging.getLogger(__name__)

STEP_CAP_SENTINEL = 1e6
SUPPORT_THRESHOLD = 1e-5
CLAMP_BELOW = 1e-14


@dataclass(frozen=True)
class SolverOptions:
    t1: float = 2.0
    lam: float = 2.0
    delta: float = 1e-8
    bfgs_grad_tol: float = 1e-10
    bfgs_max_iters: int = 5000
    max_outer_iters: int = 60
    step_shrink: float = 0.5
    armijo_c: float = 1e-4
    feasibility_margin: float = 0.99
    curvature_eps: float = 1e-12
    stall_window: int = 5
    stall_rtol: float = 1e-14
    support_threshold: float = SUPPORT_THRESHOLD

    def __post_init__(self):
        checks = [
            (self.t1 > 0, "t1 must be positive"),
            (self.lam > 1, "lam must exceed 1"),
            (self.delta > 0, "delta must be positive"),
            (self.bfgs_grad_tol > 0, "bfgs_grad_tol must be positive"),
            (self.bfgs_max_iters >= 1, "bfgs_max_iters must be >= 1"),
            (self.max_outer_iters >= 1, "max_outer_iters must be >= 1"),
            (0 < self.step_shrink < 1, "step_shrink must lie in (0, 1)"),
            (0 < self.armijo_c < 1, "armijo_c must lie in (0, 1)"),
            (0 < self.feasibility_margin < 1, "feasibility_margin must lie in (0, 1)"),
            (0 <= self.support_threshold < 1, "support_threshold must lie in [0, 1)"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class StageRecord:
    t: float
    inner_iters: int
    phi1: float
    phi: float
    max_d: float
    status: str


@dataclass
class SolveReport:
    """Result of a design computation.

    ``weights`` are indexed like the context that was solved (orbit
    representatives for a reduced problem).  ``support`` lists
    ``(point, weight)`` pairs when a design space was supplied.
    """

    weights: np.ndarray
    loss: float
    max_d: float
    converged: bool
    d_values: np.ndarray
    outer_trace: list[StageRecord] = field(default_factory=list)
    support: list[tuple[tuple[float, ...], float]] = field(default_factory=list)
    algorithm: str = "interior"
    working: str = "R0"
    options: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def n_support(self) -> int:
        return int(np.sum(self.weights > self.options.get("support_threshold", SUPPORT_THRESHOLD)))


@dataclass
class BFGSResult:
    x: np.ndarray
    value: float
    grad: np.ndarray
    iterations: int
    status: str  # "gradient", "stalled", "maxiter", "linesearch"


def feasible_step_cap(w_reduced, direction, margin: float = 0.99) -> float:
    """Largest safe step along ``direction`` that keeps every weight positive.

    Includes the implied last weight ``1 - sum(w_reduced)``.  Returns
    ``margin`` times the distance to the boundary, ``STEP_CAP_SENTINEL`` if
    no weight decreases, and 0 for a zero direction.
    """
    w = np.asarray(w_reduced, dtype=float)
    p = np.asarray(direction, dtype=float)
    if not np.any(p):
        return 0.0
    vals = np.append(w, 1.0 - w.sum())
    slopes = np.append(p, -p.sum())
    dec = slopes < 0
    if not np.any(dec):
        return STEP_CAP_SENTINEL
    amax = np.min(vals[dec] / -slopes[dec])
    return float(min(margin * amax, STEP_CAP_SENTINEL))


def _line_search(ctx, x, f, g, p, t, opts):
    """Backtracking search from ``min(1, cap)`` along descent direction ``p``.

    A step is accepted on the Armijo test, or when the directional
    derivative at the trial point is still ``<= c * g.p``.  For a convex
    objective the second test implies the Armijo condition, and unlike the
    first it stays decisive once function differences reach rounding level.
    """
    slope = g @ p
    alpha = min(1.0, feasible_step_cap(x, p, opts.feasibility_margin))
    while alpha > 0 and alpha * np.max(np.abs(p)) > 1e-300:
        xn = x + alpha * p
        if np.all(expand_reduced(xn) > 0):
            try:
                fn, gn, _, _ = phi1_and_grad(ctx, xn, t)
            except SingularInformationError:
                fn = np.inf
            if np.isfinite(fn):
                if fn <= f + opts.armijo_c * alpha * slope or gn @ p <= opts.armijo_c * slope:
                    return xn, fn, gn
        alpha *= opts.step_shrink
    return None


def _initial_metric(ctx, x, t):
    h = reduced_hessian_diag(ctx, x, t)
    return 1.0 / np.maximum(h, 1e-12 * max(1.0, h.max()))


def bfgs_minimize(ctx: InfoContext, w_start, t: float, opts: SolverOptions = SolverOptions()) -> BFGSResult:
    """Minimise ``phi1(., t)`` over the reduced weights with BFGS.

    The inverse Hessian starts from the reciprocal of the exact Hessian
    diagonal (barrier curvature spans many orders of magnitude across
    coordinates, so the identity is a poor start) and is only updated when
    ``s.y`` is safely positive.  Stops on ``|g|_inf <= bfgs_grad_tol``, on
    a line-search failure, or when neither the objective nor the gradient
    norm has improved over ``stall_window`` iterations.
    """
    x = np.array(w_start, dtype=float)
    if np.any(expand_reduced(x) <= 0):
        raise InfeasibleWeightsError("BFGS start point is not strictly feasible")
    f, g, _, _ = phi1_and_grad(ctx, x, t)
    H0 = _initial_metric(ctx, x, t)
    H = np.diag(H0)
    g_hist = [np.max(np.abs(g))]
    f_hist = [f]
    status = "maxiter"
    it = 0
    while it < opts.bfgs_max_iters:
        gnorm = np.max(np.abs(g))
        if gnorm <= opts.bfgs_grad_tol:
            status = "gradient"
            break
        p = -H @ g
        if g @ p >= 0:
            H = np.diag(H0)
            p = -H0 * g
        step = _line_search(ctx, x, f, g, p, t, opts)
        if step is None:
            # retry once with a reset metric
            H0 = _initial_metric(ctx, x, t)
            H = np.diag(H0)
            step = _line_search(ctx, x, f, g, -H0 * g, t, opts)
        if step is None:
            status = "linesearch"
            break
        it += 1
        xn, fn, gn = step
        s = xn - x
        y = gn - g
        sy = s @ y
        if sy > opts.curvature_eps * np.linalg.norm(s) * np.linalg.norm(y):
            Hy = H @ y
            rho = 1.0 / sy
            H += (rho * rho * (y @ Hy) + rho) * np.outer(s, s) - rho * (np.outer(Hy, s) + np.outer(s, Hy))
        x, f, g = xn, fn, gn
        f_hist.append(f)
        g_hist.append(np.max(np.abs(g)))
        w = opts.stall_window
        if len(f_hist) > w:
            no_f = f_hist[-1 - w] - f <= opts.stall_rtol * max(1.0, abs(f))
            no_g = min(g_hist[-w:]) >= min(g_hist[:-w])
            if no_f and no_g:
                status = "stalled"
                break
    return BFGSResult(x=x, value=f, grad=g, iterations=it, status=status)


def _support(w, space, opts):
    return support_points(w, space, opts.support_threshold) if space is not None else []


def finalize_weights(w) -> np.ndarray:
    """Clamp weights below ``CLAMP_BELOW`` to zero and renormalise."""
    w = np.where(np.asarray(w, dtype=float) < CLAMP_BELOW, 0.0, w)
    return w / w.sum()


def solve(ctx: InfoContext, opts: SolverOptions = SolverOptions(), space: DesignSpace | None = None,
          warm_start: bool = True) -> SolveReport:
    """Compute an R-optimal design for ``ctx`` by the barrier method."""
    N = ctx.N
    w0 = np.full(N, 1.0 / N)
    state = info_matrix(ctx, w0)  # raises on a singular uniform design
    if N == 1:
        d = sensitivities(ctx, state)
        return SolveReport(weights=np.ones(1), loss=log_loss(state), max_d=float(d.max()),
                           converged=bool(d.max() <= opts.delta), d_values=d,
                           support=_support(np.ones(1), space, opts),
                           working=ctx.working, options=opts.to_dict())
    x = w0[:-1].copy()
    trace: list[StageRecord] = []
    converged = False
    t = opts.t1
    for k in range(opts.max_outer_iters):
        start = x if warm_start else w0[:-1].copy()
        res = bfgs_minimize(ctx, start, t, opts)
        x = res.x
        w = expand_reduced(x)
        state = info_matrix(ctx, w)
        d = sensitivities(ctx, state)
        max_d = float(d.max())
        trace.append(StageRecord(t=t, inner_iters=res.iterations, phi1=float(res.value),
                                 phi=log_loss(state), max_d=max_d, status=res.status))
        log.debug("stage %d t=%.3g iters=%d max_d=%.3e %s", k + 1, t, res.iterations, max_d, res.status)
        if max_d <= opts.delta:
            converged = True
            break
        t *= opts.lam
    w = finalize_weights(expand_reduced(x))
    state = info_matrix(ctx, w)
    d = sensitivities(ctx, state)
    max_d = float(d.max())
    return SolveReport(
        weights=w,
        loss=log_loss(state),
        max_d=max_d,
        converged=converged and max_d <= opts.delta,
        d_values=d,
        outer_trace=trace,
        support=_support(w, space, opts),
        working=ctx.working,
        options=opts.to_dict(),
        extra={"bfgs_iterations": sum(r.inner_iters for r in trace)},
    )
