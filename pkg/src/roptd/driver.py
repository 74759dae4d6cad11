"""Solve a configured problem end to end."""

from __future__ import annotations

import logging
from dataclasses import replace

import numpy as np

from .config import ProblemConfig
from .equivalence import support_points
from .information import InfoContext, build_context, info_matrix, log_loss, sensitivities
from .interior import SolveReport, solve
from .multiplicative import solve_multiplicative
from .symmetry import OrbitReduction, expand_reduced_weights, reduce_by_reflections, reduced_context

log = logging.getLogger(__name__)


def problem_context(cfg: ProblemConfig, use_correlation: bool = True) -> InfoContext:
    return build_context(cfg.model, cfg.space, cfg.covariance, use_correlation=use_correlation)


def orbit_reduction(cfg: ProblemConfig, axes) -> OrbitReduction:
    return reduce_by_reflections(cfg.space, cfg.axis_indices(axes), cfg.model)


def solve_problem(cfg: ProblemConfig, algorithm: str | None = None, axes=None,
                  delta: float | None = None, use_correlation: bool = True) -> SolveReport:
    """Solve ``cfg``, optionally over reflection orbits.

    The returned report always holds full-grid weights and ``d`` values;
    ``extra["symmetry"]`` records whether a reduction was used.
    """
    algorithm = algorithm or cfg.algorithm
    axes = list(cfg.symmetry if axes is None else axes)
    space = cfg.space
    ctx = problem_context(cfg, use_correlation)
    red = orbit_reduction(cfg, axes) if axes else None
    work = reduced_context(ctx, red) if red is not None else ctx

    if algorithm == "interior":
        opts = cfg.solver if delta is None else replace(cfg.solver, delta=delta)
        rep = solve(work, opts)
        threshold = opts.support_threshold
    elif algorithm == "multiplicative":
        opts = cfg.multiplicative if delta is None else replace(cfg.multiplicative, delta=delta)
        rep = solve_multiplicative(work, opts)
        threshold = opts.support_threshold
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")

    w = expand_reduced_weights(red, rep.weights) if red is not None else rep.weights
    state = info_matrix(ctx, w)
    d = sensitivities(ctx, state)
    max_d = float(d.max())
    extra = dict(rep.extra)
    extra["symmetry"] = {
        "applied": red is not None,
        "axes": axes,
        "n_orbits": red.n_orbits if red is not None else ctx.N,
        "N": ctx.N,
    }
    log.info("%s: max_d=%.3e support=%d", algorithm, max_d, int(np.sum(w > threshold)))
    return SolveReport(
        weights=w,
        loss=log_loss(state),
        max_d=max_d,
        converged=bool(rep.converged and max_d <= opts.delta),
        d_values=d,
        outer_trace=rep.outer_trace,
        support=support_points(w, space, threshold),
        algorithm=algorithm,
        working=ctx.working,
        options=rep.options,
        extra=extra,
    )
