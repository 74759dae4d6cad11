"""Multiplicative weight-update baseline.

Iterates ``w_j <- w_j * ((d(w, j) + q) / q) ** damping`` and renormalises.
``d + q >= 0`` keeps weights non-negative, and the fixed points with
``max d <= 0`` are exactly the equivalence-theorem optima.  Used to
cross-check the interior point solver; it is slow on nonlinear models.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .equivalence import support_points
from .information import InfoContext, info_matrix, log_loss, sensitivities
from .interior import SolveReport, StageRecord
from .model import DesignSpace

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MultOptions:
    max_iters: int = 200_000
    delta: float = 1e-8
    damping: float = 1.0
    support_threshold: float = 1e-5
    trace_every: int = 1000

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


def multiplicative_step(ctx: InfoContext, w, damping: float = 1.0) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    d = sensitivities(ctx, info_matrix(ctx, w))
    w = w * np.maximum((d + ctx.q) / ctx.q, 0.0) ** damping
    return w / w.sum()


def solve_multiplicative(ctx: InfoContext, opts: MultOptions = MultOptions(),
                         space: DesignSpace | None = None, w0=None) -> SolveReport:
    w = np.full(ctx.N, 1.0 / ctx.N) if w0 is None else np.asarray(w0, dtype=float) / np.sum(w0)
    state = info_matrix(ctx, w)
    d = sensitivities(ctx, state)
    loss = log_loss(state)
    increases = 0
    trace = []
    converged = False
    it = 0
    while True:
        max_d = float(d.max())
        if max_d <= opts.delta:
            converged = True
            break
        if it >= opts.max_iters:
            break
        w = w * np.maximum((d + ctx.q) / ctx.q, 0.0) ** opts.damping
        w /= w.sum()
        it += 1
        state = info_matrix(ctx, w)
        d = sensitivities(ctx, state)
        new_loss = log_loss(state)
        if new_loss > loss + 1e-12 * max(1.0, abs(loss)):
            increases += 1
        loss = new_loss
        if it % opts.trace_every == 0:
            trace.append(StageRecord(t=float(it), inner_iters=opts.trace_every, phi1=loss,
                                     phi=loss, max_d=float(d.max()), status="running"))
    log.debug("multiplicative: %d iterations, max_d=%.3e", it, d.max())
    trace.append(StageRecord(t=float(it), inner_iters=it % opts.trace_every or opts.trace_every,
                             phi1=loss, phi=loss, max_d=float(d.max()),
                             status="converged" if converged else "maxiter"))
    supp = support_points(w, space, opts.support_threshold) if space is not None else []
    return SolveReport(weights=w, loss=loss, max_d=float(d.max()), converged=converged,
                       d_values=d, outer_trace=trace, support=supp, algorithm="multiplicative",
                       working=ctx.working, options=opts.to_dict(),
                       extra={"iterations": it, "loss_increases": increases})
