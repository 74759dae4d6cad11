"""Equivalence-theorem checks for R-optimal designs.

A design ``w`` is R-optimal iff ``d(w, j) <= 0`` for every candidate point
with equality on its support.  Numerical designs are accepted when
``max_j d(w, j) <= delta``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .information import InfoContext, info_matrix, sensitivities
from .model import DesignSpace

DEFAULT_SUPPORT_THRESHOLD = 1e-5
# designs tabulated to 4 decimals are checked at this looser delta
PUBLISHED_DELTA = 1e-2


@dataclass
class EquivalenceReport:
    d_values: np.ndarray
    max_d: float
    argmax_j: int
    support_indices: list[int]
    delta_used: float
    support_abs_d: float = 0.0
    label: str = "solver"
    notes: list[str] = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.max_d <= self.delta_used


def directional_d(ctx: InfoContext, w, j: int) -> float:
    """``d(w, j) = sum_r (A B_j A)_rr / A_rr - q`` for a single index."""
    state = info_matrix(ctx, np.asarray(w, dtype=float))
    P = state.A @ ctx.F[j]
    return float(np.sum(np.sum(P * P, axis=1) / state.diagA) - ctx.q)


def verify_optimality(ctx: InfoContext, w, delta: float = 1e-8,
                      threshold: float = DEFAULT_SUPPORT_THRESHOLD,
                      label: str = "solver") -> EquivalenceReport:
    """Evaluate ``d`` on every point and test ``max d <= delta``.

    Support points with ``|d| > delta + 1e-9`` are reported in ``notes``
    rather than treated as failures.
    """
    w = np.asarray(w, dtype=float)
    state = info_matrix(ctx, w)
    d = sensitivities(ctx, state)
    supp = [int(j) for j in np.flatnonzero(w > threshold)]
    j = int(np.argmax(d))
    sabs = float(np.max(np.abs(d[supp]))) if supp else 0.0
    notes = []
    if sabs > delta + 1e-9:
        notes.append(f"|d| at support reaches {sabs:.3e} (> delta + 1e-9)")
    return EquivalenceReport(d_values=d, max_d=float(d[j]), argmax_j=j,
                             support_indices=supp, delta_used=float(delta),
                             support_abs_d=sabs, label=label, notes=notes)


def verify_published(ctx: InfoContext, w, threshold: float = DEFAULT_SUPPORT_THRESHOLD) -> EquivalenceReport:
    """Check a design copied from a table rounded to 4 decimals."""
    w = np.asarray(w, dtype=float)
    return verify_optimality(ctx, w / w.sum(), PUBLISHED_DELTA, threshold, label="published-design check")


def support_points(w, space: DesignSpace, threshold: float = DEFAULT_SUPPORT_THRESHOLD):
    """``(point, weight)`` for every ``w_j > threshold``, sorted by coordinates."""
    w = np.asarray(w, dtype=float)
    rows = [(tuple(float(v) for v in space.points[j]), float(w[j]))
            for j in np.flatnonzero(w > threshold)]
    rows.sort(key=lambda r: r[0])
    return rows


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def export_d_surface(ctx: InfoContext, w, space: DesignSpace, path) -> Path:
    """Write ``x1..xp,weight,d`` rows in grid order (17 significant digits)."""
    w = np.asarray(w, dtype=float)
    if ctx.N != space.N:
        raise ValueError("context and design space sizes differ")
    d = sensitivities(ctx, info_matrix(ctx, w))
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(space.names + ["weight", "d"])
        for x, wj, dj in zip(space.points, w, d):
            out.writerow([_fmt(v) for v in x] + [_fmt(wj), _fmt(dj)])
    return path
