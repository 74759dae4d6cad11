"""Scale and reflection structure of design problems.

A diagonal ``T`` (scale) or an axis flip ``T_l`` (reflection) transfers
optimal designs whenever ``Z(Tx) = Z(x) Q`` holds on the whole grid for a
fixed diagonal ``Q``.  For reflections with ``Q = diag(+-1)`` the optimum can
be taken symmetric, so the weight vector collapses to one weight per orbit of
the reflection group.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .information import InfoContext, build_context, phi
from .model import CovarianceSpec, DesignMeasure, DesignSpace, ModelSpec, z_matrix

Q_TOL = 1e-10


class SymmetryError(ValueError):
    """The requested symmetry does not hold; ``witness`` is a failing point if known."""

    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


@dataclass(frozen=True)
class Transform:
    """``kind="scale"`` with positive ``scales`` or ``kind="reflection"`` about ``axis`` (0-based)."""

    kind: str
    scales: tuple[float, ...] = ()
    axis: int = 0

    def __post_init__(self):
        if self.kind == "scale":
            sc = tuple(float(s) for s in self.scales)
            if not sc or any(s <= 0 for s in sc):
                raise ValueError("scale factors must be positive")
            object.__setattr__(self, "scales", sc)
        elif self.kind == "reflection":
            if self.axis < 0:
                raise ValueError("reflection axis must be a factor index")
        else:
            raise ValueError(f"unknown transform kind {self.kind!r}")

    @classmethod
    def scale(cls, scales):
        return cls("scale", scales=tuple(scales))

    @classmethod
    def reflection(cls, axis):
        return cls("reflection", axis=int(axis))

    def apply(self, x) -> np.ndarray:
        x = np.array(x, dtype=float)
        if self.kind == "scale":
            if x.shape[-1] != len(self.scales):
                raise ValueError("scale vector length does not match point dimension")
            return x * np.asarray(self.scales)
        x[..., self.axis] = -x[..., self.axis]
        return x


def _point_keys(P: np.ndarray) -> set:
    return {tuple(x) for x in np.round(P, 9)}


def _same_point_set(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape and _point_keys(a) == _point_keys(b)


def _probe_point(space: DesignSpace) -> np.ndarray:
    mins = np.min(np.abs(space.points), axis=1)
    j = int(np.argmax(mins))
    if mins[j] > 0:
        return space.points[j]
    # off-grid probe; the identity is polynomial so any generic point will do
    return 0.5 + 0.5 * np.sqrt(np.arange(2, space.p + 2)) / np.sqrt(space.p + 2)


def detect_Q(model: ModelSpec, space: DesignSpace, T: Transform) -> np.ndarray:
    """Diagonal of ``Q`` with ``Z(Tx) = Z(x) Q`` on every grid point.

    Raises SymmetryError if no such ``Q`` exists, if the grid is not closed
    under a reflection, or if the model uses a nonlinear family.
    """
    if any(r.kind != "monomial" for r in model.responses):
        raise SymmetryError("Q detection is only supported for monomial bases; "
                            "nonlinear families declare no transformation rule")
    model.check_space(space)
    if T.kind == "reflection":
        if T.axis >= space.p:
            raise SymmetryError(f"reflection axis {T.axis} out of range")
        if not _same_point_set(T.apply(space.points), space.points):
            raise SymmetryError(f"design space is not symmetric in factor {space.names[T.axis]}")
    x0 = _probe_point(space)
    Z0 = z_matrix(model, x0)
    ZT = z_matrix(model, T.apply(x0))
    rows = np.repeat(np.arange(model.m), model.dims)
    cols = np.arange(model.q)
    base = Z0[rows, cols]
    if np.any(base == 0):
        raise SymmetryError("no generic probe point available", witness=tuple(x0))
    Q = ZT[rows, cols] / base
    if T.kind == "reflection":
        if np.max(np.abs(np.abs(Q) - 1)) > Q_TOL:
            raise SymmetryError("reflection Q has entries other than +-1")
        Q = np.sign(Q)
    elif np.any(Q == 0):
        raise SymmetryError("Q is singular")
    Z = z_matrix(model, space.points)
    ZTx = z_matrix(model, T.apply(space.points))
    err = np.abs(ZTx - Z * Q).max(axis=(1, 2))
    scale = np.maximum(1.0, np.abs(ZTx).max(axis=(1, 2)))
    bad = np.flatnonzero(err > Q_TOL * scale)
    if bad.size:
        j = int(bad[0])
        raise SymmetryError(f"Z(Tx) = Z(x)Q fails at {tuple(space.points[j])}",
                            witness=tuple(space.points[j]))
    return Q


@dataclass(frozen=True, eq=False)
class OrbitReduction:
    """Partition of grid indices into reflection orbits.

    Orbits are ordered by their largest member index so the orbit holding
    the last grid point is last.
    """

    orbits: tuple[tuple[int, ...], ...]
    axes: tuple[int, ...]
    N: int

    @property
    def representative_indices(self) -> list[int]:
        return [o[0] for o in self.orbits]

    @property
    def multiplicities(self) -> np.ndarray:
        return np.array([len(o) for o in self.orbits])

    @property
    def n_orbits(self) -> int:
        return len(self.orbits)


def reflection_orbits(space: DesignSpace, axes) -> OrbitReduction:
    axes = tuple(sorted(set(int(a) for a in axes)))
    lookup = {tuple(np.round(x, 9)): j for j, x in enumerate(space.points)}
    seen = np.zeros(space.N, dtype=bool)
    orbits = []
    for j in range(space.N):
        if seen[j]:
            continue
        members = set()
        for flips in itertools.product((1.0, -1.0), repeat=len(axes)):
            x = space.points[j].copy()
            x[list(axes)] *= flips
            key = tuple(np.round(x, 9))
            if key not in lookup:
                raise SymmetryError(f"reflection image of {tuple(space.points[j])} is not on the grid",
                                    witness=tuple(space.points[j]))
            members.add(lookup[key])
        idx = sorted(members)
        seen[idx] = True
        # representative first: lexicographically smallest point
        rep = min(idx, key=lambda i: tuple(space.points[i]))
        orbits.append(tuple([rep] + [i for i in idx if i != rep]))
    orbits.sort(key=max)
    return OrbitReduction(tuple(orbits), axes, space.N)


def reduce_by_reflections(space: DesignSpace, axes, model: ModelSpec) -> OrbitReduction:
    """Orbits of the reflection group on ``axes`` after checking each axis has a +-1 ``Q``."""
    for a in axes:
        detect_Q(model, space, Transform.reflection(a))
    return reflection_orbits(space, axes)


def reduced_context(ctx: InfoContext, red: OrbitReduction) -> InfoContext:
    """Context over orbit weights with ``B_k = mean of B_j over orbit k``.

    Each reduced factor stacks ``F_j / sqrt(|orbit|)`` of the members
    side by side (zero padded), so ``F_k F_k^T`` is exactly the orbit mean.
    """
    if ctx.N != red.N:
        raise ValueError("reduction and context disagree on N")
    size = int(red.multiplicities.max())
    k = ctx.F.shape[2]
    F = np.zeros((red.n_orbits, ctx.q, k * size))
    for o, members in enumerate(red.orbits):
        c = 1.0 / np.sqrt(len(members))
        for s, j in enumerate(members):
            F[o, :, s * k:(s + 1) * k] = c * ctx.F[j]
    return InfoContext(F, ctx.working)


def expand_reduced_weights(red: OrbitReduction, omega) -> np.ndarray:
    """Spread each orbit weight equally over its members."""
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (red.n_orbits,):
        raise ValueError(f"expected {red.n_orbits} orbit weights")
    w = np.zeros(red.N)
    for o, members in enumerate(red.orbits):
        w[list(members)] = omega[o] / len(members)
    return w


def orbit_weights(red: OrbitReduction, w) -> np.ndarray:
    """Total weight per orbit (inverse of ``expand_reduced_weights`` on symmetric ``w``)."""
    w = np.asarray(w, dtype=float)
    return np.array([w[list(o)].sum() for o in red.orbits])


def correlation_sign_equivalent(R0, R1, tol: float = 1e-12):
    """Sign vector ``s`` (``s[0] = +1``) with ``R0 = diag(s) R1 diag(s)``, or None."""
    R0 = np.asarray(R0, dtype=float)
    R1 = np.asarray(R1, dtype=float)
    if R0.shape != R1.shape:
        raise ValueError("correlation matrices differ in size")
    m = R0.shape[0]
    for tail in itertools.product((1.0, -1.0), repeat=m - 1):
        s = np.array((1.0,) + tail)
        if np.max(np.abs(R0 - np.outer(s, s) * R1)) <= tol:
            return s
    return None


def phi_symmetry_holds(model: ModelSpec, space: DesignSpace, cov: CovarianceSpec, T,
                       n_samples: int = 20, rtol: float = 1e-9, seed: int = 0) -> bool:
    """Check a general point symmetry ``x -> T x`` through the loss.

    ``T`` is a ``p x p`` matrix.  The grid must map onto itself, and the
    loss built from the transformed points must equal the original loss on
    ``n_samples`` random interior weight vectors.  This only verifies a
    user-supplied symmetry; it does not reduce the problem.
    """
    T = np.asarray(T, dtype=float)
    moved = space.points @ T.T
    if not _same_point_set(moved, space.points):
        return False
    ctx = build_context(model, space, cov)
    ctx_T = build_context(model, DesignSpace(moved), cov)
    rng = np.random.default_rng(seed)
    for _ in range(n_samples):
        w = rng.dirichlet(np.ones(space.N))
        a, b = phi(ctx, w), phi(ctx_T, w)
        if not np.isclose(a, b, rtol=rtol, atol=rtol):
            return False
    return True


def symmetric_measure(red: OrbitReduction, omega, space: DesignSpace) -> DesignMeasure:
    return DesignMeasure(expand_reduced_weights(red, omega), space)
