"""Information matrix, log R-loss, barrier and gradient kernels.

Each candidate point contributes ``B_j = U_j^T W^{-1} U_j`` with
``U_j = Z(u_j)`` and ``W`` the working error matrix (``R0`` by default).
``B_j`` has rank at most ``m``, so the context stores the thin factor
``F_j = (C^{-1} U_j)^T`` (``W = C C^T``) with ``B_j = F_j F_j^T`` instead of
the full ``q x q`` matrices.  Sensitivities then cost ``O(N q^2 m)``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .model import CovarianceSpec, DesignSpace, ModelError, ModelSpec, z_matrix

# condition number (1-norm, after Jacobi scaling) above which I(w) counts as singular
SINGULAR_COND = 1e14


class SingularInformationError(ArithmeticError):
    """``I(w)`` is singular or numerically so; the R-loss is infinite."""


class InfeasibleWeightsError(ValueError):
    """A weight vector left the open simplex where the barrier is defined."""


@dataclass(frozen=True, eq=False)
class InfoContext:
    """Precomputed, weight-independent data for one design problem.

    Attributes
    ----------
    F : ndarray, shape (N, q, k)
        Thin factors with ``B_j = F_j F_j^T``.  ``k = m`` for a plain
        context; orbit-reduced contexts stack the factors of every orbit
        member (zero-padded) so ``k`` can be larger.
    working : str
        ``"R0"`` or ``"V0"``: which error matrix was inverted.
    """

    F: np.ndarray
    working: str = "R0"

    def __post_init__(self):
        F = np.asarray(self.F, dtype=float)
        if F.ndim != 3:
            raise ValueError("factor array must have shape (N, q, k)")
        F.setflags(write=False)
        object.__setattr__(self, "F", F)

    @property
    def N(self) -> int:
        return self.F.shape[0]

    @property
    def q(self) -> int:
        return self.F.shape[1]

    @property
    def B(self) -> np.ndarray:
        """All ``B_j`` as an ``(N, q, q)`` array (materialised on demand)."""
        return np.matmul(self.F, self.F.transpose(0, 2, 1))

    def B_j(self, j: int) -> np.ndarray:
        return self.F[j] @ self.F[j].T


@dataclass(frozen=True, eq=False)
class InfoState:
    """``I(w)``, its inverse ``A(w)`` and ``diag(A)``."""

    I: np.ndarray
    A: np.ndarray
    diagA: np.ndarray


def build_context(model: ModelSpec, space: DesignSpace, cov: CovarianceSpec,
                  use_correlation: bool = True) -> InfoContext:
    if cov.m != model.m:
        raise ModelError(f"covariance is {cov.m}x{cov.m} but the model has {model.m} responses")
    model.check_space(space)
    W = cov.R0 if use_correlation else cov.V0
    try:
        C = np.linalg.cholesky(W)
    except np.linalg.LinAlgError:
        raise ModelError("working error matrix is not positive definite") from None
    U = z_matrix(model, space.points)  # (N, m, q)
    # C^{-1} U_j for all j in one triangular solve
    N, m, q = U.shape
    CU = linalg.solve_triangular(C, U.transpose(1, 0, 2).reshape(m, N * q), lower=True)
    F = CU.reshape(m, N, q).transpose(1, 2, 0)
    return InfoContext(np.ascontiguousarray(F), "R0" if use_correlation else "V0")


def info_matrix(ctx: InfoContext, w) -> InfoState:
    """``I(w) = sum_j w_j B_j`` and its inverse.

    Raises SingularInformationError when the Jacobi-scaled ``I`` fails
    Cholesky or its 1-norm condition number exceeds ``SINGULAR_COND``.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (ctx.N,):
        raise InfeasibleWeightsError(f"expected {ctx.N} weights, got shape {w.shape}")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-8:
        raise InfeasibleWeightsError("weights must be non-negative and sum to 1")
    G = ctx.F.transpose(1, 0, 2).reshape(ctx.q, -1)
    Gw = (ctx.F * w[:, None, None]).transpose(1, 0, 2).reshape(ctx.q, -1)
    I = Gw @ G.T
    I = 0.5 * (I + I.T)
    dI = np.diag(I).copy()
    if np.any(dI <= 0):
        raise SingularInformationError("information matrix has a zero diagonal entry")
    s = 1.0 / np.sqrt(dI)
    Is = I * np.outer(s, s)
    try:
        c = linalg.cho_factor(Is, lower=True, check_finite=False)
    except linalg.LinAlgError:
        raise SingularInformationError("information matrix is not positive definite") from None
    As = linalg.cho_solve(c, np.eye(ctx.q), check_finite=False)
    As = 0.5 * (As + As.T)
    cond = np.abs(Is).sum(axis=0).max() * np.abs(As).sum(axis=0).max()
    if not np.isfinite(cond) or cond > SINGULAR_COND:
        raise SingularInformationError(f"information matrix condition estimate {cond:.3g}")
    A = As * np.outer(s, s)
    diagA = np.diag(A).copy()
    if np.any(diagA <= 0):
        raise SingularInformationError("non-positive diagonal in A(w)")
    return InfoState(I=I, A=A, diagA=diagA)


def log_loss(state: InfoState) -> float:
    """``phi(w) = sum_r log A_rr``."""
    return float(np.sum(np.log(state.diagA)))


def phi(ctx: InfoContext, w) -> float:
    """Log R-loss of ``w``; ``inf`` if the information matrix is singular."""
    try:
        return log_loss(info_matrix(ctx, w))
    except SingularInformationError:
        return float("inf")


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("ROPTD_THREADS", "1")))
    except ValueError:
        return 1


def _quad_terms(F: np.ndarray, A: np.ndarray, invdiag: np.ndarray) -> np.ndarray:
    # per-row reductions only, so a chunk boundary cannot change any d_j
    AF = np.matmul(A, F)
    return ((AF * AF).sum(axis=2) * invdiag).sum(axis=1)


def sensitivities(ctx: InfoContext, state: InfoState, threads: int | None = None) -> np.ndarray:
    """``d(w, j)`` for every ``j``.

    ``d_j = sum_r (A B_j A)_rr / A_rr - q``, evaluated as squared norms of
    the rows of ``A F_j``.  With ``threads > 1`` (default: ``ROPTD_THREADS``)
    the points are split into contiguous chunks; each ``d_j`` is computed
    independently so the result does not depend on the thread count.
    """
    threads = _threads() if threads is None else threads
    invdiag = 1.0 / state.diagA
    if threads <= 1 or ctx.N < 2 * threads:
        t = _quad_terms(ctx.F, state.A, invdiag)
    else:
        bounds = np.linspace(0, ctx.N, threads + 1).astype(int)
        with ThreadPoolExecutor(threads) as ex:
            parts = ex.map(lambda ab: _quad_terms(ctx.F[ab[0]:ab[1]], state.A, invdiag),
                           zip(bounds[:-1], bounds[1:]))
            t = np.concatenate(list(parts))
    return t - ctx.q


def barrier(w, t: float) -> float:
    """``h(w, t) = -(1/t) sum_j log w_j``."""
    w = np.asarray(w, dtype=float)
    if t <= 0:
        raise ValueError("barrier parameter t must be positive")
    if np.any(w <= 0):
        raise InfeasibleWeightsError("barrier undefined: some weight is <= 0")
    return float(-np.sum(np.log(w)) / t)


def expand_reduced(w_reduced) -> np.ndarray:
    """``(w_1..w_{N-1}) -> (w_1..w_{N-1}, 1 - sum)``."""
    w_reduced = np.asarray(w_reduced, dtype=float)
    return np.append(w_reduced, 1.0 - np.sum(w_reduced))


def phi1_and_grad(ctx: InfoContext, w_reduced, t: float):
    """Barrier objective ``phi + h`` and its gradient in the reduced weights.

    Returns ``(value, gradient, state, d)``.
    """
    w = expand_reduced(w_reduced)
    if np.any(w <= 0):
        raise InfeasibleWeightsError("iterate left the open simplex")
    state = info_matrix(ctx, w)
    d = sensitivities(ctx, state)
    value = log_loss(state) + barrier(w, t)
    # d phi / d w_j = -(d_j + q); eliminating w_N gives d_N - d_j
    g = (d[-1] - d[:-1]) + (1.0 / w[-1] - 1.0 / w[:-1]) / t
    return value, g, state, d


def phi1(ctx: InfoContext, w_reduced, t: float) -> float:
    w = expand_reduced(w_reduced)
    return log_loss(info_matrix(ctx, w)) + barrier(w, t)


def grad_phi1(ctx: InfoContext, w_reduced, t: float) -> np.ndarray:
    """Gradient of ``phi1`` with respect to ``w_1 .. w_{N-1}``."""
    return phi1_and_grad(ctx, w_reduced, t)[1]


def reduced_hessian_diag(ctx: InfoContext, w_reduced, t: float) -> np.ndarray:
    """Diagonal of the Hessian of ``phi1`` in the reduced weights.

    With ``P_j = A F_j`` the second derivatives of ``phi`` are
    ``phi_ij = sum_r [2 P_i[r] (F_i^T P_j) P_j[r]^T / A_rr
    - |P_i[r]|^2 |P_j[r]|^2 / A_rr^2]``; eliminating ``w_N`` gives
    ``phi_jj - 2 phi_jN + phi_NN`` plus the barrier term
    ``(1/w_j^2 + 1/w_N^2) / t``.
    """
    w = expand_reduced(w_reduced)
    state = info_matrix(ctx, w)
    inv = 1.0 / state.diagA
    P = np.matmul(state.A, ctx.F)  # (N, q, k)
    sq = np.einsum("jrk,jrk->jr", P, P)  # (A B_j A)_rr
    M = np.matmul(ctx.F.transpose(0, 2, 1), P)  # F_j^T A F_j
    PN = P[-1]
    MN = np.matmul(ctx.F.transpose(0, 2, 1), PN)  # F_j^T A F_N
    jj = 2 * np.einsum("jrk,jkl,jrl->jr", P, M, P) @ inv - (sq**2) @ inv**2
    jN = 2 * np.einsum("jrk,jkl,rl->jr", P, MN, PN) @ inv - (sq * sq[-1]) @ inv**2
    h = jj[:-1] - 2 * jN[:-1] + jj[-1] + (1.0 / w[:-1] ** 2 + 1.0 / w[-1] ** 2) / t
    return h
