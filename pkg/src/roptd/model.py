"""Design spaces, multi-response bases and error covariance.

A problem is a discrete candidate set ``S_N`` (built as a full grid over
per-factor level sets), ``m`` response bases ``f_1 .. f_m`` and an ``m x m``
error covariance ``V0``.  Everything here is immutable once built.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class ModelError(ValueError):
    """Invalid model, space or covariance input."""


@dataclass(frozen=True)
class FactorSpec:
    """One design variable: a continuous interval grid or categorical levels."""

    name: str
    kind: str = "continuous"
    lower: float = 0.0
    upper: float = 1.0
    levels: int = 2
    values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "continuous":
            if not self.lower < self.upper:
                raise ModelError(
                    f"factor {self.name!r}: lower ({self.lower}) must be < upper ({self.upper})"
                )
            if int(self.levels) != self.levels or self.levels < 2:
                raise ModelError(f"factor {self.name!r}: need an integer levels >= 2")
        elif self.kind == "categorical":
            vals = tuple(float(v) for v in self.values)
            if not vals:
                raise ModelError(f"factor {self.name!r}: categorical factor needs values")
            if len(set(vals)) != len(vals):
                raise ModelError(f"factor {self.name!r}: duplicate categorical levels {vals}")
            object.__setattr__(self, "values", vals)
        else:
            raise ModelError(f"factor {self.name!r}: unknown kind {self.kind!r}")

    @classmethod
    def continuous(cls, name, lower, upper, levels):
        return cls(name=name, kind="continuous", lower=float(lower),
                   upper=float(upper), levels=int(levels))

    @classmethod
    def categorical(cls, name, values):
        return cls(name=name, kind="categorical", values=tuple(values))

    def grid(self) -> np.ndarray:
        """Level set of this factor, in increasing order for continuous factors."""
        if self.kind == "continuous":
            # (a (L-1-k) + b k) / (L-1): endpoints exact, and a grid with
            # a = -b is exactly mirror symmetric
            k = np.arange(self.levels)
            n = self.levels - 1
            g = (self.lower * (n - k) + self.upper * k) / n
            g[0], g[-1] = self.lower, self.upper
            return g
        return np.array(self.values, dtype=float)

    @property
    def n_levels(self) -> int:
        return self.levels if self.kind == "continuous" else len(self.values)


@dataclass(frozen=True, eq=False)
class DesignSpace:
    """Candidate points ``u_1 .. u_N`` stored as an ``(N, p)`` array."""

    points: np.ndarray
    factors: tuple[FactorSpec, ...] = ()

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] < 1:
            raise ModelError("design space must contain at least one point")
        if len(np.unique(pts, axis=0)) != len(pts):
            raise ModelError("design space points must be distinct")
        if self.factors and len(self.factors) != pts.shape[1]:
            raise ModelError("number of factor specs does not match point dimension")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "factors", tuple(self.factors))

    @property
    def N(self) -> int:
        return self.points.shape[0]

    @property
    def p(self) -> int:
        return self.points.shape[1]

    @property
    def names(self) -> list[str]:
        if self.factors:
            return [f.name for f in self.factors]
        return [f"x{k + 1}" for k in range(self.p)]

    def index_of(self, x, atol: float = 1e-9) -> int:
        """Index of the point equal to ``x``; raises KeyError if absent."""
        dist = np.max(np.abs(self.points - np.asarray(x, dtype=float)), axis=1)
        j = int(np.argmin(dist))
        if dist[j] > atol:
            raise KeyError(f"point {tuple(x)} is not in the design space")
        return j

    def transformed(self, scales) -> "DesignSpace":
        """The space ``T(S_N)`` for the diagonal scale ``T = diag(scales)``."""
        scales = np.asarray(scales, dtype=float)
        return DesignSpace(self.points * scales)


def build_grid(factors: Sequence[FactorSpec]) -> DesignSpace:
    """Full Cartesian grid, row-major in factor order (last factor fastest)."""
    factors = tuple(factors)
    if not factors:
        raise ModelError("at least one factor is required")
    names = [f.name for f in factors]
    if len(set(names)) != len(names):
        raise ModelError(f"duplicate factor names: {names}")
    pts = np.array(list(itertools.product(*(f.grid() for f in factors))), dtype=float)
    return DesignSpace(pts, factors)


@dataclass(frozen=True)
class ResponseBasis:
    """Gradient basis ``f_i(x)`` of one response.

    ``kind="monomial"`` takes exponent vectors in ``terms``; ``kind="emax"``
    is the locally linearised ``g = b1 x / (x + b2)`` acting on factor
    ``factor`` with local values ``params = (b1, b2)``.
    """

    kind: str
    terms: tuple[tuple[int, ...], ...] = ()
    params: tuple[float, ...] = ()
    factor: int = 0

    def __post_init__(self):
        if self.kind == "monomial":
            terms = tuple(tuple(int(e) for e in t) for t in self.terms)
            if not terms:
                raise ModelError("monomial basis needs at least one term")
            if len({len(t) for t in terms}) != 1:
                raise ModelError("all exponent vectors must have the same length")
            if any(e < 0 for t in terms for e in t):
                raise ModelError("exponents must be non-negative")
            if len(set(terms)) != len(terms):
                raise ModelError(f"duplicate monomial terms in {terms}")
            object.__setattr__(self, "terms", terms)
        elif self.kind in BUILTIN_FAMILIES:
            params = tuple(float(v) for v in self.params)
            if len(params) != 2:
                raise ModelError("emax basis needs local parameters (b1, b2)")
            if not params[1] > 0:
                raise ModelError(f"emax requires b2 > 0, got {params[1]}")
            object.__setattr__(self, "params", params)
        else:
            raise ModelError(f"unknown basis kind {self.kind!r}")

    @classmethod
    def monomial(cls, terms):
        return cls(kind="monomial", terms=tuple(tuple(t) for t in terms))

    @classmethod
    def emax(cls, b1, b2, factor=0):
        return cls(kind="emax", params=(float(b1), float(b2)), factor=int(factor))

    @property
    def dim(self) -> int:
        return len(self.terms) if self.kind == "monomial" else 2

    @property
    def n_factors(self) -> int | None:
        """Factor count implied by the basis (None if it only needs ``factor``)."""
        return len(self.terms[0]) if self.kind == "monomial" else None


def _emax_gradient(x, b1, b2):
    den = x + b2
    if np.any(den == 0):
        raise ModelError("emax basis: x + b2 == 0")
    return np.stack([x / den, -b1 * x / den**2], axis=-1)


BUILTIN_FAMILIES = {"emax": _emax_gradient}


def eval_basis(basis: ResponseBasis, x) -> np.ndarray:
    """Evaluate ``f_i`` at one point (shape ``(p,)``) or many (``(n, p)``)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if basis.kind == "monomial":
        e = np.array(basis.terms, dtype=float)
        if x.shape[-1] != e.shape[1]:
            raise ModelError(
                f"point has {x.shape[-1]} coordinates, basis expects {e.shape[1]}"
            )
        return np.prod(x[..., None, :] ** e, axis=-1)
    b1, b2 = basis.params
    return BUILTIN_FAMILIES[basis.kind](x[..., basis.factor], b1, b2)


@dataclass(frozen=True)
class ModelSpec:
    responses: tuple[ResponseBasis, ...]

    def __post_init__(self):
        object.__setattr__(self, "responses", tuple(self.responses))
        if not self.responses:
            raise ModelError("model needs at least one response")

    @property
    def m(self) -> int:
        return len(self.responses)

    @property
    def dims(self) -> list[int]:
        return [r.dim for r in self.responses]

    @property
    def q(self) -> int:
        return sum(self.dims)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.dims)])

    def check_space(self, space: DesignSpace) -> None:
        for i, r in enumerate(self.responses):
            n = r.n_factors
            if n is not None and n != space.p:
                raise ModelError(
                    f"response {i + 1} uses {n} factors but the space has {space.p}"
                )
            if n is None and not 0 <= r.factor < space.p:
                raise ModelError(f"response {i + 1} refers to missing factor {r.factor}")


def z_matrix(model: ModelSpec, x) -> np.ndarray:
    """Block-diagonal ``Z(x)``: shape ``(m, q)`` for one point, ``(n, m, q)`` for many."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xs = np.atleast_2d(x)
    Z = np.zeros((xs.shape[0], model.m, model.q))
    off = model.offsets
    for i, basis in enumerate(model.responses):
        Z[:, i, off[i]:off[i + 1]] = eval_basis(basis, xs)
    return Z[0] if single else Z


@dataclass(frozen=True, eq=False)
class CovarianceSpec:
    """Error covariance ``V0 = S R0 S`` with ``S = diag(sigma)``."""

    V0: np.ndarray
    R0: np.ndarray
    sigma: np.ndarray

    @property
    def m(self) -> int:
        return self.V0.shape[0]


def _check_spd(M: np.ndarray, what: str) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ModelError(f"{what} must be a square matrix, got shape {M.shape}")
    scale = np.max(np.abs(M)) if M.size else 0.0
    if np.max(np.abs(M - M.T)) > 1e-12 * scale:
        raise ModelError(f"{what} is not symmetric")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise ModelError(f"{what} is not positive definite") from None
    return M


def correlation_from_covariance(V0) -> CovarianceSpec:
    V0 = _check_spd(V0, "V0")
    V0 = 0.5 * (V0 + V0.T)
    sigma = np.sqrt(np.diag(V0))
    R0 = V0 / np.outer(sigma, sigma)
    np.fill_diagonal(R0, 1.0)
    for a in (V0, R0, sigma):
        a.setflags(write=False)
    return CovarianceSpec(V0=V0, R0=R0, sigma=sigma)


@dataclass(frozen=True, eq=False)
class DesignMeasure:
    """Approximate design: probability weights over a design space."""

    weights: np.ndarray
    space: DesignSpace | None = field(default=None, repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        if np.any(w < 0):
            raise ModelError("design weights must be non-negative")
        # summation error grows with N; 1e-12 at N <= 1
        if abs(w.sum() - 1.0) > 1e-12 * max(1.0, np.sqrt(len(w))):
            raise ModelError(f"design weights sum to {w.sum()!r}, not 1")
        if self.space is not None and len(w) != self.space.N:
            raise ModelError("weight vector length does not match the design space")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.weights, dtype=dtype)

    @classmethod
    def uniform(cls, space: DesignSpace) -> "DesignMeasure":
        return cls(np.full(space.N, 1.0 / space.N), space)
