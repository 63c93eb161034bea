"""Exact binomial machinery: Bernstein bases, estimator tables, bias profiles.

Everything an estimator table can do to a policy-gradient update is captured
by its expectation under Binomial(K, p), which is a polynomial in the
Bernstein basis.  This module evaluates those polynomials to near machine
precision (log-space terms, compensated summation) and provides the exact
rational oracle used to validate every other module at small K.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

GRID_SCHEMES = ("uniform", "chebyshev", "boundary")

#: Largest K for which the exact rational oracle is allowed to run.
#: Binomial weights grow factorially; 12 is plenty for equivalence testing.
EXACT_ORACLE_MAX_K = 12


class DomainError(ValueError):
    """An argument fell outside the mathematical domain of an operation."""


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.asarray(a, dtype=float).copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Grid:
    """Ordered probability grid on [0, 1].

    ``scheme`` records how the points were generated; boundary-refined grids
    additionally remember the group size K whose boundary layer they resolve.
    """

    points: np.ndarray
    scheme: str
    K: int | None = None

    def __post_init__(self):
        pts = _readonly(self.points)
        object.__setattr__(self, "points", pts)
        if self.scheme not in GRID_SCHEMES:
            raise DomainError(f"unknown grid scheme {self.scheme!r}")
        if pts.ndim != 1 or len(pts) < 2:
            raise DomainError("grid needs at least the two endpoints")
        if pts[0] != 0.0 or pts[-1] != 1.0:
            raise DomainError("grid must start at 0 and end at 1")
        if np.any(np.diff(pts) <= 0):
            raise DomainError("grid points must be strictly increasing")
        if self.scheme == "boundary":
            if self.K is None:
                raise DomainError("boundary-refined grid must record its K")
            edge = min(1.0, 4.0 / self.K)
            if int(np.sum(pts <= edge)) < 32:
                raise DomainError("boundary-refined grid too thin near p=0")

    def __len__(self) -> int:
        return len(self.points)


def build_grid(K: int, M: int, scheme: str = "boundary") -> Grid:
    """Construct an evaluation grid of roughly M points.

    ``uniform`` and ``chebyshev`` return exactly M points.  ``boundary``
    unions a Chebyshev-Lobatto grid with a geometric tail 4/K * 2^-j
    (32 points) so the p ~ 1/K layer is always resolved.
    """
    if K < 1:
        raise DomainError("K must be a positive integer")
    if M < 2:
        raise DomainError("grid size must be at least 2")
    if scheme == "uniform":
        return Grid(np.linspace(0.0, 1.0, M), "uniform")
    j = np.arange(M, dtype=float)
    cheb = 0.5 - 0.5 * np.cos(np.pi * j / (M - 1))
    cheb[0], cheb[-1] = 0.0, 1.0
    if scheme == "chebyshev":
        return Grid(cheb, "chebyshev")
    if scheme != "boundary":
        raise DomainError(f"unknown grid scheme {scheme!r}")
    tail = min(1.0, 4.0 / K) * 0.5 ** np.arange(32, dtype=float)
    pts = np.unique(np.concatenate([cheb, tail]))
    return Grid(pts, "boundary", K=K)


@dataclass(frozen=True)
class EstimatorTable:
    """A K-sample reward estimator: the K+1 values it assigns to each count.

    ``coeffs[X]`` is the reward paid when the answer was observed X times in
    the group.  beta is the regularization weight the values were scaled by.
    """

    K: int
    beta: float
    coeffs: np.ndarray
    method: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.K < 1:
            raise DomainError("K must be a positive integer")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise DomainError("beta must be a positive real")
        c = _readonly(self.coeffs)
        object.__setattr__(self, "coeffs", c)
        if c.shape != (self.K + 1,):
            raise DomainError(
                f"need K+1 = {self.K + 1} coefficients, got {c.shape}"
            )
        if not np.all(np.isfinite(c)):
            raise DomainError("coefficients must be finite")


@dataclass(frozen=True)
class BiasProfile:
    """Gradient-weighted bias and second moment of a table over a grid."""

    grid: Grid
    weighted_bias: np.ndarray
    second_moment: np.ndarray
    sup_bias: float
    sup_second_moment: float

    def __post_init__(self):
        object.__setattr__(self, "weighted_bias", _readonly(self.weighted_bias))
        object.__setattr__(self, "second_moment", _readonly(self.second_moment))


def _log_binom(K: int) -> np.ndarray:
    lg = math.lgamma(K + 1)
    k = np.arange(K + 1)
    return lg - np.array(
        [math.lgamma(i + 1) + math.lgamma(K - i + 1) for i in range(K + 1)]
    )


def bernstein_basis(K: int, k: int, p: float) -> float:
    """Evaluate B_{k,K}(p) = C(K,k) p^k (1-p)^(K-k) in log space.

    A single exponentiation per value keeps the relative error near 1e-15
    even for K = 256 where the naive product under/overflows.
    """
    if not 0 <= k <= K:
        raise DomainError(f"k={k} outside [0, {K}]")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p={p} outside [0, 1]")
    if p == 0.0:
        return 1.0 if k == 0 else 0.0
    if p == 1.0:
        return 1.0 if k == K else 0.0
    logc = (
        math.lgamma(K + 1) - math.lgamma(k + 1) - math.lgamma(K - k + 1)
    )
    return math.exp(logc + k * math.log(p) + (K - k) * math.log1p(-p))


def bernstein_row(K: int, p: float) -> np.ndarray:
    """All K+1 basis values at a single p, i.e. the Binomial(K, p) pmf."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p={p} outside [0, 1]")
    row = np.zeros(K + 1)
    if p == 0.0:
        row[0] = 1.0
        return row
    if p == 1.0:
        row[K] = 1.0
        return row
    k = np.arange(K + 1)
    row = np.exp(_log_binom(K) + k * math.log(p) + (K - k) * math.log1p(-p))
    return row


def bernstein_matrix(K: int, points: np.ndarray) -> np.ndarray:
    """Basis values for every grid point: shape (len(points), K+1).

    Rows at p = 0 and p = 1 are set exactly to the unit vectors.
    """
    pts = np.asarray(points, dtype=float)
    if np.any(pts < 0.0) or np.any(pts > 1.0):
        raise DomainError("grid points outside [0, 1]")
    k = np.arange(K + 1)
    interior = (pts > 0.0) & (pts < 1.0)
    B = np.zeros((len(pts), K + 1))
    pi = pts[interior]
    if pi.size:
        logB = (
            _log_binom(K)[None, :]
            + k[None, :] * np.log(pi)[:, None]
            + (K - k)[None, :] * np.log1p(-pi)[:, None]
        )
        B[interior] = np.exp(logB)
    B[pts == 0.0, 0] = 1.0
    B[pts == 1.0, K] = 1.0
    return B


def expected_value(table: EstimatorTable, p: float) -> float:
    """E[R(X)] under X ~ Binomial(K, p); a degree-K polynomial in p."""
    row = bernstein_row(table.K, p)
    return math.fsum(c * b for c, b in zip(table.coeffs, row))


def second_moment(table: EstimatorTable, p: float) -> float:
    """E[R(X)^2]; the variance is this minus expected_value squared."""
    row = bernstein_row(table.K, p)
    return math.fsum(c * c * b for c, b in zip(table.coeffs, row))


def gradient_weighted_bias(table: EstimatorTable, p: float) -> float:
    """p * E[R(X)] - beta * p*log(p), with the p=0 limit taken as 0."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p={p} outside [0, 1]")
    if p == 0.0:
        return 0.0
    target = 0.0 if p == 1.0 else table.beta * p * math.log(p)
    return p * expected_value(table, p) - target


def bias_profile(table: EstimatorTable, grid: Grid) -> BiasProfile:
    """Evaluate weighted bias and second moment of a table over a grid."""
    pts = grid.points
    B = bernstein_matrix(table.K, pts)
    mean = B @ table.coeffs
    smom = B @ (table.coeffs * table.coeffs)
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(pts > 0.0, pts * np.log(np.maximum(pts, 1e-300)), 0.0)
    wb = pts * mean - table.beta * plogp
    wb[pts == 0.0] = 0.0
    return BiasProfile(
        grid=grid,
        weighted_bias=wb,
        second_moment=smom,
        sup_bias=float(np.max(np.abs(wb))),
        sup_second_moment=float(np.max(smom)),
    )


def expected_value_exact(
    coeffs: Sequence[Fraction | int], K: int, p: Fraction
) -> Fraction:
    """Rational-arithmetic expectation oracle, limited to K <= 12."""
    if K > EXACT_ORACLE_MAX_K:
        raise DomainError(f"exact oracle limited to K <= {EXACT_ORACLE_MAX_K}")
    p = Fraction(p)
    if not 0 <= p <= 1:
        raise DomainError("p outside [0, 1]")
    total = Fraction(0)
    for k, c in enumerate(coeffs):
        total += Fraction(c) * math.comb(K, k) * p**k * (1 - p) ** (K - k)
    return total
