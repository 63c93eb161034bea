"""Negative results, measured exactly: sample splitting and local Taylor.

Splitting a group into two halves and using the frequency difference as a
control variate buys no variance and inflates bias; the boundary-corrected
Taylor table is pointwise sharp but its worst case decays only like 1/K.
Everything here is computed by exact enumeration over the joint outcomes
of two independent binomials (at most 65 x 33 states), never Monte Carlo,
so the acceptance bands can be tight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimators import plugin_log_table, taylor_bt_table
from .exact import (
    DomainError,
    EstimatorTable,
    bernstein_row,
    bias_profile,
    build_grid,
    gradient_weighted_bias,
)

BASE_METHODS = ("taylor_bt", "plugin_log")


@dataclass(frozen=True)
class SplitReport:
    """Exact split-vs-full moments at one (K, K1, p) setting."""

    K: int
    K1: int
    K2: int
    p: float
    gamma: float
    var_split: float
    var_full: float
    bias_split: float
    bias_full: float


def _base_table(method: str, K: int, beta: float, c0: float | None) -> EstimatorTable:
    if method == "taylor_bt":
        return taylor_bt_table(K, beta, c0)
    if method == "plugin_log":
        return plugin_log_table(K, beta, 1.0, 2)
    raise DomainError(f"unknown base method {method!r}; pick from {BASE_METHODS}")


def _split_moments(
    base: EstimatorTable, K2: int, p: float, gamma: float
) -> tuple[float, float]:
    """Exact (mean, variance) of R(X1) - gamma*(X1/K1 - X2/K2)."""
    K1 = base.K
    w1 = bernstein_row(K1, p)
    w2 = bernstein_row(K2, p)
    vals = np.empty((K1 + 1, K2 + 1))
    for x1 in range(K1 + 1):
        for x2 in range(K2 + 1):
            vals[x1, x2] = base.coeffs[x1] - gamma * (x1 / K1 - x2 / K2)
    w = np.outer(w1, w2)
    mean = float(np.sum(w * vals))
    second = float(np.sum(w * vals * vals))
    return mean, second - mean * mean


def optimal_gamma(K1: int, K2: int, p: float, base_table: EstimatorTable) -> float:
    """Variance-minimizing control-variate coefficient, exactly.

    gamma* = Cov(R(X1), p1_hat - p2_hat) / Var(p1_hat - p2_hat); the
    second half is independent, so the covariance reduces to the X1 term.
    """
    if base_table.K != K1:
        raise DomainError("base table must be built for group size K1")
    if not 0.0 < p < 1.0:
        raise DomainError("p in {0, 1} makes the control variate degenerate")
    w1 = bernstein_row(K1, p)
    x_over_k = np.arange(K1 + 1) / K1
    mean_r = float(w1 @ base_table.coeffs)
    cov = float(w1 @ (base_table.coeffs * x_over_k)) - mean_r * p
    var_delta = p * (1.0 - p) * (1.0 / K1 + 1.0 / K2)
    return cov / var_delta


def split_estimator_stats(
    K: int,
    K1: int,
    p: float,
    base_method: str = "taylor_bt",
    gamma: float | str = "optimal",
    beta: float = 1.0,
    c0_base: float | None = None,
    c0_full: float | None = None,
) -> SplitReport:
    """Exact split-estimator statistics against the full-group baseline."""
    if not 1 <= K1 < K:
        raise DomainError("need 1 <= K1 < K")
    if not 0.0 < p < 1.0:
        raise DomainError("p in {0, 1} makes the control variate degenerate")
    K2 = K - K1
    base = _base_table(base_method, K1, beta, c0_base)
    full = _base_table(base_method, K, beta, c0_full)
    if gamma == "optimal":
        gamma_val = optimal_gamma(K1, K2, p, base)
    else:
        gamma_val = float(gamma)
    mean_split, var_split = _split_moments(base, K2, p, gamma_val)
    bias_split = p * mean_split - beta * p * math.log(p)
    return SplitReport(
        K=K,
        K1=K1,
        K2=K2,
        p=p,
        gamma=gamma_val,
        var_split=var_split,
        var_full=_exact_variance(full, p),
        bias_split=bias_split,
        bias_full=gradient_weighted_bias(full, p),
    )


def _exact_variance(table: EstimatorTable, p: float) -> float:
    w = bernstein_row(table.K, p)
    mean = float(w @ table.coeffs)
    return float(w @ (table.coeffs**2)) - mean * mean


def rao_blackwell_table(
    K: int,
    K1: int,
    base_method: str = "taylor_bt",
    gamma: float = 0.0,
    beta: float = 1.0,
    c0_base: float | None = None,
) -> EstimatorTable:
    """Condition the split estimator on the total count.

    Given X = X1 + X2, the first-half count is hypergeometric; averaging
    the split estimator over it yields a table on the full group with the
    same expectation and no larger variance at every p.
    """
    if not 1 <= K1 < K:
        raise DomainError("need 1 <= K1 < K")
    K2 = K - K1
    base = _base_table(base_method, K1, beta, c0_base)
    coeffs = np.empty(K + 1)
    for x in range(K + 1):
        terms = []
        denom = math.comb(K, x)
        for x1 in range(max(0, x - K2), min(K1, x) + 1):
            w = math.comb(K1, x1) * math.comb(K2, x - x1) / denom
            value = base.coeffs[x1] - gamma * (x1 / K1 - (x - x1) / K2)
            terms.append(w * value)
        coeffs[x] = math.fsum(terms)
    return EstimatorTable(
        K=K,
        beta=beta,
        coeffs=coeffs,
        method="u_statistic",
        meta={
            "origin": "rao_blackwell",
            "base_method": base_method,
            "K1": K1,
            "gamma": gamma,
        },
    )


def taylor_uniform_failure(
    Ks: list[int],
    c0_values: dict[int, float] | None = None,
    beta: float = 1.0,
    grid_size: int = 4096,
) -> list[dict]:
    """Worst-case and fixed-point bias of the Taylor table per group size.

    ``c0_values`` maps K to the boundary coefficient (normally the minimax
    boundary value); missing entries fall back to the constructor default.
    Reports the sup of the gradient-weighted bias over a boundary-refined
    grid, the sup scaled by K, the fixed-p bias at 1/2 scaled by K^2, and
    where the worst grid point sits.
    """
    if sorted(Ks) != list(Ks):
        raise DomainError("group sizes must be sorted ascending")
    rows: list[dict] = []
    prev_sup: float | None = None
    for K in Ks:
        c0 = None if c0_values is None else c0_values.get(K)
        table = taylor_bt_table(K, beta, c0)
        grid = build_grid(K, grid_size, "boundary")
        prof = bias_profile(table, grid)
        worst = int(np.argmax(np.abs(prof.weighted_bias)))
        mid_bias = abs(gradient_weighted_bias(table, 0.5))
        rows.append(
            {
                "K": K,
                "sup_bias": prof.sup_bias,
                "sup_bias_times_K": prof.sup_bias * K,
                "pointwise_bias_half_times_K2": mid_bias * K * K,
                "worst_p": float(grid.points[worst]),
                "ratio_to_prev": (
                    prof.sup_bias / prev_sup if prev_sup is not None else None
                ),
            }
        )
        prev_sup = prof.sup_bias
    return rows
