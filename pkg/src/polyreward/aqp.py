"""Bias-variance frontier: variance-optimal tables at a bias budget.

Each frontier point minimizes the worst-case second moment max_p S(c, p)
subject to the gradient-weighted bias staying within a budget epsilon.
The barrier solver in qsolve does the work; this module owns budgets,
certification, the frontier sweep, and the dominance comparisons against
closed-form estimators.  An independent projected-subgradient oracle
validates solves at desk scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .estimators import plugin_log_table, taylor_bt_table
from .exact import (
    DomainError,
    EstimatorTable,
    Grid,
    bernstein_matrix,
    bias_profile,
    build_grid,
)
from .minimax import (
    DEFAULT_GRID_SIZE,
    SECOND_MOMENT_GRID_SIZE,
    CERT_SLACK,
    MinimaxResult,
    certification_grid,
    solve_minimax,
    _weighted_rows,
)
from .qsolve import InfeasibleError, QspError, min_second_moment

#: Default frontier budgets, as powers of two over the anchor.
DEFAULT_EPS_DOUBLINGS = 7


@dataclass(frozen=True)
class ParetoPoint:
    """One frontier point: budget, minimized worst second moment, table."""

    epsilon: float
    v: float
    table: EstimatorTable


@dataclass(frozen=True)
class DominanceReport:
    """Dominance of a frontier point over closed-form competitors."""

    epsilon: float
    v: float
    bounded_by_max_coeff: bool
    max_coeff_sq: float
    competitors: list[dict] = field(default_factory=list)


def solve_aqp(
    K: int,
    grid: Grid | None = None,
    epsilon: float = math.nan,
    *,
    reference: MinimaxResult | None = None,
    tol: float = 1e-9,
) -> ParetoPoint:
    """Minimize the worst-case second moment at bias budget ``epsilon``.

    Budgets below the LP-certified minimax value are rejected with the
    certificate; budgets inside the thin band where only wildly
    oscillating tables exist raise QspError instead of pretending
    infeasibility.
    """
    if not epsilon > 0:
        raise DomainError("bias budget must be a positive real")
    if grid is None:
        grid = build_grid(K, DEFAULT_GRID_SIZE, "boundary")
    if reference is None:
        reference = solve_minimax(K, grid)
    eps_star = reference.epsilon_lp
    if epsilon < eps_star * (1.0 - 1e-9):
        raise InfeasibleError(
            f"budget {epsilon:.6e} lies below the certified minimax optimum "
            f"{eps_star:.6e} for K={K}; worst bias constraint is violated by "
            f"at least {eps_star - epsilon:.3e}",
            residual=eps_star - epsilon,
        )
    pts, A, t = _weighted_rows(K, grid.points)
    sm_grid = build_grid(K, SECOND_MOMENT_GRID_SIZE, "boundary")
    B_sm = bernstein_matrix(K, sm_grid.points)
    ref_table = reference.table
    start = ref_table.coeffs if reference.epsilon <= epsilon else None
    if start is None:
        start = taylor_bt_table(K, 1.0).coeffs
    try:
        qsp = min_second_moment(
            A,
            t,
            B_sm,
            epsilon,
            interior_margin=0.05 * (epsilon - eps_star) + 1e-12,
            c_init=start,
        )
    except InfeasibleError as exc:
        raise QspError(
            f"budget {epsilon:.6e} exceeds the minimax optimum "
            f"{eps_star:.6e} but no well-conditioned table was reached "
            f"(nearest reliable budget is about {reference.epsilon:.6e})"
        ) from exc
    cert = certification_grid(K)
    _, Ac, tc = _weighted_rows(K, cert.points)
    bias_cert = float(np.max(np.abs(Ac @ qsp.coeffs - tc)))
    if bias_cert > CERT_SLACK * epsilon:
        raise QspError(
            f"dense-grid bias {bias_cert:.3e} exceeds {CERT_SLACK} x budget "
            f"{epsilon:.3e}"
        )
    v_cert = float(np.max(bernstein_matrix(K, cert.points) @ qsp.coeffs**2))
    table = EstimatorTable(
        K=K,
        beta=1.0,
        coeffs=qsp.coeffs,
        method="aqp",
        meta={
            "epsilon": epsilon,
            "bias_max": qsp.bias_max,
            "bias_certified": bias_cert,
            "v": qsp.v,
            "v_certified": v_cert,
            "epsilon_minimax": eps_star,
            "grid": len(grid),
        },
    )
    return ParetoPoint(epsilon=epsilon, v=qsp.v, table=table)


def default_epsilons(
    anchor: float, doublings: int = DEFAULT_EPS_DOUBLINGS
) -> list[float]:
    """Geometric budget ladder anchor * 2^{0..doublings-1}."""
    return [anchor * 2.0**i for i in range(doublings)]


def pareto_trace(
    K: int,
    grid: Grid | None = None,
    epsilons: list[float] | None = None,
    *,
    reference: MinimaxResult | None = None,
) -> list[ParetoPoint]:
    """Trace the frontier over an increasing list of bias budgets."""
    if grid is None:
        grid = build_grid(K, DEFAULT_GRID_SIZE, "boundary")
    if reference is None:
        reference = solve_minimax(K, grid)
    if epsilons is None:
        epsilons = default_epsilons(reference.epsilon)
    if len(epsilons) == 0:
        return []
    if sorted(epsilons) != list(epsilons):
        raise DomainError("bias budgets must be sorted ascending")
    points: list[ParetoPoint] = []
    for eps in epsilons:
        points.append(solve_aqp(K, grid, eps, reference=reference))
        if len(points) >= 2:
            prev, cur = points[-2], points[-1]
            if cur.v > prev.v * (1.0 + 1e-6):
                raise QspError(
                    f"frontier not monotone: v({cur.epsilon:.3e}) = "
                    f"{cur.v:.6e} > v({prev.epsilon:.3e}) = {prev.v:.6e}"
                )
    return points


def closed_form_competitors(
    K: int, reference: MinimaxResult
) -> list[EstimatorTable]:
    """The closed-form tables dominance is measured against."""
    c0 = float(reference.table.coeffs[0])
    tables = [taylor_bt_table(K, 1.0, c0)]
    for alpha in (0.25, 0.5, 1.0):
        tables.append(plugin_log_table(K, 1.0, alpha, 2))
    return tables


def dominance_check(
    K: int,
    point: ParetoPoint,
    *,
    reference: MinimaxResult | None = None,
    grid: Grid | None = None,
) -> DominanceReport:
    """Compare a frontier point against the closed-form estimators.

    A competitor is comparable only if its own worst-case bias fits the
    point's budget; comparable competitors must carry at least the
    point's worst-case second moment.
    """
    if grid is None:
        grid = certification_grid(K)
    if reference is None:
        reference = solve_minimax(K)
    max_coeff_sq = float(np.max(point.table.coeffs**2))
    prof = bias_profile(point.table, grid)
    bounded = prof.sup_second_moment <= max_coeff_sq + 1e-9
    rows = []
    for comp in closed_form_competitors(K, reference):
        comp_prof = bias_profile(comp, grid)
        comparable = comp_prof.sup_bias <= point.epsilon * (1.0 + 1e-9)
        rows.append(
            {
                "method": comp.method,
                "meta": dict(comp.meta),
                "sup_bias": comp_prof.sup_bias,
                "sup_second_moment": comp_prof.sup_second_moment,
                "comparable": comparable,
                "dominated": bool(
                    comparable
                    and point.v <= comp_prof.sup_second_moment * (1.0 + 1e-9)
                ),
            }
        )
    return DominanceReport(
        epsilon=point.epsilon,
        v=point.v,
        bounded_by_max_coeff=bounded,
        max_coeff_sq=max_coeff_sq,
        competitors=rows,
    )


def subgradient_oracle(
    K: int,
    grid: Grid,
    sm_grid: Grid,
    epsilon: float,
    *,
    c_init: np.ndarray,
    iters: int = 40_000,
) -> tuple[np.ndarray, float]:
    """Independent projected-subgradient check of a frontier solve.

    Alternates exact hyperplane projection onto the most-violated bias
    constraint with diminishing normalized subgradient steps on the
    worst-point second moment.  Deterministic, desk-scale accuracy only;
    meant to confirm the barrier answer within a few percent.  ``c_init``
    must satisfy the bias budget (the minimax table does whenever
    ``epsilon`` is at or above its own bias level).
    """
    _, A, t = _weighted_rows(K, grid.points)
    B_sm = bernstein_matrix(K, sm_grid.points)
    c = np.array(c_init, dtype=float)
    if float(np.max(np.abs(A @ c - t))) > epsilon:
        raise DomainError("oracle start violates the bias budget")
    best = float(np.max((B_sm * c[None, :]) @ c))
    best_c = c.copy()
    scale = max(1.0, float(np.max(np.abs(c))))
    k_obj = 0
    for _ in range(iters):
        e = A @ c - t
        b_star = int(np.argmax(np.abs(e)))
        viol = abs(e[b_star]) - epsilon * (1.0 - 1e-12)
        if viol > 0:
            row = A[b_star]
            c = c - (viol * math.copysign(1.0, e[b_star]) / (row @ row)) * row
            continue
        S = (B_sm * c[None, :]) @ c
        m_star = int(np.argmax(S))
        if float(S[m_star]) < best:
            best = float(S[m_star])
            best_c = c.copy()
        g = 2.0 * B_sm[m_star] * c
        k_obj += 1
        step = 0.2 * scale / (k_obj**0.5 * max(1e-12, np.linalg.norm(g)))
        c = c - step * g
    return best_c, best
