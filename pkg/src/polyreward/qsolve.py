"""Barrier solver for variance-optimal tables under a bias budget.

Minimizes the worst-case second moment max_p S(c, p) over tables c whose
gradient-weighted bias stays within a budget on a grid.  Two textbook
phases: phase A drives a slack on the bias budget negative, producing a
strictly feasible table from the all-zero start or an infeasibility
certificate; phase B is a feasible-start log barrier on (c, v).

This is the one place in the package where near-optimal tables are pinned
to a unique representative: the second-moment objective is coercive in
every direction the bias constraints leave numerically flat, so solutions
come out smooth and moderate where LP vertices oscillate wildly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class QspError(RuntimeError):
    """The barrier solve failed to converge."""


class InfeasibleError(ValueError):
    """The bias budget is below the achievable minimax optimum."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class QspResult:
    coeffs: np.ndarray
    v: float
    bias_max: float
    newton_steps: int


def _newton_loop(y, value_grad_hess, *, max_iter=120, tol=1e-10):
    """Damped Newton with backtracking; returns (y, converged, steps)."""
    steps = 0
    for _ in range(max_iter):
        out = value_grad_hess(y)
        if out is None:
            raise QspError("barrier iterate left the feasible region")
        val, grad, H = out
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            H = H.copy()
            H[np.diag_indices_from(H)] += 1e-12 * np.abs(H).max()
            step = np.linalg.solve(H, grad)
        decrement = float(grad @ step)
        if decrement <= tol * max(1.0, abs(val)):
            return y, True, steps
        alpha = 1.0
        moved = False
        while alpha > 1e-13:
            cand = y - alpha * step
            out_c = value_grad_hess(cand)
            if out_c is not None and out_c[0] <= val - 0.25 * alpha * decrement:
                y = cand
                moved = True
                break
            alpha *= 0.5
        steps += 1
        if not moved:
            return y, True, steps
    return y, False, steps


def find_feasible_table(
    A: np.ndarray,
    t: np.ndarray,
    epsilon: float,
    margin: float,
    *,
    c_init: np.ndarray | None = None,
    reg_weights: np.ndarray | None = None,
    max_stages: int = 60,
) -> tuple[np.ndarray, int]:
    """Phase A: a table with max|A c - t| <= epsilon - margin, or raise.

    Minimizes the bias slack s over (c, s) along a barrier path starting
    from ``c_init`` (default: the zero table).  A slack stuck above
    -margin once the path has tightened is the infeasibility certificate:
    the minimax optimum of the grid exceeds the requested budget.

    ``reg_weights`` adds a fixed quadratic sum w_k c_k^2 to the objective.
    The bias map leaves whole subspaces of tables numerically invisible;
    without a coercive term Newton shoots off along them and returns
    wildly oscillating coefficients.  The weight is fixed while the
    barrier parameter grows, so it does not move the reachable budget.
    """
    M, n = A.shape
    if reg_weights is None:
        reg_weights = np.full(n, 1.0 / n)

    def make_vgh(t_bar):
        def vgh(y):
            c, s = y[:n], y[n]
            e = A @ c - t
            gap_p = epsilon + s - e
            gap_m = epsilon + s + e
            if np.any(gap_p <= 0) or np.any(gap_m <= 0):
                return None
            val = (
                t_bar * s
                + float(reg_weights @ (c * c))
                - np.log(gap_p).sum()
                - np.log(gap_m).sum()
            )
            up, um = 1.0 / gap_p, 1.0 / gap_m
            grad = np.empty(n + 1)
            grad[:n] = A.T @ (up - um) + 2.0 * reg_weights * c
            grad[n] = t_bar - (up + um).sum()
            H = np.empty((n + 1, n + 1))
            H[:n, :n] = (A.T * (up**2 + um**2)) @ A
            H[np.diag_indices(n)[0], np.diag_indices(n)[1]] += 2.0 * reg_weights
            hcs = A.T @ (um**2 - up**2)
            H[:n, n] = hcs
            H[n, :n] = hcs
            H[n, n] = (up**2 + um**2).sum()
            return val, grad, H

        return vgh

    t_bar = 1.0
    y = np.zeros(n + 1)
    if c_init is not None:
        y[:n] = c_init
    bias0 = float(np.max(np.abs(A @ y[:n] - t)))
    if bias0 <= epsilon - margin:
        return y[:n].copy(), 0
    y[n] = max(2.0 * 2 * M / t_bar, bias0 - epsilon + 1.0)
    total = 0
    prev_bias = math.inf
    for _ in range(max_stages):
        y, _, steps = _newton_loop(y, make_vgh(t_bar))
        total += steps
        bias = float(np.max(np.abs(A @ y[:n] - t)))
        if bias <= epsilon - margin:
            return y[:n].copy(), total
        tight = 2 * M / t_bar < 1e-3 * max(margin, 1e-30)
        if tight and bias >= prev_bias * (1.0 - 1e-9):
            raise InfeasibleError(
                f"bias budget {epsilon:.6e} unattainable: residual max bias "
                f"{bias:.6e} (certificate: most-violated constraint "
                f"{bias - epsilon:.3e} above budget)",
                residual=bias - epsilon,
            )
        prev_bias = bias
        t_bar *= 15.0
    raise QspError("phase A stage cap exceeded")


def min_second_moment(
    A: np.ndarray,
    t: np.ndarray,
    B_sm: np.ndarray,
    epsilon: float,
    *,
    interior_margin: float | None = None,
    c_init: np.ndarray | None = None,
    gap_tol: float = 1e-9,
) -> QspResult:
    """Solve min_c max_m S(c, p_m) subject to max|A c - t| <= epsilon.

    ``A``/``t`` carry the bias constraints, ``B_sm`` the Bernstein rows of
    the second-moment grid.  ``interior_margin`` is how deep inside the
    budget phase A must land; it defaults to a sliver of the budget and
    must be well below the caller's bias headroom.
    """
    M, n = A.shape
    if interior_margin is None:
        interior_margin = 1e-5 * epsilon
    c0, steps_a = find_feasible_table(
        A,
        t,
        epsilon,
        interior_margin,
        c_init=c_init,
        reg_weights=B_sm.mean(axis=0),
    )
    S0 = (B_sm * c0[None, :]) @ c0
    v0 = 1.5 * float(np.max(S0)) + 1e-3

    n_con = B_sm.shape[0] + 2 * M

    def make_vgh(t_bar):
        def vgh(y):
            c, v = y[:n], y[n]
            e = A @ c - t
            Gc = B_sm * c[None, :]
            gap_v = v - Gc @ c
            gap_p = epsilon - e
            gap_m = epsilon + e
            if np.any(gap_v <= 0) or np.any(gap_p <= 0) or np.any(gap_m <= 0):
                return None
            val = t_bar * v - (
                np.log(gap_v).sum() + np.log(gap_p).sum() + np.log(gap_m).sum()
            )
            r = 1.0 / gap_v
            up, um = 1.0 / gap_p, 1.0 / gap_m
            grad = np.empty(n + 1)
            grad[:n] = 2.0 * (Gc.T @ r) + A.T @ (up - um)
            grad[n] = t_bar - r.sum()
            H = np.empty((n + 1, n + 1))
            Hcc = (A.T * (up**2 + um**2)) @ A
            Hcc[np.diag_indices_from(Hcc)] += 2.0 * (B_sm.T @ r)
            Hcc += 4.0 * (Gc.T * (r**2)) @ Gc
            H[:n, :n] = Hcc
            hcv = -2.0 * (Gc.T @ (r**2))
            H[:n, n] = hcv
            H[n, :n] = hcv
            H[n, n] = (r**2).sum()
            return val, grad, H

        return vgh

    y = np.concatenate([c0, [v0]])
    t_bar = n_con / max(1.0, v0)
    total = steps_a
    while True:
        y, _, steps = _newton_loop(y, make_vgh(t_bar))
        total += steps
        if n_con / t_bar <= gap_tol * max(1.0, abs(y[n])):
            break
        t_bar *= 15.0
        if t_bar > 1e19:
            raise QspError("barrier continuation failed to close the gap")
    c = y[:n].copy()
    return QspResult(
        coeffs=c,
        v=float(np.max((B_sm * c[None, :]) @ c)),
        bias_max=float(np.max(np.abs(A @ c - t))),
        newton_steps=total,
    )
