"""Dense two-phase revised simplex for standard-form linear programs.

Built for problems with few rows and many columns (the minimax estimator
LP is solved in dual form: K+2 rows against 2M grid columns).  The basis
is refactorized every iteration, which is cheap at this row count and
avoids accumulated update error.  Pivoting is deterministic: Dantzig
pricing with lowest-index tie-breaking, switching to Bland's rule after a
run of degenerate pivots so cycling cannot occur.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SimplexError(RuntimeError):
    """The solve failed (infeasible, unbounded, or iteration cap hit)."""


@dataclass(frozen=True)
class LpSolution:
    x: np.ndarray
    objective: float
    duals: np.ndarray
    basis: np.ndarray
    iterations: int


_DEGENERATE_RUN = 40


def purify_to_basis(
    A: np.ndarray,
    support: np.ndarray,
    x_support: np.ndarray,
    *,
    tol: float = 1e-12,
) -> np.ndarray | None:
    """Reduce a feasible point to a basic one by walking null directions.

    ``x_support`` must satisfy A[:, support] @ x_support = b with strictly
    positive entries.  Each step zeroes at least one coordinate while
    preserving feasibility; when the surviving columns are independent the
    basis is completed, if needed, with independent zero-value columns.
    """
    m = A.shape[0]
    support = np.asarray(support, dtype=int).copy()
    x = np.asarray(x_support, dtype=float).copy()
    for _ in range(len(support) + m):
        G = A[:, support]
        _, s, vt = np.linalg.svd(G, full_matrices=True)
        # vt rows beyond the rank span the null space of G.
        dependent = len(s) < len(support) or s[-1] <= 1e-10 * s[0]
        if len(support) <= m and not dependent:
            break
        z = vt[-1]
        if np.max(np.abs(z)) < tol:
            return None
        pos = z > tol
        if not np.any(pos):
            z = -z
            pos = z > tol
            if not np.any(pos):
                return None
        ratios = np.full(len(support), np.inf)
        ratios[pos] = x[pos] / z[pos]
        theta = np.min(ratios)
        x = x - theta * z
        keep = x > tol
        # Guarantee progress even with ties.
        drop = int(np.argmin(ratios))
        keep[drop] = False
        support = support[keep]
        x = x[keep]
        if len(support) == 0:
            return None
    if len(support) < m:
        # Complete with independent zero-value columns, lowest index first.
        Q, _ = np.linalg.qr(A[:, support]) if len(support) else (
            np.zeros((m, 0)),
            None,
        )
        in_support = np.zeros(A.shape[1], dtype=bool)
        in_support[support] = True
        while len(support) < m:
            resid = A - Q @ (Q.T @ A)
            norms = np.linalg.norm(resid, axis=0)
            norms[in_support] = 0.0
            cand = np.flatnonzero(norms > 1e-8 * max(1.0, np.abs(A).max()))
            if cand.size == 0:
                return None
            j = int(cand[0])
            support = np.append(support, j)
            in_support[j] = True
            Q, _ = np.linalg.qr(A[:, support])
    B = A[:, support]
    if np.linalg.matrix_rank(B) < m:
        return None
    return np.sort(support)


def _pivot_loop(A, b, c, basis, *, tol, max_iter):
    """Run simplex iterations in place; returns (basis, iterations)."""
    m, n = A.shape
    degenerate_run = 0
    use_bland = False
    for it in range(max_iter):
        B = A[:, basis]
        try:
            xb = np.linalg.solve(B, b)
            y = np.linalg.solve(B.T, c[basis])
        except np.linalg.LinAlgError as exc:
            raise SimplexError(f"singular basis at iteration {it}") from exc
        reduced = c - A.T @ y
        reduced[basis] = 0.0
        if use_bland:
            candidates = np.flatnonzero(reduced > tol)
            if candidates.size == 0:
                return basis, it
            enter = int(candidates[0])
        else:
            enter = int(np.argmax(reduced))
            if reduced[enter] <= tol:
                return basis, it
        d = np.linalg.solve(B, A[:, enter])
        pos = d > tol
        if not np.any(pos):
            raise SimplexError("LP is unbounded")
        ratios = np.full(m, np.inf)
        ratios[pos] = xb[pos] / d[pos]
        best = np.min(ratios)
        ties = np.flatnonzero(ratios <= best + tol)
        # Lowest basis-variable index among ties keeps pivoting deterministic
        # and is exactly Bland's leaving rule when it is active.
        leave = int(ties[np.argmin(basis[ties])])
        if best <= tol:
            degenerate_run += 1
            if degenerate_run >= _DEGENERATE_RUN:
                use_bland = True
        else:
            degenerate_run = 0
            use_bland = False
        basis[leave] = enter
    raise SimplexError(f"no convergence within {max_iter} iterations")


def solve_lp(
    A: np.ndarray,
    b: np.ndarray,
    c: np.ndarray,
    *,
    tol: float = 1e-9,
    max_iter: int = 50_000,
    basis0: np.ndarray | None = None,
) -> LpSolution:
    """Maximize c.x subject to A x = b, x >= 0.

    With ``basis0`` the solve starts from the given feasible basis and runs
    a single phase.  Otherwise phase 1 minimizes the sum of artificials
    from an all-artificial basis; a positive phase-1 optimum signals
    infeasibility.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).copy()
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    neg = b < 0
    if np.any(neg):
        A = A.copy()
        A[neg] *= -1.0
        b[neg] *= -1.0

    it1 = 0
    if basis0 is not None:
        basis = np.asarray(basis0, dtype=int).copy()
        if basis.shape != (m,):
            raise SimplexError("starting basis must have one column per row")
        xb = np.linalg.solve(A[:, basis], b)
        if np.any(xb < -1e-8):
            raise SimplexError("starting basis is infeasible")
    else:
        # Phase 1: minimize the sum of artificials.
        A1 = np.hstack([A, np.eye(m)])
        c1 = np.concatenate([np.zeros(n), -np.ones(m)])
        basis = np.arange(n, n + m)
        basis, it1 = _pivot_loop(A1, b, c1, basis, tol=tol, max_iter=max_iter)
        xb = np.linalg.solve(A1[:, basis], b)
        if -float(c1[basis] @ xb) > 1e-7:
            raise SimplexError("LP is infeasible")
        for i in range(m):
            if basis[i] >= n:
                # Degenerate artificial still basic: swap in any real column
                # with a nonzero entry in this row of the basis inverse.
                B = A1[:, basis]
                row = np.linalg.solve(B.T, np.eye(m)[:, i])
                weights = np.abs(row @ A)
                weights[basis[basis < n]] = 0.0
                j = int(np.argmax(weights))
                if weights[j] > tol:
                    basis[i] = j
        if np.any(basis >= n):
            raise SimplexError(
                "constraint rows are numerically dependent; "
                "provide a starting basis"
            )

    basis, it2 = _pivot_loop(A, b, c, basis, tol=tol, max_iter=max_iter)
    B = A[:, basis]
    xb = np.linalg.solve(B, b)
    y = np.linalg.solve(B.T, c[basis])
    x = np.zeros(n)
    x[np.asarray(basis)] = np.maximum(xb, 0.0)
    return LpSolution(
        x=x,
        objective=float(c @ x),
        duals=y,
        basis=basis.copy(),
        iterations=it1 + it2,
    )
