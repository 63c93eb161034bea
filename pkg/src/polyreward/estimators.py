"""Closed-form reward-estimator constructors and table serialization.

Three families: exactly unbiased falling-factorial tables for polynomial
reward maps, the smoothed plug-in logarithm, and the boundary-corrected
Taylor logarithm.  Tables produced by the optimization solvers share the
same EstimatorTable representation and file format.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .exact import DomainError, EstimatorTable

TABLE_SCHEMA = "estimator-table/v1"

#: 1024-point grid on (0, 1] used for the numerical convexity check.
_CONVEXITY_GRID = np.linspace(1.0 / 1024, 1.0, 1024)


class TableFormatError(ValueError):
    """A table file failed to parse or validate."""


@dataclass(frozen=True)
class PolynomialReward:
    """A polynomial reward map sum_m c_m q^m with its game sign and scale.

    The generating potential must be strictly convex on the simplex, which
    reduces to sum_m m*c_m*x^(m-1) > 0 on (0, 1]; checked numerically.
    """

    coeffs: tuple[float, ...]
    sign: int
    beta: float = 1.0

    def __post_init__(self):
        c = tuple(float(v) for v in self.coeffs)
        object.__setattr__(self, "coeffs", c)
        if len(c) < 1:
            raise DomainError("need at least one polynomial coefficient")
        if self.sign not in (-1, 1):
            raise DomainError("sign must be -1 (coherence) or +1 (diversity)")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise DomainError("beta must be a positive real")
        m = np.arange(1, len(c) + 1)
        second = (m * np.asarray(c)) @ np.power(
            _CONVEXITY_GRID[:, None], (m - 1)[None, :]
        ).T
        if np.any(second <= 0.0):
            raise DomainError(
                "generating potential is not strictly convex on (0, 1]"
            )

    @property
    def degree(self) -> int:
        return len(self.coeffs)


def falling_factorial_estimate(X: int, K: int, m: int) -> float:
    """The unbiased estimate of p^m from a count X out of K samples.

    Equals X(X-1)...(X-m+1) / K(K-1)...(K-m+1): zero when X < m, one when
    X = K.  No unbiased estimator of p^m exists for m > K.
    """
    if m > K:
        raise DomainError(f"order m={m} exceeds group size K={K}")
    if m < 1:
        raise DomainError("order m must be at least 1")
    if not 0 <= X <= K:
        raise DomainError(f"count X={X} outside [0, {K}]")
    if X < m:
        return 0.0
    value = 1.0
    for i in range(m):
        value *= (X - i) / (K - i)
    return value


def u_statistic_target(reward: PolynomialReward, p: float) -> float:
    """The exact reward the falling-factorial table estimates at marginal p.

    For diversity rewards the table is shifted by beta*sum(c) so its values
    stay nonnegative; the same shift is applied here.
    """
    s, beta = reward.sign, reward.beta
    poly = math.fsum(c * p**m for m, c in enumerate(reward.coeffs, start=1))
    shift = beta * math.fsum(reward.coeffs) if s == 1 else 0.0
    return -s * beta * poly + shift


def u_statistic_table(reward: PolynomialReward, K: int) -> EstimatorTable:
    """Exactly unbiased table for a polynomial reward of degree d <= K."""
    d = reward.degree
    if d > K:
        raise DomainError(f"degree {d} exceeds group size {K}")
    s, beta = reward.sign, reward.beta
    shift = beta * math.fsum(reward.coeffs) if s == 1 else 0.0
    coeffs = np.empty(K + 1)
    for X in range(K + 1):
        est = math.fsum(
            c * falling_factorial_estimate(X, K, m)
            for m, c in enumerate(reward.coeffs, start=1)
        )
        coeffs[X] = -s * beta * est + shift
    method = "u_statistic"
    if reward.coeffs == (1.0,) and s == 1:
        method = "euclid"
    elif reward.coeffs == (0.0, 1.0) and s == -1:
        method = "quadratic"
    meta = {
        "degree": d,
        "reward_coeffs": list(reward.coeffs),
        "sign": s,
        "shift": shift,
    }
    return EstimatorTable(K=K, beta=beta, coeffs=coeffs, method=method, meta=meta)


def u_statistic_coeffs_exact(
    reward_coeffs: list[Fraction | int], sign: int, K: int
) -> list[Fraction]:
    """Rational twin of u_statistic_table (beta = 1), for exactness checks."""
    shift = Fraction(sum(Fraction(c) for c in reward_coeffs)) if sign == 1 else Fraction(0)
    out = []
    for X in range(K + 1):
        est = Fraction(0)
        for m, c in enumerate(reward_coeffs, start=1):
            if X >= m:
                num = math.prod(X - i for i in range(m))
                den = math.prod(K - i for i in range(m))
                est += Fraction(c) * Fraction(num, den)
        out.append(-sign * est + shift)
    return out


def plugin_log_table(
    K: int,
    beta: float,
    alpha: float,
    z_size: int,
    clamp: bool = False,
) -> EstimatorTable:
    """Smoothed plug-in logarithm: beta * log((X+alpha) / (K+alpha*|Z|)).

    alpha = 0 leaves the X = 0 entry undefined; the constructor refuses
    unless asked to clamp it to the X = 1 value (recorded in meta).
    """
    if alpha < 0:
        raise DomainError("smoothing alpha must be nonnegative")
    if z_size < 2:
        raise DomainError("answer-space cardinality must be at least 2")
    meta: dict = {"alpha": alpha, "z_size": z_size}
    coeffs = np.empty(K + 1)
    denom = K + alpha * z_size
    for X in range(K + 1):
        if X == 0 and alpha == 0.0:
            coeffs[0] = math.nan
            continue
        coeffs[X] = beta * math.log((X + alpha) / denom)
    if alpha == 0.0:
        if not clamp:
            raise DomainError(
                "alpha=0 leaves the X=0 reward undefined; pass clamp=True"
            )
        coeffs[0] = coeffs[1]
        meta["clamped"] = True
    return EstimatorTable(
        K=K, beta=beta, coeffs=coeffs, method="plugin_log", meta=meta
    )


def taylor_bt_table(
    K: int, beta: float, c0: float | None = None
) -> EstimatorTable:
    """Boundary-corrected Taylor logarithm.

    For X >= 1 the value is beta*(log(X/K) + (K-X)/(2KX)); the X = 0 entry
    takes beta*c0.  Passing c0=None uses the self-contained fallback
    -log(K) - 1/2; the preferred choice is the boundary coefficient of the
    minimax table for the same K (see polyreward.minimax).
    """
    if K < 1:
        raise DomainError("K must be a positive integer")
    if c0 is None:
        c0 = -math.log(K) - 0.5
        c0_rule = "fallback"
    else:
        c0_rule = "explicit"
    coeffs = np.empty(K + 1)
    coeffs[0] = beta * c0
    for X in range(1, K + 1):
        coeffs[X] = beta * (math.log(X / K) + (K - X) / (2.0 * K * X))
    return EstimatorTable(
        K=K,
        beta=beta,
        coeffs=coeffs,
        method="taylor_bt",
        meta={"c0": c0, "c0_rule": c0_rule},
    )


def save_table(table: EstimatorTable, path) -> None:
    """Write a table as round-trippable JSON (estimator-table/v1)."""
    payload = {
        "schema": TABLE_SCHEMA,
        "K": table.K,
        "beta": table.beta,
        "method": table.method,
        "meta": table.meta,
        "coeffs": [float(c) for c in table.coeffs],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_table(path) -> EstimatorTable:
    """Read a table file, validating schema, length, and finiteness."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise TableFormatError(
            f"{path}: not valid JSON (line {exc.lineno}, col {exc.colno}): "
            f"{exc.msg}"
        ) from exc
    if not isinstance(payload, dict):
        raise TableFormatError(f"{path}: expected a JSON object")
    if payload.get("schema") != TABLE_SCHEMA:
        raise TableFormatError(
            f"{path}: schema {payload.get('schema')!r} != {TABLE_SCHEMA!r}"
        )
    for field_name in ("K", "beta", "method", "coeffs"):
        if field_name not in payload:
            raise TableFormatError(f"{path}: missing field {field_name!r}")
    K = payload["K"]
    coeffs = payload["coeffs"]
    if not isinstance(coeffs, list) or len(coeffs) != K + 1:
        raise TableFormatError(
            f"{path}: coeffs length {len(coeffs)} != K+1 = {K + 1}"
        )
    try:
        return EstimatorTable(
            K=K,
            beta=payload["beta"],
            coeffs=np.asarray(coeffs, dtype=float),
            method=payload["method"],
            meta=payload.get("meta", {}),
        )
    except DomainError as exc:
        raise TableFormatError(f"{path}: {exc}") from exc
