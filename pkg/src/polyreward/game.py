"""Desk-scale alignment game: finite traces, finite answers, two geometries.

A policy over traces plays against a target distribution over the answers
the traces parse to.  The sampled-group dynamics mirror the online
algorithm the estimator tables are built for: sample K traces, look the
rewards up by answer count, standardize advantages within the group, take
a mirror step, refit the target from the counts.  Closed-form best
responses for both players make the equilibrium and the optimality gap
exactly computable, so the effect of an estimator's bias and variance on
convergence is directly measurable.

Geometries: ``kl`` couples a log-likelihood reward with a consensus
target (the empirical mean); ``euclid`` and ``cubic`` couple polynomial
rewards with a collision-penalty adversary solved by simplex projection.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .estimators import PolynomialReward, u_statistic_table
from .exact import DomainError, EstimatorTable

GEOMETRIES = ("kl", "euclid", "cubic")
ALIGNMENTS = ("coherence_empirical", "diversity_collision")

#: Additive guard in the advantage standardization.
ADV_EPS = 1e-8


@dataclass(frozen=True)
class GameSpec:
    """Immutable description of one alignment game instance."""

    traces: tuple[str, ...]
    answers: tuple[str, ...]
    parser: dict[str, str]
    ref_policy: np.ndarray
    beta: float
    geometry: str
    alignment: str
    K: int

    def __post_init__(self):
        if self.geometry not in GEOMETRIES:
            raise DomainError(f"unknown geometry {self.geometry!r}")
        if self.alignment not in ALIGNMENTS:
            raise DomainError(f"unknown alignment {self.alignment!r}")
        if self.geometry == "kl" and self.alignment != "coherence_empirical":
            raise DomainError("the kl geometry plays the coherence game")
        if self.geometry != "kl" and self.alignment != "diversity_collision":
            raise DomainError("polynomial geometries play the diversity game")
        if self.K < 1:
            raise DomainError("group size K must be a positive integer")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise DomainError("beta must be a positive real")
        if len(set(self.traces)) != len(self.traces) or not self.traces:
            raise DomainError("traces must be distinct and nonempty")
        if len(set(self.answers)) != len(self.answers) or not self.answers:
            raise DomainError("answers must be distinct and nonempty")
        pi0 = np.asarray(self.ref_policy, dtype=float).copy()
        if pi0.shape != (len(self.traces),):
            raise DomainError("reference policy must have one entry per trace")
        if np.any(pi0 <= 0.0):
            raise DomainError("reference policy must have full support")
        if abs(pi0.sum() - 1.0) > 1e-12:
            raise DomainError("reference policy must sum to 1")
        pi0.flags.writeable = False
        object.__setattr__(self, "ref_policy", pi0)
        if set(self.parser) != set(self.traces):
            raise DomainError("parser must map every trace exactly once")
        if set(self.parser.values()) != set(self.answers):
            raise DomainError("every answer needs at least one trace")
        answer_index = {z: i for i, z in enumerate(self.answers)}
        e = np.array([answer_index[self.parser[y]] for y in self.traces])
        e.flags.writeable = False
        object.__setattr__(self, "answer_of", e)

    @property
    def sign(self) -> int:
        """Dual sign: -1 for the coherence game, +1 for diversity."""
        return -1 if self.alignment == "coherence_empirical" else 1

    @property
    def n_traces(self) -> int:
        return len(self.traces)

    @property
    def n_answers(self) -> int:
        return len(self.answers)

    @property
    def q_min(self) -> float:
        """Interior floor applied to coherence targets."""
        return 1.0 / (2.0 * self.K * self.n_answers)


@dataclass
class GameState:
    """Mutable state of one run: policy, target, dual, iterate count."""

    policy: np.ndarray
    q: np.ndarray
    u: np.ndarray
    shift: float
    t: int


@dataclass
class GameTrace:
    """Append-only per-iteration record of a run; replayable from the seed."""

    seed: int
    mode: str
    gap: list[float] = field(default_factory=list)
    gap_last: list[float] = field(default_factory=list)
    entropy: list[float] = field(default_factory=list)
    l1_error: list[float] = field(default_factory=list)
    policies: list[np.ndarray] = field(default_factory=list)
    targets: list[np.ndarray] = field(default_factory=list)
    counts: list[np.ndarray] = field(default_factory=list)
    rewards: list[np.ndarray] = field(default_factory=list)
    advantages: list[np.ndarray] = field(default_factory=list)

    def record(
        self, gap, entropy, l1, policy, q, counts, rewards, advantages,
        gap_last=None,
    ):
        self.gap.append(float(gap))
        self.gap_last.append(float(gap if gap_last is None else gap_last))
        self.entropy.append(float(entropy))
        self.l1_error.append(float(l1))
        self.policies.append(np.array(policy))
        self.targets.append(np.array(q))
        self.counts.append(None if counts is None else np.array(counts))
        self.rewards.append(None if rewards is None else np.array(rewards))
        self.advantages.append(
            None if advantages is None else np.array(advantages)
        )

    def __len__(self) -> int:
        return len(self.gap)


def save_game_spec(spec: GameSpec, path, seed: int | None = None) -> None:
    payload = {
        "traces": list(spec.traces),
        "answers": list(spec.answers),
        "parser": dict(spec.parser),
        "ref_policy": [float(v) for v in spec.ref_policy],
        "beta": spec.beta,
        "geometry": spec.geometry,
        "alignment": spec.alignment,
        "K": spec.K,
    }
    if seed is not None:
        payload["seed"] = seed
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_game_spec(path) -> tuple[GameSpec, int | None]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        spec = GameSpec(
            traces=tuple(payload["traces"]),
            answers=tuple(payload["answers"]),
            parser=dict(payload["parser"]),
            ref_policy=np.asarray(payload["ref_policy"], dtype=float),
            beta=float(payload["beta"]),
            geometry=payload["geometry"],
            alignment=payload["alignment"],
            K=int(payload["K"]),
        )
    except KeyError as exc:
        raise DomainError(f"{path}: missing game field {exc}") from exc
    return spec, payload.get("seed")


def answer_marginal(policy: np.ndarray, answer_of: np.ndarray, n_answers: int) -> np.ndarray:
    """Push a trace distribution through the parser."""
    return np.bincount(answer_of, weights=policy, minlength=n_answers)


def sparsemax_project(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise DomainError("cannot project a non-finite vector")
    s = np.sort(v)[::-1]
    cumulative = np.cumsum(s) - 1.0
    rho = np.nonzero(s * np.arange(1, len(v) + 1) > cumulative)[0][-1]
    tau = cumulative[rho] / (rho + 1.0)
    return np.maximum(v - tau, 0.0)


def link_dual(spec: GameSpec, q: np.ndarray) -> np.ndarray:
    """Canonical dual representative u = s * beta * grad Phi(q)."""
    s, beta = spec.sign, spec.beta
    if spec.geometry == "kl":
        if np.any(q <= 0.0):
            raise DomainError("kl link requires an interior target")
        return s * beta * (np.log(q) + 1.0)
    if spec.geometry == "euclid":
        return s * beta * q
    return s * beta * q**2


def optimal_policy(spec: GameSpec, q: np.ndarray) -> np.ndarray:
    """Closed-form policy best response to a target distribution."""
    q = np.asarray(q, dtype=float)
    E = spec.answer_of
    if spec.geometry == "kl":
        w = spec.ref_policy * q[E]
        total = w.sum()
        if total <= 0.0 or np.any((q[E] == 0.0) & (spec.ref_policy > 0.0)):
            raise DomainError(
                "kl best response undefined: a zero-probability answer "
                "has reference mass"
            )
        return w / total
    if spec.geometry == "euclid":
        return sparsemax_project(spec.ref_policy - spec.sign * q[E])
    return sparsemax_project(spec.ref_policy - spec.sign * (q[E] ** 2))


def target_best_response(
    spec: GameSpec, counts: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Fit the target distribution from group counts; returns (q, u).

    Coherence: empirical frequencies floored at q_min and renormalized on
    the unfloored part.  Diversity: inverse frequencies 1/(count+1),
    normalized.
    """
    counts = np.asarray(counts, dtype=float)
    if counts.shape != (spec.n_answers,):
        raise DomainError("need one count per answer")
    total = counts.sum()
    if total <= 0:
        raise DomainError("group counts sum to zero")
    if spec.alignment == "coherence_empirical":
        q = _floor_distribution(counts / total, spec.q_min)
    else:
        inv = 1.0 / (counts + 1.0)
        q = inv / inv.sum()
    return q, link_dual(spec, q)


def _floor_distribution(q: np.ndarray, q_min: float) -> np.ndarray:
    """Raise deficient entries to q_min; rescale the rest to keep mass 1."""
    low = q < q_min
    if not np.any(low):
        return q
    if np.all(low):
        return np.full_like(q, 1.0 / len(q))
    out = q.copy()
    out[low] = q_min
    keep = 1.0 - q_min * int(low.sum())
    out[~low] *= keep / q[~low].sum()
    return out


def _collision_conjugate(u: np.ndarray) -> float:
    """Fenchel conjugate of the collision penalty 0.5*||nu||^2 on the simplex."""
    nu = sparsemax_project(u)
    return float(nu @ u - 0.5 * nu @ nu)


def _lagrangian_diversity(spec: GameSpec, policy: np.ndarray, u: np.ndarray) -> float:
    nu = answer_marginal(policy, spec.answer_of, spec.n_answers)
    d = policy - spec.ref_policy
    return float(
        0.5 * spec.beta * d @ d + nu @ u - _collision_conjugate(u)
    )


def duality_gap(spec: GameSpec, policy: np.ndarray, q_or_u: np.ndarray) -> float:
    """Total best-response improvement available to the two players.

    For the adversarial diversity game this is the classic saddle gap
    max_u L(pi, u) - min_pi L(pi, u); for the cooperative coherence game
    it is the sum of both players' descent potentials.  Zero exactly at a
    mutual best response, invariant to constant shifts of the dual.
    """
    policy = np.asarray(policy, dtype=float)
    nu = answer_marginal(policy, spec.answer_of, spec.n_answers)
    if spec.alignment == "coherence_empirical":
        q = np.asarray(q_or_u, dtype=float)
        if np.any(q <= 0.0):
            raise DomainError("coherence gap needs an interior target")
        beta = spec.beta
        # L(pi, q) = beta*KL(pi||pi0) - beta*<nu, log q>
        kl = float(np.sum(policy * np.log(policy / spec.ref_policy)))
        value = beta * kl - beta * float(nu @ np.log(q))
        # Policy player's residual: min_pi L = -beta*log sum pi0*q(E(y)).
        z = float(spec.ref_policy @ q[spec.answer_of])
        pi_gap = value - (-beta * math.log(z))
        # Target player's residual: min over q is attained at q = nu.
        mask = nu > 0.0
        q_gap = beta * float(
            np.sum(nu[mask] * (np.log(nu[mask]) - np.log(q[mask])))
        )
        return pi_gap + q_gap
    u = np.asarray(q_or_u, dtype=float)
    value = _lagrangian_diversity(spec, policy, u)
    # max_u L(pi, u) = beta/2 ||pi-pi0||^2 + R(nu).
    d = policy - spec.ref_policy
    upper = float(0.5 * spec.beta * d @ d + 0.5 * nu @ nu)
    # min_pi L(pi, u) via the closed-form projection response.
    best_pi = sparsemax_project(spec.ref_policy - u[spec.answer_of] / spec.beta)
    lower = _lagrangian_diversity(spec, best_pi, u)
    return (upper - value) + (value - lower)


def exact_equilibrium(
    spec: GameSpec,
    damping: float = 0.5,
    tol: float = 1e-12,
    max_iter: int = 200_000,
) -> GameState:
    """Fixed point of damped alternating exact best responses.

    The reference point every run is measured against; deterministic and
    independent of sampling.
    """
    pi = spec.ref_policy.copy()
    if spec.alignment == "coherence_empirical":
        q = np.full(spec.n_answers, 1.0 / spec.n_answers)
        for t in range(max_iter):
            nu = answer_marginal(pi, spec.answer_of, spec.n_answers)
            q_new = (1 - damping) * q + damping * _floor_distribution(
                nu, spec.q_min
            )
            pi_new = (1 - damping) * pi + damping * optimal_policy(spec, q_new)
            delta = max(
                float(np.max(np.abs(pi_new - pi))),
                float(np.max(np.abs(q_new - q))),
            )
            pi, q = pi_new, q_new
            if delta <= tol:
                break
        else:
            raise RuntimeError("equilibrium iteration did not converge")
        return GameState(
            policy=pi, q=q, u=link_dual(spec, q), shift=0.0, t=t + 1
        )
    u = link_dual(spec, np.full(spec.n_answers, 1.0 / spec.n_answers))
    for t in range(max_iter):
        nu = answer_marginal(pi, spec.answer_of, spec.n_answers)
        u_new = (1 - damping) * u + damping * nu  # dual best response
        pi_new = (1 - damping) * pi + damping * sparsemax_project(
            spec.ref_policy - u_new[spec.answer_of] / spec.beta
        )
        delta = max(
            float(np.max(np.abs(pi_new - pi))),
            float(np.max(np.abs(u_new - u))),
        )
        pi, u = pi_new, u_new
        if delta <= tol:
            break
    else:
        raise RuntimeError("equilibrium iteration did not converge")
    q_rep = sparsemax_project(u / spec.beta)
    return GameState(policy=pi, q=q_rep, u=u, shift=0.0, t=t + 1)


def _entropy(policy: np.ndarray) -> float:
    mask = policy > 0.0
    return -float(np.sum(policy[mask] * np.log(policy[mask])))


def run_game_grpo(
    spec: GameSpec,
    table: EstimatorTable,
    T: int,
    lr: float,
    seed: int,
    reference: GameState | None = None,
) -> GameTrace:
    """Sampled-group alternating dynamics with table-lookup rewards.

    Per iteration: sample K traces, count answers, look rewards up by
    count, standardize advantages within the group, take a mirror step on
    the policy (entropic for kl, projected Euclidean otherwise), then
    refit the target from the counts.  The recorded gap and l1 error are
    measured against the exact equilibrium reference.
    """
    if table.K != spec.K:
        raise DomainError(
            f"table group size {table.K} != game group size {spec.K}"
        )
    if not lr > 0:
        raise DomainError("learning rate must be positive")
    rng = np.random.default_rng(seed)
    reference = reference or exact_equilibrium(spec)
    nu_star = answer_marginal(
        reference.policy, spec.answer_of, spec.n_answers
    )
    pi = spec.ref_policy.copy()
    q = np.full(spec.n_answers, 1.0 / spec.n_answers)
    u = link_dual(spec, q)
    trace = GameTrace(seed=seed, mode="grpo")

    def snapshot(counts, rewards, advantages):
        nu = answer_marginal(pi, spec.answer_of, spec.n_answers)
        gap = duality_gap(
            spec, pi, q if spec.alignment == "coherence_empirical" else u
        )
        trace.record(
            gap,
            _entropy(pi),
            float(np.abs(nu - nu_star).sum()),
            pi,
            q,
            counts,
            rewards,
            advantages,
        )

    snapshot(None, None, None)
    log_pi0 = np.log(spec.ref_policy)
    for _ in range(T):
        draws = rng.choice(spec.n_traces, size=spec.K, p=pi)
        answer_ids = spec.answer_of[draws]
        counts = np.bincount(answer_ids, minlength=spec.n_answers)
        rewards = table.coeffs[counts[answer_ids]]
        mean_r = float(rewards.mean())
        std_r = float(rewards.std())
        advantages = (rewards - mean_r) / (std_r + ADV_EPS)
        # Full advantage direction over answers; sampled traces see their
        # own advantage, unsampled answers carry the count-0 table entry.
        # A degenerate group (all rewards equal) carries no signal at all.
        if std_r < 1e-12:
            adv_answers = np.zeros(spec.n_answers)
        else:
            adv_answers = (table.coeffs[counts] - mean_r) / (std_r + ADV_EPS)
        direction = adv_answers[spec.answer_of]
        if spec.geometry == "kl":
            logits = np.log(pi)
            logits += lr * (direction - spec.beta * (logits - log_pi0))
            logits -= logits.max()
            pi = np.exp(logits)
            pi /= pi.sum()
        else:
            pi = sparsemax_project(
                pi - lr * (spec.beta * (pi - spec.ref_policy) - direction)
            )
            if spec.geometry != "kl":
                # Sampling needs full support; keep a vanishing floor.
                pi = np.maximum(pi, 1e-12)
                pi /= pi.sum()
        q, u = target_best_response(spec, counts)
        snapshot(counts, rewards, advantages)
    return trace


def run_mirror_descent(
    spec: GameSpec,
    reward: PolynomialReward,
    T: int,
    step_rule=None,
    seed: int = 0,
    stochastic: bool = True,
    gap_every: int | None = None,
    reference: GameState | None = None,
) -> GameTrace:
    """Stochastic saddle dynamics on (policy, dual) for polynomial games.

    The policy player follows projected gradient steps driven by the
    unbiased falling-factorial reward table; the dual player ascends with
    the empirical answer marginal against the exact conjugate gradient.
    Uniform-averaged iterates are what the recorded gap measures.

    With ``stochastic=False`` the loop plays damped exact best responses
    instead - the full-information limit of the alternating scheme - and
    records the gap of the current pair, which contracts linearly.
    """
    if spec.geometry == "kl":
        raise DomainError("mirror-descent mode needs a polynomial geometry")
    if reward.degree > spec.K:
        raise DomainError("reward degree exceeds the group size")
    if step_rule is None:
        step_rule = lambda t: 1.0 / math.sqrt(t)  # noqa: E731
    table = u_statistic_table(reward, spec.K)
    rng = np.random.default_rng(seed)
    reference = reference or exact_equilibrium(spec)
    nu_star = answer_marginal(reference.policy, spec.answer_of, spec.n_answers)
    pi = spec.ref_policy.copy()
    u = link_dual(spec, np.full(spec.n_answers, 1.0 / spec.n_answers))
    pi_avg = pi.copy()
    u_avg = u.copy()
    trace = GameTrace(seed=seed, mode="mirror" if stochastic else "mirror_exact")

    def snapshot(counts, pi_rec, u_rec, pi_now, u_now):
        nu_rec = answer_marginal(pi_rec, spec.answer_of, spec.n_answers)
        trace.record(
            duality_gap(spec, pi_rec, u_rec),
            _entropy(pi_rec),
            float(np.abs(nu_rec - nu_star).sum()),
            pi_rec,
            u_rec,
            counts,
            None,
            None,
            gap_last=duality_gap(spec, pi_now, u_now),
        )

    snapshot(None, pi_avg, u_avg, pi, u)
    if gap_every is None:
        schedule = {int(10 ** (i / 8.0)) for i in range(0, 200)}
    else:
        schedule = None
    for t in range(1, T + 1):
        eta = float(step_rule(t))
        if eta <= 0:
            raise DomainError("step rule produced a nonpositive step")
        if stochastic:
            draws = rng.choice(spec.n_traces, size=spec.K, p=pi)
            counts = np.bincount(
                spec.answer_of[draws], minlength=spec.n_answers
            )
            reward_vec = table.coeffs[counts]
            nu_hat = counts / spec.K
            pi = sparsemax_project(
                pi
                - eta
                * (
                    spec.beta * (pi - spec.ref_policy)
                    - reward_vec[spec.answer_of]
                )
            )
            pi = np.maximum(pi, 1e-12)
            pi /= pi.sum()
            u = u + eta * (nu_hat - sparsemax_project(u))
            pi_avg += (pi - pi_avg) / (t + 1)
            u_avg += (u - u_avg) / (t + 1)
            pi_rec, u_rec = pi_avg, u_avg
        else:
            counts = None
            nu = answer_marginal(pi, spec.answer_of, spec.n_answers)
            u = 0.5 * u + 0.5 * nu
            pi = 0.5 * pi + 0.5 * sparsemax_project(
                spec.ref_policy - u[spec.answer_of] / spec.beta
            )
            pi_rec, u_rec = pi, u
        due = (
            (t % gap_every == 0)
            if gap_every is not None
            else (t in schedule)
        )
        if due or t == T:
            snapshot(counts, pi_rec, u_rec, pi, u)
    return trace
