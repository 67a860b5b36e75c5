"""Finite discounted MDPs and their exact oracles.

Everything here is dense linear algebra on small tables: optimal values by
value iteration, policy values and discounted occupancies by direct solves,
and the behavior chain's stationary distribution and mixing time on the
state-action space.  Arrays use the layout ``transition[s, a, s']`` and
``reward[s, a]``.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

ROW_TOL = 1e-12


class ConvergenceError(RuntimeError):
    """An iterative oracle hit its iteration cap."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual={residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


class MdpFormatError(ValueError):
    """An MDP file failed validation; the message names the offending line."""


@dataclass(frozen=True)
class TabularMdp:
    transition: np.ndarray
    reward: np.ndarray
    discount: float

    def __post_init__(self):
        p = np.array(self.transition, dtype=np.float64)
        r = np.array(self.reward, dtype=np.float64)
        if p.ndim != 3 or p.shape[0] != p.shape[2]:
            raise ValueError(f"transition must have shape (S, A, S), got {p.shape}")
        if r.shape != p.shape[:2]:
            raise ValueError(f"reward must have shape {p.shape[:2]}, got {r.shape}")
        if not 0.0 < self.discount < 1.0:
            raise ValueError(f"discount must lie in (0, 1), got {self.discount}")
        if np.any(p < 0):
            raise ValueError("transition has negative entries")
        bad = np.abs(p.sum(axis=2) - 1.0) > ROW_TOL
        if np.any(bad):
            s, a = np.argwhere(bad)[0]
            raise ValueError(f"transition row (s={s}, a={a}) sums to {p[s, a].sum()!r}")
        if np.any((r < 0) | (r > 1)):
            raise ValueError("rewards must lie in [0, 1]")
        p.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "reward", r)
        object.__setattr__(self, "discount", float(self.discount))

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def horizon(self) -> float:
        """Effective horizon 1/(1-gamma)."""
        return 1.0 / (1.0 - self.discount)


@dataclass(frozen=True)
class DeterministicPolicy:
    actions: np.ndarray

    def __post_init__(self):
        a = np.array(self.actions, dtype=np.int64)
        if a.ndim != 1 or np.any(a < 0):
            raise ValueError("actions must be a 1-d array of nonnegative indices")
        a.setflags(write=False)
        object.__setattr__(self, "actions", a)

    def __getitem__(self, s):
        return int(self.actions[s])

    def __len__(self):
        return self.actions.shape[0]

    def as_matrix(self, num_actions: int) -> np.ndarray:
        if np.any(self.actions >= num_actions):
            raise ValueError("action index out of range")
        m = np.zeros((len(self), num_actions))
        m[np.arange(len(self)), self.actions] = 1.0
        return m


@dataclass(frozen=True)
class StochasticPolicy:
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64)
        if p.ndim != 2 or np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1.0) > ROW_TOL):
            raise ValueError("probs must be a row-stochastic (S, A) matrix")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, num_states: int, num_actions: int) -> "StochasticPolicy":
        return cls(np.full((num_states, num_actions), 1.0 / num_actions))

    @classmethod
    def mixture(cls, policy: DeterministicPolicy, num_actions: int, eps: float) -> "StochasticPolicy":
        """(1 - eps) * policy + eps * uniform."""
        if not 0.0 <= eps <= 1.0:
            raise ValueError(f"mixing weight must lie in [0, 1], got {eps}")
        probs = (1.0 - eps) * policy.as_matrix(num_actions) + eps / num_actions
        return cls(probs / probs.sum(axis=1, keepdims=True))

    def as_matrix(self, num_actions: int) -> np.ndarray:
        if self.probs.shape[1] != num_actions:
            raise ValueError("policy action count does not match the MDP")
        return np.array(self.probs)


Policy = Union[DeterministicPolicy, StochasticPolicy]


@dataclass(frozen=True)
class ExactSolution:
    v_star: np.ndarray
    q_star: np.ndarray
    pi_star: DeterministicPolicy
    iterations_used: int
    residuals: tuple = field(default=(), repr=False)


@dataclass(frozen=True)
class OccupancyMeasure:
    d_sa: np.ndarray
    d_s: np.ndarray


@dataclass(frozen=True)
class ChainDiagnostics:
    stationary: np.ndarray
    mu_min: float
    concentrability: float
    t_mix_quarter: int


def greedy(q: np.ndarray) -> DeterministicPolicy:
    """Row-wise argmax with lowest-index tie-breaking."""
    return DeterministicPolicy(np.argmax(np.asarray(q), axis=1))


def greedy_visited(q: np.ndarray, visited: np.ndarray) -> DeterministicPolicy:
    """Greedy over the pairs marked in ``visited`` only, lowest-index ties.

    States with no marked pair fall back to action 0.  Unmarked entries carry
    no estimate, so they must not win the argmax against penalized (possibly
    negative) estimates.
    """
    q = np.where(visited, q, -np.inf)
    actions = np.argmax(q, axis=1)
    actions[~np.any(visited, axis=1)] = 0
    return DeterministicPolicy(actions)


def bellman_optimality(mdp: TabularMdp, q: np.ndarray) -> np.ndarray:
    return mdp.reward + mdp.discount * (mdp.transition @ q.max(axis=1))


def default_max_iters(discount: float, tol: float) -> int:
    return math.ceil(math.log(tol * (1.0 - discount)) / math.log(discount)) + 64


def value_iteration(mdp: TabularMdp, tol: float = 1e-10, max_iters: int | None = None) -> ExactSolution:
    """Iterate the Bellman optimality operator from Q = 0.

    Stops once successive iterates differ by at most ``tol`` in sup-norm, which
    bounds the Bellman residual of the returned Q by ``gamma * tol``.

    Raises:
        ConvergenceError: if ``max_iters`` sweeps do not reach ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iters is None:
        max_iters = default_max_iters(mdp.discount, tol)
    q = np.zeros_like(mdp.reward)
    residuals = []
    for k in range(1, max_iters + 1):
        q_next = bellman_optimality(mdp, q)
        res = float(np.max(np.abs(q_next - q)))
        residuals.append(res)
        q = q_next
        if res <= tol:
            return _polish(mdp, q, k, tuple(residuals))
    raise ConvergenceError("value iteration did not converge", residuals[-1], max_iters)


def _polish(mdp: TabularMdp, q: np.ndarray, iterations: int, residuals: tuple) -> ExactSolution:
    # A converged iterate is within tol of Q*; its greedy policy is then optimal
    # in all but near-tie cases, and an exact solve of that policy removes the
    # remaining O(tol) error.  Policy-iteration steps settle any near ties.
    pi = greedy(q)
    for _ in range(mdp.num_states * mdp.num_actions):
        v, _ = policy_evaluation(mdp, pi, np.full(mdp.num_states, 1.0 / mdp.num_states))
        q_pi = mdp.reward + mdp.discount * (mdp.transition @ v)
        improved = greedy(q_pi)
        gain = q_pi[np.arange(mdp.num_states), improved.actions] - v
        if np.all(gain <= 1e-13 * max(1.0, float(np.max(np.abs(v))))):
            return ExactSolution(q_pi.max(axis=1), q_pi, improved, iterations, residuals)
        pi = improved
    return ExactSolution(q.max(axis=1), q, greedy(q), iterations, residuals)


def _policy_matrix(mdp: TabularMdp, policy: Policy) -> np.ndarray:
    m = policy.as_matrix(mdp.num_actions)
    if m.shape[0] != mdp.num_states:
        raise ValueError("policy state count does not match the MDP")
    return m


def _check_distribution(rho: np.ndarray, n: int, what: str) -> np.ndarray:
    rho = np.asarray(rho, dtype=np.float64)
    if rho.shape != (n,) or np.any(rho < 0) or abs(rho.sum() - 1.0) > 1e-10:
        raise ValueError(f"{what} must be a probability vector of length {n}")
    return rho


def policy_evaluation(mdp: TabularMdp, policy: Policy, rho: np.ndarray) -> tuple[np.ndarray, float]:
    """Exact V^pi by solving (I - gamma P_pi) v = r_pi; returns (v, <rho, v>)."""
    rho = _check_distribution(rho, mdp.num_states, "rho")
    pi = _policy_matrix(mdp, policy)
    p_pi = np.einsum("sa,sat->st", pi, mdp.transition)
    r_pi = np.einsum("sa,sa->s", pi, mdp.reward)
    try:
        v = np.linalg.solve(np.eye(mdp.num_states) - mdp.discount * p_pi, r_pi)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError("policy evaluation system is singular", math.inf, 0) from exc
    return v, float(rho @ v)


def state_action_chain(mdp: TabularMdp, policy: Policy) -> np.ndarray:
    """Transition matrix of (s, a) -> (s', a') under ``policy``, shape (SA, SA)."""
    pi = _policy_matrix(mdp, policy)
    S, A = mdp.num_states, mdp.num_actions
    chain = mdp.transition[:, :, :, None] * pi[None, None, :, :]
    return chain.reshape(S * A, S * A)


def occupancy(mdp: TabularMdp, policy: Policy, rho: np.ndarray) -> OccupancyMeasure:
    """Discounted state-action occupancy d = (1-gamma) rho^pi + gamma d P^pi."""
    rho = _check_distribution(rho, mdp.num_states, "rho")
    pi = _policy_matrix(mdp, policy)
    S, A = mdp.num_states, mdp.num_actions
    rho_pi = (rho[:, None] * pi).ravel()
    chain = state_action_chain(mdp, policy)
    lhs = (np.eye(S * A) - mdp.discount * chain).T
    d = np.linalg.solve(lhs, (1.0 - mdp.discount) * rho_pi)
    d = np.clip(d, 0.0, None)
    d /= d.sum()
    d_sa = d.reshape(S, A)
    return OccupancyMeasure(d_sa, d_sa.sum(axis=1))


def chain_stationary(chain: np.ndarray, tol: float = 1e-12, max_iters: int = 1_000_000) -> np.ndarray:
    """Power iteration mu <- mu M from uniform until ||mu - mu M||_1 <= tol."""
    n = chain.shape[0]
    mu = np.full(n, 1.0 / n)
    res = math.inf
    for _ in range(max_iters):
        nxt = mu @ chain
        res = float(np.abs(nxt - mu).sum())
        mu = nxt / nxt.sum()
        if res <= tol:
            return mu
    raise ConvergenceError("stationary distribution did not converge; the chain is likely not ergodic", res, max_iters)


def stationary_distribution(mdp: TabularMdp, behavior: Policy, tol: float = 1e-12,
                            max_iters: int = 1_000_000) -> np.ndarray:
    """Stationary law of the behavior chain on (s, a), shape (S, A)."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    mu = chain_stationary(state_action_chain(mdp, behavior), tol, max_iters)
    return mu.reshape(mdp.num_states, mdp.num_actions)


def state_stationary(mdp: TabularMdp, policy: Policy, tol: float = 1e-12, max_iters: int = 1_000_000) -> np.ndarray:
    """Stationary state distribution of P_pi.

    Iterates the lazy chain (I + P_pi)/2, which has the same stationary laws
    but cannot be periodic.
    """
    pi = _policy_matrix(mdp, policy)
    p_pi = np.einsum("sa,sat->st", pi, mdp.transition)
    return chain_stationary(0.5 * (np.eye(mdp.num_states) + p_pi), tol, max_iters)


def concentrability(d_star: OccupancyMeasure | np.ndarray, mu_b: np.ndarray) -> float:
    """max d*(s,a) / mu_b(s,a) with 0/0 = 0 and x/0 = inf for x > 0."""
    d = np.asarray(d_star.d_sa if isinstance(d_star, OccupancyMeasure) else d_star, dtype=np.float64).ravel()
    mu = np.asarray(mu_b, dtype=np.float64).ravel()
    if d.shape != mu.shape:
        raise ValueError("occupancy and stationary distribution shapes differ")
    if np.any((mu == 0) & (d > 0)):
        return math.inf
    mask = mu > 0
    if not np.any(mask):
        return 0.0
    return float(np.max(d[mask] / mu[mask]))


def chain_mixing_time(chain: np.ndarray, mu: np.ndarray, delta: float = 0.25, max_steps: int = 100_000) -> int:
    """Smallest t >= 1 with max_x TV(M^t[x], mu) <= delta."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    mu = np.asarray(mu, dtype=np.float64).ravel()
    power = np.array(chain, dtype=np.float64)
    tv = math.inf
    for t in range(1, max_steps + 1):
        tv = 0.5 * float(np.max(np.abs(power - mu[None, :]).sum(axis=1)))
        if tv <= delta:
            return t
        power = power @ chain
    raise ConvergenceError("mixing time exceeds the step cap; the chain is likely not ergodic", tv, max_steps)


def mixing_time(mdp: TabularMdp, behavior: Policy, delta: float = 0.25, max_steps: int = 100_000) -> int:
    """t_mix(delta) of the behavior chain on state-action pairs."""
    chain = state_action_chain(mdp, behavior)
    mu = chain_stationary(chain)
    return chain_mixing_time(chain, mu, delta, max_steps)


def chain_diagnostics(mdp: TabularMdp, behavior: Policy, rho: np.ndarray,
                      exact: ExactSolution | None = None) -> ChainDiagnostics:
    if exact is None:
        exact = value_iteration(mdp)
    mu = stationary_distribution(mdp, behavior)
    d_star = occupancy(mdp, exact.pi_star, rho)
    return ChainDiagnostics(
        stationary=mu,
        mu_min=float(mu.min()),
        concentrability=concentrability(d_star, mu),
        t_mix_quarter=mixing_time(mdp, behavior, 0.25),
    )


# -- file format ------------------------------------------------------------

def _key_line(text: str, key: str) -> int:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else 1


def parse_mdp(text: str, source: str = "<string>") -> TabularMdp:
    """Build an MDP from JSON text with keys num_states, num_actions, discount,
    reward (S x A, nested or flat row-major) and transition (S x A x S)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MdpFormatError(f"{source}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    return mdp_from_dict(doc, source, text)


def mdp_from_dict(doc: dict, source: str = "<dict>", text: str = "") -> TabularMdp:
    def fail(key, msg):
        raise MdpFormatError(f"{source}:{_key_line(text, key)}: {key}: {msg}")

    for key in ("num_states", "num_actions", "discount", "reward", "transition"):
        if key not in doc:
            fail(key, "missing field")
    S, A = doc["num_states"], doc["num_actions"]
    if not isinstance(S, int) or S < 1:
        fail("num_states", f"must be a positive integer, got {S!r}")
    if not isinstance(A, int) or A < 1:
        fail("num_actions", f"must be a positive integer, got {A!r}")
    gamma = doc["discount"]
    if not isinstance(gamma, (int, float)) or not 0.0 < gamma < 1.0:
        fail("discount", f"must lie in (0, 1), got {gamma!r}")
    try:
        r = np.asarray(doc["reward"], dtype=np.float64)
    except (TypeError, ValueError):
        fail("reward", "not a numeric array")
    if r.size != S * A:
        fail("reward", f"expected {S * A} entries, got {r.size}")
    r = r.reshape(S, A)
    if np.any((r < 0) | (r > 1)):
        s, a = np.argwhere((r < 0) | (r > 1))[0]
        fail("reward", f"entry (s={s}, a={a}) = {r[s, a]!r} outside [0, 1]")
    try:
        p = np.asarray(doc["transition"], dtype=np.float64)
    except (TypeError, ValueError):
        fail("transition", "not a numeric array")
    if p.size != S * A * S:
        fail("transition", f"expected {S * A * S} entries, got {p.size}")
    p = p.reshape(S, A, S)
    if np.any(p < 0):
        s, a, t = np.argwhere(p < 0)[0]
        fail("transition", f"negative probability at (s={s}, a={a}, s'={t})")
    sums = p.sum(axis=2)
    if np.any(np.abs(sums - 1.0) > ROW_TOL):
        s, a = np.argwhere(np.abs(sums - 1.0) > ROW_TOL)[0]
        fail("transition", f"row (s={s}, a={a}) sums to {sums[s, a]!r}, not 1")
    return TabularMdp(p, r, float(gamma))


def load_mdp(path: str | Path) -> TabularMdp:
    path = Path(path)
    return parse_mdp(path.read_text(), str(path))


def mdp_to_dict(mdp: TabularMdp) -> dict:
    return {
        "num_states": mdp.num_states,
        "num_actions": mdp.num_actions,
        "discount": mdp.discount,
        "reward": mdp.reward.tolist(),
        "transition": mdp.transition.tolist(),
    }


def save_mdp(mdp: TabularMdp, path: str | Path) -> None:
    Path(path).write_text(json.dumps(mdp_to_dict(mdp), indent=1) + "\n")
