"""Asynchronous Q-learning with a Hoeffding-style lower-confidence penalty.

One (s, a) entry of Q is updated per observed transition with the rescaled
linear rate ``eta_n = (H + 1) / (H + n)`` and target
``r(s, a) + gamma * V(s') - b_n``; V only ever moves up.  Setting ``c_b = 0``
recovers plain asynchronous Q-learning (the ``vanilla`` baseline).

:func:`lcb_step` is the readable single-transition update; :func:`run_lcb`
pushes whole trajectory blocks through a compiled kernel that performs the
same floating-point operations in the same order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .mdp import DeterministicPolicy, TabularMdp, greedy, greedy_visited
from .sampling import Sampler, Transition, Trajectory


@dataclass(frozen=True)
class LcbConfig:
    total_steps: int
    num_states: int
    discount: float
    delta: float = 0.1
    c_b: float = 1.0

    def __post_init__(self):
        if self.total_steps < 0 or self.num_states < 1:
            raise ValueError("total_steps must be >= 0 and num_states >= 1")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if not 0.0 < self.discount < 1.0:
            raise ValueError("discount must lie in (0, 1)")
        if self.c_b < 0:
            raise ValueError("c_b must be nonnegative")

    @classmethod
    def for_mdp(cls, mdp: TabularMdp, total_steps: int, **kw) -> "LcbConfig":
        return cls(total_steps=total_steps, num_states=mdp.num_states, discount=mdp.discount, **kw)

    @property
    def iota(self) -> float:
        """log(S T / delta); T is clamped to 1 so a zero budget stays finite."""
        return math.log(self.num_states * max(self.total_steps, 1) / self.delta)

    @property
    def horizon(self) -> int:
        return max(1, math.ceil(4.0 / (1.0 - self.discount) * self.iota))


def learning_rate(n: int, h: int) -> float:
    if n < 1 or h < 1:
        raise ValueError("n and h must be positive")
    return (h + 1.0) / (h + n)


def eta_weights(t: int, h: int) -> np.ndarray:
    """Weights eta_i^t = eta_i * prod_{j=i+1..t} (1 - eta_j), i = 1..t."""
    if t < 1:
        raise ValueError("t must be positive")
    w = np.empty(t)
    tail = 1.0
    for i in range(t, 0, -1):
        eta = learning_rate(i, h)
        w[i - 1] = eta * tail
        tail *= 1.0 - eta
    return w


@numba.njit(cache=True)
def _hoeffding(n, horizon, iota, one_minus_gamma_sq, c_b):
    return c_b * math.sqrt(horizon * iota / (n * one_minus_gamma_sq))


def hoeffding_penalty(n: int, cfg: LcbConfig) -> float:
    """b_n = C_b sqrt(H iota / (n (1-gamma)^2))."""
    if n < 1:
        raise ValueError("n must be positive")
    return _hoeffding(float(n), float(cfg.horizon), cfg.iota, (1.0 - cfg.discount) ** 2, cfg.c_b)


@dataclass
class LcbState:
    q: np.ndarray
    v: np.ndarray
    visits: np.ndarray
    policy_snapshot: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, num_states: int, num_actions: int) -> "LcbState":
        return cls(np.zeros((num_states, num_actions)), np.zeros(num_states),
                   np.zeros((num_states, num_actions), dtype=np.int64), np.zeros(num_states, dtype=np.int64))

    def copy(self) -> "LcbState":
        return LcbState(self.q.copy(), self.v.copy(), self.visits.copy(), self.policy_snapshot.copy(), self.step)


def lcb_step(state: LcbState, tr: Transition, cfg: LcbConfig) -> LcbState:
    """Apply one transition in place and return the same state object."""
    if cfg.total_steps and state.step >= cfg.total_steps:
        raise ValueError("budget already consumed")
    s, a, s2 = tr.state, tr.action, tr.next_state
    state.visits[s, a] += 1
    n = float(state.visits[s, a])
    h = float(cfg.horizon)
    eta = (h + 1.0) / (h + n)
    b = _hoeffding(n, h, cfg.iota, (1.0 - cfg.discount) ** 2, cfg.c_b)
    gamma = cfg.discount
    state.q[s, a] = (1.0 - eta) * state.q[s, a] + eta * (tr.reward + gamma * state.v[s2] - b)
    best = int(np.argmax(state.q[s]))
    if state.q[s, best] > state.v[s]:
        state.v[s] = state.q[s, best]
        state.policy_snapshot[s] = best
    state.step += 1
    return state


@numba.njit(cache=True)
def _lcb_kernel(q, v, visits, snapshot, states, actions, next_states, rewards,
                gamma, horizon, iota, one_minus_gamma_sq, c_b, v_trace):
    num_actions = q.shape[1]
    record = v_trace.shape[0] > 0
    for t in range(states.shape[0]):
        s = states[t]
        a = actions[t]
        s2 = next_states[t]
        visits[s, a] += 1
        n = float(visits[s, a])
        eta = (horizon + 1.0) / (horizon + n)
        b = _hoeffding(n, horizon, iota, one_minus_gamma_sq, c_b)
        q[s, a] = (1.0 - eta) * q[s, a] + eta * (rewards[t] + gamma * v[s2] - b)
        best = 0
        for j in range(1, num_actions):
            if q[s, j] > q[s, best]:
                best = j
        if q[s, best] > v[s]:
            v[s] = q[s, best]
            snapshot[s] = best
        if record:
            v_trace[t, :] = v


def lcb_block(state: LcbState, block: Trajectory, cfg: LcbConfig, record_v: bool = False) -> np.ndarray | None:
    """Apply a block of transitions in place; optionally return V after every step."""
    trace = np.empty((len(block) if record_v else 0, state.v.shape[0]))
    _lcb_kernel(state.q, state.v, state.visits, state.policy_snapshot, block.states, block.actions,
                block.next_states, np.ascontiguousarray(block.rewards, dtype=np.float64), cfg.discount,
                float(cfg.horizon), cfg.iota, (1.0 - cfg.discount) ** 2, cfg.c_b, trace)
    state.step += len(block)
    return trace if record_v else None


@dataclass
class LcbTrace:
    """Thinned per-run diagnostics: rows of (t, gap_estimate, max_V, penalty_at_step)."""

    rows: list = field(default_factory=list)

    HEADER = ("t", "gap_estimate", "max_V", "penalty_at_step")

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(self.HEADER) + "\n")
            for row in self.rows:
                fh.write(",".join(repr(x) if isinstance(x, float) else str(x) for x in row) + "\n")


def run_lcb(mdp: TabularMdp, cfg: LcbConfig, sampler: Sampler, *, trace: LcbTrace | None = None,
            trace_every: int = 1000, v_star: np.ndarray | None = None, rho: np.ndarray | None = None,
            mask_unvisited: bool = True, block_size: int = 1 << 18) -> tuple[LcbState, DeterministicPolicy]:
    """Consume ``cfg.total_steps`` transitions and return (final state, pi_hat).

    ``pi_hat`` is greedy in the final Q with lowest-index ties, taken over
    visited pairs only unless ``mask_unvisited`` is false.  If ``trace``
    is given, a row is appended every ``trace_every`` steps; its
    ``gap_estimate`` is <rho, V* - V_t> (an upper bound on the gap of pi_t
    under pessimism) and NaN unless ``v_star`` is given.
    """
    remaining = sampler.remaining
    if remaining is not None and remaining < cfg.total_steps:
        raise ValueError(f"sampler has {remaining} transitions left, run needs {cfg.total_steps}")
    state = LcbState.zeros(mdp.num_states, mdp.num_actions)
    if rho is None:
        rho = np.full(mdp.num_states, 1.0 / mdp.num_states)
    chunk = min(block_size, trace_every) if trace is not None else block_size
    left = cfg.total_steps
    while left > 0:
        block = sampler.take_block(min(chunk, left))
        lcb_block(state, block, cfg)
        left -= len(block)
        if trace is not None:
            n_last = int(state.visits[block.states[-1], block.actions[-1]])
            gap = float(rho @ (v_star - state.v)) if v_star is not None else math.nan
            trace.rows.append((state.step, gap, float(state.v.max()), hoeffding_penalty(n_last, cfg)))
    pi_hat = greedy_visited(state.q, state.visits > 0) if mask_unvisited else greedy(state.q)
    return state, pi_hat
