"""Transition streams: one Markovian trajectory under a behavior policy, or
i.i.d. draws of (s, a) from the behavior chain's stationary law.

Each transition consumes exactly two uniforms from the sampler's SplitMix64
stream.  Markovian mode: ``u1`` picks ``a ~ pi_b(.|s)`` and ``u2`` picks
``s' ~ P(.|s, a)``, both by inverse cdf (see :func:`pessiq.rng.cdf_table`).
I.i.d. mode: ``u1`` picks the flattened pair index ``s * A + a`` from ``mu_b``
and ``u2`` the next state.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple

import numba
import numpy as np

from .mdp import Policy, TabularMdp
from .rng import MASK64, cdf_table, inverse_cdf, next_uniform

MODES = ("markovian", "iid")


class Transition(NamedTuple):
    state: int
    action: int
    next_state: int
    reward: float


@dataclass(frozen=True)
class SamplerConfig:
    mode: str = "markovian"
    initial_state: int = 0
    seed: int = 0
    total: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.total is not None and self.total < 1:
            raise ValueError("total must be positive")


@dataclass
class Trajectory:
    """A block of consecutive transitions stored as parallel index arrays."""

    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray
    rewards: np.ndarray

    def __len__(self):
        return self.states.shape[0]

    def __getitem__(self, i) -> Transition:
        return Transition(int(self.states[i]), int(self.actions[i]), int(self.next_states[i]), float(self.rewards[i]))

    def __iter__(self) -> Iterator[Transition]:
        for i in range(len(self)):
            yield self[i]


@numba.njit(cache=True)
def _walk(p_cdf, pi_cdf, mu_cdf, iid, num_actions, state, counter, out_s, out_a, out_s2):
    for t in range(out_s.shape[0]):
        u, counter = next_uniform(counter)
        if iid:
            k = inverse_cdf(mu_cdf, u)
            state = k // num_actions
            action = k - state * num_actions
        else:
            action = inverse_cdf(pi_cdf[state], u)
        u, counter = next_uniform(counter)
        nxt = inverse_cdf(p_cdf[state * num_actions + action], u)
        out_s[t] = state
        out_a[t] = action
        out_s2[t] = nxt
        state = nxt
    return state, counter


class Sampler:
    """Single-owner transition stream.

    ``mu_b`` (shape (S, A)) is required in iid mode; compute it with
    :func:`pessiq.mdp.stationary_distribution`.
    """

    def __init__(self, mdp: TabularMdp, behavior: Policy, config: SamplerConfig = SamplerConfig(),
                 mu_b: np.ndarray | None = None):
        S, A = mdp.num_states, mdp.num_actions
        if config.mode == "markovian" and not 0 <= config.initial_state < S:
            raise ValueError(f"initial_state {config.initial_state} out of range for {S} states")
        if config.mode == "iid":
            if mu_b is None:
                raise ValueError("iid mode needs the stationary distribution mu_b")
            mu_b = np.asarray(mu_b, dtype=np.float64).reshape(S * A)
            self._mu_cdf = cdf_table(mu_b / mu_b.sum())
        else:
            self._mu_cdf = np.ones(1)
        self.mdp = mdp
        self.config = config
        self._reward = mdp.reward
        self._p_cdf = cdf_table(mdp.transition.reshape(S * A, S))
        self._pi_cdf = cdf_table(behavior.as_matrix(A))
        self._counter = config.seed & MASK64
        self.state = int(config.initial_state) if config.mode == "markovian" else 0
        self.steps_taken = 0

    @property
    def remaining(self) -> int | None:
        if self.config.total is None:
            return None
        return self.config.total - self.steps_taken

    def take_block(self, n: int) -> Trajectory:
        """The next ``n`` transitions as arrays; continues the stream."""
        if n < 0:
            raise ValueError("n must be nonnegative")
        s = np.empty(n, dtype=np.int64)
        a = np.empty(n, dtype=np.int64)
        s2 = np.empty(n, dtype=np.int64)
        if n:
            state, counter = _walk(self._p_cdf, self._pi_cdf, self._mu_cdf, self.config.mode == "iid",
                                   self.mdp.num_actions, np.int64(self.state), np.uint64(self._counter), s, a, s2)
            self.state, self._counter = int(state), int(counter) & MASK64
            self.steps_taken += n
        return Trajectory(s, a, s2, self._reward[s, a])

    def take(self, n: int) -> list[Transition]:
        return list(self.take_block(n))

    def next_transition(self) -> Transition:
        return self.take_block(1)[0]


def write_trajectory(path: str | Path, transitions, start: int = 1) -> None:
    """Tab-separated dump, one ``t s a s' r`` line per transition."""
    with open(path, "w") as fh:
        for t, tr in enumerate(transitions, start=start):
            fh.write(f"{t}\t{tr.state}\t{tr.action}\t{tr.next_state}\t{tr.reward!r}\n")


def read_trajectory(path: str | Path) -> list[Transition]:
    out = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                _, s, a, s2, r = line.split("\t")
                out.append(Transition(int(s), int(a), int(s2), float(r)))
    return out
