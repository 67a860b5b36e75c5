"""Benchmark MDP families.

All randomness comes from :mod:`pessiq.rng`, so an instance is a pure function
of its parameters.  ``random_mdp`` draws every row ``P(.|s, a)`` from a flat
Dirichlet (normalized ``-log(u)`` draws) and every reward uniformly from
[0, 1); transitions are generated first, rewards second, both from the stream
``derive_seed(seed, 0x4D4450)``.
"""
from __future__ import annotations

import numpy as np

from .mdp import (ConvergenceError, StochasticPolicy, TabularMdp, load_mdp, stationary_distribution,
                  value_iteration)
from .rng import derive_seed, uniform_block

INSTANCE_TAG = 0x4D4450
MAX_RETRIES = 8


def random_mdp(num_states: int, num_actions: int, discount: float, seed: int) -> TabularMdp:
    S, A = num_states, num_actions
    u = uniform_block(derive_seed(seed, INSTANCE_TAG), 0, S * A * S + S * A)
    e = -np.log1p(-u[: S * A * S]).reshape(S, A, S)
    p = e / e.sum(axis=2, keepdims=True)
    r = u[S * A * S:].reshape(S, A)
    return TabularMdp(p, r, discount)


def chain_mdp(num_states: int, discount: float) -> TabularMdp:
    """Fixed river-style chain with actions 0 = left, 1 = right.

    Left moves one state down w.p. 0.9 (stays w.p. 0.1; at state 0 it always
    stays).  Right moves one state up w.p. 0.7 (stays w.p. 0.3; at the last
    state it always stays).  Rewards: 0.1 for left at state 0, 1.0 for right
    at the last state, 0 elsewhere.  For S = 2 this gives::

        P[0, left]  = [1.0, 0.0]   P[0, right] = [0.3, 0.7]
        P[1, left]  = [0.9, 0.1]   P[1, right] = [0.0, 1.0]
    """
    S = num_states
    if S < 2:
        raise ValueError("chain needs at least 2 states")
    p = np.zeros((S, 2, S))
    r = np.zeros((S, 2))
    for s in range(S):
        if s == 0:
            p[s, 0, 0] = 1.0
        else:
            p[s, 0, s - 1] = 0.9
            p[s, 0, s] = 0.1
        if s == S - 1:
            p[s, 1, s] = 1.0
        else:
            p[s, 1, s + 1] = 0.7
            p[s, 1, s] = 0.3
    r[0, 0] = 0.1
    r[S - 1, 1] = 1.0
    return TabularMdp(p, r, discount)


def near_expert_behavior(mdp: TabularMdp, expert_mix: float) -> StochasticPolicy:
    """(1 - eps) * pi_star + eps * uniform."""
    pi_star = value_iteration(mdp).pi_star
    return StochasticPolicy.mixture(pi_star, mdp.num_actions, expert_mix)


def perturb(mdp: TabularMdp, weight: float) -> TabularMdp:
    """Mix every transition row with the uniform distribution."""
    p = (1.0 - weight) * mdp.transition + weight / mdp.num_states
    return TabularMdp(p / p.sum(axis=2, keepdims=True), mdp.reward, mdp.discount)


def describe(instance: dict) -> str:
    kind = instance["type"]
    keys = [k for k in ("path", "num_states", "num_actions", "discount", "expert_mix", "seed") if k in instance]
    return f"{kind}(" + ";".join(f"{k}={instance[k]}" for k in keys) + ")"


def generate_instance(instance: dict) -> tuple[TabularMdp, StochasticPolicy]:
    """Build (mdp, behavior) from an instance descriptor dict.

    Descriptor ``type`` is one of ``file`` (``path``), ``random``
    (``num_states, num_actions, discount, seed``), ``near_expert`` (same plus
    ``expert_mix``) or ``chain`` (``num_states, discount``).  Generated kernels
    whose behavior chain fails the stationary-distribution check are mixed
    with uniform noise of weight 0.01 * 2^k, k = 0..7, before giving up.
    """
    kind = instance.get("type")
    if kind == "file":
        mdp = load_mdp(instance["path"])
        behavior = StochasticPolicy.uniform(mdp.num_states, mdp.num_actions)
        stationary_distribution(mdp, behavior)
        return mdp, behavior
    if kind == "random":
        mdp = random_mdp(instance["num_states"], instance["num_actions"], instance["discount"],
                         instance.get("seed", 0))
        make_behavior = lambda m: StochasticPolicy.uniform(m.num_states, m.num_actions)
    elif kind == "near_expert":
        eps = instance.get("expert_mix", 0.1)
        if not 0.0 <= eps <= 1.0:
            raise ValueError(f"expert_mix must lie in [0, 1], got {eps}")
        mdp = random_mdp(instance["num_states"], instance["num_actions"], instance["discount"],
                         instance.get("seed", 0))
        make_behavior = lambda m: near_expert_behavior(m, eps)
    elif kind == "chain":
        mdp = chain_mdp(instance["num_states"], instance["discount"])
        make_behavior = lambda m: StochasticPolicy.uniform(m.num_states, m.num_actions)
    else:
        raise ValueError(f"unknown instance type {kind!r}")
    base = mdp
    for attempt in range(MAX_RETRIES + 1):
        behavior = make_behavior(mdp)
        try:
            stationary_distribution(mdp, behavior)
            return mdp, behavior
        except ConvergenceError:
            if attempt == MAX_RETRIES:
                break
            mdp = perturb(base, 0.01 * 2 ** attempt)
    raise RuntimeError(f"could not generate an ergodic instance for {describe(instance)}")


def near_expert_fixture(num_states: int = 5, num_actions: int = 3, discount: float = 0.8,
                        expert_mix: float = 0.1, seed: int = 0) -> tuple[TabularMdp, StochasticPolicy]:
    """The near-expert benchmark used throughout the tests and demos."""
    return generate_instance({"type": "near_expert", "num_states": num_states, "num_actions": num_actions,
                              "discount": discount, "expert_mix": expert_mix, "seed": seed})
