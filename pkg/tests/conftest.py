import numpy as np
import pytest

from pessiq.mdp import StochasticPolicy, TabularMdp
from pessiq.instances import near_expert_fixture


def one_state(reward: float, discount: float, num_actions: int = 1) -> TabularMdp:
    return TabularMdp(np.ones((1, num_actions, 1)), np.full((1, num_actions), reward), discount)


def cycle_mdp(num_states: int, discount: float, reward=None) -> TabularMdp:
    """Deterministic s -> s+1 mod S under every action (single action)."""
    p = np.zeros((num_states, 1, num_states))
    for s in range(num_states):
        p[s, 0, (s + 1) % num_states] = 1.0
    r = np.zeros((num_states, 1)) if reward is None else np.asarray(reward, float).reshape(num_states, 1)
    return TabularMdp(p, r, discount)


def random_stochastic_policy(rng: np.random.Generator, S: int, A: int) -> StochasticPolicy:
    return StochasticPolicy(rng.dirichlet(np.ones(A), size=S))


@pytest.fixture(scope="session")
def fixture_mdp():
    return near_expert_fixture()


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
