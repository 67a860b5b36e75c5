import numpy as np
import pytest
from scipy import stats

from pessiq.instances import random_mdp
from pessiq.mdp import DeterministicPolicy, StochasticPolicy, stationary_distribution
from pessiq.rng import SplitMix64, cdf_table
from pessiq.sampling import Sampler, SamplerConfig, Transition, read_trajectory, write_trajectory

from conftest import cycle_mdp, one_state


def test_single_state_stream():
    sampler = Sampler(one_state(0.7, 0.5), StochasticPolicy.uniform(1, 1), SamplerConfig(seed=3))
    assert all(tr == Transition(0, 0, 0, 0.7) for tr in sampler.take(50))


def test_deterministic_cycle():
    S = 4
    sampler = Sampler(cycle_mdp(S, 0.9), DeterministicPolicy([0] * S))
    for t, tr in enumerate(sampler.take(10), start=1):
        assert (tr.state, tr.action, tr.next_state) == ((t - 1) % S, 0, t % S)


def test_take_zero_and_split_equals_whole():
    mdp = random_mdp(3, 2, 0.9, 1)
    cfg = SamplerConfig(seed=99)
    assert Sampler(mdp, StochasticPolicy.uniform(3, 2), cfg).take(0) == []
    a = Sampler(mdp, StochasticPolicy.uniform(3, 2), cfg)
    b = Sampler(mdp, StochasticPolicy.uniform(3, 2), cfg)
    assert a.take(3) + a.take(2) == b.take(5)


def test_stream_matches_hand_replay():
    # each transition eats two uniforms: action first, then next state
    mdp = random_mdp(3, 2, 0.9, 8)
    behavior = StochasticPolicy(np.array([[0.3, 0.7], [0.5, 0.5], [0.9, 0.1]]))
    seed = 2**64 - 5
    got = Sampler(mdp, behavior, SamplerConfig(seed=seed, initial_state=2)).take(200)
    rng = SplitMix64(seed)
    pi_cdf = cdf_table(behavior.probs)
    p_cdf = cdf_table(mdp.transition.reshape(6, 3))
    s = 2
    for tr in got:
        a = int(np.searchsorted(pi_cdf[s], rng.random(), side="right"))
        s2 = int(np.searchsorted(p_cdf[s * 2 + a], rng.random(), side="right"))
        assert tr == Transition(s, a, s2, float(mdp.reward[s, a]))
        s = s2


def test_iid_stream_replay_and_marginal():
    mdp = random_mdp(2, 2, 0.9, 5)
    behavior = StochasticPolicy.uniform(2, 2)
    mu = stationary_distribution(mdp, behavior)
    sampler = Sampler(mdp, behavior, SamplerConfig(mode="iid", seed=4), mu_b=mu)
    block = sampler.take_block(200_000)
    freq = np.bincount(block.states * 2 + block.actions, minlength=4) / len(block)
    assert 0.5 * np.abs(freq - mu.ravel()).sum() < 5e-3
    with pytest.raises(ValueError):
        Sampler(mdp, behavior, SamplerConfig(mode="iid"))


def test_markov_frequencies_match_stationary_seed42():
    mdp = random_mdp(2, 2, 0.9, 42)
    behavior = StochasticPolicy.uniform(2, 2)
    mu = stationary_distribution(mdp, behavior).ravel()
    block = Sampler(mdp, behavior, SamplerConfig(seed=42)).take_block(10**6)
    freq = np.bincount(block.states * 2 + block.actions, minlength=4) / len(block)
    assert 0.5 * np.abs(freq - mu).sum() <= 1e-2


def test_transition_frequencies_chi_square():
    mdp = random_mdp(3, 2, 0.9, 17)
    block = Sampler(mdp, StochasticPolicy.uniform(3, 2), SamplerConfig(seed=17)).take_block(10**5)
    for s in range(3):
        for a in range(2):
            hit = (block.states == s) & (block.actions == a)
            observed = np.bincount(block.next_states[hit], minlength=3)
            expected = mdp.transition[s, a] * hit.sum()
            assert stats.chisquare(observed, expected).pvalue > 1e-3


def test_every_well_covered_pair_visited():
    mdp = random_mdp(4, 3, 0.9, 6)
    behavior = StochasticPolicy.uniform(4, 3)
    mu = stationary_distribution(mdp, behavior)
    block = Sampler(mdp, behavior, SamplerConfig(seed=6)).take_block(10**5)
    visited = np.zeros((4, 3), bool)
    visited[block.states, block.actions] = True
    assert np.all(visited[mu >= 0.05])


def test_rewards_and_indices_consistent():
    mdp = random_mdp(3, 2, 0.9, 2)
    block = Sampler(mdp, StochasticPolicy.uniform(3, 2), SamplerConfig(seed=2)).take_block(1000)
    np.testing.assert_array_equal(block.rewards, mdp.reward[block.states, block.actions])
    np.testing.assert_array_equal(block.states[1:], block.next_states[:-1])


def test_budget_and_config_validation():
    mdp = random_mdp(2, 2, 0.9, 0)
    sampler = Sampler(mdp, StochasticPolicy.uniform(2, 2), SamplerConfig(total=10))
    sampler.take(4)
    assert sampler.remaining == 6 and sampler.steps_taken == 4
    with pytest.raises(ValueError):
        Sampler(mdp, StochasticPolicy.uniform(2, 2), SamplerConfig(initial_state=2))
    with pytest.raises(ValueError):
        SamplerConfig(mode="replay")


def test_trajectory_dump_round_trip(tmp_path):
    mdp = random_mdp(3, 2, 0.9, 3)
    trs = Sampler(mdp, StochasticPolicy.uniform(3, 2), SamplerConfig(seed=1)).take(30)
    path = tmp_path / "traj.tsv"
    write_trajectory(path, trs)
    first = path.read_text().splitlines()[0].split("\t")
    assert first[0] == "1" and len(first) == 5
    assert read_trajectory(path) == trs
