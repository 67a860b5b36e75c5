import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pessiq.instances import near_expert_fixture, random_mdp
from pessiq.lcb import (LcbConfig, LcbState, LcbTrace, eta_weights, hoeffding_penalty, lcb_block, lcb_step,
                        learning_rate, run_lcb)
from pessiq.mdp import StochasticPolicy, value_iteration
from pessiq.sampling import Sampler, SamplerConfig, Transition

from conftest import cycle_mdp, one_state


def tail_weights(i: int, t_big: int, h: int) -> np.ndarray:
    """eta_i^t for t = i..t_big."""
    n = np.arange(i + 1, t_big + 1, dtype=np.float64)
    factors = 1.0 - (h + 1.0) / (h + n)
    return learning_rate(i, h) * np.concatenate(([1.0], np.cumprod(factors)))


# -- step sizes ------------------------------------------------------------------

def test_learning_rate_examples():
    assert learning_rate(1, 7) == 1.0
    assert learning_rate(3, 2) == pytest.approx(0.6, abs=1e-15)
    assert learning_rate(1, 9) == 1.0 and learning_rate(11, 9) == 0.5
    with pytest.raises(ValueError):
        learning_rate(0, 1)


def test_eta_weights_t1():
    assert list(eta_weights(1, 5)) == [1.0]


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 60), st.integers(1, 3000), st.floats(0.5, 1.0))
def test_eta_weight_properties(h, t, a):
    w = eta_weights(t, h)
    i = np.arange(1, t + 1, dtype=np.float64)
    assert abs(w.sum() - 1.0) <= 1e-12
    weighted = float(np.sum(w / i**a))
    assert 1 / t**a * (1 - 1e-12) <= weighted <= 2 / t**a * (1 + 1e-12)
    assert w.max() <= 2 * h / t * (1 + 1e-12)
    assert np.sum(w**2) <= 2 * h / t * (1 + 1e-12)


@given(st.integers(1, 200), st.integers(1, 5000))
def test_tail_sum_closed_form_h1(i, extra):
    # for H = 1 the weights are eta_i^t = 2i / (t (t + 1)), so the partial sum is 2 - 2i/(T+1)
    t_big = i + extra
    assert tail_weights(i, t_big, 1).sum() == pytest.approx(2.0 - 2.0 * i / (t_big + 1), rel=1e-12)


@pytest.mark.parametrize("h", [3, 5, 40])
def test_tail_sum_limit(h):
    assert tail_weights(2, 200_000, h).sum() == pytest.approx(1 + 1 / h, abs=1e-9)


# -- config and penalty ----------------------------------------------------------

def test_config_derived_quantities():
    cfg = LcbConfig(100, 2, 0.5, delta=0.1)
    assert cfg.iota == pytest.approx(math.log(2000))
    assert cfg.horizon == math.ceil(8 * math.log(2000)) >= 1
    assert LcbConfig(0, 1, 0.5).iota > 0
    with pytest.raises(ValueError):
        LcbConfig(10, 2, 1.0)


def test_hoeffding_examples():
    cfg = LcbConfig(100, 2, 0.5, delta=0.1, c_b=1.0)
    h, iota = math.ceil(8 * math.log(200 / 0.1)), math.log(2000)
    assert hoeffding_penalty(1, cfg) == pytest.approx(math.sqrt(h * iota) / 0.5, rel=1e-14)
    for n in (1, 3, 50):
        assert hoeffding_penalty(2 * n, cfg) == pytest.approx(hoeffding_penalty(n, cfg) / math.sqrt(2), rel=1e-14)
    assert hoeffding_penalty(5, LcbConfig(100, 2, 0.5, c_b=0.0)) == 0.0


# -- single step ------------------------------------------------------------------

def test_first_visit_wipes_q():
    cfg = LcbConfig(100, 2, 0.9)
    st_ = LcbState.zeros(2, 2)
    st_.q[0, 1] = 123.0
    st_.v[1] = 4.0
    lcb_step(st_, Transition(0, 1, 1, 0.25), cfg)
    assert st_.q[0, 1] == 0.25 + 0.9 * 4.0 - hoeffding_penalty(1, cfg)
    assert st_.visits[0, 1] == 1 and st_.step == 1


def test_vanilla_single_state_converges():
    cfg = LcbConfig(10**4, 1, 0.5, c_b=0.0)
    st_ = LcbState.zeros(1, 1)
    tr = Transition(0, 0, 0, 1.0)
    for t in range(10**4):
        before = st_.v.copy()
        lcb_step(st_, tr, cfg)
        assert np.all(st_.v >= before)
    assert st_.q[0, 0] == pytest.approx(2.0, abs=0.05)


def test_kernel_matches_python_step():
    mdp, behavior = near_expert_fixture()
    cfg = LcbConfig.for_mdp(mdp, 3000, c_b=0.3)
    block = Sampler(mdp, behavior, SamplerConfig(seed=5)).take_block(3000)
    fast = LcbState.zeros(5, 3)
    trace = lcb_block(fast, block, cfg, record_v=True)
    slow = LcbState.zeros(5, 3)
    for t, tr in enumerate(block):
        lcb_step(slow, tr, cfg)
        np.testing.assert_array_equal(trace[t], slow.v)
    for a, b in [(fast.q, slow.q), (fast.v, slow.v), (fast.visits, slow.visits),
                 (fast.policy_snapshot, slow.policy_snapshot)]:
        np.testing.assert_array_equal(a, b)


def test_vanilla_matches_hand_rolled_loop_on_deterministic_dynamics():
    S, gamma = 4, 0.8
    mdp = cycle_mdp(S, gamma, reward=[0.1, 0.9, 0.4, 0.0])
    T = 400
    cfg = LcbConfig.for_mdp(mdp, T, c_b=0.0)
    state, _ = run_lcb(mdp, cfg, Sampler(mdp, StochasticPolicy.uniform(S, 1), SamplerConfig(seed=1)))
    h = cfg.horizon
    q, v, n = np.zeros(S), np.zeros(S), np.zeros(S)
    s = 0
    for _ in range(T):
        s2 = (s + 1) % S
        n[s] += 1
        eta = (h + 1) / (h + n[s])
        q[s] = (1 - eta) * q[s] + eta * (mdp.reward[s, 0] + gamma * v[s2])
        v[s] = max(v[s], q[s])
        s = s2
    np.testing.assert_array_equal(state.q[:, 0], q)
    np.testing.assert_array_equal(state.v, v)


# -- full runs --------------------------------------------------------------------

def test_zero_budget():
    mdp, behavior = near_expert_fixture()
    state, pi = run_lcb(mdp, LcbConfig.for_mdp(mdp, 0), Sampler(mdp, behavior))
    assert np.all(state.q == 0) and np.all(pi.actions == 0)


def test_run_is_reproducible():
    mdp, behavior = near_expert_fixture()
    cfg = LcbConfig.for_mdp(mdp, 20_000, c_b=0.1)
    a, pa = run_lcb(mdp, cfg, Sampler(mdp, behavior, SamplerConfig(seed=8)))
    b, pb = run_lcb(mdp, cfg, Sampler(mdp, behavior, SamplerConfig(seed=8)))
    assert a.q.tobytes() == b.q.tobytes()
    np.testing.assert_array_equal(pa.actions, pb.actions)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from([0.0, 0.05, 1.0]), st.integers(1, 3000))
def test_run_invariants(seed, c_b, T):
    mdp = random_mdp(3, 2, 0.7, seed % 1000)
    behavior = StochasticPolicy.uniform(3, 2)
    cfg = LcbConfig.for_mdp(mdp, T, c_b=c_b)
    state = LcbState.zeros(3, 2)
    trace = lcb_block(state, Sampler(mdp, behavior, SamplerConfig(seed=seed)).take_block(T), cfg, record_v=True)
    assert np.all(np.diff(trace, axis=0) >= 0) and np.all(trace[0] >= 0)
    assert state.visits.sum() == T == state.step
    upper = 1 / (1 - cfg.discount)
    lower = -c_b * math.sqrt(cfg.horizon * cfg.iota) / (1 - cfg.discount)
    assert np.all(state.q >= lower - 1e-9) and np.all(state.q <= upper + 1e-9)
    assert np.all(state.v <= upper + 1e-9)


def test_sampler_budget_checked():
    mdp, behavior = near_expert_fixture()
    with pytest.raises(ValueError, match="transitions left"):
        run_lcb(mdp, LcbConfig.for_mdp(mdp, 100), Sampler(mdp, behavior, SamplerConfig(total=50)))


def test_trace_rows(tmp_path):
    mdp, behavior = near_expert_fixture()
    v_star = value_iteration(mdp).v_star
    trace = LcbTrace()
    run_lcb(mdp, LcbConfig.for_mdp(mdp, 5000), Sampler(mdp, behavior), trace=trace, trace_every=1000, v_star=v_star)
    assert [row[0] for row in trace.rows] == [1000, 2000, 3000, 4000, 5000]
    assert all(row[1] >= -1e-9 for row in trace.rows)
    trace.write_csv(tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "t,gap_estimate,max_V,penalty_at_step"


def test_unmasked_extraction_prefers_unvisited_zero_rows():
    # with a large penalty visited Q entries go negative, so plain argmax drifts to never-tried actions
    mdp, behavior = near_expert_fixture(num_actions=6, expert_mix=0.0)
    cfg = LcbConfig.for_mdp(mdp, 2000)
    state, masked = run_lcb(mdp, cfg, Sampler(mdp, behavior, SamplerConfig(seed=1)))
    pi_star = value_iteration(mdp).pi_star.actions
    tried = state.visits > 0
    assert np.all(tried[np.arange(5), masked.actions] | ~tried.any(axis=1))
    _, plain = run_lcb(mdp, cfg, Sampler(mdp, behavior, SamplerConfig(seed=1)), mask_unvisited=False)
    assert np.any(plain.actions != pi_star)
