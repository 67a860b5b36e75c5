"""How the penalty keeps the value estimate below V*.

Runs plain asynchronous Q-learning (c_b = 0) and the penalized variant on the
same trajectory and prints thinned traces of max_s (V_t - V*)(s).  The
unpenalized estimate overshoots V* because V only ever moves up; the
penalized one stays below it.
"""
import numpy as np

from pessiq import LcbConfig, Sampler, SamplerConfig, near_expert_fixture, value_iteration
from pessiq.lcb import LcbState, lcb_block

T = 100_000
mdp, behavior = near_expert_fixture()
v_star = value_iteration(mdp).v_star
block = Sampler(mdp, behavior, SamplerConfig(seed=3)).take_block(T)

print(f"{'t':>7} " + " ".join(f"{'c_b=' + str(c):>12}" for c in (0.0, 0.01, 0.1, 1.0)))
traces = {}
for c_b in (0.0, 0.01, 0.1, 1.0):
    state = LcbState.zeros(mdp.num_states, mdp.num_actions)
    traces[c_b] = lcb_block(state, block, LcbConfig.for_mdp(mdp, T, c_b=c_b), record_v=True)
for t in (10, 100, 1000, 10_000, 100_000):
    print(f"{t:>7} " + " ".join(f"{np.max(traces[c][t - 1] - v_star):>12.4f}" for c in traces))
print("positive entries mean the estimate exceeds the true optimal value")
