"""Exact quantities for the near-expert benchmark.

Everything the learners are scored against is computed here in closed form:
the optimal values, the occupancy of the optimal policy, the behavior chain's
stationary law, concentrability and mixing time.
"""
import numpy as np

from pessiq import near_expert_fixture, occupancy, policy_evaluation, value_iteration
from pessiq.evaluation import make_rho
from pessiq.mdp import chain_diagnostics, state_action_chain

mdp, behavior = near_expert_fixture()
exact = value_iteration(mdp)
print(f"S={mdp.num_states} A={mdp.num_actions} gamma={mdp.discount}  (value iteration: {exact.iterations_used} sweeps)")
print("V*     :", np.round(exact.v_star, 4))
print("pi*    :", exact.pi_star.actions)

for preset in ("uniform", "mu_star", "point:0"):
    rho = make_rho(mdp, preset, exact)
    diag = chain_diagnostics(mdp, behavior, rho, exact)
    print(f"rho={preset:8s} V*(rho)={rho @ exact.v_star:.4f}  C*={diag.concentrability:.4f}  "
          f"mu_min={diag.mu_min:.2e}  t_mix={diag.t_mix_quarter}")

# the occupancy measure is a fixed point of d = (1-gamma) rho_pi + gamma d P_pi
rho = make_rho(mdp, "uniform")
d = occupancy(mdp, exact.pi_star, rho).d_sa.ravel()
rho_pi = (rho[:, None] * exact.pi_star.as_matrix(mdp.num_actions)).ravel()
resid = d - (1 - mdp.discount) * rho_pi - mdp.discount * d @ state_action_chain(mdp, exact.pi_star)
print(f"occupancy fixed-point residual: {np.abs(resid).sum():.1e}")

# the behavior policy itself is good but not optimal
_, v_b = policy_evaluation(mdp, behavior, rho)
print(f"behavior value {v_b:.4f} vs optimum {rho @ exact.v_star:.4f}")
