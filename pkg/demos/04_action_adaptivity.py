"""Near-expert data makes the required sample size insensitive to |A|.

With behavior close to the optimal policy the penalized learner only needs
the optimal actions to be well covered, so the budget at which its median gap
drops below 0.5 barely moves between 2 and 20 actions.  Plain Q-learning fed
uniformly random actions has no such luxury.
"""
import math

from pessiq.harness import ExperimentSpec, emit_plot_data, run_sweep

grid = sorted({math.ceil(2 ** (j / 2)) for j in range(0, 25)})


def crossing(num_actions, expert_mix, agent, eps=0.5):
    inst = {"type": "near_expert", "num_states": 5, "num_actions": num_actions, "discount": 0.8,
            "expert_mix": expert_mix, "seed": 0}
    spec = ExperimentSpec(instance=inst, agents=[agent], budgets=grid, seeds=list(range(1, 21)))
    med = {r[1]: r[2] for r in emit_plot_data(run_sweep(spec, False))}
    return next((T for T in grid if med[T] <= eps), None), med


for label, args in [("lcb, near-expert, A=2", (2, 0.02, "lcb")),
                    ("lcb, near-expert, A=20", (20, 0.02, "lcb")),
                    ("vanilla, uniform, A=2", (2, 1.0, "vanilla")),
                    ("vanilla, uniform, A=20", (20, 1.0, "vanilla"))]:
    T, med = crossing(*args)
    path = " ".join(f"{med[t]:.2f}" for t in grid[:14])
    print(f"{label:26s} crosses 0.5 at T={T}   medians for T={grid[0]}..{grid[13]}: {path}")
