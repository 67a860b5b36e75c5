"""Suboptimality gap against sample size for the three agents.

Writes a results CSV and plot-ready medians/quartiles into demos/data/.  Pass
``--plot`` to render them with matplotlib (optional dependency).  With the
default c_b the first-visit penalty is many times 1/(1-gamma), so Q-values
of visited pairs mostly rank by visit count; the sweep is repeated with a
much smaller c_b for comparison.
"""
import sys
from pathlib import Path

from pessiq.harness import ExperimentSpec, emit_plot_data, plot_data_csv, run_sweep

OUT = Path(__file__).parent / "data"
OUT.mkdir(exist_ok=True)
budgets = [30, 100, 300, 1000, 3000, 10_000, 30_000]
# mostly random behavior (90% uniform), so coverage rather than cloning decides the gap
instance = {"type": "near_expert", "num_states": 8, "num_actions": 5, "discount": 0.9, "expert_mix": 0.9, "seed": 4}
SCALES = (1.0, 0.003)

for c_b in SCALES:
    spec = ExperimentSpec(instance=instance, agents=["vanilla", "lcb", "vr_lcb"], budgets=budgets,
                          seeds=list(range(20)), c_b=c_b, output_path=str(OUT / f"gap_cb{c_b}.csv"))
    records = run_sweep(spec)
    rows = emit_plot_data(records)
    (OUT / f"gap_cb{c_b}_plot.csv").write_text(plot_data_csv(rows))
    print(f"\nc_b = {c_b}: median gap (quartiles) over 20 seeds; C* = {records[0].c_star:.3f}")
    print(f"{'T':>7} " + "".join(f"{a:>26}" for a in spec.agents))
    table = {(r[0], r[1]): r for r in rows}
    for T in budgets:
        cells = []
        for a in spec.agents:
            _, _, y, lo, hi, n, note = table[(a, T)]
            cells.append(f"{note:>26}" if y is None else f"{y:>10.4f} [{lo:.3f}, {hi:.3f}]")
        print(f"{T:>7} " + "".join(f"{c:>26}" for c in cells))

if "--plot" in sys.argv:
    from plot_curves import plot_file

    for c_b in SCALES:
        plot_file(OUT / f"gap_cb{c_b}_plot.csv", OUT / f"gap_cb{c_b}.png", title=f"c_b = {c_b}")
