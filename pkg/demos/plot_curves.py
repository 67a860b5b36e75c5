"""Render a plot-data CSV (series, x, y, y_lo, y_hi, ...) as gap-vs-T curves.

Usage: python3 demos/plot_curves.py plot.csv out.png
Needs matplotlib (``pip install pessiq[plot]``).
"""
import csv
import sys
from collections import defaultdict


def plot_file(src, dst, title=""):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    series = defaultdict(list)
    with open(src, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["y"]:
                series[row["series"]].append((int(row["x"]), float(row["y"]), float(row["y_lo"]), float(row["y_hi"])))
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, pts in sorted(series.items()):
        x, y, lo, hi = zip(*pts)
        ax.plot(x, y, marker="o", label=name)
        ax.fill_between(x, lo, hi, alpha=0.2)
    ax.set_xscale("log")
    ax.set_xlabel("samples T")
    ax.set_ylabel("median gap V*(rho) - V^pi(rho)")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(dst, dpi=120)
    plt.close(fig)


if __name__ == "__main__":
    plot_file(sys.argv[1], sys.argv[2], title=sys.argv[3] if len(sys.argv) > 3 else "")
