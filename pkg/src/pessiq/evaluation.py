"""Suboptimality gap V*(rho) - V^pi(rho) of a learned policy, by exact solve."""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .mdp import (ChainDiagnostics, DeterministicPolicy, ExactSolution, TabularMdp, policy_evaluation,
                  state_stationary)

GAP_TOL = 1e-8


@dataclass(frozen=True)
class GapReport:
    v_star_rho: float
    v_pihat_rho: float
    gap: float
    c_star: float
    mu_min: float
    t_mix: int
    seed: int
    total_samples: int

    @classmethod
    def header(cls) -> tuple:
        return tuple(f.name for f in fields(cls))

    def as_row(self) -> tuple:
        return astuple(self)

    def to_csv_row(self) -> str:
        return ",".join(format_value(x) for x in self.as_row())


def format_value(x) -> str:
    """Stable text form for CSV cells: shortest round-trip repr for floats."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if x is None:
        return ""
    return str(x)


def make_rho(mdp: TabularMdp, preset="uniform", exact: ExactSolution | None = None) -> np.ndarray:
    """Initial distribution from a preset: ``"uniform"``, ``"point:<s>"`` /
    ``("point", s)`` / ``{"point": s}``, or ``"mu_star"`` (stationary state
    law of the optimal policy)."""
    S = mdp.num_states
    if isinstance(preset, dict) and "point" in preset:
        preset = ("point", preset["point"])
    if isinstance(preset, str) and preset.startswith("point:"):
        preset = ("point", int(preset.split(":", 1)[1]))
    if isinstance(preset, (tuple, list)) and preset[0] == "point":
        s0 = int(preset[1])
        if not 0 <= s0 < S:
            raise ValueError(f"point mass state {s0} out of range")
        rho = np.zeros(S)
        rho[s0] = 1.0
        return rho
    if preset == "uniform":
        return np.full(S, 1.0 / S)
    if preset == "mu_star":
        if exact is None:
            raise ValueError("mu_star preset needs the exact solution")
        return state_stationary(mdp, exact.pi_star)
    raise ValueError(f"unknown rho preset {preset!r}")


def evaluate_policy(mdp: TabularMdp, pi_hat: DeterministicPolicy, rho: np.ndarray, exact: ExactSolution,
                    diag: ChainDiagnostics, seed: int = 0, total_samples: int = 0) -> GapReport:
    _, v_pi_rho = policy_evaluation(mdp, pi_hat, rho)
    # V*(rho) through the same linear solve, so pi_hat == pi_star gives a gap of exactly 0
    _, v_star_rho = policy_evaluation(mdp, exact.pi_star, rho)
    gap = v_star_rho - v_pi_rho
    if not -GAP_TOL <= gap <= 1.0 / (1.0 - mdp.discount) + GAP_TOL:
        raise RuntimeError(f"gap {gap!r} outside [0, 1/(1-gamma)]; inputs are inconsistent")
    return GapReport(v_star_rho, v_pi_rho, gap, diag.concentrability, diag.mu_min, diag.t_mix_quarter,
                     int(seed), int(total_samples))


def nearest_rank(values, p: float) -> float:
    """Nearest-rank percentile: the ceil(p * n)-th smallest value (1-based, at least 1)."""
    xs = sorted(values)
    if not xs:
        raise ValueError("no values")
    k = max(1, math.ceil(p * len(xs)))
    return xs[k - 1]
