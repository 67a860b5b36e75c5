"""Variance-reduced asynchronous Q-learning with LCB penalties.

The budget is split into epochs k = 1..K.  Epoch k first spends 4^(k-1)
transitions estimating an empirical kernel and the mean/second moment of a
reference value V_bar at each pair, then 3 * 4^(k-1) transitions running
Q-learning on the reference-advantage target::

    r(s,a) + gamma * (V(s') - V_bar(s')) + gamma * <P_tilde(.|s,a), V_bar> - b

with ``b = b_ref(s,a) + b_adv``.  Each epoch restarts Q and V at zero and its
final V becomes the next V_bar.  The sampler is never reset, so consecutive
phases continue the same trajectory.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .lcb import LcbConfig
from .mdp import DeterministicPolicy, TabularMdp, greedy, greedy_visited
from .sampling import Sampler

VrConfig = LcbConfig


@dataclass(frozen=True)
class EpochSchedule:
    num_epochs: int
    ref_sizes: tuple
    run_sizes: tuple
    total_budget: int

    @property
    def consumed(self) -> int:
        return sum(self.ref_sizes) + sum(self.run_sizes)


def build_schedule(total: int) -> EpochSchedule:
    """K = floor(log_4(3T/4)) epochs with T_k^ref = 4^(k-1), T_k = 3 * 4^(k-1).

    K is the largest integer with 4^(K+1) <= 3T (exact integer arithmetic).
    """
    k = 0
    while 4 ** (k + 2) <= 3 * total:
        k += 1
    if k < 1:
        raise ValueError(f"budget {total} is too small for one epoch (need at least 6)")
    ref = tuple(4 ** (i - 1) for i in range(1, k + 1))
    return EpochSchedule(k, ref, tuple(3 * r for r in ref), total)


@dataclass
class ReferenceBundle:
    p_tilde: np.ndarray
    mu_ref: np.ndarray
    sigma_ref: np.ndarray
    n_ref: np.ndarray
    b_ref: np.ndarray
    v_bar: np.ndarray

    def reference_values(self) -> np.ndarray:
        """<P_tilde(.|s,a), V_bar> for every pair (0 on unvisited pairs)."""
        return self.p_tilde @ self.v_bar

    def freeze(self) -> "ReferenceBundle":
        for arr in (self.p_tilde, self.mu_ref, self.sigma_ref, self.n_ref, self.b_ref, self.v_bar):
            arr.setflags(write=False)
        return self


@numba.njit(cache=True)
def _reference_kernel(states, actions, next_states, counts, n_ref):
    for t in range(states.shape[0]):
        n_ref[states[t], actions[t]] += 1
        counts[states[t], actions[t], next_states[t]] += 1


def reference_penalty(mu_ref, sigma_ref, n_ref, cfg: VrConfig) -> np.ndarray:
    """b_ref on visited pairs, +inf on unvisited ones."""
    iota, gamma = cfg.iota, cfg.discount
    out = np.full(n_ref.shape, math.inf)
    seen = n_ref > 0
    n = n_ref[seen].astype(np.float64)
    var = np.maximum(sigma_ref[seen] - mu_ref[seen] ** 2, 0.0)
    out[seen] = cfg.c_b * (np.sqrt(var / n * iota) + iota ** 0.75 / ((1.0 - gamma) * n ** 0.75)
                           + iota / ((1.0 - gamma) * n))
    return out


def empirical_transition(sampler: Sampler, t_ref: int, v_bar: np.ndarray, cfg: VrConfig) -> ReferenceBundle:
    """Spend ``t_ref`` transitions estimating P_tilde and the V_bar moments."""
    if t_ref < 1:
        raise ValueError("t_ref must be positive")
    mdp = sampler.mdp
    S, A = mdp.num_states, mdp.num_actions
    v_bar = np.array(v_bar, dtype=np.float64)
    block = sampler.take_block(t_ref)
    counts = np.zeros((S, A, S), dtype=np.int64)
    n_ref = np.zeros((S, A), dtype=np.int64)
    _reference_kernel(block.states, block.actions, block.next_states, counts, n_ref)
    p_tilde = np.zeros((S, A, S))
    seen = n_ref > 0
    p_tilde[seen] = counts[seen] / n_ref[seen][:, None]
    # sample means of V_bar(s') and V_bar(s')^2, taken through the same counts as P_tilde
    mu = p_tilde @ v_bar
    sigma = p_tilde @ (v_bar * v_bar)
    b_ref = reference_penalty(mu, sigma, n_ref, cfg)
    return ReferenceBundle(p_tilde, mu, sigma, n_ref, b_ref, v_bar).freeze()


@numba.njit(cache=True)
def _adv_penalty(sd_now, sd_prev, eta_n, n, horizon, iota, one_minus_gamma, c_b):
    quotient = (sd_now - (1.0 - eta_n) * sd_prev) / eta_n
    if quotient < 0.0:
        quotient = 0.0
    h_iota = horizon * iota
    return c_b * (math.sqrt(h_iota / n) * quotient
                  + h_iota ** 0.75 / (n ** 0.75 * one_minus_gamma)
                  + h_iota / (n * one_minus_gamma))


def adv_penalty(sd_now: float, sd_prev: float, eta_n: float, n: int, cfg) -> float:
    """Advantage penalty; ``cfg`` needs ``horizon``, ``iota``, ``discount`` and ``c_b``.

    The difference quotient (sd_n - (1 - eta_n) sd_{n-1}) / eta_n is clamped
    at zero before it enters the formula.
    """
    if n < 1 or not 0.0 < eta_n <= 1.0:
        raise ValueError("need n >= 1 and 0 < eta_n <= 1")
    return _adv_penalty(float(sd_now), float(sd_prev), float(eta_n), float(n), float(cfg.horizon),
                        float(cfg.iota), 1.0 - cfg.discount, float(cfg.c_b))


@dataclass
class VrEpochState:
    q: np.ndarray
    v: np.ndarray
    visits: np.ndarray
    mu_adv: np.ndarray
    sigma_adv: np.ndarray
    sd_adv_prev: np.ndarray
    step: int = 0
    skipped_updates: int = 0

    @classmethod
    def zeros(cls, num_states: int, num_actions: int) -> "VrEpochState":
        z = lambda: np.zeros((num_states, num_actions))
        return cls(z(), np.zeros(num_states), np.zeros((num_states, num_actions), dtype=np.int64), z(), z(), z())


@numba.njit(cache=True)
def _vr_kernel(q, v, visits, mu_adv, sigma_adv, sd_prev, states, actions, next_states, rewards,
               v_bar, ref_values, b_ref, gamma, horizon, iota, c_b, v_trace):
    num_actions = q.shape[1]
    record = v_trace.shape[0] > 0
    skipped = 0
    for t in range(states.shape[0]):
        s = states[t]
        a = actions[t]
        s2 = next_states[t]
        visits[s, a] += 1
        n = float(visits[s, a])
        eta = (horizon + 1.0) / (horizon + n)
        adv = v[s2] - v_bar[s2]
        mu_adv[s, a] = (1.0 - eta) * mu_adv[s, a] + eta * adv
        sigma_adv[s, a] = (1.0 - eta) * sigma_adv[s, a] + eta * adv * adv
        sd = sigma_adv[s, a] - mu_adv[s, a] * mu_adv[s, a]
        b_adv = _adv_penalty(sd, sd_prev[s, a], eta, n, horizon, iota, 1.0 - gamma, c_b)
        sd_prev[s, a] = sd
        if math.isinf(b_ref[s, a]):
            skipped += 1
        else:
            b = b_ref[s, a] + b_adv
            target = rewards[t] + gamma * v[s2] - gamma * v_bar[s2] + gamma * ref_values[s, a] - b
            q[s, a] = (1.0 - eta) * q[s, a] + eta * target
        best = 0
        for j in range(1, num_actions):
            if q[s, j] > q[s, best]:
                best = j
        if q[s, best] > v[s]:
            v[s] = q[s, best]
        if record:
            v_trace[t, :] = v
    return skipped


def vr_epoch(sampler: Sampler, t_k: int, bundle: ReferenceBundle, cfg: VrConfig,
             record_v: bool = False) -> tuple[np.ndarray, np.ndarray, int, VrEpochState]:
    """Run ``t_k`` variance-reduced updates from Q = V = 0.

    Returns ``(q, v, last_state, epoch_state)``; ``epoch_state`` carries the
    advantage statistics, the skipped-update count (pairs never seen in the
    reference pass keep Q = 0) and, with ``record_v``, a ``v_trace`` attribute.
    """
    if t_k < 1:
        raise ValueError("t_k must be positive")
    S, A = sampler.mdp.num_states, sampler.mdp.num_actions
    st = VrEpochState.zeros(S, A)
    block = sampler.take_block(t_k)
    trace = np.empty((t_k if record_v else 0, S))
    st.skipped_updates = int(_vr_kernel(
        st.q, st.v, st.visits, st.mu_adv, st.sigma_adv, st.sd_adv_prev, block.states, block.actions,
        block.next_states, np.ascontiguousarray(block.rewards, dtype=np.float64), bundle.v_bar,
        bundle.reference_values(), bundle.b_ref, cfg.discount, float(cfg.horizon), cfg.iota, cfg.c_b, trace))
    st.step = t_k
    if record_v:
        st.v_trace = trace
    return st.q, st.v, sampler.state, st


@dataclass
class EpochRecord:
    k: int
    t_ref: int
    t_run: int
    gap_of_v_bar: float
    mean_b_ref: float
    skipped_updates: int

    HEADER = ("k", "T_ref_k", "T_k", "gap_of_Vbar", "mean_b_ref", "skipped_updates")

    def as_row(self) -> tuple:
        return (self.k, self.t_ref, self.t_run, self.gap_of_v_bar, self.mean_b_ref, self.skipped_updates)


@dataclass
class VrResult:
    q: np.ndarray
    v: np.ndarray
    pi_hat: DeterministicPolicy
    schedule: EpochSchedule
    epochs: list = field(default_factory=list)
    v_bars: list = field(default_factory=list)
    v_traces: list = field(default_factory=list)

    def __iter__(self):
        # unpacks as (q, v, pi_hat)
        return iter((self.q, self.v, self.pi_hat))


def write_epoch_csv(path, epochs) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(EpochRecord.HEADER) + "\n")
        for e in epochs:
            fh.write(",".join(repr(x) if isinstance(x, float) else str(x) for x in e.as_row()) + "\n")


def run_vr(mdp: TabularMdp, cfg: VrConfig, sampler: Sampler, *, v_star: np.ndarray | None = None,
           rho: np.ndarray | None = None, mask_unvisited: bool = True, record_v: bool = False) -> VrResult:
    """Full epoch loop; V_bar starts at zero and is replaced by each epoch's V.

    ``pi_hat`` is greedy in the last epoch's Q over the pairs that epoch
    actually updated (unless ``mask_unvisited`` is false).  Transitions beyond
    the schedule's total are left unconsumed.  With ``record_v`` the result
    keeps every epoch's per-step V trace in ``v_traces``.
    """
    schedule = build_schedule(cfg.total_steps)
    remaining = sampler.remaining
    if remaining is not None and remaining < schedule.consumed:
        raise ValueError(f"sampler has {remaining} transitions left, run needs {schedule.consumed}")
    if rho is None:
        rho = np.full(mdp.num_states, 1.0 / mdp.num_states)
    v_bar = np.zeros(mdp.num_states)
    q = np.zeros((mdp.num_states, mdp.num_actions))
    updated = np.zeros(q.shape, dtype=bool)
    epochs, v_bars, v_traces = [], [], []
    for k, (t_ref, t_run) in enumerate(zip(schedule.ref_sizes, schedule.run_sizes), start=1):
        bundle = empirical_transition(sampler, t_ref, v_bar, cfg)
        q, v, _, st = vr_epoch(sampler, t_run, bundle, cfg, record_v=record_v)
        if record_v:
            v_traces.append(st.v_trace)
        v_bar = v.copy()
        v_bars.append(v_bar)
        updated = (st.visits > 0) & np.isfinite(bundle.b_ref)
        finite = bundle.b_ref[np.isfinite(bundle.b_ref)]
        epochs.append(EpochRecord(
            k, t_ref, t_run,
            float(rho @ (v_star - v_bar)) if v_star is not None else math.nan,
            float(finite.mean()) if finite.size else math.nan,
            st.skipped_updates,
        ))
    pi_hat = greedy_visited(q, updated) if mask_unvisited else greedy(q)
    return VrResult(q, v_bar, pi_hat, schedule, epochs, v_bars, v_traces)
