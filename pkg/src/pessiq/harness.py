"""Seeded sweeps of {vanilla, lcb, vr_lcb} over sample budgets, written to CSV.

Every (agent, budget, seed) cell gets its own stream::

    cell_seed    = derive_seed(seed, AGENT_IDS[agent], budget_index, seed_index)
    sampler_seed = derive_seed(cell_seed, SAMPLER_TAG)

so appending budgets or seeds never reshuffles existing cells.  Records are
sorted by (agent id, budget index, seed index) before the single write, which
keeps the output byte-identical whether cells ran serially or in a pool.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .evaluation import evaluate_policy, format_value, make_rho, nearest_rank
from .instances import describe
from .instances import generate_instance as _generate
from .lcb import LcbConfig, run_lcb
from .mdp import ChainDiagnostics, chain_diagnostics, stationary_distribution, value_iteration
from .rng import derive_seed
from .sampling import MODES, Sampler, SamplerConfig
from .vr import run_vr

log = logging.getLogger(__name__)

AGENT_IDS = {"vanilla": 0, "lcb": 1, "vr_lcb": 2}
SAMPLER_TAG = 0x53414D50
WORKERS_ENV = "PESSIQ_WORKERS"
FORMAT_LINE = "# pessiq sweep v1"


@dataclass
class ExperimentSpec:
    instance: dict
    agents: tuple
    budgets: tuple
    seeds: tuple
    delta: float = 0.1
    c_b: float = 1.0
    rho_preset: object = "uniform"
    sampler_mode: str = "markovian"
    initial_state: int = 0
    output_path: str = "results.csv"
    record_timing: bool = False

    def __post_init__(self):
        self.agents = tuple(self.agents)
        self.budgets = tuple(int(b) for b in self.budgets)
        self.seeds = tuple(int(s) for s in self.seeds)
        unknown = [a for a in self.agents if a not in AGENT_IDS]
        if not self.agents or unknown:
            raise ValueError(f"agents must be a nonempty subset of {sorted(AGENT_IDS)}, got {self.agents}")
        if not self.budgets or list(self.budgets) != sorted(set(self.budgets)):
            raise ValueError("budgets must be nonempty and strictly ascending")
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        if self.sampler_mode not in MODES:
            raise ValueError(f"sampler_mode must be one of {MODES}")
        if "type" not in self.instance:
            raise ValueError("instance needs a 'type'")
        eps = self.instance.get("expert_mix", 0.0)
        if not 0.0 <= eps <= 1.0:
            raise ValueError("expert_mix must lie in [0, 1]")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentSpec":
        doc = dict(doc)
        if "agent" in doc and "agents" not in doc:
            agent = doc.pop("agent")
            doc["agents"] = [agent] if isinstance(agent, str) else agent
        if "rho" in doc and "rho_preset" not in doc:
            doc["rho_preset"] = doc.pop("rho")
        known = {f.name for f in fields(cls)}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown spec fields: {sorted(extra)}")
        return cls(**doc)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("agents", "budgets", "seeds"):
            d[k] = list(d[k])
        return d


def _instance_with_solution(spec: ExperimentSpec):
    mdp, behavior = _generate(spec.instance)
    exact = value_iteration(mdp)
    return mdp, behavior, make_rho(mdp, spec.rho_preset, exact), exact


def generate_instance(spec: ExperimentSpec):
    """(mdp, behavior, rho) for the instance and rho preset named in ``spec``."""
    mdp, behavior, rho, _ = _instance_with_solution(spec)
    return mdp, behavior, rho


@dataclass
class RunRecord:
    agent: str
    instance: str
    budget_index: int
    seed_index: int
    seed: int
    cell_seed: int
    budget: int
    total_samples: int = 0
    v_star_rho: float = math.nan
    v_pihat_rho: float = math.nan
    gap: float = math.nan
    c_star: float = math.nan
    mu_min: float = math.nan
    t_mix: int = 0
    wall_time_ms: float | None = None
    error: str = ""

    @classmethod
    def header(cls) -> tuple:
        return tuple(f.name for f in fields(cls))

    def sort_key(self) -> tuple:
        return AGENT_IDS[self.agent], self.budget_index, self.seed_index

    def to_csv_row(self) -> list:
        return [format_value(getattr(self, name)) for name in self.header()]


@dataclass
class SweepContext:
    """Instance-level quantities shared by every cell of a sweep."""

    spec: ExperimentSpec
    mdp: object
    behavior: object
    rho: np.ndarray
    exact: object
    diag: ChainDiagnostics
    mu_b: np.ndarray
    descriptor: str = field(default="")

    @classmethod
    def build(cls, spec: ExperimentSpec) -> "SweepContext":
        mdp, behavior, rho, exact = _instance_with_solution(spec)
        diag = chain_diagnostics(mdp, behavior, rho, exact)
        if spec.sampler_mode == "iid":
            # i.i.d. draws from mu_b behave like a chain that mixes in one step
            diag = ChainDiagnostics(diag.stationary, diag.mu_min, diag.concentrability, 1)
        return cls(spec, mdp, behavior, rho, exact, diag, stationary_distribution(mdp, behavior),
                   describe(spec.instance))


def run_cell(ctx: SweepContext, agent: str, budget_index: int, seed_index: int) -> RunRecord:
    spec = ctx.spec
    seed = spec.seeds[seed_index]
    budget = spec.budgets[budget_index]
    cell_seed = derive_seed(seed, AGENT_IDS[agent], budget_index, seed_index)
    rec = RunRecord(agent, ctx.descriptor, budget_index, seed_index, seed, cell_seed, budget)
    start = time.perf_counter()
    try:
        sampler = Sampler(ctx.mdp, ctx.behavior,
                          SamplerConfig(spec.sampler_mode, spec.initial_state, derive_seed(cell_seed, SAMPLER_TAG)),
                          mu_b=ctx.mu_b)
        c_b = 0.0 if agent == "vanilla" else spec.c_b
        cfg = LcbConfig.for_mdp(ctx.mdp, budget, delta=spec.delta, c_b=c_b)
        if agent == "vr_lcb":
            pi_hat = run_vr(ctx.mdp, cfg, sampler).pi_hat
        else:
            _, pi_hat = run_lcb(ctx.mdp, cfg, sampler)
        report = evaluate_policy(ctx.mdp, pi_hat, ctx.rho, ctx.exact, ctx.diag, cell_seed, sampler.steps_taken)
        rec.total_samples = report.total_samples
        rec.v_star_rho, rec.v_pihat_rho, rec.gap = report.v_star_rho, report.v_pihat_rho, report.gap
        rec.c_star, rec.mu_min, rec.t_mix = report.c_star, report.mu_min, report.t_mix
    except Exception as exc:  # a failing cell must not take the sweep down
        log.warning("cell %s/%d/%d failed: %s", agent, budget_index, seed_index, exc)
        rec.error = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    if spec.record_timing:
        rec.wall_time_ms = round((time.perf_counter() - start) * 1e3, 3)
    return rec


_worker_ctx: SweepContext | None = None


def _init_worker(spec_dict: dict) -> None:
    global _worker_ctx
    _worker_ctx = SweepContext.build(ExperimentSpec.from_dict(spec_dict))


def _run_cell_in_worker(key: tuple) -> RunRecord:
    return run_cell(_worker_ctx, *key)


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_sweep(spec: ExperimentSpec, output_path: str | Path | None = None,
              workers: int | None = None) -> list[RunRecord]:
    """Run every (agent, budget, seed) cell and write the sorted records.

    Pass ``output_path=False`` to skip writing.
    """
    keys = [(a, b, s) for a in spec.agents for b in range(len(spec.budgets)) for s in range(len(spec.seeds))]
    workers = worker_count() if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(spec.to_dict(),)) as pool:
            records = list(pool.map(_run_cell_in_worker, keys))
    else:
        ctx = SweepContext.build(spec)
        records = [run_cell(ctx, *key) for key in keys]
    records.sort(key=RunRecord.sort_key)
    if output_path is not False:
        write_records(output_path or spec.output_path, records, spec)
    return records


def records_csv(records, spec: ExperimentSpec | None = None) -> str:
    buf = io.StringIO()
    if spec is not None:
        buf.write(FORMAT_LINE + "\n")
        buf.write("# spec: " + json.dumps(spec.to_dict(), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RunRecord.header())
    for r in records:
        w.writerow(r.to_csv_row())
    return buf.getvalue()


def write_records(path: str | Path, records, spec: ExperimentSpec | None = None) -> None:
    Path(path).write_text(records_csv(records, spec))


def read_records(path: str | Path) -> list[dict]:
    """Rows of a records CSV as dicts (comment lines skipped)."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def read_spec_echo(path: str | Path) -> dict | None:
    with open(path) as fh:
        for line in fh:
            if line.startswith("# spec: "):
                return json.loads(line[len("# spec: "):])
            if not line.startswith("#"):
                break
    return None


PLOT_HEADER = ("series", "x", "y", "y_lo", "y_hi", "n", "note")


def _field(rec, name):
    return rec[name] if isinstance(rec, dict) else getattr(rec, name)


def emit_plot_data(records, group_by=("agent",)) -> list[tuple]:
    """Median and quartile gap per (series, budget), nearest-rank rule.

    Series are keyed by the ``group_by`` columns joined with '/'.  Cells with
    an error are left out; a group with no successful cell yields a row with
    empty statistics and a note.
    """
    if not records:
        raise ValueError("no records")
    if isinstance(group_by, str):
        group_by = (group_by,)
    groups: dict = {}
    for rec in records:
        series = "/".join(str(_field(rec, g)) for g in group_by)
        key = (series, int(_field(rec, "budget")))
        vals = groups.setdefault(key, [])
        if not _field(rec, "error"):
            vals.append(float(_field(rec, "gap")))
    rows = []
    for (series, x), vals in sorted(groups.items()):
        if not vals:
            rows.append((series, x, None, None, None, 0, "no successful runs"))
            continue
        rows.append((series, x, nearest_rank(vals, 0.5), nearest_rank(vals, 0.25), nearest_rank(vals, 0.75),
                     len(vals), ""))
    return rows


def plot_data_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PLOT_HEADER)
    for row in rows:
        w.writerow([format_value(x) for x in row])
    return buf.getvalue()
