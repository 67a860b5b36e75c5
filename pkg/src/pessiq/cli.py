"""``pessiq`` command-line entry point."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .evaluation import make_rho
from .harness import ExperimentSpec, emit_plot_data, plot_data_csv, read_records, run_sweep
from .mdp import (ConvergenceError, DeterministicPolicy, MdpFormatError, StochasticPolicy, chain_diagnostics,
                  parse_mdp, value_iteration)


def _behavior_from_doc(doc: dict, S: int, A: int):
    raw = doc.get("behavior")
    if raw is None:
        return StochasticPolicy.uniform(S, A)
    arr = np.asarray(raw, dtype=np.float64)
    if arr.shape == (S,):
        return DeterministicPolicy(arr.astype(np.int64))
    return StochasticPolicy(arr.reshape(S, A))


def _rho_arg(text: str):
    if text.startswith("point"):
        return "point:" + text.split(":", 1)[1] if ":" in text else text
    return text


def cmd_solve(args) -> int:
    path = Path(args.mdp_file)
    text = path.read_text()
    mdp = parse_mdp(text, str(path))
    behavior = _behavior_from_doc(json.loads(text), mdp.num_states, mdp.num_actions)
    exact = value_iteration(mdp)
    rho = make_rho(mdp, _rho_arg(args.rho), exact)
    diag = chain_diagnostics(mdp, behavior, rho, exact)
    out = {
        "v_star": exact.v_star.tolist(),
        "pi_star": exact.pi_star.actions.tolist(),
        "v_star_rho": float(rho @ exact.v_star),
        "c_star": diag.concentrability,
        "mu_min": diag.mu_min,
        "t_mix": diag.t_mix_quarter,
    }
    if args.json:
        print(json.dumps(out))
    else:
        print("V* = " + " ".join(f"{v:.10g}" for v in out["v_star"]))
        print("pi* = " + " ".join(map(str, out["pi_star"])))
        print(f"V*(rho) = {out['v_star_rho']:.10g}")
        print(f"C* = {out['c_star']:.10g}")
        print(f"mu_min = {out['mu_min']:.10g}")
        print(f"t_mix = {out['t_mix']}")
    return 0


def cmd_run(args) -> int:
    doc = json.loads(Path(args.spec_file).read_text())
    if args.seed_override is not None:
        doc["seeds"] = args.seed_override
    spec = ExperimentSpec.from_dict(doc)
    output = args.output or spec.output_path
    records = run_sweep(spec, output, workers=args.workers)
    failed = sum(1 for r in records if r.error)
    print(f"wrote {len(records)} records to {output}" + (f" ({failed} failed)" if failed else ""))
    return 1 if failed == len(records) else 0


def cmd_plotdata(args) -> int:
    records = read_records(args.records)
    group_by = tuple(g.strip() for g in args.group_by.split(","))
    text = plot_data_csv(emit_plot_data(records, group_by))
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pessiq", description="Pessimistic asynchronous Q-learning toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="exact V*, C*, mu_min and t_mix for an MDP file")
    p.add_argument("mdp_file")
    p.add_argument("--rho", default="uniform", help="uniform, point:<s> or mu_star")
    p.add_argument("--json", action="store_true", help="print a JSON object")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("run", help="run a seed sweep described by a JSON spec file")
    p.add_argument("spec_file")
    p.add_argument("--seed-override", type=int, nargs="+", metavar="SEED")
    p.add_argument("-o", "--output")
    p.add_argument("--workers", type=int, default=None, help="defaults to $PESSIQ_WORKERS or 1")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("plotdata", help="median/quartile gap curves from a records CSV")
    p.add_argument("records")
    p.add_argument("-o", "--output")
    p.add_argument("--group-by", default="agent", help="comma-separated record columns")
    p.set_defaults(func=cmd_plotdata)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (MdpFormatError, ConvergenceError, ValueError, OSError) as exc:
        print(f"pessiq: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
