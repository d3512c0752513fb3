"""Command-line entry point.

Subcommands mirror the scenario registry plus three utilities:

* ``kernels-check``  fast self-tests of the kernel identities
* ``bridge-solve``   solve the bridge potentials and write them out
* ``report``         summarize verdict files emitted by earlier runs

Exit codes: 0 all verdicts pass, 1 any verdict failed, 2 usage or
configuration error.
"""

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .coupling import psi_quadrature_selftest
from .errors import ConfigError
from .experiments import (
    RUNNERS,
    ExperimentConfig,
    Verdict,
    emit,
    load_config,
)
from .kernels import KernelParams, SampledPath, TimeGrid, kernel_K, kernel_phi, psi_operator

SCENARIO_COMMANDS = {
    "zero-mass": "zero_mass",
    "zero-mass-beta": "zero_mass_beta",
    "duality": "duality",
    "marginal": "marginal",
    "deterministic": "deterministic",
    "assumptions": "assumptions",
}


def _common_flags(sub):
    sub.add_argument("--config", type=str, default=None, help="flat key=value config file")
    sub.add_argument("--seed", type=int, default=None, help="override the config seed")
    sub.add_argument("--out", type=str, default=None, help="override the output directory")
    sub.add_argument("--threads", type=int, default=None, help="worker threads for path batches")


def build_parser():
    parser = argparse.ArgumentParser(prog="langot", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)
    for name in SCENARIO_COMMANDS:
        _common_flags(subs.add_parser(name, help=f"run the {name} scenario"))
    _common_flags(subs.add_parser("kernels-check", help="kernel identity self-tests"))
    _common_flags(subs.add_parser("bridge-solve", help="solve and store bridge potentials"))
    rep = subs.add_parser("report", help="summarize emitted verdicts")
    rep.add_argument("--out", type=str, default="out", help="directory with *_verdicts.csv files")
    return parser


def _load(args, scenario=None):
    if args.config:
        config = load_config(args.config)
    else:
        config = ExperimentConfig(scenario=scenario or "zero_mass")
    updates = {}
    if scenario and config.scenario != scenario:
        updates["scenario"] = scenario
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out is not None:
        updates["out_dir"] = args.out
    if getattr(args, "threads", None) is not None:
        updates["threads"] = args.threads
    if updates:
        config = dataclasses.replace(config, **updates)
    return config


def _emit_results(config, rows, verdicts, meta):
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = meta["scenario"]
    if rows:
        emit(rows, "csv", out / f"{name}_rows.csv")
    emit(
        [dataclasses.asdict(v) for v in verdicts],
        "jsonl",
        out / f"{name}_verdicts.jsonl",
    )
    emit(meta, "jsonl", out / f"{name}_meta.jsonl")


def _print_verdicts(verdicts):
    for v in verdicts:
        print(v.line())
    return 0 if all(v.passed for v in verdicts) else 1


def cmd_scenario(args, scenario):
    config = _load(args, scenario)
    rows, verdicts, meta = RUNNERS[config.scenario](config)
    _emit_results(config, rows, verdicts, meta)
    return _print_verdicts(verdicts)


def cmd_kernels_check(args):
    seed = args.seed if args.seed is not None else 0
    gen = np.random.default_rng(seed)
    worst_identity = 0.0
    worst_sandwich = -1.0
    worst_contract = 0.0
    for _ in range(100):
        params = KernelParams(m=10 ** gen.uniform(-3, 0), gamma=10 ** gen.uniform(-1, 1))
        grid = TimeGrid.uniform(64)
        smoothed = psi_operator(params, SampledPath(grid, np.ones((65, 1))))
        gap = np.abs(smoothed.values[:, 0] - params.gamma * kernel_K(params, grid.nodes))
        worst_identity = max(worst_identity, float(gap.max()))
    for _ in range(1000):
        params = KernelParams(m=10 ** gen.uniform(-3, 0), gamma=10 ** gen.uniform(-1, 1))
        t = gen.uniform()
        v = float(kernel_phi(params, t)) - t
        worst_sandwich = max(worst_sandwich, abs(v - np.clip(v, 0.0, 2 * params.m / params.gamma)))
        values = gen.normal(size=(17, 1))
        sm = psi_operator(params, SampledPath(TimeGrid.uniform(16), values))
        worst_contract = max(
            worst_contract, float(np.abs(sm.values).max() - np.abs(values).max())
        )
    selftest = psi_quadrature_selftest(KernelParams(m=0.05, gamma=1.0), 512)
    verdicts = [
        Verdict("psi-constant-identity", worst_identity <= 1e-12, 1e-12, worst_identity,
                "Psi(1) equals gamma K on 64-node grids"),
        Verdict("time-change-sandwich", worst_sandwich <= 0.0, 0.0, worst_sandwich,
                "0 <= phi(t) - t <= 2m/gamma on random triples"),
        Verdict("psi-contraction", worst_contract <= 1e-12, 1e-12, worst_contract,
                "sup|Psi f| <= sup|f| on random paths"),
        Verdict("warped-weight-selftest", selftest <= 1e-3, 1e-3, selftest,
                "f Psi(1/f^2) = K/K(1) quadrature defect at 512 nodes"),
    ]
    return _print_verdicts(verdicts)


def cmd_bridge_solve(args):
    config = _load(args, None)
    from .bridge import sinkhorn

    p0 = config.measure(config.p0)
    p1 = config.measure(config.p1)
    pot = sinkhorn(p0, p1, config.gamma, config.sinkhorn_tol, config.sinkhorn_max_iter)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pot.to_csv(
        out / "potentials_source.csv",
        out / "potentials_target.csv",
        out / "potentials_meta.json",
    )
    print(
        f"[PASS] bridge-solve: residual={pot.residual:.3e} "
        f"iterations={pot.iterations_used} -> {out}"
    )
    return 0


def cmd_report(args):
    out = Path(args.out)
    files = sorted(out.glob("*_verdicts.jsonl"))
    if not files:
        print(f"no verdict files found under {out}", file=sys.stderr)
        return 2
    all_pass = True
    for path in files:
        with open(path) as fh:
            for line in fh:
                rec = json.loads(line)
                v = Verdict(**rec)
                print(f"{path.stem}: {v.line()}")
                all_pass &= v.passed
    return 0 if all_pass else 1


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command in SCENARIO_COMMANDS:
            return cmd_scenario(args, SCENARIO_COMMANDS[args.command])
        if args.command == "kernels-check":
            return cmd_kernels_check(args)
        if args.command == "bridge-solve":
            return cmd_bridge_solve(args)
        if args.command == "report":
            return cmd_report(args)
        parser.error(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
