"""Command-line entry point: ``krrtune {synth,tune,sweep,statdim,validate}``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys

import numpy as np

from .discretize import sm_grid
from .pipeline import RunConfig, run_sweep, run_trials, to_csv
from .scenario import Scenario, synth_scenario
from .statdim import alpha_for, max_statdim, sample_budget, statdim_operator
from .validation import CRITERIA, run_validate

log = logging.getLogger("krrtune")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def scenario_to_dict(sc: Scenario) -> dict:
    beta = np.asarray(sc.signal.coefficients)
    coeffs = ([[float(b.real), float(b.imag)] for b in beta] if np.iscomplexobj(beta)
              else beta.tolist())
    return {
        "T": sc.T, "epsilon": sc.epsilon, "delta": sc.delta,
        "truth_spec": sc.truth_spec.to_dict(),
        "signal": {"centers": sc.signal.centers.tolist(), "coefficients": coeffs},
        "noise": sc.noise.to_dict(),
        "energy": sc.energy(), "noise_norm2": sc.noise_norm2(),
    }


def cmd_synth(args) -> int:
    cfg = RunConfig.from_dict(_load_config(args.config))
    sc = synth_scenario(cfg.scenario, args.seed, cfg.grid)
    _emit(json.dumps(scenario_to_dict(sc), indent=2) + "\n", args.out)
    return 0


def cmd_tune(args) -> int:
    raw = _load_config(args.config)
    RunConfig.from_dict(raw)
    recs = run_trials(raw, args.trials, args.seed, args.jobs)
    _emit(to_csv(recs, timing=not args.no_timing), args.out)
    return 0


def cmd_sweep(args) -> int:
    raw = _load_config(args.config)
    RunConfig.from_dict(raw)
    rows = run_sweep(raw, seed=args.seed, jobs=args.jobs, trials=args.trials)
    _emit(to_csv(rows, timing=not args.no_timing), args.out)
    return 0


def cmd_statdim(args) -> int:
    cfg = RunConfig.from_dict(_load_config(args.config))
    sc, budget = cfg.scenario, cfg.budget
    specs = sm_grid(cfg.grid)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "params", "statdim", "gridsize"])
    for i, sp in enumerate(specs):
        est = statdim_operator(sp, sc.T, sc.epsilon)
        w.writerow([i, sp.describe(), format(est.value, ".17g"), est.gridsize])
    s_max = max_statdim(specs, sc.T, sc.epsilon)
    alpha = alpha_for(specs, sc.T, sc.epsilon, budget.c_alpha)
    n = sample_budget(max(s_max, 1.0), len(specs), sc.delta, budget.C0)
    log.info("Q=%d s_max=%.6g alpha=%.6g n=%d (c_alpha=%g, C0=%g)",
             len(specs), s_max, alpha, n, budget.c_alpha, budget.C0)
    _emit(buf.getvalue(), args.out)
    return 0


def cmd_validate(args) -> int:
    only = args.only.split(",") if args.only else None
    if only:
        bad = [k for k in only if k not in CRITERIA]
        if bad:
            raise SystemExit(f"unknown criteria: {', '.join(bad)}")
    results = run_validate(only=only)
    lines = [r.line() for r in results]
    failed = sum(not r.passed for r in results)
    lines.append(f"{len(results) - failed}/{len(results)} checks passed")
    _emit("\n".join(lines) + "\n", args.out)
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="krrtune", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, trials=False):
        sp.add_argument("--config", help="JSON config with scenario/grid/budget/sweep sections")
        sp.add_argument("--seed", type=int, default=0, help="global 64-bit seed")
        sp.add_argument("--out", help="output path (default: stdout)")
        if trials:
            sp.add_argument("--trials", type=int, default=None, help="trials (per sweep point)")
            sp.add_argument("--jobs", type=int, default=1, help="worker processes")
            sp.add_argument("--no-timing", action="store_true",
                            help="leave wall_ms empty so repeated runs are byte-identical")

    common(sub.add_parser("synth", help="draw one scenario and write it as JSON"))
    common(sub.add_parser("tune", help="run end-to-end tuning trials"), trials=True)
    common(sub.add_parser("sweep", help="sweep one axis and aggregate success rates"), trials=True)
    common(sub.add_parser("statdim", help="statistical dimension of every grid kernel"))
    v = sub.add_parser("validate", help="run invariant suites and acceptance checks")
    v.add_argument("--out", help="report path (default: stdout)")
    v.add_argument("--only", help="comma-separated criterion ids, e.g. 1,2,10")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "tune" and args.trials is None:
        args.trials = 1
    handler = {"synth": cmd_synth, "tune": cmd_tune, "sweep": cmd_sweep,
               "statdim": cmd_statdim, "validate": cmd_validate}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
