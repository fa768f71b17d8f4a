"""End-to-end tuning trials and parameter sweeps.

A trial samples one design from the universal density, fits every candidate
kernel on it, keeps the best sample objective and then measures the selected
interpolant against the ground truth in the continuous T-norm.
"""
from __future__ import annotations

import copy
import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .discretize import GridConfig, nearest_grid_index, sm_grid, spec_index
from .kernel import KernelSpec, kernel_matrices
from .regression import (Interpolant, continuous_objective, residual_norms, select_kernel,
                         select_kernel_multi)
from .sampling import UniversalDensity, draw_design, make_rng, trial_seed
from .scenario import NoiseModel, Scenario, ScenarioConfig, synth_scenario
from .statdim import DEFAULT_C0, DEFAULT_C_ALPHA, alpha_for, max_statdim, sample_budget

log = logging.getLogger(__name__)

CSV_HEADER = ["trial", "seed", "n", "Q", "chosen_index", "chosen_params", "sample_obj",
              "cont_obj", "interp_err", "noise_norm2", "energy", "bound_rhs", "ratio", "wall_ms"]
SWEEP_AXES = ("n", "Q", "sigma_max", "epsilon")


def bound_constant(delta: float) -> float:
    return 9.0 + 8.0 / delta


def bound_rhs(C: float, noise_norm2: float, epsilon: float, energy: float) -> float:
    """``2 (C + 1) ||z||^2 + 2 C eps Energy``."""
    return 2.0 * (C + 1.0) * noise_norm2 + 2.0 * C * epsilon * energy


@dataclass
class Budget:
    c_alpha: float = DEFAULT_C_ALPHA
    C0: float = DEFAULT_C0
    n: int | None = None

    @classmethod
    def from_dict(cls, d: dict | None) -> "Budget":
        d = dict(d or {})
        unknown = set(d) - {"c_alpha", "C0", "n"}
        if unknown:
            raise ValueError(f"unknown budget fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrialRecord:
    trial: int | str
    seed: int
    n: int
    Q: int
    chosen_index: int
    chosen_params: str
    sample_obj: float
    cont_obj: float
    interp_err: float
    noise_norm2: float
    energy: float
    bound_rhs: float
    ratio: float
    wall_ms: float
    C: float = float("nan")
    epsilon: float = float("nan")
    truth_norm2: float = float("nan")
    extra: dict = field(default_factory=dict)

    def recomputed_rhs(self) -> float:
        return bound_rhs(self.C, self.noise_norm2, self.epsilon, self.energy)

    def row(self, timing: bool = True) -> list[str]:
        def f(x):
            if isinstance(x, float):
                return format(x, ".17g")
            return str(x)
        vals = [self.trial, self.seed, self.n, self.Q, self.chosen_index, self.chosen_params,
                self.sample_obj, self.cont_obj, self.interp_err, self.noise_norm2, self.energy,
                self.bound_rhs, self.ratio, self.wall_ms if timing else ""]
        return [f(v) for v in vals]


@dataclass
class Plan:
    """Everything a trial needs that does not depend on the scenario draw."""
    specs: list[KernelSpec]
    alpha: float
    s_max: float
    n: int


def plan_trial(specs: Sequence[KernelSpec], T: float, epsilon: float, delta: float,
               budget: Budget) -> Plan:
    specs = list(specs)
    s_max = max_statdim(specs, T, epsilon)
    alpha = alpha_for(specs, T, epsilon, budget.c_alpha)
    n = budget.n if budget.n is not None else sample_budget(max(s_max, 1.0), len(specs), delta, budget.C0)
    log.info("plan: Q=%d s_max=%.6g alpha=%.6g n=%d (c_alpha=%g, C0=%g)",
             len(specs), s_max, alpha, n, budget.c_alpha, budget.C0)
    return Plan(specs, alpha, s_max, int(n))


def _ratio(err: float, rhs: float) -> float:
    if rhs > 0:
        return err / rhs
    return 0.0 if err == 0 else math.inf


def tune_many(scenario: Scenario, noises: Sequence[NoiseModel], plan: Plan, seed: int,
              trial: int | str = 0) -> list[TrialRecord]:
    """Run one design draw against several noise models that share truth and design."""
    t0 = time.perf_counter()
    dens = UniversalDensity(plan.alpha, scenario.T)
    design = draw_design(dens, plan.n, make_rng(seed, 1))
    Ks = kernel_matrices(plan.specs, design)
    clean = scenario.truth(design.times)
    ybars = np.stack([design.weights * (clean + z(design.times)) for z in noises], axis=1)
    if len(noises) == 1:
        q, a, all_objs = select_kernel(Ks, ybars[:, 0], scenario.epsilon)
        idx, alphas, objs = [q], [a], [all_objs[q]]
    else:
        idx, alphas, objs = select_kernel_multi(Ks, ybars, scenario.epsilon)
    setup_ms = (time.perf_counter() - t0) * 1e3
    C = bound_constant(scenario.delta)
    energy = scenario.energy()
    out = []
    for j, z in enumerate(noises):
        t1 = time.perf_counter()
        sc = scenario.with_noise(z)
        spec = plan.specs[int(idx[j])]
        ip = Interpolant(alphas[j], design, spec, scenario.epsilon)
        fit, err, ynorm = residual_norms(ip, sc)
        cont = continuous_objective(ip, sc, fit)
        nz = z.norm2(scenario.T)
        rhs = bound_rhs(C, nz, scenario.epsilon, energy)
        wall = setup_ms / len(noises) + (time.perf_counter() - t1) * 1e3
        rec = TrialRecord(trial, seed, plan.n, len(plan.specs), int(idx[j]), spec.describe(),
                          float(objs[j]), float(cont), float(err), float(nz), float(energy),
                          float(rhs), _ratio(err, rhs), float(round(wall, 3)), C, scenario.epsilon,
                          ynorm)
        out.append(rec)
    return out


def run_tune(scenario: Scenario, grid_cfg: GridConfig | None = None, n_override: int | None = None,
             seed: int = 0, budget: Budget | None = None, specs: Sequence[KernelSpec] | None = None,
             trial: int | str = 0, plan: Plan | None = None) -> TrialRecord:
    """Sample, select and evaluate for a single scenario.

    Candidates are ``specs`` when given, else the full grid from ``grid_cfg``.
    """
    budget = copy.copy(budget or Budget())
    if n_override is not None:
        budget.n = int(n_override)
    if plan is None:
        if specs is None:
            if grid_cfg is None:
                raise ValueError("need grid_cfg or explicit specs")
            specs = sm_grid(grid_cfg)
        plan = plan_trial(specs, scenario.T, scenario.epsilon, scenario.delta, budget)
    return tune_many(scenario, [scenario.noise], plan, seed, trial)[0]


# --- configuration -----------------------------------------------------------------

@dataclass
class RunConfig:
    scenario: ScenarioConfig
    grid: GridConfig
    budget: Budget
    sweep: dict

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        unknown = set(d) - {"scenario", "grid", "budget", "sweep"}
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        sc = ScenarioConfig.from_dict(dict(d.get("scenario", {})))
        g = {"W": sc.W, "m": sc.m, "M": sc.M, "q": sc.q}
        g.update(d.get("grid", {}))
        return cls(sc, GridConfig.from_dict(g), Budget.from_dict(d.get("budget")), dict(d.get("sweep", {})))


def _subset_specs(grid_specs, truth_spec, cfg: GridConfig, Q: int, rng) -> list[KernelSpec]:
    """``Q`` candidates: the grid point nearest the truth plus ``Q - 1`` random others."""
    Q = min(Q, len(grid_specs))
    if truth_spec is None:
        anchor = 0
    else:
        key = tuple(sorted((c.c, c.sigma) for c in truth_spec.components))
        anchor = spec_index(grid_specs).get(key)
        if anchor is None:
            anchor = nearest_grid_index(truth_spec, cfg, grid_specs)
    others = [i for i in range(len(grid_specs)) if i != anchor]
    pick = rng.choice(len(others), size=Q - 1, replace=False) if Q > 1 else []
    idx = [anchor] + sorted(others[int(i)] for i in pick)
    return [grid_specs[i] for i in idx]


def trial_task(cfg_dict: dict, point: dict, trial: int, global_seed: int) -> TrialRecord:
    """One sweep or tune trial; a pure function of its arguments (safe for process pools)."""
    cfg = RunConfig.from_dict(cfg_dict)
    sc, grid, budget = cfg.scenario, cfg.grid, cfg.budget
    axis, value = point.get("axis"), point.get("value")
    if axis == "epsilon":
        sc.epsilon = float(value)
    elif axis == "sigma_max":
        sc.M = float(value)
        grid = GridConfig(grid.W, grid.m, float(value), grid.rho, grid.gamma, grid.q, grid.cap)
    elif axis == "n":
        budget.n = int(value)
    seed = trial_seed(global_seed, trial)
    scenario = synth_scenario(sc, seed, grid)
    specs = sm_grid(grid)
    if axis == "Q":
        specs = _subset_specs(specs, scenario.truth_spec if sc.truth == "grid" else None,
                              grid, int(value), make_rng(seed, 2))
    plan = plan_trial(specs, scenario.T, scenario.epsilon, scenario.delta, budget)
    return tune_many(scenario, [scenario.noise], plan, seed, trial)[0]


def _run_tasks(tasks, jobs: int):
    if jobs <= 1:
        return [trial_task(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(trial_task, *zip(*tasks)))


def run_trials(cfg_dict: dict, trials: int, seed: int, jobs: int = 1) -> list[TrialRecord]:
    tasks = [(cfg_dict, {}, i, seed) for i in range(trials)]
    recs = _run_tasks(tasks, jobs)
    return sorted(recs, key=lambda r: r.trial)


def run_sweep(cfg_dict: dict, seed: int = 0, jobs: int = 1, trials: int | None = None):
    """Trial rows for every sweep point followed by one aggregate row per point.

    Aggregate rows carry ``trial = "agg<point>"``, ``chosen_params = "<axis>=<value>"``
    and the success rate (fraction of trials with ratio <= 1) in the ``ratio`` column.
    """
    sweep = dict(cfg_dict.get("sweep", {}))
    axis = sweep.get("axis")
    if axis not in SWEEP_AXES:
        raise ValueError(f"sweep axis must be one of {SWEEP_AXES}")
    values = list(sweep.get("values", []))
    k = int(trials if trials is not None else sweep.get("trials", 1))
    if not values or k < 1:
        raise ValueError("sweep needs values and trials >= 1")
    tasks = [(cfg_dict, {"axis": axis, "value": v}, p * k + i, seed)
             for p, v in enumerate(values) for i in range(k)]
    recs = sorted(_run_tasks(tasks, jobs), key=lambda r: r.trial)
    rows: list[TrialRecord] = []
    for p, v in enumerate(values):
        block = recs[p * k:(p + 1) * k]
        rows.extend(block)
        rate = float(np.mean([r.ratio <= 1.0 for r in block]))
        rows.append(TrialRecord(f"agg{p}", seed, block[0].n, block[0].Q, -1, f"{axis}={v}",
                                math.nan, math.nan, math.nan, math.nan, math.nan, math.nan,
                                rate, float(sum(r.wall_ms for r in block))))
    return rows


def to_csv(records: Sequence[TrialRecord], timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(r.row(timing))
    return buf.getvalue()
