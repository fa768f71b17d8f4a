"""Automated acceptance checks and quick invariant suites.

Each ``criterion_*`` function returns a :class:`CheckResult`.  Dependencies that a
mutation test may want to swap out (for instance the distortion constant) are
taken as keyword arguments.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.integrate
import scipy.stats

from . import discretize, kernel, leverage, regression, sampling, statdim
from .discretize import GridConfig, distortion_constant, sm_grid
from .kernel import GaussianComponent, KernelSpec
from .leverage import DesignSet
from .pipeline import RunConfig, plan_trial, tune_many
from .scenario import NoiseModel, synth_scenario
from .sampling import UniversalDensity, make_rng, trial_seed


@dataclass
class CheckResult:
    key: str
    title: str
    passed: bool
    detail: str
    seconds: float
    limit: float | None = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        lim = f" (limit {self.limit:g} s)" if self.limit is not None else ""
        return f"[{status}] {self.key} {self.title}: {self.detail} [{self.seconds:.3f} s{lim}]"


def _finish(key, title, ok, detail, t0, limit):
    sec = time.perf_counter() - t0
    within = limit is None or sec < limit
    if not within:
        detail += f"; runtime {sec:.3f} s over limit"
    return CheckResult(key, title, bool(ok and within), detail, sec, limit)


# --- acceptance criteria ------------------------------------------------------------

def criterion_1(dc: Callable[[float, float], float] = distortion_constant) -> CheckResult:
    t0 = time.perf_counter()
    val = dc(0.5, 0.5)
    sec = time.perf_counter() - t0
    ok = abs(val - 2.8178) <= 5e-4 and sec < 1e-3
    return CheckResult("C1", "distortion constant", ok, f"C(0.5, 0.5) = {val:.6f}, call {sec * 1e6:.1f} us",
                       sec, 1e-3)


def criterion_2(seed: int = 1, matrices: int = 100, probes: int = 10_000) -> CheckResult:
    t0 = time.perf_counter()
    worst_eq, worst_dom = 0.0, -math.inf
    for i in range(matrices):
        rng = make_rng(seed, i)
        A = rng.standard_normal((20, 5))
        Y = rng.standard_normal((5, probes))
        AY = A @ Y
        for eps in (0.01, 1.0, 100.0):
            tau = leverage.ridge_leverage(A, eps)
            # the maximizer of |(Ay)_i|^2 / (||Ay||^2 + eps ||y||^2) is (A^T A + eps I)^{-1} a_i
            Ystar = np.linalg.solve(A.T @ A + eps * np.eye(5), A.T)
            AYs = A @ Ystar
            at_star = np.diag(AYs) ** 2 / (np.sum(AYs ** 2, axis=0) + eps * np.sum(Ystar ** 2, axis=0))
            worst_eq = max(worst_eq, float(np.max(np.abs(at_star - tau))))
            denom = np.sum(AY ** 2, axis=0) + eps * np.sum(Y ** 2, axis=0)
            probe = np.max(AY ** 2 / denom, axis=1)
            worst_dom = max(worst_dom, float(np.max(probe - tau)))
    ok = worst_eq <= 1e-8 and worst_dom <= 1e-12
    return _finish("C2", "leverage equivalence", ok,
                   f"max |closed - maximizer| = {worst_eq:.2e}, max probe excess = {worst_dom:.2e}", t0, 5.0)


def criterion_3(seed: int = 2, draws: int = 10_000, rows: int = 100) -> CheckResult:
    t0 = time.perf_counter()
    rng = make_rng(seed)
    A = rng.standard_normal((rows, 10)) * np.exp(rng.standard_normal((rows, 1)))
    tau = leverage.ridge_leverage(A, 1.0)
    s = float(tau.sum())
    n = math.ceil(20 * s * math.log(s / 0.1))
    acc = np.zeros(rows)
    for _ in range(draws):
        S = leverage.sample_rescale(tau, n, rng)
        # S^T S is diagonal: row r collects the squared scale of every draw landing on it
        acc += np.bincount(S.rows, weights=S.scales ** 2, minlength=rows)
    mean = acc / draws
    err = float(np.linalg.norm(mean - 1.0) / math.sqrt(rows))
    return _finish("C3", "sketch unbiasedness", err <= 0.05,
                   f"n={n}: ||E[S^T S] - I||_F / ||I||_F = {err:.4f}", t0, 10.0)


def criterion_4(seed: int = 3, trials: int = 200, Delta: float = 0.5, eps: float = 1.0) -> CheckResult:
    t0 = time.perf_counter()
    hits = 0
    for i in range(trials):
        rng = make_rng(seed, i)
        A = rng.standard_normal((100, 10)) * np.exp(rng.standard_normal((100, 1)))
        tau = leverage.ridge_leverage(A, eps)
        s = float(tau.sum())
        n = math.ceil(20 * s * math.log(s / 0.1))
        S = leverage.sample_rescale(tau, n, rng)
        hits += leverage.spectral_check(A, S, eps, Delta)
    rate = hits / trials
    return _finish("C4", "spectral embedding", rate >= 0.9, f"both inequalities hold in {rate:.1%}", t0, 30.0)


def random_design_set(Q: int, rows: int = 200, d: int = 8, eps: float = 1.0, noise: float = 0.5):
    """Factory of random multi-design instances: heteroscedastic Gaussian rows,
    target generated by the first design plus Gaussian noise."""
    def make(rng):
        mats = tuple(rng.standard_normal((rows, d)) * np.exp(rng.standard_normal((rows, 1)))
                     for _ in range(Q))
        b = mats[0] @ rng.standard_normal(d) + noise * rng.standard_normal(rows)
        return DesignSet(mats, b, eps)
    return make


def criterion_5(seed: int = 4, trials: int = 100, delta: float = 0.1, Q: int = 16) -> CheckResult:
    t0 = time.perf_counter()
    make = random_design_set(Q)
    bound = leverage.ratio_bound(delta)
    ratios = []
    for i in range(trials):
        rng = make_rng(seed, i)
        ds = make(rng)
        tau = leverage.pairwise_scores(ds)
        s = float(tau.sum())
        n = math.ceil(20 * s * math.log(s * Q / delta))
        ratios.append(leverage.subsampled_select(ds, n, rng, scores=tau)[2])
    ratios = np.array(ratios)
    rate = float(np.mean(ratios <= bound))
    return _finish("C5", "multi-design bound", rate >= 0.9,
                   f"ratio <= {bound:g} in {rate:.1%}, median ratio {np.median(ratios):.5f}", t0, 120.0)


def criterion_6(seed: int = 5, trials: int = 40, delta: float = 0.1,
                Qs=(2, 8, 32)) -> CheckResult:
    t0 = time.perf_counter()
    cands = sorted({int(round(4 * 1.25 ** k)) for k in range(30)})
    ns = [leverage.minimal_n(random_design_set(Q), cands, trials, delta, seed) for Q in Qs]
    if min(ns) < 1:
        return _finish("C6", "log-in-Q scaling", False, f"no candidate reached 90% (minimal n {ns})", t0, 300.0)
    slope = float(np.polyfit(np.log(Qs), np.log(ns), 1)[0])
    return _finish("C6", "log-in-Q scaling", slope < 0.5,
                   f"minimal n {dict(zip(Qs, ns))}, log-log slope {slope:.3f}", t0, 300.0)


C7_CONFIG = {
    "scenario": {"T": 1.0, "W": 2.0, "m": 0.5, "M": 1.0, "epsilon": 1e-4, "delta": 0.1,
                 "truth": "grid", "n_centers": 6, "noise": {"kind": "none"}},
    "grid": {"rho": 1.0, "gamma": 1.0},
    "budget": {"c_alpha": statdim.DEFAULT_C_ALPHA, "C0": statdim.DEFAULT_C0},
}


def criterion_7(seed: int = 7, trials: int = 40, config: dict = C7_CONFIG) -> CheckResult:
    t0 = time.perf_counter()
    rc = RunConfig.from_dict(config)
    specs = sm_grid(rc.grid)
    plan = plan_trial(specs, rc.scenario.T, rc.scenario.epsilon, rc.scenario.delta, rc.budget)
    rel = []
    for i in range(trials):
        sd = trial_seed(seed, i)
        sc = synth_scenario(rc.scenario, sd, rc.grid)
        rec = tune_many(sc, [sc.noise], plan, sd, i)[0]
        rel.append(rec.interp_err / rec.truth_norm2)
    rel = np.array(rel)
    rate = float(np.mean(rel <= 1e-2))
    return _finish("C7", "noiseless recovery", rate >= 0.95,
                   f"Q={len(specs)}, n={plan.n}: rel. error <= 1e-2 in {rate:.1%}, max {rel.max():.2e}",
                   t0, 120.0)


C8_CONFIG = {
    "scenario": {"T": 10.0, "W": 4.0, "m": 0.5, "M": 2.0, "q": 1, "epsilon": 0.1, "delta": 0.2,
                 "n_centers": 8},
    "grid": {"rho": 1.0, "gamma": 1.0},
    "budget": {"c_alpha": statdim.DEFAULT_C_ALPHA, "C0": statdim.DEFAULT_C0},
}


def criterion_8(seed: int = 8, trials: int = 50, config: dict = C8_CONFIG) -> CheckResult:
    t0 = time.perf_counter()
    rc = RunConfig.from_dict(config)
    sc_cfg = rc.scenario
    specs = sm_grid(rc.grid)
    plan = plan_trial(specs, sc_cfg.T, sc_cfg.epsilon, sc_cfg.delta, rc.budget)
    freq = sc_cfg.default_noise_freq()
    combos = [(k, v) for k in ("offset", "sinusoid") for v in (0.1, 1.0)]
    noises = [NoiseModel.with_norm2(k, v, sc_cfg.T, **({"freq": freq} if k == "sinusoid" else {}))
              for k, v in combos]
    ratios = np.empty((trials, len(noises)))
    for i in range(trials):
        sd = trial_seed(seed, i)
        sc = synth_scenario(sc_cfg, sd, rc.grid)
        for j, rec in enumerate(tune_many(sc, noises, plan, sd, i)):
            ratios[i, j] = rec.ratio
    rates = np.mean(ratios <= 1.0, axis=0)
    parts = [f"{k}@{v:g}: {r:.0%} (median ratio {np.median(ratios[:, j]):.2e})"
             for j, ((k, v), r) in enumerate(zip(combos, rates))]
    return _finish("C8", "end-to-end error bound", bool(np.all(rates >= 0.8)),
                   f"Q={len(specs)}, n={plan.n}; " + "; ".join(parts), t0, 300.0)


def flat_band_spec(F: float, step: float = 0.25) -> KernelSpec:
    """Unit-mass Gaussian-mixture stand-in for the flat spectral density on [-F, F]."""
    k = max(1, int(round(F / step)))
    h = F / k
    comps = tuple(GaussianComponent((j + 0.5) * h, h / 2, 1.0 / k) for j in range(k))
    return KernelSpec(comps, symmetric=True)


def criterion_9(T: float = 10.0) -> CheckResult:
    t0 = time.perf_counter()
    problems = []
    spec = KernelSpec.from_params([1.0, 2.5], [0.5, 1.0], [0.6, 0.4])
    est = statdim.statdim_operator(spec, T, 1e-2)
    if abs(est.eig_sum - spec.total_weight) > 1e-6:
        problems.append(f"eigenvalue sum {est.eig_sum} != trace {spec.total_weight}")
    vals = [statdim.statdim_operator(spec, T, e).value for e in (1e-4, 1e-3, 1e-2, 1e-1, 1.0)]
    if not all(a > b for a, b in zip(vals, vals[1:])):
        problems.append(f"not decreasing in eps: {vals}")
    s1 = statdim.statdim_operator(flat_band_spec(2.0), T, 1e-3).value
    s2 = statdim.statdim_operator(flat_band_spec(4.0), T, 1e-3).value
    ratio = s2 / s1
    if not 1.6 <= ratio <= 2.4:
        problems.append(f"bandlimit doubling ratio {ratio:.3f}")
    n = est.gridsize
    a = statdim.statdim_matrix(statdim.operator_eigs(spec, T, n), 1e-2)
    b = statdim.statdim_matrix(statdim.operator_eigs(spec, T, 2 * n), 1e-2)
    drift = abs(a - b) / b
    if drift >= 0.01:
        problems.append(f"grid drift {drift:.2%}")
    detail = (f"doubling ratio {ratio:.3f}, grid drift {drift:.2e}, eps path {[round(v, 2) for v in vals]}"
              if not problems else "; ".join(problems))
    return _finish("C9", "statistical dimension sanity", not problems, detail, t0, 60.0)


def criterion_10(seed: int = 10, samples: int = 100_000) -> CheckResult:
    t0 = time.perf_counter()
    problems = []
    worst = 0.0
    for alpha, T in ((2.0, 1.0), (5.0, 10.0), (40.0, 3.0)):
        d = UniversalDensity(alpha, T)
        e = d.edge
        # the middle band decays like 1/t over many decades: split it at powers of ten.
        # Near t = T the float grid is too coarse for 1e-12 quadrature, so integrate the
        # left half and check mirror symmetry separately.
        decades = e * 10.0 ** np.arange(1, math.ceil(math.log10(T / 2 / e)))
        cuts = [0.0, e, *decades[decades < T / 2], T / 2]
        quad = 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            quad += 2.0 * scipy.integrate.quad(lambda t: float(sampling.density_eval(d, t)), a, b,
                                               epsabs=0.0, epsrel=1e-12)[0]
        probe = np.linspace(0.0, T / 2, 1001)
        mirror = sampling.density_eval(d, T - probe)
        if np.max(np.abs(mirror / sampling.density_eval(d, probe) - 1.0)) > 1e-9:
            problems.append(f"density not mirror symmetric for alpha={alpha}")
        err = abs(quad - sampling.density_mass(d)) / sampling.density_mass(d)
        worst = max(worst, err)
    if worst > 1e-8:
        problems.append(f"mass mismatch {worst:.2e}")
    d = UniversalDensity(5.0, 10.0)
    draw = sampling.draw_design(d, samples, make_rng(seed)).times
    ks = scipy.stats.kstest(draw, lambda t: sampling.cdf(d, t)).statistic
    if ks >= 0.01:
        problems.append(f"KS statistic {ks:.4f}")
    detail = f"max rel. mass error {worst:.2e}, KS {ks:.4f}" if not problems else "; ".join(problems)
    return _finish("C10", "universal density", not problems, detail, t0, 10.0)


CRITERIA = {
    "1": criterion_1, "2": criterion_2, "3": criterion_3, "4": criterion_4, "5": criterion_5,
    "6": criterion_6, "7": criterion_7, "8": criterion_8, "9": criterion_9, "10": criterion_10,
}


# --- quick invariant suites ---------------------------------------------------------

def _inv_kernel() -> str | None:
    spec = KernelSpec.from_params([0.0, 1.5], [0.4, 0.8], [0.3, 0.7])
    rng = make_rng(0)
    t = np.sort(rng.uniform(0, 5, 30))
    design = sampling.SampleDesign(t, np.ones_like(t), 1.0, 5.0)
    K = kernel.kernel_matrix(spec, design)
    if np.max(np.abs(K - K.T)) > 1e-12 or np.linalg.eigvalsh(K)[0] < -1e-9:
        return "Gram matrix not symmetric PSD"
    if abs(kernel.kernel_eval(spec, 0.0) - spec.total_weight) > 1e-12:
        return "k(0) differs from total weight"
    return None


def _inv_sampling() -> str | None:
    d = UniversalDensity(3.0, 2.0)
    u = np.linspace(0, 1, 101)
    back = sampling.cdf(d, sampling.inverse_cdf(d, u))
    if np.max(np.abs(back - u)) > 1e-10:
        return "inverse CDF does not invert the CDF"
    if abs(sampling.density_mass(d) - sampling.density_mass(UniversalDensity(3.0, 50.0))) > 1e-9:
        return "mass depends on T"
    return None


def _inv_regression() -> str | None:
    rng = make_rng(1)
    X = rng.standard_normal((12, 12))
    K = X @ X.T
    y = rng.standard_normal(12)
    objs = [regression.sample_objective(K, y, e, regression.krr_fit(K, y, e)) for e in (1e-3, 1e-1, 10.0)]
    if not all(a <= b + 1e-12 for a, b in zip(objs, objs[1:])):
        return "optimal objective not monotone in eps"
    return None


def _inv_discretize() -> str | None:
    cfg = GridConfig(3.0, 0.5, 2.0)
    C = distortion_constant(cfg.rho, cfg.gamma)
    rng = make_rng(2)
    for _ in range(200):
        c, s = rng.uniform(0, cfg.W), rng.uniform(cfg.m, cfg.M)
        ct, st = discretize.round_params(c, s, cfg)
        if discretize.gaussian_log_ratio_max(c, s, ct, st) > math.log(C) + 1e-12:
            return "rounded density does not dominate"
    return None


def _inv_leverage() -> str | None:
    rng = make_rng(3)
    A = rng.standard_normal((30, 6))
    tau = leverage.ridge_leverage(A, 0.5)
    eig = np.linalg.eigvalsh(A.T @ A)
    if abs(tau.sum() - statdim.statdim_matrix(eig, 0.5)) > 1e-9 or np.any(tau > 1):
        return "leverage sum differs from statistical dimension"
    return None


def _inv_statdim() -> str | None:
    if statdim.sample_budget(10, 1, 0.1, 10) != 461:
        return "sample budget arithmetic"
    return None


INVARIANTS = {
    "kernel": _inv_kernel, "sampling": _inv_sampling, "regression": _inv_regression,
    "discretize": _inv_discretize, "leverage": _inv_leverage, "statdim": _inv_statdim,
}


def run_invariants() -> list[CheckResult]:
    out = []
    for name, fn in INVARIANTS.items():
        t0 = time.perf_counter()
        try:
            problem = fn()
        except Exception as exc:  # a crash is a failed check, reported rather than raised
            problem = f"{type(exc).__name__}: {exc}"
        out.append(_finish(f"inv:{name}", "invariants", problem is None, problem or "ok", t0, None))
    return out


def run_validate(only=None, overrides: dict | None = None, invariants: bool = True) -> list[CheckResult]:
    """Run the invariant suites and the selected acceptance criteria.

    ``overrides`` maps a criterion id to keyword arguments for that check, e.g.
    ``{"1": {"dc": lambda r, g: 3.0}}``.
    """
    overrides = overrides or {}
    keys = list(CRITERIA) if only is None else [str(k) for k in only]
    results = run_invariants() if invariants else []
    for k in keys:
        results.append(CRITERIA[k](**overrides.get(k, {})))
    return results
