import csv
import io
import json

import numpy as np
import pytest
import scipy.integrate

from krrtune.cli import main
from krrtune.discretize import sm_grid
from krrtune.kernel import kernel_matrix, signal_energy
from krrtune.pipeline import (CSV_HEADER, Budget, RunConfig, bound_constant, plan_trial, run_sweep, run_trials,
                              run_tune, to_csv, tune_many)
from krrtune.regression import Interpolant, krr_fit, residual_norms, sample_objective
from krrtune.sampling import UniversalDensity, draw_design, make_rng, trial_seed
from krrtune.scenario import NoiseModel, ScenarioConfig, build_noise, synth_scenario
from krrtune.statdim import alpha_for, sample_budget
from krrtune.validation import run_validate

SMALL = {
    "scenario": {"T": 2.0, "W": 1.0, "m": 0.5, "M": 1.0, "epsilon": 1e-2, "delta": 0.2, "n_centers": 4,
                 "noise": {"kind": "offset", "norm2": 0.05}},
    "grid": {"rho": 1.0, "gamma": 1.0},
    "budget": {"C0": 2.0},
}


class TestNoise:
    @pytest.mark.parametrize("noise,T", [
        (NoiseModel("offset", 0.7), 3.0),
        (NoiseModel("sinusoid", 1.3, freq=2.3), 1.7),
        (NoiseModel("sinusoid", 0.4, freq=0.11), 2.0),
        (NoiseModel("spike_train", 2.0, period=0.7, width=0.2), 3.1),
        (NoiseModel("spike_train", 2.0, period=1.0, width=0.3), 4.15),
    ])
    def test_closed_form_norm(self, noise, T):
        pts = noise.breakpoints(T)
        want = scipy.integrate.quad(lambda t: float(noise(t)) ** 2, 0, T, points=pts or None, limit=500,
                                    epsabs=1e-13, epsrel=1e-12)[0] / T
        assert noise.norm2(T) == pytest.approx(want, rel=1e-9, abs=1e-14)

    def test_none(self):
        assert NoiseModel().norm2(5.0) == 0.0
        assert np.all(NoiseModel()(np.linspace(0, 1, 5)) == 0)

    def test_scaled_to_target(self):
        for kind, kw in (("offset", {}), ("sinusoid", {"freq": 3.3}), ("spike_train", {"period": 1, "width": .1})):
            assert NoiseModel.with_norm2(kind, 0.3, 2.5, **kw).norm2(2.5) == pytest.approx(0.3, rel=1e-12)

    def test_default_sinusoid_is_out_of_band(self):
        cfg = ScenarioConfig(W=4, M=2, noise={"kind": "sinusoid", "norm2": 1.0})
        z = build_noise(cfg)
        assert z.freq > cfg.W + 3 * cfg.M
        assert z.norm2(cfg.T) == pytest.approx(1.0)

    def test_rejects_unknown_kind(self):
        with pytest.raises(ValueError):
            NoiseModel("pink")
        with pytest.raises(ValueError):
            ScenarioConfig(noise={"kind": "pink"})


class TestSynth:
    def test_zero_centers(self):
        sc = synth_scenario({"n_centers": 0}, 1)
        assert sc.energy() == 0
        assert np.all(sc.truth(np.linspace(0, sc.T, 11)) == 0)

    @pytest.mark.parametrize("complex_coefficients", [False, True])
    def test_unit_energy(self, complex_coefficients):
        sc = synth_scenario({"complex_coefficients": complex_coefficients}, 4)
        assert signal_energy(sc.signal, sc.truth_spec) == pytest.approx(1.0, abs=1e-9)

    def test_reproducible(self):
        a, b = synth_scenario({}, 9), synth_scenario({}, 9)
        assert a.truth_spec == b.truth_spec
        np.testing.assert_array_equal(a.signal.coefficients, b.signal.coefficients)
        assert synth_scenario({}, 10).truth_spec != a.truth_spec

    def test_truth_within_ranges(self):
        for seed in range(20):
            comp = synth_scenario({"W": 3.0, "m": 0.2, "M": 1.0}, seed).truth_spec.components[0]
            assert 0 <= comp.c <= 3.0 and 0.2 <= comp.sigma <= 1.0

    def test_grid_truth_is_on_grid(self):
        cfg = RunConfig.from_dict(SMALL | {"scenario": SMALL["scenario"] | {"truth": "grid"}})
        sc = synth_scenario(cfg.scenario, 0, cfg.grid)
        assert sc.truth_spec in sm_grid(cfg.grid)

    def test_invalid_fields(self):
        with pytest.raises(ValueError):
            synth_scenario({"horizon": 3}, 0)
        with pytest.raises(ValueError):
            RunConfig.from_dict({"scenario": {}, "extras": {}})
        with pytest.raises(ValueError):
            Budget.from_dict({"C1": 3})


class TestRunTune:
    def test_noiseless_recovery(self):
        cfg = RunConfig.from_dict({
            "scenario": {"T": 1.0, "W": 1.0, "m": 0.5, "M": 1.0, "epsilon": 1e-4, "delta": 0.1,
                         "truth": "grid", "n_centers": 5},
            "grid": {"rho": 1.0, "gamma": 1.0}})
        sc = synth_scenario(cfg.scenario, 21, cfg.grid)
        rec = run_tune(sc, cfg.grid, seed=21)
        assert rec.interp_err / rec.truth_norm2 <= 1e-2

    def test_single_kernel_equals_direct_fit(self):
        cfg = RunConfig.from_dict(SMALL)
        sc = synth_scenario(cfg.scenario, 3, cfg.grid)
        rec = run_tune(sc, specs=[sc.truth_spec], seed=77, budget=cfg.budget)
        # direct single-kernel ridge regression on the same random stream
        alpha = alpha_for([sc.truth_spec], sc.T, sc.epsilon, cfg.budget.c_alpha)
        n = sample_budget(max(alpha / cfg.budget.c_alpha, 1.0), 1, sc.delta, cfg.budget.C0)
        des = draw_design(UniversalDensity(alpha, sc.T), n, make_rng(77, 1))
        K = kernel_matrix(sc.truth_spec, des)
        ybar = des.weights * sc.observe(des.times)
        a = krr_fit(K, ybar, sc.epsilon)
        assert rec.n == n and rec.Q == 1 and rec.chosen_index == 0
        assert rec.sample_obj == sample_objective(K, ybar, sc.epsilon, a)
        fit, err, _ = residual_norms(Interpolant(a, des, sc.truth_spec, sc.epsilon), sc)
        assert rec.interp_err == err

    def test_bound_accounting(self):
        for rec in run_trials(SMALL, 4, 5):
            assert rec.bound_rhs == pytest.approx(rec.recomputed_rhs(), rel=1e-12, abs=0)
            assert rec.C == bound_constant(0.2) == 49.0
            assert rec.ratio == rec.interp_err / rec.bound_rhs

    def test_n_override(self):
        cfg = RunConfig.from_dict(SMALL)
        sc = synth_scenario(cfg.scenario, 0, cfg.grid)
        assert run_tune(sc, cfg.grid, n_override=33, seed=0).n == 33

    def test_offset_noise_without_signal(self):
        cfg_dict = SMALL | {"scenario": SMALL["scenario"] | {"n_centers": 0, "noise": {"kind": "offset",
                                                                                       "amplitude": 0.5}}}
        recs = run_trials(cfg_dict, 10, 2)
        C = bound_constant(0.2)
        hits = [r.interp_err <= 2 * (C + 1) * 0.25 for r in recs]
        assert all(r.energy == 0 for r in recs)
        assert np.mean(hits) >= 0.8

    def test_shared_design_noise_batch(self):
        cfg = RunConfig.from_dict(SMALL)
        sc = synth_scenario(cfg.scenario, 1, cfg.grid)
        plan = plan_trial(sm_grid(cfg.grid), sc.T, sc.epsilon, sc.delta, cfg.budget)
        noises = [sc.noise, NoiseModel.with_norm2("sinusoid", 0.5, sc.T, freq=9.0)]
        batch = tune_many(sc, noises, plan, 8)
        single = tune_many(sc, noises[:1], plan, 8)[0]
        assert batch[0].chosen_index == single.chosen_index
        assert batch[0].sample_obj == pytest.approx(single.sample_obj, rel=1e-12)
        assert batch[1].noise_norm2 == pytest.approx(0.5)


class TestSweep:
    def test_row_count(self):
        cfg = SMALL | {"sweep": {"axis": "n", "values": [20, 40], "trials": 3}}
        rows = run_sweep(cfg, seed=1)
        assert len(rows) == 8
        assert [r.n for r in rows if not str(r.trial).startswith("agg")] == [20, 20, 20, 40, 40, 40]
        agg = [r for r in rows if str(r.trial).startswith("agg")]
        assert all(0 <= r.ratio <= 1 for r in agg)

    def test_parallel_matches_serial(self):
        cfg = SMALL | {"sweep": {"axis": "epsilon", "values": [1e-2, 1e-1], "trials": 2}}
        serial = to_csv(run_sweep(cfg, seed=4, jobs=1), timing=False)
        parallel = to_csv(run_sweep(cfg, seed=4, jobs=2), timing=False)
        assert serial == parallel

    def test_sigma_max_axis(self):
        cfg = SMALL | {"sweep": {"axis": "sigma_max", "values": [1.0, 2.0], "trials": 1}}
        rows = run_sweep(cfg, seed=0)
        assert rows[0].Q < rows[2].Q

    def test_q_trend(self):
        cfg = {
            "scenario": {"T": 2.0, "W": 2.0, "m": 0.5, "M": 2.0, "epsilon": 1e-3, "delta": 0.2, "n_centers": 6,
                         "truth": "grid", "noise": {"kind": "sinusoid", "norm2": 1e-4, "freq": 9.0}},
            "grid": {"rho": 0.25, "gamma": 0.25},
            "budget": {"n": 12},
            "sweep": {"axis": "Q", "values": [1, 4, 16, 64], "trials": 12},
        }
        rows = run_sweep(cfg, seed=3)
        agg = [r for r in rows if str(r.trial).startswith("agg")]
        assert [r.Q for r in agg] == [1, 4, 16, 64]
        rates = [r.ratio for r in agg]
        assert rates[-1] <= rates[0]
        assert np.mean(np.diff(rates)) <= 0

    def test_bad_axis(self):
        with pytest.raises(ValueError):
            run_sweep(SMALL | {"sweep": {"axis": "T", "values": [1]}})


class TestCsv:
    def test_header_and_precision(self):
        recs = run_trials(SMALL, 2, 0)
        text = to_csv(recs)
        rows = list(csv.reader(io.StringIO(text)))
        assert rows[0] == CSV_HEADER
        for rec, row in zip(recs, rows[1:]):
            assert float(row[CSV_HEADER.index("interp_err")]) == rec.interp_err
            assert float(row[CSV_HEADER.index("bound_rhs")]) == rec.bound_rhs
            assert int(row[1]) == trial_seed(0, rec.trial)

    def test_byte_identical(self):
        assert to_csv(run_trials(SMALL, 2, 6), timing=False) == to_csv(run_trials(SMALL, 2, 6), timing=False)


class TestCli:
    def write_cfg(self, tmp_path, cfg):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(cfg))
        return str(p)

    def test_synth(self, tmp_path):
        out = tmp_path / "sc.json"
        assert main(["synth", "--config", self.write_cfg(tmp_path, SMALL), "--seed", "3", "--out", str(out)]) == 0
        blob = json.loads(out.read_text())
        assert blob["energy"] == pytest.approx(1.0)
        assert blob["noise_norm2"] == pytest.approx(0.05)

    def test_tune_is_deterministic(self, tmp_path):
        cfg = self.write_cfg(tmp_path, SMALL)
        outs = []
        for name in ("a.csv", "b.csv"):
            path = tmp_path / name
            assert main(["tune", "--config", cfg, "--seed", "2", "--trials", "2", "--no-timing",
                         "--out", str(path)]) == 0
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]
        assert outs[0].decode().splitlines()[0] == ",".join(CSV_HEADER)

    def test_sweep(self, tmp_path):
        cfg = self.write_cfg(tmp_path, SMALL | {"sweep": {"axis": "n", "values": [10, 20], "trials": 1}})
        path = tmp_path / "s.csv"
        assert main(["sweep", "--config", cfg, "--jobs", "1", "--out", str(path)]) == 0
        assert len(path.read_text().splitlines()) == 1 + 4

    def test_statdim(self, tmp_path, capsys):
        assert main(["statdim", "--config", self.write_cfg(tmp_path, SMALL)]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "index,params,statdim,gridsize"
        assert len(lines) == 1 + len(sm_grid(RunConfig.from_dict(SMALL).grid))

    def test_validate_subset(self, tmp_path):
        path = tmp_path / "report.txt"
        assert main(["validate", "--only", "1,10", "--out", str(path)]) == 0
        text = path.read_text()
        assert "[PASS] C1" in text and "[PASS] C10" in text and " s" in text


class TestValidate:
    def test_mutated_distortion_constant_fails(self):
        results = run_validate(only=["1"], overrides={"1": {"dc": lambda rho, gamma: 3.0}})
        c1 = [r for r in results if r.key == "C1"][0]
        assert not c1.passed
        assert all(r.passed for r in results if r.key != "C1")

    def test_report_lists_timing(self):
        for r in run_validate(only=["1", "9"]):
            assert r.seconds >= 0
            assert "s" in r.line()
