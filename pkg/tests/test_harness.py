import numpy as np
import pytest
import yaml

import rategames as rg
from rategames.exceptions import ConfigError, DataError
from rategames.harness import (DECLARED_STEP_SIZES, ExperimentConfig, Report,
                               ReportRow, baseline_post_shift, baseline_unc_error,
                               baseline_unc_f1, build_custom_problem,
                               build_kld_parity_problem, config_from_file,
                               emit_report, error_rate, f1_score, fit_hinge,
                               read_report_csv, run_experiment,
                               select_sweep_point)
from rategames.synth import RECIDIVISM_SCHEMA, make_two_gaussians


@pytest.fixture(scope="module")
def separable_ds():
    rng = np.random.default_rng(2)
    n = 200
    labels = np.where(rng.random(n) < 0.5, 1, -1)
    X = rng.normal(0, 0.3, (n, 2)) + 2.0 * labels[:, None]
    groups = (rng.random(n) < 0.5).astype(int)
    return rg.Dataset(X, labels, groups, name="separable")


@pytest.fixture(scope="module")
def small_csv(tmp_path_factory):
    from rategames.synth import make_recidivism_style
    frame = make_recidivism_style(n=700, seed=3)
    path = tmp_path_factory.mktemp("data") / "recid_small.csv"
    frame.to_csv(path, index=False)
    return path


class TestFitHinge:
    def test_separable_reaches_zero_error(self, separable_ds):
        model = fit_hinge(separable_ds, steps=500, step_size=0.5)
        assert error_rate(model, separable_ds) == 0.0

    def test_single_class_guard(self):
        ds = rg.Dataset(np.ones((5, 2)), [1, 1, 1, 1, 1])
        with pytest.raises(DataError):
            fit_hinge(ds)

    def test_deterministic(self, separable_ds):
        a = fit_hinge(separable_ds, steps=100, step_size=0.1)
        b = fit_hinge(separable_ds, steps=100, step_size=0.1)
        np.testing.assert_array_equal(a.param_vector(), b.param_vector())


class TestUncF1:
    def test_threshold_sweep_covers_all_cuts(self):
        # three distinct scores -> four cut positions, all reachable
        X = np.array([[1.0], [2.0], [3.0]])
        ds = rg.Dataset(X, [-1, 1, 1])
        base = rg.LinearModel(np.array([1.0]), 0.0)
        scores = np.sort(base.scores(ds))
        cuts = [scores[0] - 1.0] + [0.5 * (a + b) for a, b in zip(scores, scores[1:])] \
            + [scores[-1] + 1.0]
        f1s = []
        for cut in cuts:
            shifted = rg.LinearModel(base.weights, base.bias - cut)
            f1s.append(f1_score(shifted, ds))
        # best cut keeps the two positives and drops the negative
        assert max(f1s) == 1.0

    def test_never_below_base_f1(self, gaussians):
        train, val, _ = rg.split_dataset(gaussians, seed=0)
        base = baseline_unc_error(train, val, steps=300)
        tuned = baseline_unc_f1(train, val, steps=300)
        assert f1_score(tuned, train) >= f1_score(base, train)

    def test_all_positive_optimum_allowed(self):
        # with only positives misclassified, predicting everything positive wins
        X = np.array([[-1.0], [-2.0], [-3.0], [4.0]])
        ds = rg.Dataset(X, [1, 1, 1, -1])
        scores = np.sort(np.unique(rg.LinearModel(np.array([1.0]), 0.0).scores(ds)))
        all_pos_cut = scores[0] - 1.0
        shifted = rg.LinearModel(np.array([1.0]), -all_pos_cut)
        assert np.all(shifted.predictions(ds) == 1)
        assert f1_score(shifted, ds) == pytest.approx(6 / 7)


class TestPostShift:
    def test_symmetric_groups_equal_thresholds(self):
        rng = np.random.default_rng(8)
        X = rng.normal(0, 1, (400, 2))
        labels = np.where(X[:, 0] + 0.3 * rng.normal(size=400) > 0, 1, -1)
        # identical score distributions: duplicate block per group
        ds = rg.Dataset(np.vstack([X, X]), np.concatenate([labels, labels]),
                        np.concatenate([np.zeros(400, int), np.ones(400, int)]))
        sm = baseline_post_shift(ds, steps=400)
        model = sm.atoms[0][0]
        assert model.shifts[0] == pytest.approx(model.shifts[1])

    def test_group_rates_near_global_proportion(self, gaussians):
        sm = baseline_post_shift(gaussians, steps=600)
        model = sm.atoms[0][0]
        preds = model.predictions(gaussians)
        p = gaussians.p
        for g in (0, 1):
            mask = gaussians.groups == g
            rate = float(np.mean(preds[mask] == 1))
            assert abs(rate - p) <= 1.0 / mask.sum()

    def test_single_group_rejected(self):
        ds = rg.Dataset(np.random.default_rng(0).normal(0, 1, (30, 2)),
                        np.array([1, -1] * 15))
        with pytest.raises(DataError):
            baseline_post_shift(ds)


class TestConfig:
    def test_task_algorithm_compatibility(self, small_csv):
        with pytest.raises(ConfigError):
            ExperimentConfig(task="fmeasure-parity", dataset_path=str(small_csv),
                             schema=RECIDIVISM_SCHEMA, algorithm="alg2")
        with pytest.raises(ConfigError):
            ExperimentConfig(task="kld-parity", dataset_path=str(small_csv),
                             schema=RECIDIVISM_SCHEMA, algorithm="alg3")

    def test_grid_outside_declared_set(self, small_csv):
        with pytest.raises(ConfigError, match="declared"):
            ExperimentConfig(task="kld-parity", dataset_path=str(small_csv),
                             schema=RECIDIVISM_SCHEMA,
                             sweep_eta_theta=(0.05,))

    def test_config_file_with_overrides(self, tmp_path, small_csv):
        raw = {
            "task": "kld-parity",
            "algorithm": "alg2",
            "dataset": {"path": str(small_csv),
                        "schema": {"label": "two_year_recid", "group": "sex",
                                   "positive_label": 1}},
            "train": {"T": 200, "kappa": 4.0},
            "sweep": {"eta_theta": [0.1], "eta_lambda": [0.1]},
        }
        path = tmp_path / "run.yaml"
        path.write_text(yaml.safe_dump(raw))
        cfg = config_from_file(path, {"train.T": 321, "seed": 9})
        assert cfg.T == 321
        assert cfg.seed == 9
        assert cfg.kappa == 4.0
        assert cfg.sweep_eta_theta == (0.1,)

    def test_data_dir_env_fallback(self, tmp_path, small_csv, monkeypatch):
        import shutil
        data_dir = tmp_path / "datadir"
        data_dir.mkdir()
        shutil.copy(small_csv, data_dir / "byname.csv")
        monkeypatch.setenv("RATEGAMES_DATA_DIR", str(data_dir))
        raw = {"task": "custom", "dataset": {
            "path": "byname.csv",
            "schema": {"label": "two_year_recid", "group": "sex", "positive_label": 1}}}
        path = tmp_path / "run.yaml"
        path.write_text(yaml.safe_dump(raw))
        cfg = config_from_file(path)
        assert cfg.dataset_path == str(data_dir / "byname.csv")


class TestSelection:
    def test_prefers_feasible_min_objective(self):
        candidates = [
            {"eta_theta": 0.1, "eta_lambda": 0.1, "val_obj": 0.5, "val_viol": 0.001},
            {"eta_theta": 0.1, "eta_lambda": 1.0, "val_obj": 0.3, "val_viol": 0.01},
            {"eta_theta": 1.0, "eta_lambda": 0.1, "val_obj": 0.1, "val_viol": 0.5},
        ]
        chosen = select_sweep_point(candidates, tolerance=0.02)
        assert chosen["val_obj"] == 0.3

    def test_fallback_min_violation(self):
        candidates = [
            {"eta_theta": 0.1, "eta_lambda": 0.1, "val_obj": 0.5, "val_viol": 0.4},
            {"eta_theta": 0.1, "eta_lambda": 1.0, "val_obj": 0.3, "val_viol": 0.3},
        ]
        chosen = select_sweep_point(candidates, tolerance=0.02)
        assert chosen["val_viol"] == 0.3


class TestRunExperiment:
    @pytest.fixture(scope="class")
    def custom_report(self, small_csv, tmp_path_factory):
        out = tmp_path_factory.mktemp("out")
        cfg = ExperimentConfig(task="custom", dataset_path=str(small_csv),
                               schema=RECIDIVISM_SCHEMA, algorithm="alg2",
                               T=400, kappa=2.0, snapshot_every=10,
                               sweep_eta_theta=(0.1,), sweep_eta_lambda=(0.1,),
                               custom_metric="gmean", baseline_steps=300,
                               output_dir=str(out), seed=1)
        return cfg, run_experiment(cfg)

    def test_rows_present_and_traceable(self, custom_report):
        cfg, report = custom_report
        methods = [r.method for r in report.rows]
        assert "UncError" in methods and "alg2-stochastic" in methods
        stoch = next(r for r in report.rows if r.method == "alg2-stochastic")
        assert stoch.trace_path and rg.Trace.load(stoch.trace_path) is not None

    def test_unconstrained_custom_task_has_no_violation_column_pressure(self, custom_report):
        _, report = custom_report
        stoch = next(r for r in report.rows if r.method == "alg2-stochastic")
        assert stoch.constraint == 0.0  # no constraints in the problem

    def test_sweep_selection_reproducible(self, small_csv, tmp_path):
        kwargs = dict(task="custom", dataset_path=str(small_csv),
                      schema=RECIDIVISM_SCHEMA, algorithm="alg2",
                      T=200, kappa=2.0, sweep_eta_theta=(0.01, 0.1),
                      sweep_eta_lambda=(0.1,), custom_metric="gmean",
                      baseline_steps=200, seed=4)
        r1 = run_experiment(ExperimentConfig(output_dir=str(tmp_path / "a"), **kwargs))
        r2 = run_experiment(ExperimentConfig(output_dir=str(tmp_path / "b"), **kwargs))
        assert r1.selected == r2.selected
        for a, b in zip(r1.rows, r2.rows):
            assert a.method == b.method
            assert a.objective == b.objective

    def test_report_metrics_recomputable_from_trace(self, custom_report, small_csv):
        cfg, report = custom_report
        stoch = next(r for r in report.rows if r.method == "alg2-stochastic")
        trace = rg.Trace.load(stoch.trace_path)
        ds = rg.load_tabular_dataset(cfg.dataset_path, cfg.schema)
        train, val, test = rg.standardize_splits(*rg.split_dataset(ds, cfg.seed))
        unc = baseline_unc_error(train, val, steps=cfg.baseline_steps,
                                 step_grid=cfg.baseline_step_grid)
        problem = build_custom_problem(train, "gmean", None, None)
        from rategames.shrinking import shrink
        sm, _ = shrink(trace, problem, train)
        compiled = problem.compile()
        rates = rg.stochastic_rates(sm, compiled.rate_defs, test)
        assert abs(compiled.objective_value(rates) - stoch.objective) <= 1e-9


class TestReportEmission:
    def test_round_trip(self, tmp_path):
        report = Report(task="custom", dataset="d", algorithm="alg2", rows=[
            ReportRow("UncError", 0.25, 1.0, None, None, 1.5, ""),
            ReportRow("alg2-stochastic", 0.125, 1.0625, 0.1, 0.01, 12.25, "trace.jsonl"),
        ])
        csv_path, txt_path = emit_report(report, tmp_path)
        rows = read_report_csv(csv_path)
        assert [r.method for r in rows] == ["UncError", "alg2-stochastic"]
        assert rows[1].objective == pytest.approx(0.125)
        assert rows[1].eta_theta == pytest.approx(0.1)
        assert rows[0].eta_theta is None
        text = txt_path.read_text()
        assert "alg2-stochastic" in text and "method" in text

    def test_empty_report_header_only(self, tmp_path):
        report = Report(task="custom", dataset="d", algorithm="alg2", rows=[])
        csv_path, _ = emit_report(report, tmp_path)
        lines = csv_path.read_text().strip().splitlines()
        assert len(lines) == 1
        assert lines[0].startswith("method,")
