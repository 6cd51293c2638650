import csv
import json

import numpy as np
import pytest

import jointdr.harness as harness
from jointdr.errors import ConfigError, InputError, NumericalError
from jointdr.estimator import MomentSpec
from jointdr.harness import (
    CSV_COLUMNS,
    ExperimentConfig,
    ExperimentResult,
    default_config,
    emit,
    load_config,
    load_result,
    run_experiment,
    run_robustness,
)
from jointdr.synthetic import FeatureDistribution, LinkModel


def tiny(family="sweep_m", **kw):
    base = {
        "sweep_m": dict(n=6, grid=(100, 200, 400)),
        "sweep_n": dict(m=300, grid=(4, 6, 8)),
        "sweep_m_sparse": dict(n=12, s=4, grid=(200, 400, 800)),
        "sweep_s": dict(n=20, m=500, grid=(3, 4, 6)),
        "robustness": dict(n=6, grid=(200, 400, 800)),
        "phd_compare": dict(n=5, grid=(200, 400, 800)),
    }[family]
    return default_config(family, **{"trials": 2, **base, **kw})


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestConfig:
    @pytest.mark.parametrize("grid", [(100, 200), (100, 100, 200), (300, 200, 100)])
    def test_bad_grid(self, grid):
        with pytest.raises(ConfigError):
            tiny(grid=grid)

    def test_bad_trials(self):
        with pytest.raises(ConfigError):
            tiny(trials=0)

    def test_unknown_family(self):
        with pytest.raises(ConfigError):
            ExperimentConfig("sweep_q", LinkModel("even_poly", 2), grid=(1, 2, 3), fixed={"n": 4})

    def test_shorthand_sizes(self):
        cfg = tiny("sweep_m_sparse")
        assert cfg.fixed == {"n1": 12, "n2": 12, "s1": 4, "s2": 4}
        assert cfg.sizes_at(400) == {"n1": 12, "n2": 12, "s1": 4, "s2": 4, "m": 400, "r": 2}

    @pytest.mark.parametrize(
        "family,kw",
        [("sweep_m_sparse", dict(s=12)), ("sweep_s", dict(grid=(1, 3, 4))), ("sweep_m", dict(n=1)), ("sweep_n", dict(m=0))],
    )
    def test_infeasible_sizes(self, family, kw):
        with pytest.raises(ConfigError):
            tiny(family, **kw)

    def test_missing_size(self):
        with pytest.raises(ConfigError):
            ExperimentConfig("sweep_m", LinkModel("even_poly", 2), grid=(1, 2, 3), fixed={"n1": 4})

    def test_r_disagreement(self):
        with pytest.raises(ConfigError):
            ExperimentConfig("sweep_m", LinkModel("even_poly", 2), grid=(10, 20, 30), fixed={"n": 4, "r": 3})

    def test_round_trip(self, tmp_path):
        cfg = tiny("robustness", variants=("uniform", "correlated"), dist=FeatureDistribution("gaussian_iso"))
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg.to_dict()))
        again = load_config(path)
        assert again.to_dict() == cfg.to_dict()

    def test_from_dict_defaults_and_errors(self):
        cfg = ExperimentConfig.from_dict(
            {"family": "sweep_n", "model": {"kind": "bilinear_gaussian"}, "grid": [4, 6, 8], "fixed": {"m": 100}}
        )
        assert cfg.model.r == 2 and cfg.trials == 100 and cfg.base_seed == 0
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({**cfg.to_dict(), "colour": "red"})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"family": "sweep_n", "grid": [4, 6, 8]})

    def test_unreadable_config(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(bad)

    @pytest.mark.parametrize("family", harness.FAMILIES)
    def test_defaults_are_valid(self, family):
        cfg = default_config(family)
        assert cfg.trials == 100 and len(cfg.grid) >= 3


class TestRunExperiment:
    @pytest.mark.parametrize("family", harness.FAMILIES)
    def test_smoke(self, family, tmp_path):
        cfg = tiny(family, trials=1)
        res = run_experiment(cfg)
        assert not res.partial
        for name in res.series:
            assert res.nsee[name].shape == (3, 1)
            assert np.all((res.nsee[name] >= 0) & (res.nsee[name] <= 1))
            assert np.isfinite(res.mean_log_error[name]).all()
        path = emit(res, tmp_path / "out.csv")
        rows = read_csv(path)
        assert tuple(rows[0]) == CSV_COLUMNS
        assert len(rows) == 1 + 3 * len(res.series)
        assert {r[1] for r in rows[1:]} == {cfg.grid_param}

    def test_series_names(self):
        assert tiny("phd_compare").series_names() == ("svd", "phd")
        assert tiny("robustness", variants=("uniform", "poisson")).series_names() == ("baseline", "uniform", "poisson")

    def test_deterministic_and_thread_independent(self, tmp_path):
        cfg = tiny("robustness", trials=3, variants=("sample_moments", "correlated"))
        a = run_experiment(cfg, threads=1)
        b = run_experiment(cfg, threads=4)
        for name in a.series:
            assert a.nsee[name].tobytes() == b.nsee[name].tobytes()
        np.testing.assert_array_equal(a.seeds, b.seeds)
        emit(a, tmp_path / "a.csv")
        emit(b, tmp_path / "b.csv")
        strip = lambda p: [r[:-1] for r in read_csv(p)]
        assert strip(tmp_path / "a.csv") == strip(tmp_path / "b.csv")

    def test_seeds_follow_rule(self):
        cfg = tiny(base_seed=7)
        res = run_experiment(cfg)
        assert int(res.seeds[2, 1]) == harness.derive_seed(7, 2, 1)

    def test_aggregation_is_log_of_mean(self):
        res = run_experiment(tiny(trials=4))
        np.testing.assert_allclose(res.mean_log_error["svd"], np.log(res.nsee["svd"].mean(axis=1)))
        x = np.log(res.grid_values)
        assert res.slope.slope == pytest.approx(np.polyfit(x, res.mean_log_error["svd"], 1)[0])

    def test_grid_point_error_is_recorded(self, monkeypatch):
        real = harness.rank_r_truncate

        calls = []

        def flaky(x, r):
            # with one thread, calls 3 and 4 are the trials of grid point 1
            calls.append(1)
            if len(calls) in (3, 4):
                raise NumericalError("SVD did not converge")
            return real(x, r)

        monkeypatch.setattr(harness, "rank_r_truncate", flaky)
        res = run_experiment(tiny(trials=2), threads=1)
        assert res.partial
        assert [e["grid_index"] for e in res.errors] == [1]
        assert res.errors[0]["error"] == "NumericalError"
        assert np.isnan(res.nsee["svd"][1]).all()
        assert np.isfinite(res.nsee["svd"][[0, 2]]).all()
        assert res.slope is not None

    def test_small_m_warning(self):
        res = run_experiment(tiny(n=60, grid=(50, 100, 200), trials=1))
        assert len(res.provenance["warnings"]) == 2

    def test_provenance(self):
        res = run_experiment(tiny("phd_compare", trials=1))
        prov = res.provenance
        assert prov["config"] == tiny("phd_compare", trials=1).to_dict()
        assert "blockwise" in prov["phd_metric"]
        assert prov["wall_time_s"] > 0 and prov["threads"] >= 1

    def test_given_whitening_recovers_transformed_truth(self):
        rng = np.random.default_rng(0)
        n = 5
        g = rng.standard_normal((n, n))
        cov = g @ g.T + np.eye(n)
        mom = MomentSpec(rng.standard_normal(n), rng.standard_normal(n), cov, cov)
        cfg = tiny(n=n, grid=(2000, 8000, 32000), trials=3, dist=FeatureDistribution(moments=mom), whiten="given")
        res = run_experiment(cfg)
        assert res.mean_nsee()[-1] < 0.15
        assert res.slope.slope < -0.3

    def test_thread_env_cap(self, monkeypatch):
        monkeypatch.setenv("JOINTDR_THREADS", "2")
        assert harness._thread_count() == 2
        assert harness._thread_count(8) == 2
        monkeypatch.setenv("JOINTDR_THREADS", "zero")
        with pytest.raises(ConfigError):
            harness._thread_count()
        monkeypatch.setenv("JOINTDR_THREADS", "0")
        with pytest.raises(ConfigError):
            harness._thread_count()

    def test_sweep_m_example_slope(self):
        # fixed n1 = n2 = 50, r = 2, bilinear noise sigma_z = 1
        res = run_experiment(default_config("sweep_m", n=50, trials=100))
        assert -0.62 <= res.slope.slope <= -0.34


class TestRobustness:
    def test_baseline_against_itself(self):
        report = run_robustness(tiny("robustness", variants=("none",)))
        assert report.max_abs_gap("none") == 0.0

    def test_report(self):
        report = run_robustness(tiny("robustness", variants=("uniform", "poisson")))
        assert report.variants == ["uniform", "poisson"]
        d = report.to_dict()
        assert set(d["variants"]) == {"uniform", "poisson"}
        assert d["variants"]["uniform"]["max_abs_gap"] == pytest.approx(report.max_abs_gap("uniform"))

    def test_wrong_family(self):
        with pytest.raises(ConfigError):
            run_robustness(tiny())

    def test_unknown_variant(self):
        with pytest.raises(ConfigError):
            tiny("robustness", variants=("laplace",))

    def test_correlated_rho_recorded(self):
        res = run_experiment(tiny("robustness", variants=("correlated",), trials=1))
        assert res.provenance["rho"] == 0.2


class TestEmit:
    def two_by_two(self):
        nsee = np.array([[0.5, 0.4], [0.3, 0.2]])
        return ExperimentResult(
            family="sweep_m",
            grid_param="m",
            grid_values=[100, 200],
            series=["svd"],
            seeds=np.array([[1, 2], [3, 4]], dtype=np.uint64),
            nsee={"svd": nsee},
            runtime_ms={"svd": np.ones((2, 2))},
        ).aggregate()

    def test_empty_result_header_only(self, tmp_path):
        emit(ExperimentResult.empty("sweep_m"), tmp_path / "e.csv")
        assert (tmp_path / "e.csv").read_text() == ",".join(CSV_COLUMNS) + "\n"

    def test_cardinality(self, tmp_path):
        emit(self.two_by_two(), tmp_path / "r.csv")
        rows = read_csv(tmp_path / "r.csv")
        assert len(rows) == 5
        assert rows[1] == ["sweep_m", "m", "100", "0", "1", "0.5", "1.000"]

    def test_multi_series_labels(self, tmp_path):
        res = run_experiment(tiny("phd_compare", trials=1))
        emit(res, tmp_path / "p.csv")
        labels = {r[0] for r in read_csv(tmp_path / "p.csv")[1:]}
        assert labels == {"phd_compare/svd", "phd_compare/phd"}

    def test_json_round_trip(self, tmp_path):
        res = run_experiment(tiny("robustness", variants=("uniform",), trials=2))
        emit(res, tmp_path / "r.json", "json")
        data = json.loads((tmp_path / "r.json").read_text())
        assert data["schema_version"] == harness.SCHEMA_VERSION
        again = load_result(tmp_path / "r.json")
        assert again.to_dict() == res.to_dict()
        np.testing.assert_array_equal(again.seeds, res.seeds)

    def test_json_keeps_nan_as_null(self, tmp_path):
        res = self.two_by_two()
        res.nsee["svd"][0, 0] = np.nan
        emit(res, tmp_path / "n.json", "json")
        assert json.loads((tmp_path / "n.json").read_text())["nsee"]["svd"][0][0] is None
        assert np.isnan(load_result(tmp_path / "n.json").nsee["svd"][0, 0])

    def test_unwritable(self, tmp_path):
        with pytest.raises(InputError):
            emit(self.two_by_two(), tmp_path / "missing" / "r.csv")

    def test_unknown_format(self, tmp_path):
        with pytest.raises(InputError):
            emit(self.two_by_two(), tmp_path / "r.xml", "xml")

    def test_bad_schema(self, tmp_path):
        (tmp_path / "x.json").write_text(json.dumps({"schema_version": 99}))
        with pytest.raises(InputError):
            load_result(tmp_path / "x.json")
