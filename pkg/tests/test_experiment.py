import csv
import io
import json
import math

import numpy as np
import pytest

from bandctl.experiment import (CSV_COLUMNS, ConfigError, DesignContext, ExperimentConfig,
                                all_infeasible, build_graph, design, emit, evaluate, load_results,
                                run, target_spectrum)
from bandctl.random_graph import rng_stream


def small(**kw):
    base = dict(seed=3, graph="florentine", K=3, T=3, M=2, n_graphs=1, n_res=200)
    base.update(kw)
    return ExperimentConfig(**base)


class TestTargetSpectrum:
    def test_linear_decay_raw(self):
        b = target_spectrum("linear_decay", 10, normalize=False)
        assert np.allclose(b.coefficients, np.linspace(1.0, 0.1, 10))

    def test_step_low_pass(self):
        b = target_spectrum("step_low_pass", 3)
        assert np.allclose(b.coefficients, np.ones(3) / np.sqrt(3))
        assert not b.high_pass

    def test_exponential(self):
        c = target_spectrum("exponential_decay", 3).coefficients
        assert np.allclose(c / c[0], [1, np.exp(-1), np.exp(-2)])

    def test_high_pass_flag(self):
        assert target_spectrum("step_high_pass", 4).high_pass

    @pytest.mark.parametrize("shape", ["step_low_pass", "step_high_pass", "linear_decay", "exponential_decay"])
    def test_unit_energy_signal(self, shape):
        cfg = small(spectrum=shape, K=5)
        ctx = DesignContext.build(cfg, build_graph(cfg))
        assert np.linalg.norm(ctx.target) == pytest.approx(1.0)
        assert ctx.stacked.alpha == pytest.approx(1.0)

    def test_errors(self):
        with pytest.raises(ValueError):
            target_spectrum("sawtooth", 3)
        with pytest.raises(ValueError):
            target_spectrum("linear_decay", 0)


class TestConfig:
    @pytest.mark.parametrize("kw", [
        dict(p_res=0.0), dict(p_res=1.2), dict(n_graphs=0), dict(n_res=0), dict(K=0),
        dict(strategies=("magic",)), dict(graph="lattice"), dict(model="wave"),
        dict(spectrum="flat"), dict(sweep_var="p_res"), dict(grid=(1, 2)),
        dict(sweep_var="colour", grid=(1,)), dict(sweep_var="p_res", grid=(0.5, 2.0)),
        dict(strategies=("unbiased_greedy",), M=1, K=10, T=2),
        dict(graph="edge_list"),
    ])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            small(**kw)

    def test_dict_round_trip(self):
        cfg = small(sweep_var="K", grid=(2, 3), strategies=("zero", "random"))
        assert ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown"):
            ExperimentConfig.from_dict({"seed": 1, "colour": "red"})

    def test_cells(self):
        cfg = small(sweep_var="p_res", grid=(0.5, 1.0))
        cells = cfg.cells()
        assert [v for v, _ in cells] == [0.5, 1.0]
        assert cells[1][1].p_res == 1.0 and cells[1][1].sweep_var is None

    def test_defaults_follow_the_desk_scale_study(self):
        cfg = ExperimentConfig(seed=0)
        assert (cfg.n, cfg.p_er, cfg.k_nn, cfg.p_res, cfg.T, cfg.M, cfg.K) == (100, 0.5, 5, 0.95, 8, 8, 10)
        assert (cfg.n_graphs, cfg.n_res) == (20, 500)


class TestRun:
    def test_zero_control_is_exactly_one(self):
        [r] = run(small(strategies=("zero",)))
        assert r.mean_mse == 1.0 and r.std_graphs == 0.0

    def test_p1_unbiased_exact(self):
        [r] = run(small(p_res=1.0, strategies=("unbiased_greedy",)))
        assert r.mean_mse <= 1e-10

    def test_graph_generation_is_seeded(self):
        cfg = small(graph="geometric", n=20, k_nn=3, K=3)
        assert build_graph(cfg, 1).same_as(build_graph(cfg, 1))
        assert not build_graph(cfg, 0).same_as(build_graph(cfg, 1))

    def test_plan_independent_of_evaluation(self):
        cfg = small(p_res=0.8)
        ctx = DesignContext.build(cfg, build_graph(cfg))
        a = design("biased_greedy", cfg, ctx)
        evaluate(a, ctx, 50, rng_stream(0))
        b = design("biased_greedy", cfg, ctx)
        assert a.selection == b.selection and np.array_equal(a.controls, b.controls)

    def test_empirical_close_to_predicted(self):
        [r] = run(small(p_res=0.7, n_res=4000, strategies=("biased_greedy",)))
        assert abs(r.mean_mse - r.mean_predicted) <= 4 * r.stderr_res

    def test_strategies_and_grid(self):
        cfg = small(strategies=("biased_greedy", "random"), sweep_var="p_res", grid=(0.6, 0.8, 1.0),
                    n_random=3)
        results = run(cfg)
        assert len(results) == 6
        assert [(r.value, r.strategy) for r in results][:2] == [(0.6, "biased_greedy"), (0.6, "random")]

    def test_deterministic_baseline_runs(self):
        [r] = run(small(p_res=0.9, strategies=("deterministic_baseline",)))
        assert r.n_graphs == 1 and math.isfinite(r.mean_mse)

    def test_infeasible_recorded_not_fatal(self, tmp_path):
        path = tmp_path / "iso.txt"
        path.write_text("3\n0 1\n")
        cfg = ExperimentConfig(seed=0, graph="edge_list", edge_list=str(path), K=2, T=2, M=1,
                               eps=0.5, p_res=1.0, n_graphs=2, n_res=10,
                               strategies=("unbiased_greedy", "zero"))
        unb, zero = run(cfg)
        assert unb.n_graphs == 0 and math.isnan(unb.mean_mse) and len(unb.errors) == 2
        assert zero.mean_mse == 1.0
        assert not all_infeasible([unb, zero]) and all_infeasible([unb])


class TestEmit:
    def test_one_cell_csv(self):
        results = run(small(strategies=("zero",)))
        rows = list(csv.reader(io.StringIO(emit(results, "csv"))))
        assert tuple(rows[0]) == CSV_COLUMNS
        assert len(rows) == 2
        assert rows[1][2] == "zero" and float(rows[1][3]) == 1.0

    def test_six_rows(self):
        cfg = small(strategies=("zero", "biased_greedy"), sweep_var="K", grid=(1, 2, 3))
        text = emit(run(cfg), "csv")
        assert len(text.strip().splitlines()) == 7

    def test_byte_identical_csv(self, tmp_path):
        cfg = small(graph="geometric", n=20, k_nn=3, n_graphs=2, p_res=0.8,
                    strategies=("biased_greedy", "random"), n_random=2)
        emit(run(cfg), "csv", tmp_path / "a.csv")
        emit(run(cfg), "csv", tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_json_round_trip(self, tmp_path):
        cfg = small(strategies=("biased_greedy", "zero"))
        results = run(cfg)
        emit(results, "json", tmp_path / "r.json", cfg)
        back = load_results(tmp_path / "r.json")
        for a, b in zip(results, back):
            assert (a.mean_mse, a.stderr_res, a.strategy, a.n_graphs) == (b.mean_mse, b.stderr_res, b.strategy, b.n_graphs)
        doc = json.loads((tmp_path / "r.json").read_text())
        assert ExperimentConfig.from_dict(doc["config"]) == cfg

    def test_errors(self, tmp_path):
        with pytest.raises(ValueError):
            emit([], "csv")
        results = run(small(strategies=("zero",)))
        with pytest.raises(ValueError):
            emit(results, "xml")
        with pytest.raises(OSError, match="cannot write"):
            emit(results, "csv", tmp_path / "missing" / "r.csv")
