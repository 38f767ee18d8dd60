import json

from bandctl.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK, main
from bandctl.random_graph import parse_edge_list

ZACHARY = ["--graph", "zachary", "--K", "4", "--M", "2", "--T", "4"]


class TestCommands:
    def test_generate(self, capsys):
        assert main(["generate", "--graph", "geometric", "--n", "12", "--k-nn", "3", "--seed", "1"]) == EXIT_OK
        g = parse_edge_list(capsys.readouterr().out)
        assert g.n == 12 and g.is_connected()

    def test_generate_needs_generator(self):
        assert main(["generate", "--graph", "zachary"]) == EXIT_CONFIG

    def test_spectrum(self, capsys):
        assert main(["spectrum", *ZACHARY, "--spectrum", "step_low_pass"]) == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert len(doc["signal"]) == 34 and len(doc["coefficients"]) == 4

    def test_select(self, capsys):
        assert main(["select", *ZACHARY, "--strategy", "unbiased_greedy"]) == EXIT_OK
        assert len(json.loads(capsys.readouterr().out)["selection"]) == 2

    def test_control_then_evaluate(self, tmp_path, capsys):
        plan = tmp_path / "plan.json"
        assert main(["control", *ZACHARY, "--p-res", "0.9", "--out", str(plan)]) == EXIT_OK
        doc = json.loads(plan.read_text())
        assert len(doc["controls"]) == 4 and doc["biased"]
        assert main(["evaluate", "--plan", str(plan), "--n-res", "2000", "--seed", "5"]) == EXIT_OK
        res = json.loads(capsys.readouterr().out)
        assert abs(res["normalized_mse"] - doc["predicted_normalized_mse"]) <= 4 * res["stderr"]

    def test_evaluate_horizon_mismatch(self, tmp_path):
        plan = tmp_path / "plan.json"
        main(["control", *ZACHARY, "--out", str(plan)])
        assert main(["evaluate", "--plan", str(plan), "--T", "3"]) == EXIT_CONFIG

    def test_sweep_csv(self, tmp_path, capsys):
        out = tmp_path / "r.csv"
        args = ["sweep", "--seed", "2", *ZACHARY, "--n-res", "50", "--n-graphs", "1",
                "--strategy", "zero", "--strategy", "biased_greedy",
                "--sweep-var", "p_res", "--grid", "0.9,1.0", "--out", str(out)]
        assert main(args) == EXIT_OK
        assert len(out.read_text().splitlines()) == 5
        first = out.read_bytes()
        main(args)
        assert out.read_bytes() == first

    def test_sweep_json_with_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 9, "graph": "florentine", "K": 2, "T": 2, "M": 1,
                                   "n_graphs": 1, "n_res": 20, "strategies": ["zero"]}))
        assert main(["sweep", "--seed", "4", "--config", str(cfg), "--format", "json"]) == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["config"]["seed"] == 4 and doc["results"][0]["mean_mse"] == 1.0


class TestExitCodes:
    def test_sweep_requires_seed(self):
        assert main(["sweep", "--graph", "zachary"]) == EXIT_CONFIG

    def test_bad_flag_value(self):
        assert main(["sweep", "--seed", "1", "--p-res", "1.5"]) == EXIT_CONFIG

    def test_unknown_flag(self):
        assert main(["sweep", "--seed", "1", "--colour", "red"]) == EXIT_CONFIG

    def test_help(self, capsys):
        assert main(["--help"]) == EXIT_OK
        assert "sweep" in capsys.readouterr().out

    def test_bad_edge_list(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("3\n0 0\n")
        assert main(["control", "--edge-list", str(path), "--K", "1", "--T", "1", "--M", "1"]) == EXIT_CONFIG

    def test_missing_config_file(self, tmp_path):
        assert main(["sweep", "--seed", "1", "--config", str(tmp_path / "none.json")]) == EXIT_CONFIG

    def test_infeasible_everywhere(self, tmp_path):
        path = tmp_path / "iso.txt"
        path.write_text("3\n0 1\n")
        args = ["--edge-list", str(path), "--K", "2", "--T", "2", "--M", "1", "--eps", "0.5",
                "--p-res", "1.0", "--n-graphs", "1", "--n-res", "5"]
        assert main(["sweep", "--seed", "1", *args, "--strategy", "unbiased_greedy"]) == EXIT_INFEASIBLE
        assert main(["control", *args, "--strategy", "unbiased_greedy"]) == EXIT_INFEASIBLE
