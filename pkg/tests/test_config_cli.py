import json
import math
from pathlib import Path

import pytest

from vlpsim.cli import EXIT_CONFIG, EXIT_OK, EXIT_PARSE, EXIT_SOLVER, main
from vlpsim.config import ConfigError, default_run_config, load_config

REPO_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "testbed.toml"


class TestConfig:
    def test_defaults_are_complete(self):
        cfg = default_run_config()
        assert len(cfg.testbed.luminaires) == 4
        assert "circle" in cfg.flights and "hover" in cfg.flights
        assert cfg.drift.stride_k == 1
        assert cfg.drift.epsilon == 0.05

    def test_load_repo_example(self):
        cfg = load_config(REPO_CONFIG)
        assert cfg.testbed.photodiode.fov_half_angle == pytest.approx(math.radians(160.0))
        assert "demo_circle" in cfg.flights
        assert cfg.source_sha256 is not None

    def test_empty_file_is_valid(self, tmp_path):
        p = tmp_path / "empty.toml"
        p.write_text("")
        cfg = load_config(p)
        assert len(cfg.flights) >= 8

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            load_config("/nonexistent/nope.toml")

    def test_bad_toml(self, tmp_path):
        p = tmp_path / "bad.toml"
        p.write_text("[testbed\nextent = nope")
        with pytest.raises(ConfigError):
            load_config(p)

    def test_invalid_values_rejected(self, tmp_path):
        p = tmp_path / "bad.toml"
        p.write_text("[solvers.fusion]\nepsilon = 3.0\n")
        with pytest.raises(ConfigError):
            load_config(p)


@pytest.fixture
def sim_run(tmp_path):
    out = tmp_path / "runs"
    code = main(
        ["simulate", "--flight", "hover", "--seed", "7", "--out", str(out)]
    )
    assert code == EXIT_OK
    return out


class TestSimulateCommand:
    def test_writes_log_and_manifest(self, sim_run):
        assert (sim_run / "hover.csv").exists()
        manifest = json.loads((sim_run / "manifest.json").read_text())
        assert manifest["seed"] == 7
        assert manifest["backend"] in ("compiled", "python")
        assert manifest["config"]["solvers"]["fusion"]["epsilon"] == 0.05
        assert str(sim_run / "hover.csv") in manifest["outputs"]

    def test_repeat_run_is_identical(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            assert main(["simulate", "--flight", "hover", "--seed", "9", "--out", str(out)]) == 0
        assert (out1 / "hover.csv").read_text() == (out2 / "hover.csv").read_text()

    def test_unknown_flight_exits_2(self, tmp_path):
        code = main(["simulate", "--flight", "warphole", "--out", str(tmp_path)])
        assert code == EXIT_CONFIG

    def test_plan_leaving_testbed_exits_2(self, tmp_path):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text(
            "[flights.escape]\nkind = 'circle'\nduration = 20.0\ncenter = [0.2, 1.0]\n"
        )
        code = main(
            ["simulate", "--config", str(cfg), "--flight", "escape", "--out", str(tmp_path / "o")]
        )
        assert code == EXIT_CONFIG

    def test_config_file_used(self, tmp_path):
        out = tmp_path / "r"
        code = main(
            [
                "simulate",
                "--config",
                str(REPO_CONFIG),
                "--flight",
                "demo_circle",
                "--seed",
                "3",
                "--out",
                str(out),
            ]
        )
        assert code == EXIT_OK
        assert (out / "demo_circle.csv").exists()


class TestLocalizeCommand:
    def test_indirect_trace(self, sim_run, tmp_path):
        out = tmp_path / "loc"
        code = main(
            [
                "localize",
                "--log",
                str(sim_run / "hover.csv"),
                "--method",
                "indirect_h",
                "--out",
                str(out),
            ]
        )
        assert code == EXIT_OK
        trace = (out / "hover_indirect_h.csv").read_text().strip().split("\n")
        assert trace[0] == "t,method,x,y,z,err,evals"
        assert len(trace) > 1

    def test_firefly_writes_height_trace(self, sim_run, tmp_path):
        out = tmp_path / "loc"
        code = main(
            [
                "localize",
                "--log",
                str(sim_run / "hover.csv"),
                "--method",
                "firefly",
                "--epsilon",
                "0.1",
                "--stride-k",
                "5",
                "--out",
                str(out),
            ]
        )
        assert code == EXIT_OK
        assert (out / "hover_heights.csv").exists()

    def test_method_name_hyphen_alias(self, sim_run, tmp_path):
        code = main(
            [
                "localize",
                "--log",
                str(sim_run / "hover.csv"),
                "--method",
                "pso-3d",
                "--seed",
                "7",
                "--out",
                str(tmp_path / "o"),
            ]
        )
        assert code == EXIT_OK

    def test_unknown_method_exits_2(self, sim_run, tmp_path):
        code = main(
            ["localize", "--log", str(sim_run / "hover.csv"), "--method", "psychic", "--out", str(tmp_path)]
        )
        assert code == EXIT_CONFIG

    def test_malformed_log_exits_3(self, sim_run, tmp_path):
        log = sim_run / "hover.csv"
        lines = log.read_text().split("\n")
        lines[3] = "garbage,row"
        bad = tmp_path / "bad.csv"
        bad.write_text("\n".join(lines))
        code = main(["localize", "--log", str(bad), "--method", "firefly", "--out", str(tmp_path)])
        assert code == EXIT_PARSE

    def test_missing_log_exits_3(self, tmp_path):
        code = main(
            ["localize", "--log", str(tmp_path / "no.csv"), "--method", "firefly", "--out", str(tmp_path)]
        )
        assert code == EXIT_PARSE

    def test_all_frames_failing_exits_4(self, tmp_path):
        # a hover far outside every beam: no solvable frames
        cfg = tmp_path / "cfg.toml"
        cfg.write_text(
            "[flights.dark]\nkind = 'hover'\nduration = 1.0\nhover_height = 0.15\n"
        )
        out = tmp_path / "r"
        assert main(["simulate", "--config", str(cfg), "--flight", "dark", "--out", str(out)]) == 0
        code = main(
            ["localize", "--log", str(out / "dark.csv"), "--method", "indirect_h", "--out", str(out)]
        )
        assert code == EXIT_SOLVER


class TestCompareCommand:
    def test_compare_two_logs(self, tmp_path, capsys):
        out = tmp_path / "runs"
        assert main(["simulate", "--flight", "hover", "--seed", "1", "--out", str(out)]) == 0
        code = main(
            [
                "compare",
                "--logs",
                str(out / "*.csv"),
                "--methods",
                "firefly,indirect_h",
                "--out",
                str(out),
            ]
        )
        assert code == EXIT_OK
        captured = capsys.readouterr().out
        assert "mean error (cm)" in captured
        assert (out / "comparison.csv").exists()

    def test_empty_glob_exits_2(self, tmp_path):
        code = main(["compare", "--logs", str(tmp_path / "*.csv"), "--out", str(tmp_path)])
        assert code == EXIT_CONFIG

    def test_unknown_method_exits_2(self, sim_run, tmp_path):
        code = main(
            ["compare", "--logs", str(sim_run / "*.csv"), "--methods", "oracle", "--out", str(tmp_path)]
        )
        assert code == EXIT_CONFIG
