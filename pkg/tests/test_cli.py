"""
End-to-end tests for the risalign command line
"""

import json
from pathlib import Path

import numpy as np
import pytest

from RisAlign import __version__, cli
from RisAlign.artifacts import read_csv
from RisAlign.cli import build_parser, cancel_active_runs, main
from RisAlign.error_handler import EXIT_CONFIG_ERROR, EXIT_OK, EXIT_RUNTIME_ERROR
from RisAlign.random_streams import RandomStream

CONFIGS = Path(__file__).parent.parent / "configs"


@pytest.fixture
def run_cli(log_dir):
    def run(*argv: str) -> int:
        return main([*argv, "--log-dir", str(log_dir)])

    return run


def read_json_artifact(path: Path) -> dict:
    body = [line for line in path.read_text().splitlines() if not line.startswith("#")]
    return json.loads("\n".join(body))


class TestParser:
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            build_parser().parse_args(["--version"])
        assert excinfo.value.code == 0
        assert f"risalign {__version__}" in capsys.readouterr().out

    def test_unknown_flag(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["outage", "--no-such-flag"])
        assert excinfo.value.code == 2

    def test_missing_subcommand(self):
        with pytest.raises(SystemExit) as excinfo:
            main([])
        assert excinfo.value.code == 2


class TestSpacing:
    def test_single_row(self, run_cli, tmp_path):
        out = tmp_path / "spacing.csv"
        assert run_cli("spacing", "--M", "5", "--d-ratio", "2", "--dx", "0.5", "-o", str(out)) == EXIT_OK
        metadata, rows = read_csv(out)
        assert metadata["command"] == "spacing"
        assert metadata["seed"] == "none"
        assert rows[0]["spacing_deg_rounded"] == "16.0"
        assert rows[0]["feasible"] == "true"

    def test_table(self, run_cli, tmp_path):
        out = tmp_path / "table.csv"
        assert run_cli("spacing", "--table", "-o", str(out)) == EXIT_OK
        _, rows = read_csv(out)
        assert [r["spacing_deg_rounded"] for r in rows][:3] == ["16.0", "7.8", "8.7"]

    def test_single_element_is_rejected(self, run_cli, tmp_path, capsys):
        code = run_cli("spacing", "--M", "1", "-o", str(tmp_path / "x.csv"))
        assert code == EXIT_CONFIG_ERROR
        assert "risalign: error:" in capsys.readouterr().err


class TestPattern:
    def test_broadside(self, run_cli, tmp_path):
        out = tmp_path / "pattern.csv"
        assert run_cli("pattern", "--M", "16", "--dx", "0.5", "--u0", "0", "-o", str(out)) == EXIT_OK
        metadata, rows = read_csv(out)
        assert len(rows) == 2048
        by_u = {float(r["u"]): r for r in rows}
        assert float(by_u[0.0]["F_linear"]) == pytest.approx(1.0)
        assert float(by_u[0.125]["F_linear"]) == pytest.approx(0.0, abs=1e-9)
        assert float(metadata["beamwidth_deg"]) > 0

    def test_woodward_config_with_override(self, run_cli, tmp_path):
        out = tmp_path / "woodward.csv"
        code = run_cli("pattern", "--config", str(CONFIGS / "pattern_woodward.yaml"), "--points", "512", "-o", str(out))
        assert code == EXIT_OK
        metadata, rows = read_csv(out)
        assert len(rows) == 512
        assert metadata["woodward_beams"] == "3 4 5"
        assert json.loads(metadata["config"])["pattern"]["points"] == 512


class TestOutage:
    ARGS = ("outage", "--align", "random", "--M", "4", "--trials", "2e5", "--seed", "7", "--snr", "0", "6", "12")

    def test_reruns_are_byte_identical(self, run_cli, tmp_path):
        first, second, threaded = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
        assert run_cli(*self.ARGS, "-o", str(first)) == EXIT_OK
        assert run_cli(*self.ARGS, "-o", str(second)) == EXIT_OK
        assert run_cli(*self.ARGS, "--workers", "3", "-o", str(threaded)) == EXIT_OK
        assert first.read_bytes() == second.read_bytes() == threaded.read_bytes()

    def test_rows_and_references(self, run_cli, tmp_path):
        out = tmp_path / "random.csv"
        assert run_cli(*self.ARGS, "-o", str(out)) == EXIT_OK
        metadata, rows = read_csv(out)
        assert metadata["seed"] == "7"
        provenances = {r["provenance"] for r in rows}
        assert "monte_carlo" in provenances
        assert "analytic" in provenances
        mc = [r for r in rows if r["provenance"] == "monte_carlo"]
        assert [float(r["gamma_t_db"]) for r in mc] == [0.0, 6.0, 12.0]
        assert all(float(r["ci_low"]) <= float(r["p_out"]) <= float(r["ci_high"]) for r in mc)

    def test_seed_changes_results(self, run_cli, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_cli(*self.ARGS, "-o", str(a))
        run_cli(*self.ARGS[:-5], "8", *self.ARGS[-4:], "-o", str(b))
        assert a.read_bytes() != b.read_bytes()

    def test_trials_from_target_outage(self, run_cli, tmp_path):
        out = tmp_path / "target.csv"
        args = ["outage", "--align", "random", "--M", "2", "--seed", "7", "--snr", "0", "--target-p-out", "0.02"]
        assert run_cli(*args, "-o", str(out)) == EXIT_OK
        metadata, _ = read_csv(out)
        echoed = json.loads(metadata["config"])
        assert (echoed["trials"], echoed["target_p_out"]) == (5000, 0.02)

    def test_missing_seed(self, run_cli, tmp_path, capsys):
        code = run_cli("outage", "--M", "2", "--trials", "1000", "-o", str(tmp_path / "x.csv"))
        assert code == EXIT_CONFIG_ERROR
        assert "risalign: error:" in capsys.readouterr().err
        assert not (tmp_path / "x.csv").exists()

    def test_bad_config_file(self, run_cli, tmp_path):
        path = tmp_path / "exp.yaml"
        path.write_text("command: outage\nseed: [1\n")
        assert run_cli("outage", "--config", str(path)) == EXIT_CONFIG_ERROR

    def test_invalid_distribution(self, run_cli, tmp_path):
        code = run_cli("outage", "--seed", "1", "--b", "-1", "-o", str(tmp_path / "x.csv"))
        assert code == EXIT_CONFIG_ERROR


class TestSweepAngle:
    def test_smoke(self, run_cli, tmp_path):
        out = tmp_path / "sweep.csv"
        args = ["sweep-angle", "--M", "4", "--angles", "0", "20", "--trials", "2e4", "--seed", "5", "--snr", "0", "10"]
        assert run_cli(*args, "-o", str(out)) == EXIT_OK
        metadata, rows = read_csv(out)
        assert {r["angle_deg"] for r in rows} >= {"0", "20"}
        assert float(metadata["beamwidth_deg"]) > 0

    def test_random_alignment_rejected(self, run_cli, tmp_path):
        code = run_cli("sweep-angle", "--seed", "1", "--align", "random", "-o", str(tmp_path / "x.csv"))
        assert code == EXIT_CONFIG_ERROR


class TestSeries:
    def test_dump(self, run_cli, tmp_path):
        out = tmp_path / "series.csv"
        assert run_cli("series", "--M", "2", "--dist", "rayleigh", "--b", "1", "-o", str(out)) == EXIT_OK
        metadata, rows = read_csv(out)
        assert metadata["leading_index"] == "3"
        c = [float(r["value"]) for r in rows if r["table"] == "c"]
        assert c[3] == pytest.approx(1.0)
        assert all(v == 0.0 for v in c[:3])

    def test_density_check(self, run_cli, tmp_path):
        out, density = tmp_path / "series.csv", tmp_path / "density.csv"
        args = ["series", "--M", "2", "--density-trials", "2e4", "--seed", "3", "--density-output", str(density)]
        assert run_cli(*args, "-o", str(out)) == EXIT_OK
        metadata, rows = read_csv(density)
        assert len(rows) == 20
        assert metadata["seed"] == "3"
        assert "series_density" in rows[0]


class TestMoments:
    def test_smoke(self, run_cli, tmp_path):
        out = tmp_path / "moments.csv"
        assert run_cli("moments", "--M", "4", "--trials", "2e4", "--seed", "1", "-o", str(out)) == EXIT_OK
        _, rows = read_csv(out)
        assert [r["alignment"] for r in rows] == ["perfect", "coherent", "random", "destructive"]
        perfect = rows[0]
        assert float(perfect["mean_mc"]) == pytest.approx(float(perfect["mean_analytic"]), rel=0.05)


class TestMaBudget:
    def test_shipped_config(self, run_cli, tmp_path):
        out = tmp_path / "budget.json"
        assert run_cli("ma-budget", "--config", str(CONFIGS / "ma_budget.json"), "-o", str(out)) == EXIT_OK
        payload = read_json_artifact(out)
        assert payload["feasible"] is True
        budgets = payload["budgets"]
        assert set(budgets) == {"noma_static", "tdma_static", "fdma_static", "noma_dynamic", "tdma_dynamic"}
        assert budgets["noma_static"]["total"] <= budgets["tdma_static"]["total"]
        assert all("system_outage" in entry for entry in budgets.values())

    def test_geometry_config(self, run_cli, tmp_path):
        out = tmp_path / "geometry.json"
        assert run_cli("ma-budget", "--config", str(CONFIGS / "ma_budget_geometry.yaml"), "-o", str(out)) == EXIT_OK
        payload = read_json_artifact(out)
        assert len(payload["slot_channels"]) == 2
        assert payload["channels"][0] > payload["channels"][1]

    def test_zero_channel_is_reported(self, run_cli, tmp_path):
        path, out = tmp_path / "zero.json", tmp_path / "out.json"
        users = [{"rate": 1.0, "channel": 1.0}, {"rate": 1.0, "channel": 0.0}]
        path.write_text(json.dumps({"command": "ma-budget", "multi_access": {"scheme": "noma_static", "users": users}}))
        assert run_cli("ma-budget", "--config", str(path), "-o", str(out)) == EXIT_OK
        payload = read_json_artifact(out)
        assert payload["feasible"] is False
        assert payload["budgets"]["noma_static"]["index"] == 1

    def test_unsorted_users(self, run_cli, tmp_path, capsys):
        path = tmp_path / "unsorted.json"
        users = [{"rate": 1.0, "channel": 0.5}, {"rate": 1.0, "channel": 1.0}]
        path.write_text(json.dumps({"command": "ma-budget", "multi_access": {"users": users}}))
        code = run_cli("ma-budget", "--config", str(path), "-o", str(tmp_path / "out.json"))
        assert code == EXIT_RUNTIME_ERROR
        assert "order users" in capsys.readouterr().err

    def test_no_users(self, run_cli, tmp_path):
        assert run_cli("ma-budget", "-o", str(tmp_path / "x.json")) == EXIT_CONFIG_ERROR


class TestCancellation:
    def test_nothing_to_cancel(self):
        assert not cancel_active_runs()

    def test_cancel_stops_running_experiment(self, run_cli, tmp_path, monkeypatch, capsys):
        def cancelled_on_first_chunk(experiment, runner):
            def task(n, gen):
                cancel_active_runs()
                return np.array([n])

            runner.run(3 * runner.chunk_elements, 1, RandomStream(1), task)

        monkeypatch.setitem(cli.COMMANDS, "spacing", cancelled_on_first_chunk)
        out = tmp_path / "x.csv"
        assert run_cli("spacing", "--workers", "1", "-o", str(out)) == EXIT_RUNTIME_ERROR
        assert "cancelled" in capsys.readouterr().err
        assert not out.exists()
        assert not cancel_active_runs()
