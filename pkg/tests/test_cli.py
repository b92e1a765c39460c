"""End-to-end tests of the command line: parsing, outputs, manifest and exit codes."""

import hashlib
import json

import pytest

from smoothclimb import runner
from smoothclimb.cli import build_config, main, parse_args
from smoothclimb.commands.common import CommandResult
from smoothclimb.commands.compare import success_rates
from smoothclimb.core.continuation import CovarianceError
from smoothclimb.utils.results import read_csv


@pytest.fixture
def config_file(tmp_path, tiny_config_dict):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(tiny_config_dict))
    return path


def run(config_file, command, *flags) -> int:
    return main([command, "--config", str(config_file), *flags])


class TestParsing:
    def test_optimize_flags(self, tmp_path):
        args = parse_args(
            ["optimize", "--method", "entropy_reg", "--seed", "3", "--out", str(tmp_path)]
        )
        assert (args.command, args.method, args.seed, args.out) == (
            "optimize", "entropy_reg", 3, tmp_path
        )
        config = build_config(args)
        assert (config.method, config.seed, config.output_path) == ("entropy_reg", 3, tmp_path)

    @pytest.mark.parametrize(
        "argv", [[], ["anneal"], ["optimize", "--method", "annealing"], ["sweep", "--method", "x"]]
    )
    def test_rejected(self, argv):
        with pytest.raises(SystemExit):
            parse_args(argv)

    def test_missing_config_file(self, tmp_path):
        assert main(["sweep", "--config", str(tmp_path / "absent.json")]) == 1

    def test_invalid_config_value(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"threads": 0}))
        assert main(["sweep", "--config", str(path)]) == 1


class TestCommands:
    def test_sweep(self, config_file, tiny_config_dict, tmp_path):
        assert run(config_file, "sweep") == 0
        out = tmp_path / "out"
        comment, rows = read_csv(out / "landscape.csv")
        assert comment.startswith("# smoothclimb command=sweep seed=0 config_sha256=")
        assert len(rows) == 3 * 2
        assert list(rows[0]) == ["theta", "sigma_prime", "return_mean", "return_stderr", "n"]
        assert {row["n"] for row in rows} == {"8"}

        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "sweep"
        assert manifest["results"]["status"] == "success"
        landscape = manifest["outputs"]["landscape"]
        digest = hashlib.sha256((out / "landscape.csv").read_bytes()).hexdigest()
        assert landscape["sha256"] == digest
        assert (out / "run_log.txt").exists()

    def test_optimize(self, config_file, tmp_path):
        assert run(config_file, "optimize", "--seed", "5") == 0
        out = tmp_path / "out"
        summary = json.loads((out / "optimize_summary.json").read_text())
        assert summary["header"]["seed"] == 5
        assert summary["method"] == "continuation"
        assert summary["steps"] == 2
        assert summary["stage_scales"] == [2.0, 1.0]
        assert summary["basin"] in ("global", "local")
        _, rows = read_csv(out / "run_record.csv")
        assert [row["scale"] for row in rows] == ["2.0", "1.0"]
        assert rows[0]["log_std"] == ""

    def test_optimize_entropy(self, config_file, tmp_path):
        assert run(config_file, "optimize", "--method", "entropy_reg") == 0
        _, rows = read_csv(tmp_path / "out" / "run_record.csv")
        assert len(rows) == 2
        assert rows[0]["log_std"] == "0.0"

    def test_compare(self, config_file, tmp_path):
        assert run(config_file, "compare") == 0
        out = tmp_path / "out"
        _, runs = read_csv(out / "compare.csv")
        assert [(r["method"], r["seed"]) for r in runs] == [
            ("continuation", "0"), ("continuation", "1"),
            ("deterministic", "0"), ("deterministic", "1"),
        ]
        _, rates = read_csv(out / "compare_rates.csv")
        for rate in rates:
            successes = sum(int(r["success"]) for r in runs if r["method"] == rate["method"])
            assert int(rate["successes"]) == successes
            assert rate["runs"] == "2"

    def test_verify(self, config_file, tmp_path):
        code = run(config_file, "verify")
        report = json.loads((tmp_path / "out" / "verify_report.json").read_text())
        assert code == (0 if report["passed"] else runner.EXIT_CHECKS_FAILED)
        assert report["n_checks"] == len(report["checks"])
        assert report["truncation_bias_bound"] > 0


class TestSuccessRates:
    @staticmethod
    def row(method: str, seed: int, success: int) -> tuple:
        return (method, seed, 0.0, 0.0, 0.0, "global" if success else "local", success)

    def test_rate_is_mean_of_flags(self):
        rows = [self.row("continuation", s, flag) for s, flag in enumerate([1, 0, 1, 1])]
        assert success_rates(rows, ["continuation"]) == [("continuation", 4, 3, 0.75)]

    def test_single_seed(self):
        rows = [self.row("deterministic", 0, 0)]
        assert success_rates(rows, ["deterministic"]) == [("deterministic", 1, 0, 0.0)]

    def test_method_order_is_kept(self):
        rows = [self.row("continuation", 0, 1), self.row("entropy_reg", 0, 0)]
        rates = success_rates(rows, ["entropy_reg", "continuation"])
        assert [rate[0] for rate in rates] == ["entropy_reg", "continuation"]
        assert [rate[3] for rate in rates] == [0.0, 1.0]

    def test_method_without_runs(self):
        assert success_rates([], ["deterministic"]) == [("deterministic", 0, 0, 0.0)]


class TestDeterminism:
    def test_rerun_is_byte_identical(self, config_file, tmp_path):
        out = tmp_path / "out"
        assert run(config_file, "optimize") == 0
        names = ("run_record.csv", "optimize_summary.json")
        first = {name: (out / name).read_bytes() for name in names}
        assert run(config_file, "optimize") == 0
        for name, content in first.items():
            assert (out / name).read_bytes() == content

    def test_thread_count_does_not_change_results(self, config_file, tmp_path):
        out = tmp_path / "out"
        assert run(config_file, "sweep", "--threads", "1") == 0
        single = (out / "landscape.csv").read_bytes()
        assert run(config_file, "sweep", "--threads", "3") == 0
        assert (out / "landscape.csv").read_bytes() == single

    def test_output_directory_does_not_change_header(self, config_file, tmp_path):
        assert run(config_file, "sweep") == 0
        assert run(config_file, "sweep", "--out", str(tmp_path / "elsewhere")) == 0
        first = (tmp_path / "out" / "landscape.csv").read_bytes()
        assert (tmp_path / "elsewhere" / "landscape.csv").read_bytes() == first


class TestExitCodes:
    def test_estimation_error(self, config_file, monkeypatch):
        def failing(config, logger):
            raise CovarianceError("not PSD")

        monkeypatch.setitem(runner.COMMANDS, "sweep", failing)
        assert run(config_file, "sweep") == 2

    def test_failed_checks(self, config_file, monkeypatch):
        def failed(config, logger):
            return CommandResult(passed=False)

        monkeypatch.setitem(runner.COMMANDS, "verify", failed)
        assert run(config_file, "verify") == runner.EXIT_CHECKS_FAILED

    def test_output_error(self, config_file, tmp_path):
        (tmp_path / "out" / "landscape.csv").mkdir(parents=True)
        assert run(config_file, "sweep") == 3
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["results"]["exit_code"] == 3
        assert manifest["errors"]
