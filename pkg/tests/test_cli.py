"""
End-to-end tests: the click commands over the synthetic KDD corpus, the
workflow functions behind them and the one-line error contract.
"""

import orjson
import pytest
import yaml
from click.testing import CliRunner

from openset_ids import __version__
from openset_ids.cli import main
from openset_ids.core import workflow
from openset_ids.core.errors import ArtifactError, LabelSpaceError
from openset_ids.core.state import Family
from openset_ids.utils import report_io

CSV_FILES = (report_io.CLOSED_FILE, report_io.SWEEP_FILE, report_io.CURVE_FILE)


@pytest.fixture
def runner():
    return CliRunner(mix_stderr=False)


@pytest.fixture
def data_args(tmp_path, kdd_files):
    train, test = kdd_files
    return [
        "--train", str(train),
        "--test", str(test),
        "--output-dir", str(tmp_path / "out"),
        "--downsample-factor", "1",
        "--min-class-count", "3",
    ]


def invoke(runner, *args):
    return runner.invoke(main, [str(a) for a in args], prog_name="openset-ids")


def assert_error(result, code):
    assert result.exit_code == 2, result.output
    # log records share stderr; the error line comes last and only once
    lines = result.stderr.strip().splitlines()
    assert lines[-1].startswith(f"openset-ids:error:{code}: ")
    assert sum(line.startswith("openset-ids:error:") for line in lines) == 1


class TestCommands:

    def test_version(self, runner):
        result = invoke(runner, "--version")
        assert result.exit_code == 0
        assert __version__ in result.output

    def test_pipeline(self, runner, tmp_path, data_args):
        out = tmp_path / "out"

        result = invoke(runner, "prepare", *data_args)
        assert result.exit_code == 0, result.stderr
        assert "prepared dataset written to" in result.output
        summary = orjson.loads((out / workflow.PREPARED_DIR / workflow.PREPROCESSING_FILE).read_bytes())["summary"]
        assert (summary["train_raw"], summary["train_dedup"]) == (40, 36)
        assert summary["unknown_classes"] == ["snmpgetattack"]

        result = invoke(runner, "train", *data_args, "--c", 10, "--gamma", 1)
        assert result.exit_code == 0, result.stderr
        assert "platt model written to" in result.output
        assert "wsvm model written to" in result.output

        result = invoke(runner, "evaluate", *data_args, "--thresholds", "0,0.1,0.3", "--predictions")
        assert result.exit_code == 0, result.stderr
        assert "closed-set accuracy" in result.output
        report = out / workflow.REPORT_DIR
        for name in CSV_FILES + ("confusion_platt.csv", "confusion_wsvm.csv", "predictions_wsvm.jsonl"):
            assert (report / name).is_file()

        sweep = report_io.read_report(report)["sweep"]
        assert len(sweep) == 6
        assert (sweep["n_total"] == 23).all() and (sweep["unknown_count"] == 5).all()
        # threshold 0 never rejects, so no unknown-truth record is recognized
        assert (sweep.loc[sweep["threshold"] == 0, "unknown_accuracy"] == 0.0).all()

        result = invoke(runner, "self-check", "--report-dir", report)
        assert result.exit_code == 0, result.output
        assert "PASS report:" in result.output
        assert "FAIL" not in result.output

    def test_desk_experiment(self, runner, tmp_path, data_args):
        assert invoke(runner, "prepare", *data_args).exit_code == 0
        result = invoke(
            runner, "desk-experiment", *data_args,
            "--per-class-cap", 8, "--withhold", "smurf", "--thresholds", "0.1,0.3", "--c", 10, "--gamma", 1,
        )
        assert result.exit_code == 0, result.stderr
        sweep = report_io.read_report(tmp_path / "out" / workflow.DESK_DIR)["sweep"]
        assert set(sweep["family"]) == {"platt", "wsvm"}
        # 6 smurf and 5 snmpgetattack test records are unknown
        assert (sweep["unknown_count"] == 11).all()

    def test_config_file_with_flag_override(self, runner, tmp_path, kdd_files):
        train, test = kdd_files
        config = tmp_path / "run.yaml"
        config.write_text(yaml.safe_dump({
            "paths": {"train": str(train), "test": str(test), "output_dir": str(tmp_path / "cfg")},
            "preprocess": {"downsample_factor": 1, "min_class_count": 50},
        }))
        assert_error(invoke(runner, "prepare", "--config", config), "preprocess")
        result = invoke(runner, "prepare", "--config", config, "--min-class-count", 3)
        assert result.exit_code == 0, result.stderr
        assert (tmp_path / "cfg" / workflow.PREPARED_DIR).is_dir()


    def test_paper_literal_scaling_flag(self, runner, tmp_path, data_args):
        prepared = tmp_path / "out" / workflow.PREPARED_DIR
        for flag, expected in (("--train-only-scaling", False), ("--paper-literal-scaling", True)):
            result = invoke(runner, "prepare", *data_args, flag)
            assert result.exit_code == 0, result.stderr
            effective = yaml.safe_load((prepared / "effective_config.yaml").read_text(encoding="utf-8"))
            assert effective["preprocess"]["joint_scaling"] is expected


class TestErrors:

    def test_missing_training_file(self, runner, tmp_path):
        result = invoke(runner, "prepare", "--train", tmp_path / "absent.txt", "--test", tmp_path / "absent.txt")
        assert_error(result, "config")
        assert "training file not found" in result.stderr

    def test_malformed_thresholds(self, runner, data_args):
        assert_error(invoke(runner, "evaluate", *data_args, "--thresholds", "0.1,abc"), "config")

    def test_unsorted_thresholds(self, runner, data_args):
        assert_error(invoke(runner, "evaluate", *data_args, "--thresholds", "0.3,0.1"), "config")

    def test_grid_search_conflicts_with_explicit_kernel(self, runner, data_args):
        assert_error(invoke(runner, "train", *data_args, "--grid-search", "--c", 10), "config")

    def test_unknown_option_is_a_usage_error(self, runner):
        assert_error(invoke(runner, "prepare", "--frobnicate"), "usage")

    def test_evaluate_before_train(self, runner, data_args):
        assert invoke(runner, "prepare", *data_args).exit_code == 0
        assert_error(invoke(runner, "evaluate", *data_args), "artifact")

    def test_bad_line_is_a_parse_error(self, runner, tmp_path, kdd_files):
        train, test = kdd_files
        train.write_text(train.read_text() + "0,tcp,http\n")
        result = invoke(runner, "prepare", "--train", train, "--test", test, "--output-dir", tmp_path / "o")
        assert_error(result, "parse")
        assert "line 41" in result.stderr

    def test_invalid_utf8_is_a_parse_error(self, runner, tmp_path, kdd_files):
        train, test = kdd_files
        train.write_bytes(train.read_bytes() + b"0,tcp,\xff\n")
        result = invoke(runner, "prepare", "--train", train, "--test", test, "--output-dir", tmp_path / "o")
        assert_error(result, "parse")
        assert "line 41" in result.stderr
        assert "Traceback" not in result.stderr

    def test_unexpected_exception_keeps_the_error_line(self, runner, monkeypatch, data_args):
        def broken(config):
            raise RuntimeError("boom")

        monkeypatch.setattr(workflow, "cmd_prepare", broken)
        result = invoke(runner, "prepare", *data_args)
        assert_error(result, "internal")
        assert "RuntimeError: boom" in result.stderr


class TestWorkflow:

    def test_reruns_are_byte_identical(self, run_config, tmp_path):
        reports = []
        for name in ("first", "second"):
            paths = run_config.paths.model_copy(update={"output_dir": tmp_path / name})
            config = run_config.model_copy(update={"paths": paths})
            workflow.cmd_prepare(config)
            workflow.cmd_train(config, "both")
            workflow.cmd_evaluate(config, "both")
            reports.append(tmp_path / name / workflow.REPORT_DIR)
        for name in CSV_FILES:
            assert (reports[0] / name).read_bytes() == (reports[1] / name).read_bytes()

    def test_single_family(self, run_config):
        workflow.cmd_prepare(run_config)
        written = workflow.cmd_train(run_config, "wsvm")
        assert list(written) == [Family.WSVM]
        report = workflow.cmd_evaluate(run_config, "wsvm")
        assert report.families == [Family.WSVM]
        assert report.crossovers == {}
        with pytest.raises(ArtifactError):
            workflow.cmd_evaluate(run_config, "platt")

    def test_sweep_rejections_grow_with_threshold(self, run_config):
        workflow.cmd_prepare(run_config)
        workflow.cmd_train(run_config, "wsvm")
        report = workflow.cmd_evaluate(run_config, "wsvm")
        row = report.sweep[Family.WSVM][-1]
        assert row["threshold"] == 0.3
        assert row["known_accuracy"] is not None and row["unknown_accuracy"] is not None
        rejected = [r["rejected_count"] for r in report.sweep[Family.WSVM]]
        assert rejected == sorted(rejected)
        assert report.unknown_by_metatype == {"R2L": 5}

    def test_withheld_class_must_exist(self, run_config):
        workflow.cmd_prepare(run_config)
        desk = run_config.desk.model_copy(update={"withheld": ["teardrop"]})
        with pytest.raises(LabelSpaceError, match="teardrop"):
            workflow.cmd_desk_experiment(run_config.model_copy(update={"desk": desk}))

    def test_desk_without_withholding(self, run_config):
        workflow.cmd_prepare(run_config)
        desk = run_config.desk.model_copy(update={"withheld": []})
        report = workflow.cmd_desk_experiment(run_config.model_copy(update={"desk": desk}))
        assert report.n_unknown == 5
        assert report.families == [Family.PLATT, Family.WSVM]
