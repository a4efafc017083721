"""
Evaluation tests on hand-built probability batches: closed and open-set
accuracy, sweeps, the cost-of-unknown curve, crossover and report files.
"""

import numpy as np
import orjson
import pytest

from openset_ids.core.errors import EvaluationError
from openset_ids.core.evaluation import (
    Curve,
    closed_set_accuracy,
    cost_of_unknown_curve,
    curve_column,
    evaluate,
    find_crossover,
    open_set_accuracy,
    threshold_sweep,
    weight_grid,
)
from openset_ids.core.selfcheck import check_curve_identities, check_report_dir, verify_identities
from openset_ids.core.state import Family
from openset_ids.models.recognizers import PredictionBatch
from openset_ids.utils import report_io

# rows: accepted+correct, wrong argmax, low known, low unknown, confident unknown
PROBABILITIES = np.array([[0.9, 0.1], [0.2, 0.6], [0.05, 0.02], [0.03, 0.04], [0.3, 0.7]])
TRUTH = np.array([0, 0, 1, -1, -1])
TRUTH_LABELS = ["a", "a", "b", "mscan", "mscan"]


@pytest.fixture
def batch():
    return PredictionBatch(("a", "b"), PROBABILITIES)


class TestAccuracy:

    def test_closed_set_counts_unknown_truth_as_wrong(self, batch):
        assert closed_set_accuracy(batch, TRUTH) == pytest.approx(0.2)

    @pytest.mark.parametrize(
        "threshold,open_acc,unknown_acc,rejected",
        [(0.0, 0.2, 0.0, 0), (0.1, 0.4, 0.5, 2), (0.8, 0.6, 1.0, 4)],
    )
    def test_open_set_partitions(self, batch, threshold, open_acc, unknown_acc, rejected):
        score = open_set_accuracy(batch, TRUTH, threshold)
        assert score.open_accuracy == pytest.approx(open_acc)
        assert score.known_accuracy == pytest.approx(1 / 3)
        assert score.unknown_accuracy == pytest.approx(unknown_acc)
        assert (score.n_known, score.n_unknown, score.rejected) == (3, 2, rejected)
        recomposed = (score.n_known * score.known_accuracy + score.n_unknown * score.unknown_accuracy) / 5
        assert recomposed == pytest.approx(score.open_accuracy, abs=1e-12)

    def test_empty_partitions_are_none(self, batch):
        assert open_set_accuracy(batch, np.array([0, 1, 1, 0, 1]), 0.1).unknown_accuracy is None
        score = open_set_accuracy(batch, np.full(5, -1), 0.1)
        assert score.known_accuracy is None
        assert score.open_accuracy == score.unknown_accuracy == pytest.approx(0.4)

    def test_count_mismatch(self, batch):
        with pytest.raises(EvaluationError):
            closed_set_accuracy(batch, TRUTH[:3])
        with pytest.raises(EvaluationError):
            open_set_accuracy(PredictionBatch(("a",), np.empty((0, 1))), np.empty(0, dtype=int), 0.1)

    def test_sweep_requires_sorted_thresholds(self, batch):
        rows = threshold_sweep(batch, TRUTH, [0.0, 0.1, 0.8])
        assert [r["rejected_count"] for r in rows] == [0, 2, 4]
        assert all(r["unknown_count"] == 2 for r in rows)
        with pytest.raises(EvaluationError):
            threshold_sweep(batch, TRUTH, [0.5, 0.1])


class TestCostOfUnknown:

    def test_weight_grid(self):
        weights = weight_grid(0.01)
        assert len(weights) == 101
        assert weights[0] == 0.0 and weights[-1] == 1.0
        assert len(weight_grid(0.25)) == 5

    def test_endpoints_are_exact(self):
        weights = weight_grid()
        curve = cost_of_unknown_curve(1 / 3, 0.5, weights)
        assert curve[0] == 1 / 3
        assert curve[-1] == 0.5
        assert np.all(np.diff(curve) >= 0)

    def test_missing_unknown_partition_gives_flat_curve(self):
        np.testing.assert_array_equal(cost_of_unknown_curve(0.7, None, weight_grid(0.1)), np.full(11, 0.7))

    def test_crossover_is_first_strictly_greater_weight(self):
        weights = weight_grid()
        baseline = Curve(weights, np.full(weights.shape, 0.523))
        wsvm = Curve(weights, cost_of_unknown_curve(0.4, 0.9, weights))
        assert find_crossover(baseline, wsvm) == pytest.approx(0.25)

    def test_no_crossover(self):
        weights = weight_grid()
        baseline = Curve(weights, cost_of_unknown_curve(0.9, 0.9, weights))
        assert find_crossover(baseline, Curve(weights, cost_of_unknown_curve(0.9, 0.2, weights))) is None

    def test_grids_must_match(self):
        with pytest.raises(EvaluationError):
            find_crossover(Curve(weight_grid(0.1), np.zeros(11)), Curve(weight_grid(0.2), np.zeros(6)))

    def test_column_names(self):
        assert curve_column(Family.WSVM, 0.1) == "perceived_wsvm_t0.1"
        assert curve_column("platt", 0.0) == "perceived_platt_t0"


class TestEvaluate:

    @pytest.fixture
    def report(self, batch):
        wsvm = PredictionBatch(("a", "b"), np.array([[0.9, 0.0], [0.8, 0.1], [0.0, 0.6], [0.0, 0.0], [0.0, 0.0]]))
        return evaluate(
            {Family.PLATT: batch, Family.WSVM: wsvm},
            TRUTH,
            [0.0, 0.1],
            unknown_metatypes=["probe", "probe"],
        )

    def test_report_contents(self, report):
        assert (report.n_total, report.n_known, report.n_unknown) == (5, 3, 2)
        assert report.families == [Family.PLATT, Family.WSVM]
        assert report.closed_accuracy[Family.WSVM] == pytest.approx(0.6)
        assert set(report.curves) == {
            "perceived_platt_t0", "perceived_platt_t0.1", "perceived_wsvm_t0", "perceived_wsvm_t0.1",
        }
        assert report.unknown_by_metatype == {"probe": 2}

    def test_crossover_per_threshold(self, report):
        # at t=0.1 W-SVM is right on every known record and rejects both unknowns
        assert report.crossovers[0.1] == 0.0
        assert set(report.crossovers) == {0.0, 0.1}

    def test_curve_identities(self, report):
        rows = []
        for family in report.families:
            for row in report.sweep[family]:
                score = (row["threshold"], row["open_accuracy"], row["known_accuracy"], row["unknown_accuracy"])
                rows.append((*score, report.n_known, row["unknown_count"],
                             report.curves[curve_column(family, row["threshold"])]))
        assert verify_identities(rows) == []

    def test_trained_recognizers_satisfy_identities(self):
        result = check_curve_identities()
        assert result.passed, result.detail


class TestReportFiles:

    def test_round_trip_and_self_check(self, tmp_path, batch):
        report = evaluate({Family.PLATT: batch}, TRUTH, [0.0, 0.1])
        written = report_io.emit_report(report, tmp_path)
        assert set(written) == {"closed", "sweep", "curve", "summary"}
        tables = report_io.read_report(tmp_path)
        assert list(tables["sweep"].columns) == report_io.SWEEP_COLUMNS
        assert tables["sweep"]["open_accuracy"].tolist() == [r["open_accuracy"] for r in report.sweep[Family.PLATT]]
        assert len(tables["curve"]) == 101
        assert check_report_dir(tmp_path).passed

    def test_empty_partition_written_as_na(self, tmp_path, batch):
        report = evaluate({Family.WSVM: batch}, np.array([0, 0, 1, 1, 0]), [0.1])
        report_io.emit_report(report, tmp_path)
        sweep_text = (tmp_path / report_io.SWEEP_FILE).read_text(encoding="utf-8")
        assert f",{report_io.NA}," in sweep_text
        assert report_io.read_report(tmp_path)["sweep"]["unknown_accuracy"].isna().all()
        assert report_io.NA in (tmp_path / report_io.SUMMARY_FILE).read_text(encoding="utf-8")
        assert check_report_dir(tmp_path).passed

    def test_summary_mentions_crossover(self, batch):
        wsvm = PredictionBatch(("a", "b"), np.array([[0.9, 0.0], [0.8, 0.1], [0.0, 0.6], [0.0, 0.0], [0.0, 0.0]]))
        text = report_io.summary_text(evaluate({Family.PLATT: batch, Family.WSVM: wsvm}, TRUTH, [0.1]))
        assert "crossover" in text
        assert "t=0.1: 0.00" in text

    def test_confusion_matrix(self, batch):
        frame = report_io.confusion_frame(batch, TRUTH_LABELS, 0.1)
        assert list(frame.columns) == ["a", "b", "UNKNOWN"]
        assert list(frame.index) == ["a", "b", "mscan"]
        assert frame.loc["a", "a"] == 1 and frame.loc["a", "b"] == 1
        assert frame.loc["b", "UNKNOWN"] == 1
        assert frame.loc["mscan", "UNKNOWN"] == 1 and frame.loc["mscan", "b"] == 1
        assert int(frame.to_numpy().sum()) == 5

    def test_predictions_file(self, tmp_path, batch):
        path = report_io.write_predictions(tmp_path / "p.jsonl", batch, TRUTH_LABELS, 0.1, per_class=True)
        records = [orjson.loads(line) for line in path.read_bytes().splitlines()]
        assert [r["predicted"] for r in records] == ["a", "b", "UNKNOWN", "UNKNOWN", "b"]
        assert records[0]["probabilities"] == {"a": 0.9, "b": 0.1}
        assert records[3]["truth"] == "mscan"
