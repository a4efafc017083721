"""
Open set tests: the accept/reject rule, W-SVM and Platt recognizers on the
three-blob geometry, abatement far from the training data, and model
artifacts.
"""

import numpy as np
import orjson
import pytest

from openset_ids.core.errors import ArtifactError, CalibrationError, ConfigError
from openset_ids.core.evaluation import open_set_accuracy
from openset_ids.core.selfcheck import BLOB_CENTERS, BLOB_CLASSES, BLOB_KERNEL, FAR_MULTIPLIERS, far_queries
from openset_ids.core.state import UNKNOWN, Family
from openset_ids.models.kernel import KernelParams
from openset_ids.models.recognizers import (
    PredictionBatch,
    decide,
    platt_predict,
    train_platt,
    train_wsvm,
    wsvm_predict,
)
from openset_ids.utils import artifact_io
from openset_ids.utils.kdd_utils import CategoricalCodebook
from openset_ids.utils.preprocess_utils import ScalingParams


class TestDecisionRule:

    def test_below_threshold_is_unknown(self):
        assert decide(np.array([0.05, 0.08]), 0.1) is UNKNOWN

    def test_argmax_otherwise(self):
        assert decide(np.array([0.2, 0.7, 0.1]), 0.5) == 1

    def test_ties_go_to_lowest_index(self):
        assert decide(np.array([0.4, 0.6, 0.6]), 0.1) == 1

    def test_threshold_zero_never_rejects(self):
        assert decide(np.zeros(3), 0.0) == 0

    def test_threshold_range(self):
        with pytest.raises(ConfigError):
            decide(np.array([0.5]), 1.5)

    def test_batch_matches_single_decisions(self):
        probabilities = np.array([[0.1, 0.9], [0.05, 0.02], [0.5, 0.5]])
        batch = PredictionBatch(("a", "b"), probabilities)
        assert batch.labels(0.3) == ["b", UNKNOWN, "a"]
        assert batch.rejected(0.3).tolist() == [False, True, False]
        for row in range(3):
            prediction = batch.prediction(row, 0.3)
            assert prediction.predicted == decide(probabilities[row], 0.3)
            assert prediction.threshold_used == 0.3
        assert batch.prediction(1, 0.3).is_unknown


class TestWsvm:

    def test_blob_centers_are_recognized(self, blob_models):
        _, _, wsvm, _ = blob_models
        for k, center in enumerate(BLOB_CENTERS):
            prediction = wsvm_predict(wsvm, np.asarray(center), 0.1)
            assert prediction.predicted == k
            assert set(prediction.per_class_probability) == set(BLOB_CLASSES)

    def test_training_data(self, blob_models):
        X, labels, wsvm, _ = blob_models
        batch = wsvm.predict_batch(X)
        own = batch.probabilities[np.arange(len(X)), labels]
        assert np.all(own > 0.5)
        assert np.array_equal(batch.argmax, labels)
        assert batch.rejected(0.1).sum() == 0

    def test_unknown_accuracy_grows_with_threshold(self, blob_models):
        X, labels, wsvm, platt = blob_models
        novel = np.random.default_rng(1).normal((0.5, 0.9), 0.03, size=(20, 2))
        queries = np.vstack([X, novel])
        truth = np.concatenate([labels, np.full(len(novel), -1)])
        for model in (wsvm, platt):
            batch = model.predict_batch(queries)
            unknown = [open_set_accuracy(batch, truth, t).unknown_accuracy for t in (0.0, 0.1, 0.3, 0.5, 0.9)]
            assert unknown[0] == 0.0
            assert all(a <= b for a, b in zip(unknown, unknown[1:]))

    def test_probabilities_lie_in_unit_interval(self, blob_models):
        X, _, wsvm, _ = blob_models
        grid = np.random.default_rng(0).uniform(-1, 2, size=(200, 2))
        probabilities = wsvm.predict_proba(np.vstack([X, grid]))
        assert probabilities.min() >= 0.0 and probabilities.max() <= 1.0

    def test_probability_abates_with_distance(self, blob_models):
        X, _, wsvm, _ = blob_models
        outward = np.asarray(BLOB_CENTERS[0]) - X.mean(axis=0)
        for direction in (outward, -outward):
            best = wsvm.predict_batch(far_queries(X, FAR_MULTIPLIERS, direction)).max_probability
            assert np.all(np.diff(best) <= 0)
            for threshold in (0.1, 0.3, 0.5):
                assert wsvm_predict(wsvm, far_queries(X, [10.0], direction)[0], threshold).is_unknown

    def test_far_point_is_unknown_at_any_positive_threshold(self, blob_models):
        _, _, wsvm, _ = blob_models
        prediction = wsvm_predict(wsvm, np.array([10.0, 10.0]), 1e-9)
        assert prediction.is_unknown
        assert max(prediction.per_class_probability.values()) == 0.0

    def test_class_failure_names_the_class(self, blobs):
        X, labels = blobs
        keep = np.concatenate([np.flatnonzero(labels != 2), np.flatnonzero(labels == 2)[:2]])
        with pytest.raises(CalibrationError, match="class c"):
            train_wsvm(X[keep], labels[keep], BLOB_CLASSES, BLOB_KERNEL)


class TestPlattBaseline:

    def test_blob_centers_are_recognized(self, blob_models):
        _, _, _, platt = blob_models
        for k, center in enumerate(BLOB_CENTERS):
            assert platt_predict(platt, np.asarray(center), 0.1).predicted == k

    def test_two_point_toy(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0]])
        model = train_platt(X, np.array([0, 1]), ("neg", "pos"), KernelParams(1000.0, 1.0))
        for k in range(2):
            prediction = platt_predict(model, X[k], 0.5)
            assert prediction.predicted == k
            assert prediction.per_class_probability[model.classes[k]] > 0.5

    def test_far_queries_keep_high_probability(self, blob_models):
        X, _, _, platt = blob_models
        outward = np.asarray(BLOB_CENTERS[0]) - X.mean(axis=0)
        queries = np.vstack([far_queries(X, FAR_MULTIPLIERS, d) for d in (outward, -outward)])
        assert platt.predict_batch(queries).max_probability.max() > 0.5

    def test_shares_binaries_with_wsvm(self, blob_models):
        _, _, wsvm, platt = blob_models
        for a, b in zip(wsvm.binaries, platt.binaries):
            assert a is b


class TestArtifacts:

    @pytest.fixture
    def artifacts(self, blob_models):
        _, _, wsvm, platt = blob_models
        extras = dict(
            kernel=BLOB_KERNEL,
            codebooks={"flag": CategoricalCodebook("flag", ("S0", "SF"))},
            scaler=ScalingParams(np.zeros(2), np.ones(2)),
            taxonomy={name: "unlisted" for name in BLOB_CLASSES},
            config_fingerprint="abc123",
        )
        return {
            Family.WSVM: artifact_io.ModelArtifact(model=wsvm, **extras),
            Family.PLATT: artifact_io.ModelArtifact(model=platt, **extras),
        }

    @pytest.mark.parametrize("family", [Family.WSVM, Family.PLATT])
    def test_round_trip_preserves_predictions(self, tmp_path, blob_models, artifacts, family):
        X = blob_models[0]
        path = artifact_io.save_model(artifact_io.artifact_path(tmp_path, family), artifacts[family])
        assert path.name == f"model_{family.value}.json"
        loaded = artifact_io.load_model(path, family)
        assert loaded.family is family
        assert loaded.model.classes == BLOB_CLASSES
        assert loaded.config_fingerprint == "abc123"
        np.testing.assert_array_equal(loaded.model.predict_proba(X), artifacts[family].model.predict_proba(X))

    def test_family_mismatch(self, tmp_path, artifacts):
        path = artifact_io.save_model(tmp_path / "m.json", artifacts[Family.PLATT])
        with pytest.raises(ArtifactError, match="expected wsvm"):
            artifact_io.load_model(path, Family.WSVM)

    def test_unknown_version(self, tmp_path, artifacts):
        path = artifact_io.save_model(tmp_path / "m.json", artifacts[Family.WSVM])
        document = orjson.loads(path.read_bytes())
        document["version"] = 99
        path.write_bytes(orjson.dumps(document))
        with pytest.raises(ArtifactError, match="version"):
            artifact_io.load_model(path)

    def test_missing_and_corrupt_files(self, tmp_path):
        with pytest.raises(ArtifactError, match="not found"):
            artifact_io.load_model(tmp_path / "absent.json")
        (tmp_path / "bad.json").write_text("{not json", encoding="utf-8")
        with pytest.raises(ArtifactError):
            artifact_io.load_model(tmp_path / "bad.json")
