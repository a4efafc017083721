"""
Preprocess tests: dominant-class downsampling, rare-class removal, per-class
caps and min-max scaling.
"""

import numpy as np
import pandas as pd
import pytest

from openset_ids.core.errors import PreprocessError
from openset_ids.utils.kdd_utils import LABEL_COLUMN
from openset_ids.utils.preprocess_utils import (
    ScalingParams,
    apply_scaler,
    cap_per_class,
    downsample_dominant,
    drop_rare_classes,
    fit_scaler,
)


def labeled_frame(counts):
    labels = [label for label, n in counts.items() for _ in range(n)]
    return pd.DataFrame({"src_bytes": np.arange(len(labels), dtype=np.float64), LABEL_COLUMN: labels})


class TestDownsampleDominant:

    def test_two_largest_classes_shrink_to_ceiling(self):
        frame = labeled_frame({"smurf": 1000, "neptune": 501, "normal": 300, "back": 7})
        out, selection = downsample_dominant(frame, factor=100, seed=42)
        counts = out[LABEL_COLUMN].value_counts()
        assert counts["smurf"] == 10
        assert counts["neptune"] == 6
        assert counts["normal"] == 300
        assert counts["back"] == 7
        assert selection == [("smurf", 1000, 10), ("neptune", 501, 6)]

    def test_factor_one_is_identity(self):
        frame = labeled_frame({"a": 5, "b": 4, "c": 3})
        out, _ = downsample_dominant(frame, factor=1, seed=0)
        pd.testing.assert_frame_equal(out, frame)

    def test_reproducible_with_seed(self):
        frame = labeled_frame({"a": 400, "b": 300, "c": 10})
        first, _ = downsample_dominant(frame, 10, seed=7)
        second, _ = downsample_dominant(frame, 10, seed=7)
        pd.testing.assert_frame_equal(first, second)

    def test_preserves_row_order(self):
        frame = labeled_frame({"a": 400, "b": 300, "c": 10})
        out, _ = downsample_dominant(frame, 10, seed=3)
        assert out.index.is_monotonic_increasing

    def test_needs_two_classes(self):
        with pytest.raises(PreprocessError):
            downsample_dominant(labeled_frame({"a": 10}), 2, seed=0)

    def test_rejects_factor_below_one(self):
        with pytest.raises(PreprocessError):
            downsample_dominant(labeled_frame({"a": 10, "b": 3}), 0, seed=0)


class TestDropRareClasses:

    def test_strict_inequality(self):
        frame = labeled_frame({"normal": 50, "phf": 19, "imap": 20})
        out, dropped = drop_rare_classes(frame, 20)
        assert dropped == ["phf"]
        assert set(out[LABEL_COLUMN]) == {"normal", "imap"}

    def test_zero_is_identity(self):
        frame = labeled_frame({"a": 1, "b": 2})
        out, dropped = drop_rare_classes(frame, 0)
        assert dropped == []
        assert len(out) == len(frame)

    def test_never_removes_large_classes(self):
        counts = {f"c{i}": i for i in range(1, 30)}
        out, _ = drop_rare_classes(labeled_frame(counts), 12)
        kept = out[LABEL_COLUMN].value_counts()
        for label, n in counts.items():
            assert (label in kept.index) == (n >= 12)

    def test_empty_result_is_an_error(self):
        with pytest.raises(PreprocessError):
            drop_rare_classes(labeled_frame({"a": 3, "b": 4}), 5)


class TestCapPerClass:

    def test_caps_each_class(self):
        labels = np.array(["a"] * 10 + ["b"] * 3 + ["c"] * 6)
        positions = cap_per_class(labels, 4, seed=1)
        chosen = labels[positions]
        assert (chosen == "a").sum() == 4
        assert (chosen == "b").sum() == 3
        assert (chosen == "c").sum() == 4
        assert np.all(np.diff(positions) > 0)

    def test_seeded(self):
        labels = np.array(["a"] * 50 + ["b"] * 50)
        np.testing.assert_array_equal(cap_per_class(labels, 5, 9), cap_per_class(labels, 5, 9))


class TestScaler:

    def test_fit_min_max(self):
        params = fit_scaler(np.array([[2.0, 5.0], [4.0, 5.0], [6.0, 5.0]]))
        np.testing.assert_array_equal(params.minimum, [2.0, 5.0])
        np.testing.assert_array_equal(params.maximum, [6.0, 5.0])

    def test_apply(self):
        params = ScalingParams(np.array([2.0, 5.0]), np.array([6.0, 5.0]))
        np.testing.assert_array_equal(apply_scaler(np.array([4.0, 5.0]), params), [0.5, 0.0])

    def test_out_of_range_values_are_clamped(self):
        params = ScalingParams(np.array([2.0]), np.array([6.0]))
        np.testing.assert_array_equal(apply_scaler(np.array([[8.0], [-1.0]]), params), [[1.0], [0.0]])

    def test_fitted_corpus_lies_in_unit_box(self):
        rng = np.random.default_rng(0)
        encoded = rng.normal(size=(200, 6)) * [1, 10, 100, 1e3, 1e5, 0]
        scaled = apply_scaler(encoded, fit_scaler(encoded))
        assert scaled.min() >= 0.0 and scaled.max() <= 1.0
        np.testing.assert_array_equal(scaled[:, 5], 0.0)
        np.testing.assert_array_equal(scaled[:, :5].min(axis=0), 0.0)
        np.testing.assert_array_equal(scaled[:, :5].max(axis=0), 1.0)

    def test_empty_corpus(self):
        with pytest.raises(PreprocessError):
            fit_scaler(np.empty((0, 3)))

    def test_serialization(self):
        params = fit_scaler(np.array([[0.0, 1.5], [3.0, 2.5]]))
        again = ScalingParams.from_dict(params.to_dict())
        np.testing.assert_array_equal(again.minimum, params.minimum)
        np.testing.assert_array_equal(again.maximum, params.maximum)
