import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from juicespec.dataset import Dataset, Sample, SampleMetadata
from juicespec.errors import DimensionMismatch, MissingLabel, TooFewRows, UnknownCategory
from juicespec.featurize import (
    FeatureMatrix,
    FeatureSpec,
    apply_standardizer,
    assemble_features,
    fit_standardizer,
)


def matrix(values):
    values = np.asarray(values, dtype=float)
    n, d = values.shape
    return FeatureMatrix(values, tuple(f"c{j}" for j in range(d)), tuple(f"s{i}" for i in range(n)))


def test_origin_features_width(default_dataset):
    X, y = assemble_features(default_dataset, FeatureSpec.for_task("region"))
    assert X.shape == (93, 206)
    assert X.column_names[-5:] == ("tss", "ph", "ta", "harvest=hand", "harvest=machine")
    assert set(y) == {"Region1", "Region2"}


def test_absorbance_only_width(default_dataset):
    X, y = assemble_features(default_dataset, FeatureSpec("bitterness"))
    assert X.shape == (93, 201)
    assert X.column_names[0] == "a0200" and X.column_names[-1] == "a0600"
    assert all(isinstance(v, float) for v in y)


def test_window_width(default_dataset):
    X, _ = assemble_features(default_dataset, FeatureSpec("astringency", (250, 420)))
    assert X.shape[1] == (420 - 250) // 2 + 1 == 86
    assert X.column_names[0] == "a0250" and X.column_names[-1] == "a0420"


def test_column_names_unique_and_one_hot_complete(default_dataset):
    X, _ = assemble_features(default_dataset, FeatureSpec.for_task("vineyard"))
    assert len(set(X.column_names)) == len(X.column_names)
    harvest = [j for j, c in enumerate(X.column_names) if c.startswith("harvest=")]
    np.testing.assert_array_equal(X.values[:, harvest].sum(axis=1), 1.0)


def test_regression_targets_forbid_chemistry():
    with pytest.raises(ValueError):
        FeatureSpec("bitterness", include_chemistry=True)
    with pytest.raises(ValueError):
        FeatureSpec("region", (251, 420))


def test_pinned_harvest_categories(default_dataset):
    with pytest.raises(UnknownCategory):
        assemble_features(default_dataset, FeatureSpec.for_task("region"), harvest_categories=["hand"])


def test_missing_label_raises(default_dataset):
    s = default_dataset.samples[0]
    bare = Dataset(default_dataset.grid, (Sample("x", s.spectrum, SampleMetadata(juice_id="J")),))
    with pytest.raises(MissingLabel):
        assemble_features(bare, FeatureSpec("bitterness"))


def test_standardizer_hand_example():
    std = fit_standardizer(matrix([[1.0], [3.0]]))
    assert std.means[0] == 2.0 and std.stds[0] == 1.0


def test_constant_column_rule():
    m = matrix([[5.0], [5.0], [5.0]])
    std = fit_standardizer(m)
    assert std.means[0] == 5.0 and std.stds[0] == 1.0
    assert np.all(apply_standardizer(std, m).values == 0.0)


def test_awkward_constant_column_is_exactly_zero():
    m = matrix([[0.1], [0.1], [0.1]])
    assert np.all(apply_standardizer(fit_standardizer(m), m).values == 0.0)


def test_wrong_width_and_too_few_rows():
    std = fit_standardizer(matrix([[1.0, 2.0], [3.0, 5.0]]))
    with pytest.raises(DimensionMismatch):
        apply_standardizer(std, matrix([[1.0, 2.0, 3.0]]))
    with pytest.raises(TooFewRows):
        fit_standardizer(matrix([[1.0, 2.0]]))


@settings(max_examples=60, deadline=None)
@given(
    st.integers(2, 12).flatmap(
        lambda n: st.lists(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3), min_size=n, max_size=n)
    )
)
def test_self_standardized_columns_have_zero_mean(rows):
    m = matrix(rows)
    out = apply_standardizer(fit_standardizer(m), m).values
    assert np.all(np.abs(out.mean(axis=0)) <= 1e-12 * max(1.0, np.abs(out).max()))
    assert np.all(fit_standardizer(m).stds > 0)


def test_feature_matrix_is_read_only(default_dataset):
    X, _ = assemble_features(default_dataset, FeatureSpec("bitterness"))
    with pytest.raises(ValueError):
        X.values[0, 0] = 1.0
