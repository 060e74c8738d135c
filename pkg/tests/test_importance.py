import csv
import io
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from juicespec.dataset import Dataset, Spectrum
from juicespec.errors import KTooLarge
from juicespec.featurize import FeatureSpec
from juicespec.forest import ForestParams
from juicespec.importance import (
    ImportanceCurve,
    ImportanceSettings,
    importance_csv,
    normalize_scores,
    rank_wavelengths,
    svm_coefficient_importance,
    top_k_wavelengths,
    topk_csv,
)
from juicespec.linear import LinearSVCModel, LinearSVRModel
from juicespec.synth import Band, ComponentProfile, SynthConfig, generate_synthetic_dataset

NAMES = ("a0200", "a0202", "a0204", "a0206", "ph")


def test_svr_coefficient_magnitudes():
    assert svm_coefficient_importance(LinearSVRModel(np.array([0.0, 2.0, -4.0]), 0.0)).tolist() == [0, 2, 4]
    assert svm_coefficient_importance(LinearSVRModel(np.zeros(3), 1.0)).tolist() == [0, 0, 0]


def test_mirrored_two_class_weights_double():
    w = np.array([0.5, -1.5, 0.0])
    model = LinearSVCModel(np.vstack([w, -w]), np.zeros(2), ("a", "b"))
    assert svm_coefficient_importance(model).tolist() == (2 * np.abs(w)).tolist()


def test_normalize_examples():
    assert normalize_scores([2, 4, 6]).tolist() == [0.0, 0.5, 1.0]
    assert normalize_scores([3, 3, 3]).tolist() == [0.0, 0.0, 0.0]
    already = [0.0, 0.25, 1.0, 0.6]
    assert normalize_scores(already).tolist() == already


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1e6), min_size=5, max_size=5), st.floats(1e-3, 1e3))
def test_scale_invariance(raw, factor):
    a = ImportanceCurve.from_raw("t", "rf", NAMES, raw)
    b = ImportanceCurve.from_raw("t", "rf", NAMES, np.asarray(raw) * factor)
    np.testing.assert_allclose(a.normalized, b.normalized, rtol=1e-12, atol=1e-12)
    assert [k for k, _ in top_k_wavelengths(a, 5)] == [k for k, _ in top_k_wavelengths(b, 5)] or np.any(
        np.isclose(np.diff(np.sort(a.normalized)), 0, atol=1e-9)
    )
    assert a.normalized.min() >= 0 and a.normalized.max() <= 1


def test_top_k_examples():
    curve = ImportanceCurve.from_raw("t", "svm", NAMES, [0.1, 0.3, 0.9, 0.3, 0.3])
    assert top_k_wavelengths(curve, 1) == [(204, 1.0)]
    # ties: wavelengths ascending, parameters after
    assert [k for k, _ in top_k_wavelengths(curve, 4)] == [204, 202, 206, "ph"]
    with pytest.raises(KTooLarge):
        top_k_wavelengths(curve, 6)


def with_constant_column(dataset, wavelength, value):
    j = dataset.grid.index_of(wavelength)
    samples = []
    for smp in dataset.samples:
        a = list(smp.spectrum.absorbance)
        a[j] = value
        samples.append(replace(smp, spectrum=Spectrum(tuple(a))))
    return Dataset(dataset.grid, tuple(samples))


@pytest.mark.parametrize("target", ["bitterness", "region"])
def test_null_feature_is_suppressed(target):
    ds = with_constant_column(generate_synthetic_dataset(SynthConfig(seed=4)), 310, 0.25)
    curves = rank_wavelengths(ds, FeatureSpec.for_task(target), seed=4,
                              settings=ImportanceSettings(forest=ForestParams(n_trees=30)))
    j = curves["rf"].column_names.index("a0310")
    assert curves["rf"].raw[j] == 0.0
    assert curves["svm"].raw[j] < 1e-6
    for method in ("rf", "svm"):
        assert 310 not in [k for k, _ in top_k_wavelengths(curves[method], 5)]
        assert curves[method].normalized.max() == 1.0
        assert curves[method].normalized.min() >= 0.0


def single_band_config(seed):
    # labels depend on the 204 nm band only; origin species sit far from it
    components = (
        ComponentProfile("tannin", (Band(204.0, 1.2, 1.0),), base_conc=1.0, juice_sd=0.35),
        ComponentProfile("hydroxycinnamate", (Band(280.0, 15.0, 0.5), Band(320.0, 18.0, 0.6)), base_conc=1.0,
                         juice_sd=0.08, region_shift=0.3, vineyard_shift=0.25),
        ComponentProfile("pigment", (Band(430.0, 45.0, 0.15),), base_conc=1.0, juice_sd=0.08,
                         region_shift=0.2, vineyard_shift=0.3),
    )
    return SynthConfig(seed=seed, noise_sd=0.0, components=components)


def test_noiseless_band_recovery_over_seeds():
    for seed in range(20):
        ds = generate_synthetic_dataset(single_band_config(seed))
        curves = rank_wavelengths(ds, FeatureSpec("astringency"), seed=seed,
                                  settings=ImportanceSettings(forest=ForestParams(n_trees=40)))
        for method in ("rf", "svm"):
            top = top_k_wavelengths(curves[method], 1)[0][0]
            assert 200 <= top <= 208, (seed, method, top)


def test_csv_layouts():
    rf = ImportanceCurve.from_raw("region", "rf", NAMES, [0.1, 0.2, 0.9, 0.3, 0.95])
    svm = ImportanceCurve.from_raw("region", "svm", NAMES, [1, 2, 3, 4, 0])
    rows = list(csv.reader(io.StringIO(importance_csv([rf, svm]).decode())))
    assert rows[0] == ["target", "method", "column_name", "wavelength_nm", "raw_score", "normalized_score"]
    assert len(rows) == 11
    assert rows[1][:4] == ["region", "rf", "a0200", "200"]
    assert rows[5][:4] == ["region", "rf", "ph", ""]
    top = list(csv.reader(io.StringIO(topk_csv([rf, svm], 2).decode())))
    assert top == [["rank", "region:rf", "region:svm"], ["1", "ph", "206"], ["2", "204", "204"]]
