import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from juicespec.dataset import DEFAULT_GRID, group_by_juice, write_dataset_csv
from juicespec.errors import ConfigInfeasible
from juicespec.synth import (
    Band,
    Component,
    MixtureSpec,
    SynthConfig,
    beer_lambert_absorbance,
    beer_lambert_spectrum,
    generate_synthetic_dataset,
)

N = DEFAULT_GRID.n_points


def spike(index, value):
    eps = np.zeros(N)
    eps[index] = value
    return Component("spike", tuple(eps))


def test_zero_concentration_gives_zero_spectrum():
    comp = Component.from_bands("c", [Band(300, 10, 1.0)])
    assert np.all(beer_lambert_absorbance(MixtureSpec(((comp, 0.0),))) == 0.0)


def test_direct_product_at_300nm():
    i = DEFAULT_GRID.index_of(300)
    spectrum = beer_lambert_spectrum(MixtureSpec(((spike(i, 0.8), 2.0),), path_length_cm=1.0))
    assert spectrum.absorbance[i] == pytest.approx(1.6, abs=1e-15)
    assert sum(spectrum.absorbance) == pytest.approx(1.6, abs=1e-15)


def test_noise_requires_rng():
    comp = Component.from_bands("c", [Band(300, 10, 1.0)])
    with pytest.raises(ValueError):
        beer_lambert_absorbance(MixtureSpec(((comp, 1.0),), noise_sd=0.01))


bands = st.builds(Band, st.floats(200, 600), st.floats(1, 60), st.floats(0, 3))
conc = st.floats(0, 5, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(st.lists(bands, min_size=1, max_size=3), conc, st.floats(0.1, 5))
def test_doubling_concentration_doubles_absorbance(bs, c, path):
    comp = Component.from_bands("c", bs)
    one = beer_lambert_absorbance(MixtureSpec(((comp, c),), path))
    two = beer_lambert_absorbance(MixtureSpec(((comp, 2 * c),), path))
    np.testing.assert_allclose(two, 2 * one, rtol=1e-14, atol=1e-300)


@settings(max_examples=60, deadline=None)
@given(st.lists(bands, min_size=1, max_size=3), st.lists(bands, min_size=1, max_size=3), conc, conc)
def test_two_component_additivity(b1, b2, c1, c2):
    p, q = Component.from_bands("p", b1), Component.from_bands("q", b2)
    mix = beer_lambert_absorbance(MixtureSpec(((p, c1), (q, c2))))
    parts = beer_lambert_absorbance(MixtureSpec(((p, c1),))) + beer_lambert_absorbance(MixtureSpec(((q, c2),)))
    assert np.max(np.abs(mix - parts)) <= 1e-12


def test_default_shape(default_dataset):
    assert len(default_dataset) == 93
    assert len(group_by_juice(default_dataset)) == 31
    assert len({s.metadata.region for s in default_dataset.samples}) == 2
    assert len({s.metadata.vineyard for s in default_dataset.samples}) == 4


def test_vineyards_nest_inside_regions(default_dataset):
    region_of = {}
    for s in default_dataset.samples:
        assert region_of.setdefault(s.metadata.vineyard, s.metadata.region) == s.metadata.region


def test_same_seed_is_byte_identical():
    cfg = SynthConfig(seed=42)
    assert write_dataset_csv(generate_synthetic_dataset(cfg)) == write_dataset_csv(generate_synthetic_dataset(cfg))


def test_different_seeds_differ():
    a = generate_synthetic_dataset(SynthConfig(seed=1)).absorbance_matrix()
    b = generate_synthetic_dataset(SynthConfig(seed=2)).absorbance_matrix()
    assert not np.array_equal(a, b)


def test_noiseless_replicates_are_identical():
    ds = generate_synthetic_dataset(SynthConfig(noise_sd=0.0, seed=5))
    for idx in group_by_juice(ds).values():
        first = ds.samples[idx[0]].spectrum
        assert len(idx) == 3
        assert all(ds.samples[i].spectrum == first for i in idx)


def test_replicates_share_labels_and_chemistry(default_dataset):
    for idx in group_by_juice(default_dataset).values():
        first = default_dataset.samples[idx[0]]
        for i in idx:
            s = default_dataset.samples[i]
            assert s.labels == first.labels
            assert (s.metadata.tss, s.metadata.ph, s.metadata.ta) == (first.metadata.tss, first.metadata.ph, first.metadata.ta)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_labels_bounded(seed):
    ds = generate_synthetic_dataset(SynthConfig(n_juices=12, replicates_per_juice=1, seed=seed))
    for s in ds.samples:
        for name in ("astringency", "bitterness", "herbaceous"):
            assert 0.0 <= s.labels.get(name) <= 9.0


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_regions": 3, "n_vineyards": 2},
        {"n_juices": 3, "n_vineyards": 4},
        {"replicates_per_juice": 0},
        {"n_regions": 0},
    ],
)
def test_infeasible_configs(kwargs):
    with pytest.raises(ConfigInfeasible):
        generate_synthetic_dataset(SynthConfig(**kwargs))
