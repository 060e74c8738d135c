import numpy as np
import pytest

from juicespec.dataset import DEFAULT_GRID, Dataset, Sample, SampleMetadata, SensoryLabels, Spectrum
from juicespec.synth import SynthConfig, generate_synthetic_dataset


@pytest.fixture(scope="session")
def default_dataset():
    return generate_synthetic_dataset(SynthConfig())


@pytest.fixture(scope="session")
def small_dataset():
    return generate_synthetic_dataset(SynthConfig(n_juices=8, replicates_per_juice=2, seed=3))


def make_sample(sample_id="S1", juice_id="J1", absorbance=None, **labels):
    if absorbance is None:
        absorbance = np.linspace(0.5, 0.01, DEFAULT_GRID.n_points)
    return Sample(
        sample_id=sample_id,
        spectrum=Spectrum(tuple(absorbance)),
        metadata=SampleMetadata(juice_id=juice_id),
        labels=SensoryLabels(**labels),
    )


def make_dataset(samples):
    return Dataset(DEFAULT_GRID, tuple(samples))


ARCHITECTURES = ("mlp1", "mlp2", "mlp3", "cnn1d", "lstm", "bilstm")


def tiny_instance(arch, rng):
    """Random gradient-check instance: n <= 4, d <= 12, widths <= 8."""
    from juicespec.neural import NetworkConfig

    n = int(rng.integers(1, 5))
    n_spectral = int(rng.integers(4, 11))
    n_extra = int(rng.integers(0, 3)) if arch in ("cnn1d", "lstm", "bilstm") else 0
    names = [f"a{200 + 2 * j:04d}" for j in range(n_spectral)] + ["tss", "ph"][:n_extra]
    config = NetworkConfig(
        arch,
        hidden_width=int(rng.integers(2, 9)),
        conv_filters=int(rng.integers(1, 5)),
        conv_kernel=int(rng.integers(1, min(4, n_spectral - 1) + 1)),
        pool_size=2,
        lstm_hidden=int(rng.integers(1, 5)),
        seed=int(rng.integers(0, 2 ** 31)),
    )
    X = rng.normal(size=(n, len(names)))
    if rng.random() < 0.5:
        y = rng.normal(size=n).tolist()
    else:
        y = [str(v) for v in rng.choice(["a", "b", "c"], size=n)]
    return config, X, y, names


def nearest_centroid_loso(dataset, target):
    """Leave-one-sample-out accuracy of a nearest-centroid rule on standardized features."""
    from juicespec.evaluate import split_leave_one_sample_out
    from juicespec.featurize import FeatureSpec, apply_standardizer, assemble_features, fit_standardizer

    X, y = assemble_features(dataset, FeatureSpec.for_task(target))
    y = np.array(y)
    hits = 0
    for train, test in split_leave_one_sample_out(dataset):
        std = fit_standardizer(X.rows(train))
        tr = apply_standardizer(std, X.rows(train)).values
        te = apply_standardizer(std, X.rows(test)).values
        classes = sorted(set(y[list(train)]))
        centroids = np.array([tr[y[list(train)] == c].mean(axis=0) for c in classes])
        guess = classes[int(np.argmin(((centroids - te[0]) ** 2).sum(axis=1)))]
        hits += guess == y[test[0]]
    return hits / len(dataset)


ACCEPTANCE = {}


def record_acceptance(number, title, passed, detail):
    ACCEPTANCE[number] = (title, passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} ({detail})")
