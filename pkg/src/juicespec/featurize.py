"""Design-matrix assembly and training-fold standardization."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .dataset import SENSORY_ATTRIBUTES, Dataset, parse_wavelength_column, wavelength_column
from .errors import DimensionMismatch, MissingField, MissingLabel, TooFewRows, UnknownCategory

CLASSIFICATION_TARGETS = ("region", "vineyard")
TARGETS = SENSORY_ATTRIBUTES + CLASSIFICATION_TARGETS
CHEMISTRY_FIELDS = ("tss", "ph", "ta")


def is_classification(target: str) -> bool:
    return target in CLASSIFICATION_TARGETS


@dataclass(frozen=True)
class FeatureSpec:
    target: str
    wavelength_window: Union[str, Tuple[int, int]] = "all"
    include_chemistry: bool = False
    include_harvest_type: bool = False

    def __post_init__(self) -> None:
        if self.target not in TARGETS:
            raise ValueError(f"unknown target {self.target!r}; expected one of {TARGETS}")
        if self.wavelength_window != "all":
            lo, hi = self.wavelength_window
            if not 200 <= lo <= hi <= 600 or lo % 2 or hi % 2:
                raise ValueError(f"window {lo}:{hi} must lie on the 2 nm grid within 200-600 nm")
        if not is_classification(self.target) and (self.include_chemistry or self.include_harvest_type):
            raise ValueError("regression targets use absorbance features only")

    @classmethod
    def for_task(cls, target: str, window: Union[str, Tuple[int, int]] = "all") -> "FeatureSpec":
        """Absorbance only for sensory targets; absorbance + chemistry + harvest for origin."""
        origin = is_classification(target)
        return cls(target, window, include_chemistry=origin, include_harvest_type=origin)

    def to_dict(self) -> dict:
        window = self.wavelength_window
        return {
            "target": self.target,
            "wavelength_window": window if window == "all" else list(window),
            "include_chemistry": self.include_chemistry,
            "include_harvest_type": self.include_harvest_type,
        }


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    column_names: Tuple[str, ...]
    row_sample_ids: Tuple[str, ...]

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("feature values must be a 2-D matrix")
        n, d = values.shape
        if n < 1 or d < 1:
            raise ValueError("feature matrix needs at least one row and one column")
        if len(self.column_names) != d or len(set(self.column_names)) != d:
            raise ValueError("column names must be unique and match the width")
        if len(self.row_sample_ids) != n:
            raise ValueError("row ids must match the row count")
        if not np.all(np.isfinite(values)):
            raise ValueError("feature values must be finite")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "column_names", tuple(self.column_names))
        object.__setattr__(self, "row_sample_ids", tuple(self.row_sample_ids))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    def rows(self, indices: Sequence[int]) -> "FeatureMatrix":
        idx = list(indices)
        return FeatureMatrix(self.values[idx], self.column_names, tuple(self.row_sample_ids[i] for i in idx))

    def spectral_mask(self) -> np.ndarray:
        return np.array([parse_wavelength_column(c) is not None for c in self.column_names])


def column_wavelength(name: str) -> Optional[int]:
    return parse_wavelength_column(name)


def assemble_features(
    dataset: Dataset, spec: FeatureSpec, harvest_categories: Optional[Sequence[str]] = None
) -> Tuple[FeatureMatrix, list]:
    """Build the design matrix and target vector.

    Column order: wavelengths ascending, then tss/ph/ta, then one
    ``harvest=<category>`` indicator per category in lexical order.
    Passing ``harvest_categories`` pins the indicator set (e.g. the one a
    stored model was trained with); a sample outside it is an error.
    """
    if len(dataset) == 0:
        raise TooFewRows("dataset is empty")
    grid = dataset.grid
    wl = grid.wavelengths
    if spec.wavelength_window == "all":
        keep = np.ones(len(wl), dtype=bool)
    else:
        lo, hi = spec.wavelength_window
        keep = (wl >= lo) & (wl <= hi)
    blocks = [dataset.absorbance_matrix()[:, keep]]
    names = [wavelength_column(int(w)) for w in wl[keep]]

    if spec.include_chemistry:
        chem = np.empty((len(dataset), len(CHEMISTRY_FIELDS)))
        for i, s in enumerate(dataset.samples):
            for k, fname in enumerate(CHEMISTRY_FIELDS):
                value = getattr(s.metadata, fname)
                if value is None:
                    raise MissingField(f"sample {s.sample_id!r} has no {fname}")
                chem[i, k] = value
        blocks.append(chem)
        names.extend(CHEMISTRY_FIELDS)

    if spec.include_harvest_type:
        kinds = [s.metadata.harvest_type for s in dataset.samples]
        for s, kind in zip(dataset.samples, kinds):
            if not kind:
                raise MissingField(f"sample {s.sample_id!r} has no harvest_type")
        if harvest_categories is None:
            categories = sorted(set(kinds))
        else:
            categories = sorted(harvest_categories)
            unseen = sorted(set(kinds) - set(categories))
            if unseen:
                raise UnknownCategory(f"harvest_type {unseen[0]!r} not among {categories}")
        onehot = np.array([[1.0 if k == c else 0.0 for c in categories] for k in kinds])
        blocks.append(onehot)
        names.extend(f"harvest={c}" for c in categories)

    matrix = FeatureMatrix(np.hstack(blocks), tuple(names), tuple(dataset.sample_ids))
    return matrix, extract_targets(dataset, spec.target)


def extract_targets(dataset: Dataset, target: str) -> list:
    out = []
    for s in dataset.samples:
        if is_classification(target):
            value = getattr(s.metadata, target)
            if not value:
                raise MissingLabel(f"sample {s.sample_id!r} has no {target}")
        else:
            value = s.labels.get(target)
            if value is None:
                raise MissingLabel(f"sample {s.sample_id!r} has no {target} score")
        out.append(value)
    return out


@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "stds": self.stds.tolist()}


def fit_standardizer(matrix: FeatureMatrix) -> Standardizer:
    """Column means and population standard deviations (zero variance -> 1)."""
    n = matrix.values.shape[0]
    if n < 2:
        raise TooFewRows(f"standardizer needs at least 2 rows, got {n}")
    values = matrix.values
    means = values.mean(axis=0)
    stds = values.std(axis=0)
    # exact constants: a summed mean can be off by an ulp and std come out ~1e-17
    constant = np.ptp(values, axis=0) == 0
    means[constant] = values[0, constant]
    stds[constant | (stds == 0)] = 1.0
    return Standardizer(means, stds)


def apply_standardizer(std: Standardizer, matrix: FeatureMatrix) -> FeatureMatrix:
    if matrix.values.shape[1] != std.means.shape[0]:
        raise DimensionMismatch(
            f"standardizer fitted on {std.means.shape[0]} columns, matrix has {matrix.values.shape[1]}"
        )
    return FeatureMatrix((matrix.values - std.means) / std.stds, matrix.column_names, matrix.row_sample_ids)


def spectral_columns(column_names: Sequence[str]) -> List[int]:
    return [i for i, c in enumerate(column_names) if parse_wavelength_column(c) is not None]
