"""Spectra, juice metadata, sensory labels and the canonical CSV format."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import IO, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DuplicateSampleId, MalformedValue, MissingColumn, OutOfRange

ABSORBANCE_FLOOR = -0.05
LABEL_MIN, LABEL_MAX = 0.0, 9.0
SENSORY_ATTRIBUTES = ("astringency", "bitterness", "herbaceous")

METADATA_COLUMNS = (
    "sample_id",
    "juice_id",
    "variety",
    "region",
    "vineyard",
    "block",
    "harvest_type",
    "replicate",
    "tss",
    "ph",
    "ta",
)


@dataclass(frozen=True)
class WavelengthGrid:
    start_nm: int = 200
    end_nm: int = 600
    step_nm: int = 2

    def __post_init__(self) -> None:
        if self.step_nm <= 0 or self.start_nm >= self.end_nm:
            raise ValueError(f"invalid grid {self.start_nm}:{self.end_nm}:{self.step_nm}")
        if (self.end_nm - self.start_nm) % self.step_nm:
            raise ValueError("grid step must divide the wavelength range")

    @property
    def n_points(self) -> int:
        return (self.end_nm - self.start_nm) // self.step_nm + 1

    @property
    def wavelengths(self) -> np.ndarray:
        return np.arange(self.start_nm, self.end_nm + 1, self.step_nm)

    def column_names(self) -> List[str]:
        return [wavelength_column(int(w)) for w in self.wavelengths]

    def index_of(self, wavelength_nm: int) -> int:
        offset = wavelength_nm - self.start_nm
        if offset % self.step_nm or not 0 <= offset // self.step_nm < self.n_points:
            raise ValueError(f"{wavelength_nm} nm is not on the grid")
        return offset // self.step_nm


DEFAULT_GRID = WavelengthGrid()


def wavelength_column(wavelength_nm: int) -> str:
    return f"a{wavelength_nm:04d}"


def parse_wavelength_column(name: str) -> Optional[int]:
    """``"a0204"`` -> 204; anything else -> None."""
    if len(name) == 5 and name[0] == "a" and name[1:].isdigit():
        return int(name[1:])
    return None


@dataclass(frozen=True)
class Spectrum:
    absorbance: Tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "absorbance", tuple(float(a) for a in self.absorbance))
        for i, a in enumerate(self.absorbance):
            if not math.isfinite(a):
                raise ValueError(f"absorbance[{i}] is not finite")
            if a < ABSORBANCE_FLOOR:
                raise ValueError(f"absorbance[{i}]={a} below {ABSORBANCE_FLOOR} AU")

    def __len__(self) -> int:
        return len(self.absorbance)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.absorbance, dtype=float)


@dataclass(frozen=True)
class SampleMetadata:
    juice_id: str
    variety: str = ""
    region: str = ""
    vineyard: str = ""
    block: str = ""
    harvest_type: str = ""
    replicate: Optional[int] = None
    tss: Optional[float] = None
    ph: Optional[float] = None
    ta: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.juice_id:
            raise ValueError("juice_id must be non-empty")
        if self.replicate is not None and self.replicate < 1:
            raise ValueError("replicate must be >= 1")
        if self.ph is not None and not 0.0 < self.ph < 14.0:
            raise ValueError(f"ph={self.ph} outside (0, 14)")
        if self.tss is not None and self.tss < 0:
            raise ValueError(f"tss={self.tss} is negative")
        if self.ta is not None and self.ta < 0:
            raise ValueError(f"ta={self.ta} is negative")


@dataclass(frozen=True)
class SensoryLabels:
    astringency: Optional[float] = None
    bitterness: Optional[float] = None
    herbaceous: Optional[float] = None

    def __post_init__(self) -> None:
        for name in SENSORY_ATTRIBUTES:
            value = getattr(self, name)
            if value is not None and not LABEL_MIN <= value <= LABEL_MAX:
                raise ValueError(f"{name}={value} outside [0, 9]")

    def get(self, name: str) -> Optional[float]:
        return getattr(self, name)


@dataclass(frozen=True)
class Sample:
    sample_id: str
    spectrum: Spectrum
    metadata: SampleMetadata
    labels: SensoryLabels = field(default_factory=SensoryLabels)


@dataclass(frozen=True)
class Dataset:
    grid: WavelengthGrid
    samples: Tuple[Sample, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))
        seen = set()
        for s in self.samples:
            if len(s.spectrum) != self.grid.n_points:
                raise ValueError(
                    f"sample {s.sample_id!r} has {len(s.spectrum)} points, grid has {self.grid.n_points}"
                )
            if s.sample_id in seen:
                raise DuplicateSampleId(f"duplicate sample_id {s.sample_id!r}")
            seen.add(s.sample_id)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def sample_ids(self) -> List[str]:
        return [s.sample_id for s in self.samples]

    def absorbance_matrix(self) -> np.ndarray:
        if not self.samples:
            return np.zeros((0, self.grid.n_points))
        return np.array([s.spectrum.absorbance for s in self.samples], dtype=float)


def group_by_juice(dataset: Dataset) -> Dict[str, List[int]]:
    """Sample indices per juice_id, groups ordered by first appearance."""
    groups: Dict[str, List[int]] = {}
    for i, sample in enumerate(dataset.samples):
        groups.setdefault(sample.metadata.juice_id, []).append(i)
    return groups


# -- CSV --------------------------------------------------------------------


def csv_header(grid: WavelengthGrid = DEFAULT_GRID) -> List[str]:
    return list(METADATA_COLUMNS) + list(SENSORY_ATTRIBUTES) + grid.column_names()


def format_number(value: Optional[float]) -> str:
    if value is None:
        return ""
    return format(float(value), ".6g")


def write_dataset_csv(dataset: Dataset) -> bytes:
    """Serialize to the canonical CSV layout (UTF-8, ``\\n`` line endings)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(csv_header(dataset.grid))
    for s in dataset.samples:
        m = s.metadata
        row = [
            s.sample_id,
            m.juice_id,
            m.variety,
            m.region,
            m.vineyard,
            m.block,
            m.harvest_type,
            "" if m.replicate is None else str(m.replicate),
            format_number(m.tss),
            format_number(m.ph),
            format_number(m.ta),
        ]
        row += [format_number(s.labels.get(name)) for name in SENSORY_ATTRIBUTES]
        row += [format_number(a) for a in s.spectrum.absorbance]
        writer.writerow(row)
    return buf.getvalue().encode("utf-8")


def _number(text: str, row: int, column: str, *, required: bool) -> Optional[float]:
    text = text.strip()
    if not text:
        if required:
            raise MalformedValue("empty cell where a number is required", row, column)
        return None
    try:
        value = float(text)
    except ValueError:
        raise MalformedValue(f"not a number: {text!r}", row, column) from None
    if not math.isfinite(value):
        raise MalformedValue(f"non-finite value {text!r}", row, column)
    return value


def _check_range(value: Optional[float], lo: float, hi: float, row: int, column: str,
                 *, open_interval: bool = False) -> None:
    if value is None:
        return
    bad = not lo < value < hi if open_interval else not lo <= value <= hi
    if bad:
        bounds = f"({lo:g}, {hi:g})" if open_interval else f"[{lo:g}, {hi:g}]"
        raise OutOfRange(f"{value:g} outside {bounds}", row, column)


def parse_dataset_csv(
    source: Union[bytes, str, IO[bytes], IO[str]], grid: WavelengthGrid = DEFAULT_GRID
) -> Dataset:
    """Parse the canonical CSV layout.

    Columns are bound by header name. Any missing required column, unknown
    column, bad cell or duplicate ``sample_id`` aborts the whole parse; rows
    are reported by their 1-based line number (the header is row 1).
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    if text.startswith("\ufeff"):
        text = text[1:]

    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise MissingColumn("file is empty; header required", 1) from None

    expected = csv_header(grid)
    position = {name: i for i, name in enumerate(header)}
    for name in expected:
        if name not in position:
            raise MissingColumn(f"required column {name!r} is absent", 1, name)
    if len(position) != len(header):
        dupes = sorted({h for h in header if header.count(h) > 1})
        raise MalformedValue(f"repeated column(s) {dupes}", 1, dupes[0])
    extra = [h for h in header if h not in set(expected)]
    if extra:
        raise MalformedValue("unexpected column", 1, extra[0])

    wl_columns = grid.column_names()
    samples: List[Sample] = []
    seen: Dict[str, int] = {}
    for line_no, cells in enumerate(reader, start=2):
        if not cells or all(not c.strip() for c in cells):
            continue
        if len(cells) != len(header):
            raise MalformedValue(f"expected {len(header)} cells, found {len(cells)}", line_no)

        def cell(name: str) -> str:
            return cells[position[name]].strip()

        sample_id = cell("sample_id")
        if not sample_id:
            raise MalformedValue("sample_id is empty", line_no, "sample_id")
        if sample_id in seen:
            raise DuplicateSampleId(
                f"sample_id {sample_id!r} already used on row {seen[sample_id]}", line_no, "sample_id"
            )
        seen[sample_id] = line_no
        juice_id = cell("juice_id")
        if not juice_id:
            raise MalformedValue("juice_id is empty", line_no, "juice_id")

        replicate_text = cell("replicate")
        replicate = None
        if replicate_text:
            try:
                replicate = int(replicate_text)
            except ValueError:
                raise MalformedValue(f"not an integer: {replicate_text!r}", line_no, "replicate") from None
            if replicate < 1:
                raise OutOfRange(f"{replicate} < 1", line_no, "replicate")

        tss = _number(cell("tss"), line_no, "tss", required=False)
        ph = _number(cell("ph"), line_no, "ph", required=False)
        ta = _number(cell("ta"), line_no, "ta", required=False)
        _check_range(ph, 0.0, 14.0, line_no, "ph", open_interval=True)
        _check_range(tss, 0.0, math.inf, line_no, "tss")
        _check_range(ta, 0.0, math.inf, line_no, "ta")

        labels = {}
        for name in SENSORY_ATTRIBUTES:
            value = _number(cell(name), line_no, name, required=False)
            _check_range(value, LABEL_MIN, LABEL_MAX, line_no, name)
            labels[name] = value

        absorbance = []
        for name in wl_columns:
            value = _number(cell(name), line_no, name, required=True)
            if value < ABSORBANCE_FLOOR:
                raise OutOfRange(f"{value:g} below {ABSORBANCE_FLOOR} AU", line_no, name)
            absorbance.append(value)

        samples.append(
            Sample(
                sample_id=sample_id,
                spectrum=Spectrum(tuple(absorbance)),
                metadata=SampleMetadata(
                    juice_id=juice_id,
                    variety=cell("variety"),
                    region=cell("region"),
                    vineyard=cell("vineyard"),
                    block=cell("block"),
                    harvest_type=cell("harvest_type"),
                    replicate=replicate,
                    tss=tss,
                    ph=ph,
                    ta=ta,
                ),
                labels=SensoryLabels(**labels),
            )
        )
    return Dataset(grid=grid, samples=tuple(samples))


def read_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        return parse_dataset_csv(fh)


def subset(dataset: Dataset, indices: Sequence[int]) -> Dataset:
    return Dataset(grid=dataset.grid, samples=tuple(dataset.samples[i] for i in indices))
