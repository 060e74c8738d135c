"""Exception hierarchy shared across the toolkit.

Data problems (bad CSV cells, unusable label sets) derive from ``DataError``
so the CLI can map them to exit status 1.
"""

from __future__ import annotations

from typing import Optional


class JuicespecError(Exception):
    """Base class for every error raised by this package."""


class DataError(JuicespecError):
    """Input data cannot be used as given."""


class DatasetError(DataError):
    """CSV ingestion failure, optionally located at a row/column."""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class MissingColumn(DatasetError):
    pass


class MalformedValue(DatasetError):
    pass


class OutOfRange(DatasetError):
    pass


class DuplicateSampleId(DatasetError):
    pass


class ConfigInfeasible(JuicespecError):
    pass


class MissingLabel(DataError):
    pass


class MissingField(DataError):
    pass


class UnknownCategory(DataError):
    """A categorical value at transform time that was not seen when fitting."""


class TooFewRows(DataError):
    pass


class TooFewSamples(DataError):
    pass


class TooFewGroups(DataError):
    pass


class DimensionMismatch(JuicespecError):
    pass


class NonFinite(DataError):
    pass


class SingleClass(DataError):
    pass


class DivergedLoss(JuicespecError):
    pass


class ZeroVariance(DataError):
    pass


class MixedLayout(JuicespecError):
    pass


class KTooLarge(JuicespecError):
    pass
