"""Exception hierarchy shared across the package."""

from __future__ import annotations


class PGKDError(Exception):
    """Base class for every error raised by this package."""


class CorpusError(PGKDError):
    pass


class RecordError(CorpusError):
    """A dataset record could not be turned into a sample."""

    def __init__(self, index: int, message: str):
        super().__init__(f"record {index}: {message}")
        self.index = index


class UnknownLabel(RecordError):
    def __init__(self, index: int, name: str):
        super().__init__(index, f"unknown label {name!r}")
        self.name = name


class EmptyText(RecordError):
    def __init__(self, index: int = -1):
        super().__init__(index, "empty text")


class MalformedRecord(RecordError):
    pass


class InvalidTaxonomy(CorpusError):
    pass


class InsufficientPool(CorpusError):
    def __init__(self, requested: int, available: int):
        super().__init__(f"requested {requested} samples from a pool of {available}")
        self.requested = requested
        self.available = available


class DegenerateSplit(CorpusError):
    pass


class EmptyDataset(PGKDError):
    pass


class DanglingId(PGKDError):
    def __init__(self, sample_id: int):
        super().__init__(f"no sample with id {sample_id}")
        self.sample_id = sample_id


class TeacherError(PGKDError):
    """Any failure on the teacher side that a retry might fix."""


class TransportError(TeacherError):
    pass


class UnparsableResponse(TeacherError):
    pass


class PoolExhausted(TeacherError):
    def __init__(self, class_name: str):
        super().__init__(f"reserve for class {class_name!r} is exhausted")
        self.class_name = class_name


class EmptyFewShot(PGKDError):
    pass
