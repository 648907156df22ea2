"""Exception types shared across the package."""


class TransferRankError(Exception):
    """Base class for all errors raised by this package."""


class DataError(TransferRankError):
    """Invalid input data: malformed files, empty corpora, unknown languages."""


class SchemaError(DataError):
    """Feature schema mismatch between a file, a model, or a dataset."""
