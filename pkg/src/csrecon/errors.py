"""Exception types shared across the file-format and training modules."""


class FileFormatError(Exception):
    """A container file (graymap, measurements, checkpoint) is malformed."""


class DatasetError(Exception):
    """A training dataset directory is missing or empty."""


class NumericalDivergenceError(RuntimeError):
    """A forward pass or training run produced non-finite values."""


class UsageError(Exception):
    """Bad command-line arguments or configuration values."""
