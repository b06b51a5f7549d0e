"""Exception types shared across the package."""


class VlaweError(Exception):
    """Base class for errors raised by this package."""


class DataFormatError(VlaweError):
    """A file (embedding table, corpus, codebook, model, dump) could not be parsed.

    Carries the offending path and, when known, the 1-based line number.
    """

    def __init__(self, path, message, line=None):
        self.path = str(path)
        self.line = line
        where = self.path if line is None else f"{self.path}:{line}"
        super().__init__(f"{where}: {message}")


class DimensionMismatchError(VlaweError):
    """Vector or matrix dimensions do not agree with the expected dimension."""
