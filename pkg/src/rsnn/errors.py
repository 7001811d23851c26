"""Exception hierarchy shared by all rsnn modules."""


class RSNNError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(RSNNError, ValueError):
    """An input array or image violates its documented invariants."""


class InvalidParameterError(RSNNError, ValueError):
    """A numeric parameter is out of its admissible range."""


class IngestError(RSNNError, OSError):
    """A raster file could not be read or decoded."""

    def __init__(self, path, reason=""):
        self.path = str(path)
        msg = f"cannot ingest {self.path}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class ContractViolation(RSNNError, RuntimeError):
    """A caller broke an operation's precondition (e.g. updating on a silent trial)."""


class TaxonomyError(RSNNError, ValueError):
    """Inconsistent parentage among category labels."""

    def __init__(self, label, reason):
        self.label = label
        super().__init__(f"taxonomy error at label {label!r}: {reason}")


class ConfigError(RSNNError, ValueError):
    """Missing or malformed level configuration."""


class HarnessError(RSNNError, RuntimeError):
    """Experiment-driver failure (empty training set, missing bundle files, ...)."""


class SplitError(HarnessError):
    """A category cannot be split into train and test halves."""

    def __init__(self, category, count):
        self.category = category
        super().__init__(f"category {category!r} has {count} sample(s); need at least 2 to split")
