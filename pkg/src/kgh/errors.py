"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid run configuration.

    Carries the full list of violations so callers can report all of them
    at once instead of failing on the first.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NumericalConsistencyError(RuntimeError):
    """A quantity that should be real/positive/convergent came out otherwise."""


class SnapshotError(ValueError):
    """Base class for snapshot file problems."""


class SnapshotFormatError(SnapshotError):
    """Bad magic or malformed header."""


class SnapshotVersionError(SnapshotError):
    """Snapshot written by an incompatible format version."""


class SnapshotChecksumError(SnapshotError):
    """Header checksum does not match its contents."""


class SnapshotTruncatedError(SnapshotError):
    """Payload shorter than the header promises."""
