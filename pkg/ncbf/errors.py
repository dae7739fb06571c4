"""Exceptions raised by ncbf.

Every exception carries the process exit code the CLI uses for it:
2 for configuration errors, 3 for missing or unreadable artifacts and
4 for numerical failures.
"""


class NcbfError(Exception):
    exit_code = 4


class ConfigError(NcbfError):
    """Invalid configuration, listing every violation found."""

    exit_code = 2

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("\n".join(f"- {v}" for v in self.violations))


class MissingArtifact(NcbfError):
    exit_code = 3


class IncompleteCodebook(MissingArtifact):
    pass


class CorruptFile(MissingArtifact):
    pass


class IncompatibleVersion(MissingArtifact):
    def __init__(self, what: str, found: int, supported: int):
        self.found = found
        self.supported = supported
        super().__init__(
            f"{what} has format version {found}, only version {supported} "
            f"is supported"
        )


class NumericalError(NcbfError):
    exit_code = 4


class CoincidentUsers(NumericalError):
    pass


class SingularConstraints(NumericalError):
    pass


class ZeroVector(NumericalError):
    pass


class NoRoot(NumericalError):
    pass


class EmptyGrid(NumericalError):
    pass


class SamplingExhausted(NumericalError):
    pass


class NonFiniteLoss(NumericalError):
    pass


class NonFinite(NumericalError):
    pass


class ZeroDesiredGain(NumericalError):
    pass


class OutOfCoverage(NcbfError, ValueError):
    pass


class KMismatch(NcbfError, ValueError):
    pass


class ShapeMismatch(NcbfError, ValueError):
    pass
