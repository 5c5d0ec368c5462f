"""Exception hierarchy shared by all micronap modules."""


class MicronapError(Exception):
    pass


class TruncatedHeader(MicronapError):
    """Fewer than the 10 bytes needed for frame control, duration and addr1."""


class UnknownRate(MicronapError):
    pass


class DomainError(MicronapError, ValueError):
    pass


class SleepTooShort(MicronapError, ValueError):
    pass


class ProfileError(MicronapError, ValueError):
    pass


class TraceError(MicronapError):
    """Base for input-file problems (CLI exit code 2)."""


class UnreadableFile(TraceError):
    pass


class NonMonotonicTimestamps(TraceError):
    pass


class ConfigError(MicronapError):
    pass


class InvariantViolation(MicronapError):
    """An internal consistency check failed (CLI exit code 3)."""
