"""Exception types shared across the package."""


class SkewStreamError(Exception):
    """Base class for all package errors."""


class InvalidSpecError(SkewStreamError, ValueError):
    """A dataset description is malformed or out of range."""


class InvalidConfigError(SkewStreamError, ValueError):
    """A run or balancer configuration is malformed."""


class DataError(SkewStreamError, ValueError):
    """Tuple data violates a precondition (bad group id, truncated file, ...)."""


class ConsistencyError(SkewStreamError, RuntimeError):
    """Internal bookkeeping disagrees with itself; always a bug upstream."""


class StaleMoveError(SkewStreamError, RuntimeError):
    """A move references a group its source thread no longer owns."""


class ExecutionError(SkewStreamError, RuntimeError):
    """A worker failed while executing a batch."""
