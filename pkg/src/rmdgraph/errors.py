"""Exception hierarchy shared by every module."""


class RMDError(Exception):
    """Base class for errors raised by rmdgraph."""


class DataError(RMDError, ValueError):
    """Input data is missing, malformed or violates a precondition."""


class GraphError(RMDError, ValueError):
    """A graph cannot be built or is unsuitable for the requested operation."""


class NumericalError(RMDError, RuntimeError):
    """An iterative solver failed to converge."""


class ConfigError(RMDError, ValueError):
    """A run configuration failed validation."""
