class CsrError(Exception):
    """Base class for all errors raised by csrwsn."""


class DisconnectedTopologyError(CsrError):
    def __init__(self, attempts):
        super().__init__(f"disconnected topology after {attempts} attempts")
        self.attempts = attempts


class DegenerateCovarianceError(CsrError):
    pass


class GraphError(CsrError):
    """Malformed graph input, vertex set mismatch, or disconnected graph."""


class PartitionedNetworkError(CsrError):
    def __init__(self, attempts):
        super().__init__(f"partitioned network after {attempts} redraws")
        self.attempts = attempts


class RoutingError(CsrError):
    pass


class UnknownNodeError(CsrError):
    pass


class TrainingDivergedError(CsrError):
    def __init__(self, level):
        super().__init__(f"training diverged at level {level}")
        self.level = level


class ZeroReferenceError(CsrError):
    pass


class ConfigError(CsrError):
    """Invalid configuration; the message names the offending key."""

    def __init__(self, key, constraint):
        super().__init__(f"{key}: {constraint}")
        self.key = key
        self.constraint = constraint


class StageDependencyError(CsrError):
    def __init__(self, stage, path):
        super().__init__(f"missing artifact {path}; run the '{stage}' stage first")
        self.stage = stage
        self.path = path
