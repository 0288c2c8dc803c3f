"""Exception types shared across the package."""


class NetworkError(ValueError):
    """A network file could not be parsed or failed validation."""


class TraceError(ValueError):
    """A trace file could not be parsed or failed validation."""


class MatchError(RuntimeError):
    """A matcher could not produce a path for the given trace."""


class NoCandidateEdge(MatchError):
    pass


class Unreachable(MatchError):
    pass


class NoViableSequence(MatchError):
    pass


class MatchFailure(MatchError):
    """Incremental matching broke at measurement ``index``."""

    def __init__(self, index: int, message: str = ""):
        self.index = index
        super().__init__(message or f"matching failed at measurement {index}")


class ZeroGroundTruth(ValueError):
    pass
