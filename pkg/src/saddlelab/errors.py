"""Exception hierarchy shared by all modules."""


class SaddleLabError(Exception):
    """Base class for every error raised by the package."""


class ZeroVector(SaddleLabError, ValueError):
    pass


class NearChartBoundary(SaddleLabError, ValueError):
    pass


class DegreeMismatch(SaddleLabError, ValueError):
    pass


class DegenerateParameter(SaddleLabError, ValueError):
    pass


class DegenerateMap(SaddleLabError, ValueError):
    pass


class DegreeUnsupported(SaddleLabError, ValueError):
    pass


class SolverDivergence(SaddleLabError, RuntimeError):
    """Preimage solver failed; ``partial`` holds whatever was recovered."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial or []


class BranchBudgetExceeded(SaddleLabError, ValueError):
    pass


class GridTooCoarse(SaddleLabError, RuntimeError):
    pass


class EmptySlice(SaddleLabError, ValueError):
    pass


class ChartBreakdown(SaddleLabError, RuntimeError):
    pass


class NoPreimageInRegion(SaddleLabError, RuntimeError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class DegenerateSplitting(SaddleLabError, RuntimeError):
    pass


class FrameNotFound(SaddleLabError, RuntimeError):
    pass


class GraphEscapesBox(SaddleLabError, RuntimeError):
    def __init__(self, message, samples=None):
        super().__init__(message)
        self.samples = samples


class NewtonDivergence(SaddleLabError, RuntimeError):
    pass


class PreconditionError(SaddleLabError, ValueError):
    pass


class NoTransversalIntersection(SaddleLabError, RuntimeError):
    pass


class SeedBudgetExceeded(SaddleLabError, RuntimeError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial or []


class UnsupportedMap(SaddleLabError, ValueError):
    pass


class MassMismatch(SaddleLabError, ValueError):
    pass


class ConfigError(SaddleLabError, ValueError):
    pass


class NeutralAmbiguous(SaddleLabError, ValueError):
    """A multiplier modulus lies within the neutral band around 1."""
