"""Exception hierarchy shared by all countcurv modules."""


class CountCurvError(Exception):
    """Base class for every error raised by countcurv."""


# complex
class InvalidComplex(CountCurvError, ValueError):
    pass


class AsymmetricAdjacency(InvalidComplex):
    pass


class SelfLoop(InvalidComplex):
    pass


class NonPositiveWeight(InvalidComplex):
    pass


class DegreeBoundExceeded(InvalidComplex):
    pass


class InvalidCell(CountCurvError, IndexError):
    pass


class Unreachable(CountCurvError):
    """Two cells lie in different connected components."""

    def __init__(self, u: int, v: int):
        super().__init__(f"cell {v} is not reachable from cell {u}")
        self.u = u
        self.v = v


class WeightsMissing(CountCurvError):
    pass


class MissingMetadata(CountCurvError):
    pass


class FormatError(CountCurvError, ValueError):
    pass


# lattice
class ExtentTooLarge(CountCurvError, ValueError):
    pass


class UnsupportedDimension(CountCurvError, ValueError):
    pass


class BinomialOverflow(CountCurvError, OverflowError):
    pass


# oracle
class WrongDimension(CountCurvError, ValueError):
    pass


class NonPositiveDensity(CountCurvError, ValueError):
    pass


class GridTooCoarse(CountCurvError, ValueError):
    pass


class BallEscapesDomain(CountCurvError):
    pass


# sampler
class SpecInfeasible(CountCurvError, ValueError):
    pass


class IterationBudgetExceeded(CountCurvError, RuntimeError):
    pass


class DegenerateSites(CountCurvError, ValueError):
    pass


class BoundaryCellLeak(CountCurvError):
    pass


# estimators
class NonPositiveCount(CountCurvError, ValueError):
    pass


# directional
class GeodesicLeftDomain(CountCurvError):
    pass


class ResolutionTooCoarse(CountCurvError, ValueError):
    pass


class SliceTooSmall(CountCurvError):
    pass


class EmptyTube(CountCurvError):
    pass


# harness
class ConfigError(CountCurvError, ValueError):
    pass


class NothingToReport(CountCurvError, ValueError):
    """A report was requested for an empty record list."""
