"""Exception hierarchy.

Every error raised on purpose by the library derives from :class:`MaxblowError`
and also from ``ValueError`` so callers that only care about bad input can
catch the builtin.
"""


class MaxblowError(ValueError):
    pass


# -- spaces ------------------------------------------------------------------

class SpaceError(MaxblowError):
    pass


class AxiomViolation(SpaceError):
    """The distance table breaks one of the quasi-metric axioms."""


class ZeroDistanceOffDiagonal(AxiomViolation):
    pass


class NegativeDistance(AxiomViolation):
    pass


class NonzeroDiagonal(AxiomViolation):
    pass


class InvalidPoint(SpaceError):
    pass


class NonpositiveRadius(SpaceError):
    pass


class EmptyWindow(SpaceError):
    pass


class DepthOutOfRange(SpaceError):
    pass


class SizeOutOfRange(SpaceError):
    pass


class AlphaOutOfRange(SpaceError):
    pass


class ParseError(SpaceError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


# -- variable Lebesgue spaces -------------------------------------------------

class NonpositiveTolerance(MaxblowError):
    pass


# -- maximal operator ---------------------------------------------------------

class EmptyBall(MaxblowError):
    pass


class NotIntervalStructured(MaxblowError):
    pass


# -- counterexample pipeline --------------------------------------------------

class PipelineError(MaxblowError):
    pass


class EmptySublevelSet(PipelineError):
    pass


class ReverseDoublingFailure(PipelineError):
    pass


class NoDensityPoint(PipelineError):
    pass


class NoAnnuli(PipelineError):
    pass


class EmptyAnnulusIntersection(PipelineError):
    pass


class SupportExponentTooLarge(PipelineError):
    pass


class DegenerateConstants(PipelineError):
    pass
