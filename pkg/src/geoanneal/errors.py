"""Exception hierarchy. Every error raised by the package derives from GeoAnnealError."""


class GeoAnnealError(Exception):
    """Base class; ``stage`` names the pipeline stage when known."""

    stage = None

    def with_stage(self, stage):
        self.stage = stage
        return self

    def __str__(self):
        msg = super().__str__()
        return f"[{self.stage}] {msg}" if self.stage else msg


class MissingTable(GeoAnnealError):
    pass


class DivisionByZero(GeoAnnealError):
    pass


class NonFiniteValue(GeoAnnealError):
    pass


class DimensionOverflow(GeoAnnealError):
    pass


class NoConvergence(GeoAnnealError):
    pass


class DegenerateSubspace(GeoAnnealError):
    pass


class AmbiguousOverlap(GeoAnnealError):
    def __init__(self, msg, interval=None, state=None):
        super().__init__(msg)
        self.interval = interval
        self.state = state


class ZeroCurrent(GeoAnnealError):
    pass


class UndefinedAngle(GeoAnnealError):
    pass


class ModelDegeneracy(GeoAnnealError):
    pass


class BadDimension(GeoAnnealError):
    pass


class ZeroGap(GeoAnnealError):
    pass


class StepFailure(GeoAnnealError):
    pass


class MismatchedRuns(GeoAnnealError):
    pass


class ParseError(GeoAnnealError):
    pass


class ValidationError(GeoAnnealError):
    def __init__(self, key, msg):
        super().__init__(f"{key}: {msg}")
        self.key = key
