"""Exception hierarchy shared by all modules."""


class SnowflakeError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(SnowflakeError, ValueError):
    """Bad user input: a malformed matrix, an out-of-range parameter, ..."""


class MetricError(ValidationError):
    """A distance matrix that is not a metric."""


class TooFewPoints(MetricError):
    def __init__(self, n):
        self.n = n
        super().__init__(f"a metric space needs at least 2 points, got {n}")


class NonzeroDiagonal(MetricError):
    def __init__(self, i, value):
        self.i = i
        super().__init__(f"dist[{i}][{i}] = {float(value)!r} is not zero")


class AsymmetricEntry(MetricError):
    def __init__(self, i, j, a, b):
        self.i, self.j = i, j
        super().__init__(f"matrix is not symmetric: dist[{i}][{j}] = {float(a)!r} but dist[{j}][{i}] = {float(b)!r}")


class NegativeOrZeroOffDiagonal(MetricError):
    def __init__(self, i, j, value):
        self.i, self.j = i, j
        super().__init__(f"dist[{i}][{j}] = {float(value)!r} must be positive for distinct points")


class TriangleViolation(MetricError):
    def __init__(self, i, j, k, excess):
        self.i, self.j, self.k = i, j, k
        super().__init__(
            f"triangle inequality fails: d({i},{k}) exceeds d({i},{j}) + d({j},{k}) by {excess:.3g}"
        )


class AlphaOutOfRange(ValidationError):
    pass


class InvalidUniform(ValidationError):
    pass


class BetaOutOfRange(ValidationError):
    pass


class UncoveredPoint(SnowflakeError):
    """Net and radii fail to cover the space (a caller bug)."""

    def __init__(self, index):
        self.index = index
        super().__init__(f"point {index} is not covered by any ball of the carve")


class EpsilonOutOfRange(ValidationError):
    pass


class ThetaOutOfRange(ValidationError):
    pass


class KTooSmall(ValidationError):
    pass


class InvariantViolation(SnowflakeError, AssertionError):
    """A property that holds by construction failed; indicates a bug."""


class UpperMinViolation(InvariantViolation):
    def __init__(self, pair, scale, coordinate, excess):
        self.pair, self.scale, self.coordinate = pair, scale, coordinate
        super().__init__(
            f"per-scale Hoelder bound violated for pair {pair} at scale {scale}, "
            f"coordinate {coordinate} (excess {excess:.3g})"
        )


class BudgetExhausted(SnowflakeError):
    """Resampling budget ran out before every certification event held."""

    def __init__(self, result, report):
        self.result, self.report = result, report
        failing = sum(1 for ok in report.event_passed if not ok)
        super().__init__(
            f"resample budget of {report.budget} exhausted with {failing} failing events"
        )


class DegenerateImage(SnowflakeError):
    def __init__(self, pair):
        self.pair = pair
        super().__init__(f"distinct points {pair} are mapped to the same vector")


class InvalidQ(ValidationError):
    pass


class DegenerateQ(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class ThetaNonpositive(ValidationError):
    pass


class KernelNotPSD(SnowflakeError):
    def __init__(self, min_eig, tol, witness):
        self.min_eig, self.tol, self.witness = min_eig, tol, witness
        super().__init__(
            f"Gram kernel has eigenvalue {min_eig:.3e} below tolerance -{tol:.3e}"
        )


class MTooLarge(ValidationError):
    pass
