"""Exception and warning classes shared across the package."""


class AgmonLabError(Exception):
    """Base class for all errors raised by agmonlab."""


class GraphError(AgmonLabError, ValueError):
    pass


class NonPositiveMeasure(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class AsymmetricInput(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class NegativeWeight(GraphError):
    pass


class SizeOverflow(GraphError):
    pass


class BadParams(GraphError):
    pass


class EmptySubset(GraphError):
    pass


# Same condition under the name used by the metric and operator layers.
EmptySet = EmptySubset


class ParseError(GraphError):
    def __init__(self, message, *, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.field = field


class GraphMismatch(AgmonLabError, ValueError):
    pass


class NonPositiveWeight(AgmonLabError, ValueError):
    pass


class NegativeLength(AgmonLabError, ValueError):
    pass


class NoOrigin(AgmonLabError, ValueError):
    pass


class NonPositiveSupersolution(AgmonLabError, ValueError):
    pass


class BadExponent(AgmonLabError, ValueError):
    pass


class NonPositiveGap(AgmonLabError, ValueError):
    pass


class NotNested(AgmonLabError, ValueError):
    pass


class SizeGuard(AgmonLabError, ValueError):
    pass


class EmptyComplement(AgmonLabError, ValueError):
    pass


class SolverFailure(AgmonLabError, RuntimeError):
    pass


class NearSingular(SolverFailure):
    pass


class SupportViolation(AgmonLabError, ValueError):
    pass


class InsufficientExhaustion(AgmonLabError, ValueError):
    pass


class HypothesisFailed(AgmonLabError):
    """A theorem's hypothesis did not hold on the given inputs.

    ``check`` names the failing hypothesis and ``report`` carries its
    VerificationReport when one was produced.
    """

    def __init__(self, check, report=None, message=None):
        self.check = check
        self.report = report
        if message is None:
            message = f"hypothesis {check!r} failed"
            if report is not None:
                message += f": lhs={report.lhs:.6g} rhs={report.rhs:.6g} margin={report.margin:.3g}"
        super().__init__(message)


class EikonalFailed(HypothesisFailed):
    def __init__(self, report=None, message=None):
        super().__init__("eikonal", report, message)


class ConfigError(AgmonLabError, ValueError):
    pass


class PositivityHypothesisFailed(UserWarning):
    """Warned when h >= 0 off K does not hold; results are still returned."""


class GeneralPotentialWarning(UserWarning):
    """Warned when the supersolution construction is applied with q != 0."""
