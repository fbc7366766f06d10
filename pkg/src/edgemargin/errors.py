"""Exception hierarchy."""


class EdgeMarginError(Exception):
    """Base class for every error raised by this package."""


class NumericalError(EdgeMarginError):
    """A linear-algebra routine could not produce a trustworthy result."""


class SingularMatrix(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class IllConditioned(NumericalError):
    pass


class SingularAtS(NumericalError):
    """The transfer function was evaluated at (or numerically on top of) a pole."""


class DegenerateUpdate(NumericalError):
    """A rank-one update hit a vanishing denominator."""


class AnalysisImpossible(EdgeMarginError):
    """The graph does not support the requested analysis."""


class NoInBranching(AnalysisImpossible):
    pass


class RootNotReachable(AnalysisImpossible):
    pass


class NotAcyclic(AnalysisImpossible):
    pass


class MultipleGloballyReachable(AnalysisImpossible):
    pass


class NotSimpleCycle(AnalysisImpossible):
    pass


class GraphError(EdgeMarginError, ValueError):
    """Invalid graph construction (self-loop, parallel edge, bad weight...)."""


class ParseError(GraphError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
