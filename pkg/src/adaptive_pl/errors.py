"""Exception hierarchy shared by the solver and the problem builders."""


class AdaptivePLError(Exception):
    """Base class for every error raised by this package."""


class InfeasibleInput(AdaptivePLError):
    pass


class SubsolverFailure(AdaptivePLError):
    pass


class StepOutOfRange(AdaptivePLError):
    pass


class StepsizeUnderflow(AdaptivePLError):
    """Backtracking ran past ``max_armijo_exponent``.

    Lemma-style finiteness of the Armijo search only fails when the oracles
    are mutually inconsistent (gradient not matching the values).
    """


class NotDeclaredConvex(AdaptivePLError):
    pass


class NonMonotoneDemand(AdaptivePLError):
    pass


class DimensionMismatch(AdaptivePLError):
    pass


class DisconnectedPair(AdaptivePLError):
    pass


class BudgetExceeded(AdaptivePLError):
    """A run stopped on a budget; ``trace`` holds the best iterate so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class IterationBudgetExceeded(BudgetExceeded):
    pass


class StageBudgetExceeded(BudgetExceeded):
    pass
