"""Exception hierarchy shared by all modules."""


class NoveltyError(Exception):
    """Base class for errors raised by novelctl."""


class InvalidArgumentError(NoveltyError, ValueError):
    """Malformed input: wrong shapes, non-finite entries, grid mismatch."""


class DegenerateInputError(NoveltyError, ValueError):
    """An operation needs a nonzero signal and got a zero one."""


class UncontrollableError(NoveltyError):
    """The controllability Gramian is not numerically positive definite."""

    def __init__(self, message, rcond=0.0):
        super().__init__(message)
        self.rcond = rcond


class InfeasibleError(NoveltyError):
    """The energy budget cannot reach the target (existence test failed)."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
