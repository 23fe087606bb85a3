"""Exception hierarchy shared by all modules.

Each class carries a short ``code`` string used in report bundles.
"""

from __future__ import annotations


class SodError(Exception):
    code = "error"


class InvalidArgumentError(SodError, ValueError):
    code = "invalid-argument"


class PreconditionError(SodError):
    code = "precondition"


class DegeneratePointError(SodError):
    code = "degenerate-point"


class DegenerateSubspaceError(SodError):
    code = "degenerate-subspace"


class NoNegativeCurvatureError(SodError):
    code = "no-negative-curvature"


class NotCertifiedError(SodError):
    code = "not-certified"


class DescentViolationError(SodError):
    code = "descent-violation"

    def __init__(self, msg: str, loss_before: float, loss_after: float):
        super().__init__(msg)
        self.loss_before = loss_before
        self.loss_after = loss_after


class DivergedError(SodError):
    code = "diverged"

    def __init__(self, msg: str, last_iterate=None, iteration: int = -1):
        super().__init__(msg)
        self.last_iterate = last_iterate
        self.iteration = iteration


class TooLargeError(SodError):
    code = "too-large"
