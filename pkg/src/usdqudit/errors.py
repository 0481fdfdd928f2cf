"""Exception hierarchy.

``InfeasibleError`` covers every mathematically impossible request (linearly
dependent states, alphas outside the convex set, extension dimensions that
are too small). The CLI maps it to exit code 2.
"""

from __future__ import annotations

from typing import Any


class InfeasibleError(ValueError):
    """The requested object does not exist for this input."""


class NotDiscriminableError(InfeasibleError):
    """States are linearly dependent, so no unambiguous measurement exists."""


class ClosedFormUnavailableError(InfeasibleError):
    """An analytic shortcut does not apply; fall back to a numeric route."""


class ConvergenceError(RuntimeError):
    """An iterative method stopped before meeting its tolerance.

    The last iterate is attached as ``report`` so callers can inspect it.
    """

    def __init__(self, message: str, report: Any = None) -> None:
        super().__init__(message)
        self.report = report
