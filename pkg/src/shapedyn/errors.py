"""Exception types shared by the pipeline modules."""

from __future__ import annotations


class ShapeDynError(ValueError):
    """Base error. Carries where it happened so the CLI can report it."""

    def __init__(self, message, *, module=None, operation=None, item_id=None):
        super().__init__(message)
        self.module = module
        self.operation = operation
        self.item_id = item_id

    def describe(self) -> dict:
        return {
            "error": type(self).__name__,
            "message": str(self),
            "module": self.module,
            "operation": self.operation,
            "input_id": self.item_id,
        }


class DegenerateContourError(ShapeDynError):
    pass


class AntipodalError(ShapeDynError):
    pass


class DegenerateRegressorsError(ShapeDynError):
    pass


class InsufficientDataError(ShapeDynError):
    pass


class ConvergenceError(ShapeDynError):
    """Optimizer gave up; ``last_iterate`` and ``gradient_norm`` describe where."""

    def __init__(self, message, *, last_iterate=None, gradient_norm=None, **kw):
        super().__init__(message, **kw)
        self.last_iterate = last_iterate
        self.gradient_norm = gradient_norm


class SingularCorrelationError(ShapeDynError):
    pass
