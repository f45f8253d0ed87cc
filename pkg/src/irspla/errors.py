"""Exception hierarchy for irspla.

Numerical breakdowns derive from :class:`ArithmeticError`; broken input
contracts derive from :class:`ValueError`, so callers that already catch the
builtin families keep working. Everything also derives from
:class:`IrsplaError` for a single catch-all.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .learning import LearningCurve


class IrsplaError(Exception):
    """Base class of every error raised by irspla."""


# --- numerical --------------------------------------------------------------


class DegenerateProduct(IrsplaError, ArithmeticError):
    """The product of two Gaussians has non-positive precision."""


class SingularConditioning(IrsplaError, ArithmeticError):
    """The observed coordinate of a joint Gaussian has (near) zero variance."""


class NumericalUnderflow(IrsplaError, ArithmeticError):
    """A probit normaliser underflowed even in log space."""


class NegativePredictiveVariance(IrsplaError, ArithmeticError):
    """The predictive radicand ``1 + var`` is not positive."""


class QuadratureFailure(IrsplaError, ArithmeticError):
    """Adaptive quadrature missed its absolute tolerance within the budget."""


class DegenerateConditioning(IrsplaError, ArithmeticError):
    """A conditional probability would divide by a vanishing marginal."""


class ZeroKernelMass(IrsplaError, ArithmeticError):
    """A candidate has no kernel mass over the evaluation pool."""


# --- input contracts --------------------------------------------------------


class GramNotPD(IrsplaError, ValueError):
    """The Gram matrix stayed non positive-definite after jitter escalation."""


class AllFitsFailed(IrsplaError, ValueError):
    """Every hyperparameter grid point failed to fit."""


class DimensionMismatch(IrsplaError, ValueError):
    """Matrix dimensions do not chain."""


class SingularPilot(IrsplaError, ValueError):
    """The pilot matrix is singular or too badly conditioned to invert."""


class LengthMismatch(IrsplaError, ValueError):
    """Paired sequences differ in length."""


class EmptyInput(IrsplaError, ValueError):
    """A sequence that must be non-empty is empty."""


class PoolExhausted(IrsplaError, ValueError):
    """More queries were requested than the unlabeled pool can serve."""


class MissingSweep(IrsplaError, ValueError):
    """A figure was requested from results that lack its sweep dimension."""


class ConfigError(IrsplaError, ValueError):
    """An experiment configuration is malformed.

    Args:
        message: What is wrong.
        line: 1-based line of the offending key in the source file, if known.
        path: Source file name, if known.
    """

    def __init__(self, message: str, line: int | None = None, path: str | None = None) -> None:
        """Build the message with a ``path:line:`` prefix when available."""
        self.line = line
        self.path = path
        prefix = ""
        if path is not None:
            prefix = f"{path}:{line}: " if line is not None else f"{path}: "
        elif line is not None:
            prefix = f"line {line}: "
        super().__init__(prefix + message)


class LoopAborted(IrsplaError, RuntimeError):
    """An active-learning run stopped early; ``curve`` holds what was recorded.

    Args:
        message: Why the run stopped.
        curve: The partial learning curve up to the failure.
    """

    def __init__(self, message: str, curve: LearningCurve) -> None:
        """Keep the partial curve on the exception."""
        super().__init__(message)
        self.curve = curve
