"""Exceptions raised by weibull-ce."""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from pathlib import Path

    from .estimator import NewtonResult


class WeibullCeError(Exception):
    """Exception to indicate a general weibull-ce error."""


class ModelDomainError(
    WeibullCeError,
):
    """Exception to indicate an input outside the model's domain."""


class InfeasibleObservationError(
    ModelDomainError,
):
    """Exception to indicate an observation failing before the first effective stage."""

    def __init__(self, msg: str, row: int) -> None:
        """Store the offending observation index."""
        super().__init__(msg)
        self.row = row


class QuadratureError(
    WeibullCeError,
):
    """Exception to indicate Gauss-Laguerre quadrature did not converge."""

    def __init__(self, msg: str, estimate: float, error_bound: float) -> None:
        """Store the achieved estimate and its error bound."""
        super().__init__(msg)
        self.estimate = estimate
        self.error_bound = error_bound


class SeriesTruncationError(
    WeibullCeError,
):
    """Exception to indicate a moment series hit its stage cap."""

    def __init__(self, msg: str, partial_sum: float) -> None:
        """Store the partial sum reached."""
        super().__init__(msg)
        self.partial_sum = partial_sum


class NewtonConvergenceError(
    WeibullCeError,
):
    """Exception to indicate the damped Newton iteration failed."""

    def __init__(self, msg: str, result: NewtonResult) -> None:
        """Store the diagnostics with the last iterate."""
        super().__init__(msg)
        self.result = result


class EstimationError(
    WeibullCeError,
):
    """Exception to indicate the likelihood profile could not be computed."""


class SimulationError(
    WeibullCeError,
):
    """Exception to indicate a simulation study produced no usable replicate."""


class DatasetParseError(
    WeibullCeError,
):
    """Exception to indicate a malformed input file."""

    def __init__(self, msg: str, path: Path | str, line: int | None = None) -> None:
        """Store where the problem was found."""
        super().__init__(msg)
        self.path = path
        self.line = line


class ConfigError(
    WeibullCeError,
):
    """Exception to indicate invalid configuration."""
