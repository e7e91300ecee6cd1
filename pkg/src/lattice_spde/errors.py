"""Exception hierarchy shared by the library and the CLI."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np


class LatticeSpdeError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ConfigurationError(LatticeSpdeError, ValueError):
    """Invalid parameters, gates or config documents."""

    exit_code = 2


class ModelError(ConfigurationError):
    """A correlation model that cannot define the noise."""


class DomainError(LatticeSpdeError, ValueError):
    """A point outside the unit cube."""

    exit_code = 2


class GridIndexError(LatticeSpdeError, IndexError):
    """A multi-index outside the interior index set."""

    exit_code = 2


class NumericalError(LatticeSpdeError):
    """A computation that produced no usable number."""

    exit_code = 3


class SamplerError(NumericalError):
    """Gaussian sampling failed (covariance not PSD, embedding failure)."""


class NonConvergenceError(NumericalError):
    """The fixed-point iteration hit max_iter."""

    def __init__(
        self,
        message: str,
        residual_history: Sequence[float],
        partial: Optional[np.ndarray] = None,
    ) -> None:
        super().__init__(message)
        self.residual_history = list(residual_history)
        self.partial = partial
