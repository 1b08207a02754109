"""Small result containers returned by the quadrature routines."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class QuadResult:
    """Integral value with an a posteriori error estimate.

    ``value`` may be a scalar or a 1-d array when the integrand has several
    components. ``excluded_mass_bound`` bounds what the skipped tube around
    the contact set could contribute; it is zero when nothing was skipped.
    ``tail_estimate`` is a signed estimate of that contribution.
    """

    value: float | np.ndarray
    error_estimate: float | np.ndarray
    cells: int
    excluded_mass_bound: float | np.ndarray = 0.0
    tail_estimate: float | np.ndarray = 0.0
    partial: bool = False
    shells: dict = field(default_factory=dict, repr=False)

    @property
    def upper(self):
        """Value plus error and tail bound, the conservative side for modulars."""
        return self.value + self.error_estimate + self.excluded_mass_bound

    @property
    def extrapolated(self):
        """Value with the signed tube estimate added."""
        return self.value + self.tail_estimate
