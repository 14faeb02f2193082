"""
Exact propagation weights for dx/dt = a*x + f(τ)/3600 over one segment of length T.

For an input f(τ) = f0 + f1*τ the end state is
    x(T) = ρ x(0) + (α f0 + i2 f1) / 3600
with ρ = e^{aT}, α = ∫ e^{a(T-τ)} dτ and i2 = ∫ e^{a(T-τ)} τ dτ.
"""

from dataclasses import dataclass

import numpy as np

from src.core.settings import SECONDS_PER_HOUR

# Below this |aT| the series expansions are used
_SERIES_THRESHOLD = 1e-6


@dataclass(frozen=True)
class SegmentWeights:
    rho: float
    alpha: float
    i2: float
    length: float

    @property
    def beta_start(self) -> float:
        """Weight of the segment's start value for a linearly interpolated input."""
        return self.alpha - self.beta_end

    @property
    def beta_end(self) -> float:
        """Weight of the segment's end value for a linearly interpolated input."""
        return self.i2 / self.length


def segment_weights(a: float, length: float) -> SegmentWeights:
    at = a * length
    rho = float(np.exp(at))
    if abs(at) < _SERIES_THRESHOLD:
        alpha = length * (1.0 + at / 2.0 + at * at / 6.0)
        i2 = length * length * (0.5 + at / 6.0 + at * at / 24.0)
    else:
        alpha = float(np.expm1(at)) / a
        i2 = (alpha - length) / a
    return SegmentWeights(rho=rho, alpha=alpha, i2=i2, length=float(length))


def propagate(x0: float, a: float, length: float, f0, f1=0.0):
    """End state of one segment with affine input power f0 + f1*τ [kW]."""
    w = segment_weights(a, length)
    return w.rho * x0 + (w.alpha * np.asarray(f0) + w.i2 * np.asarray(f1)) / SECONDS_PER_HOUR
