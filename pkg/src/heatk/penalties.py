"""Two-material penalties, their analytic gradients, and the gradient-magnitude mask."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import ScalarField


@dataclass(frozen=True)
class MaterialPair:
    """The two admissible conductivity values, 0 < k_low < k_high."""

    k_low: float
    k_high: float

    def __post_init__(self):
        if not (0.0 < self.k_low < self.k_high < np.inf):
            raise ValueError(f"need 0 < k_low < k_high, got ({self.k_low}, {self.k_high})")

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.k_low + self.k_high)


@dataclass(frozen=True)
class IndicatorPolynomial:
    """Monic quadratic vanishing at both admissible values: p(z) = (z - k_low)(z - k_high)."""

    b: float
    c: float

    @property
    def coefficients(self) -> tuple[float, float, float]:
        """(1, b, c) for p(z) = z**2 + b*z + c."""
        return (1.0, self.b, self.c)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return (z + self.b) * z + self.c

    def derivative(self, z):
        z = np.asarray(z, dtype=float)
        return 2.0 * z + self.b


def indicator_polynomial(pair: MaterialPair) -> IndicatorPolynomial:
    return IndicatorPolynomial(b=-(pair.k_low + pair.k_high), c=pair.k_low * pair.k_high)


def two_well_penalty(K, pair: MaterialPair) -> tuple[float, np.ndarray]:
    """Sum of p(K_i)**2 with its gradient; zero exactly when every entry is admissible."""
    K = np.asarray(K, dtype=float)
    p = indicator_polynomial(pair)
    pk = p(K)
    return float(pk @ pk), 2.0 * pk * p.derivative(K)


@dataclass(frozen=True, eq=False)
class GradientMask:
    """Binary cell mask, 1 where the sampled gradient magnitude exceeds the threshold."""

    b: np.ndarray
    gamma: float
    fraction: float

    def __post_init__(self):
        b = np.asarray(self.b)
        if b.size and not np.isin(b, (0, 1)).all():
            raise ValueError("mask entries must be 0 or 1")
        b = b.astype(np.int8).reshape(-1)
        b.flags.writeable = False
        object.__setattr__(self, "b", b)

    @property
    def size(self) -> int:
        return self.b.size

    @property
    def active_count(self) -> int:
        return int(self.b.sum())


def build_mask(ux: ScalarField, uy: ScalarField, u: ScalarField, fraction: float) -> GradientMask:
    """Threshold the gradient magnitude at fraction * max|u| over the cells.

    The normalizer is the largest absolute temperature sample, with the
    multiplier left fully configurable; callers wanting a gradient-based
    normalizer can fold it into `fraction`. Ties sit outside the mask.
    """
    if not (ux.grid == uy.grid == u.grid):
        raise ValueError("mask input fields must share one grid")
    if fraction <= 0:
        raise ValueError("fraction must be positive")
    gamma = fraction * float(np.max(np.abs(u.values)))
    magnitude = np.hypot(ux.values, uy.values)
    return GradientMask(b=(magnitude > gamma).astype(np.int8), gamma=gamma, fraction=fraction)


def masked_penalty(K, mask: GradientMask, pair: MaterialPair) -> tuple[float, np.ndarray]:
    """Quadratic pull of the masked entries toward k_low; unmasked entries are free."""
    K = np.asarray(K, dtype=float)
    if K.shape != mask.b.shape:
        raise ValueError(f"length mismatch: K has {K.size} entries, mask has {mask.size}")
    dev = mask.b * (K - pair.k_low)
    return float(dev @ dev), 2.0 * dev


def mask_to_field(mask: GradientMask, grid) -> ScalarField:
    """Mask as a 0/1 field for export and visual inspection."""
    return ScalarField(grid, mask.b.astype(float))
