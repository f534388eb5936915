"""Polynomial test functions x**m * (1-x)**n that vanish on the vertical edges."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TestFunction:
    """One family member v(x, y) = x**m * (1-x)**n with its flat index r."""

    m: int
    n: int
    r: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("exponents must be >= 1 so v vanishes at x=0 and x=1")

    def value_grad(self, x, y=None):
        """Return (v, dv/dx, dv/dy) at the given points; v does not depend on y."""
        x = np.asarray(x, dtype=float)
        xm = x ** self.m
        om = (1.0 - x) ** self.n
        v = xm * om
        vx = self.m * x ** (self.m - 1) * om - self.n * xm * (1.0 - x) ** (self.n - 1)
        return v, vx, np.zeros_like(v)

    def __call__(self, x, y=None):
        return self.value_grad(x, y)[0]


def enumerate_family(family_size: int) -> list[TestFunction]:
    """All (m, n) with 1 <= m, n <= family_size, in the fixed order r = (m-1)*family_size + n.

    The flat ordering is arbitrary in principle; it is pinned so that assembled
    systems and exported files are reproducible.
    """
    if family_size < 1:
        raise ValueError("family_size must be >= 1")
    return [
        TestFunction(m=m, n=n, r=(m - 1) * family_size + n)
        for m in range(1, family_size + 1)
        for n in range(1, family_size + 1)
    ]
