"""Compactly supported C^3 bump profiles used for cutoffs and stream functions.

All bumps are built from the degree-7 smoothstep, which has three continuous
derivatives at the joins.  That is enough regularity to differentiate the
flux-carrier velocity twice in space and once in time without distributional
terms, and keeps composite-quadrature errors at the joins small.
"""

from __future__ import annotations

import numpy as np

# s(u) = 35u^4 - 84u^5 + 70u^6 - 20u^7 on [0,1], clamped outside.
_SS7 = np.array([0.0, 0.0, 0.0, 0.0, 35.0, -84.0, 70.0, -20.0])


def _poly_derivative(c, order):
    for _ in range(order):
        c = c[1:] * np.arange(1, len(c))
    return c


_SS7_DERIVS = [_poly_derivative(_SS7, d) for d in range(4)]


def smoothstep7(u, order=0):
    """Degree-7 smoothstep (C^3): 0 for u<=0, 1 for u>=1; derivative `order`<=3."""
    u = np.asarray(u, dtype=float)
    inside = (u > 0.0) & (u < 1.0)
    out = np.zeros_like(u)
    if order == 0:
        out[u >= 1.0] = 1.0
    c = _SS7_DERIVS[order]
    ui = u[inside]
    out[inside] = np.polyval(c[::-1], ui)
    return out


class EdgeBump:
    """1D plateau bump around an interval [lo, hi].

    Equals 1 where the distance to [lo, hi] is <= r_in, 0 where it is
    >= r_out, with a C^3 smoothstep ramp in between.  Derivatives up to
    order 3 are available; they vanish identically on the plateau, so the
    kinks of the distance function at lo and hi are harmless.
    """

    def __init__(self, lo, hi, r_in, r_out):
        if not (0.0 < r_in < r_out):
            raise ValueError(f"need 0 < r_in < r_out, got {r_in}, {r_out}")
        if hi <= lo:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        self.lo, self.hi = float(lo), float(hi)
        self.r_in, self.r_out = float(r_in), float(r_out)
        self._w = self.r_out - self.r_in

    def __call__(self, x, order=0):
        x = np.asarray(x, dtype=float)
        d = np.maximum(np.maximum(self.lo - x, x - self.hi), 0.0)
        # sign of d'(x): -1 left of the interval, +1 right, 0 inside
        sgn = np.where(x < self.lo, -1.0, np.where(x > self.hi, 1.0, 0.0))
        u = (self.r_out - d) / self._w
        if order == 0:
            return smoothstep7(u, 0)
        # d/dx p(d) = p'(d) * d'(x);  u' = -d'/w
        val = smoothstep7(u, order) * (-sgn / self._w) ** order
        return val

    @property
    def support(self):
        return (self.lo - self.r_out, self.hi + self.r_out)

    @property
    def knots(self):
        """Breakpoints between polynomial pieces (for exact quadrature)."""
        return (
            self.lo - self.r_out,
            self.lo - self.r_in,
            self.lo,
            self.hi,
            self.hi + self.r_in,
            self.hi + self.r_out,
        )


class WindowBump:
    """1D bump supported on [lo, hi], rising and falling over fraction `a`."""

    def __init__(self, lo, hi, a=0.35):
        if hi <= lo:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        if not (0.0 < a <= 0.5):
            raise ValueError("ramp fraction must lie in (0, 0.5]")
        self.lo, self.hi = float(lo), float(hi)
        self.a = float(a)
        self._len = self.hi - self.lo

    def __call__(self, x, order=0):
        x = np.asarray(x, dtype=float)
        u = (x - self.lo) / self._len
        a = self.a
        # product of a rising and a falling smoothstep in normalized coords
        if order == 0:
            return smoothstep7(u / a) * smoothstep7((1.0 - u) / a)
        # derivatives via product rule in u, then chain rule to x
        terms = np.zeros_like(u)
        from math import comb

        for j in range(order + 1):
            fj = smoothstep7(u / a, j) / a**j
            gk = smoothstep7((1.0 - u) / a, order - j) * (-1.0 / a) ** (order - j)
            terms += comb(order, j) * fj * gk
        return terms / self._len**order

    @property
    def support(self):
        return (self.lo, self.hi)

    @property
    def knots(self):
        """Breakpoints between smooth analytic pieces."""
        return (
            self.lo,
            self.lo + self.a * self._len,
            self.hi - self.a * self._len,
            self.hi,
        )
