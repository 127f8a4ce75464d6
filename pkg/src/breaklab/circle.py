"""Exact-convention arithmetic on the circle [0, 1).

Points are plain floats in [0, 1).  Lifts are plain reals; frac() recovers
the circle point and the integer part counts windings.  All cross-ratio and
partition code works on lifts produced here, never on raw circle points, so
the seam at 0 is handled in exactly one place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DuplicatePoint, NotCircularlyOrdered

__all__ = [
    "frac", "Arc", "arc_length", "circle_distance", "lift_vector",
    "circular_order", "lift_into_window",
]


def frac(t: float) -> float:
    """Fractional part t - floor(t), clamped so the result is never 1.0.

    The clamp guards against floating rounding at the seam: t - floor(t)
    can evaluate to 1.0 for t slightly below an integer.
    """
    x = t - math.floor(t)
    return 0.0 if x >= 1.0 else x


def frac_array(t: np.ndarray) -> np.ndarray:
    x = t - np.floor(t)
    x[x >= 1.0] = 0.0
    return x


@dataclass(frozen=True)
class Arc:
    """Counterclockwise arc from a to b; length([a, a]) == 0."""

    a: float
    b: float

    def length(self) -> float:
        return arc_length(self.a, self.b)

    def contains(self, x: float, closed: bool = True) -> bool:
        """Membership of x in the arc (endpoints included when closed)."""
        if self.a == self.b:
            return closed and x == self.a
        d = arc_length(self.a, x)
        if closed:
            return d <= self.length() and arc_length(self.a, self.b) >= d
        return 0.0 < d < self.length()


def arc_length(a: float, b: float) -> float:
    """Length of the counterclockwise arc from a to b; 0 for a == b."""
    if a == b:
        return 0.0
    return b - a if a < b else 1.0 + b - a


def circle_distance(a: float, b: float) -> float:
    """Shorter of the two arcs between a and b."""
    d = arc_length(a, b)
    return min(d, 1.0 - d)


def lift_into_window(x: float, w0: float) -> float:
    """Lift of circle point x into [w0, w0 + 1)."""
    return w0 + arc_length(frac(w0), x)


def lift_vector(points, base: float) -> np.ndarray:
    """Strictly increasing lifts of circularly ordered points.

    The points must be pairwise distinct and circularly ordered starting at
    ``base``; the returned reals lie in [base, base + 1] and project back to
    the inputs under frac().  Raises NotCircularlyOrdered otherwise.
    """
    b = frac(base)
    lifts = np.array([base + arc_length(b, p) for p in points], dtype=float)
    diffs = np.diff(lifts)
    if np.any(diffs <= 0.0):
        raise NotCircularlyOrdered(
            f"no strictly increasing lift for {list(points)} from base {base}")
    return lifts


def circular_order(z1: float, z2: float, z3: float, z4: float) -> bool:
    """True iff counterclockwise traversal from z1 meets z2, z3, z4 in order."""
    zs = (z1, z2, z3, z4)
    for i in range(4):
        for j in range(i + 1, 4):
            if zs[i] == zs[j]:
                raise DuplicatePoint(f"points {i + 1} and {j + 1} coincide at {zs[i]}")
    d2 = arc_length(z1, z2)
    d3 = arc_length(z1, z3)
    d4 = arc_length(z1, z4)
    return d2 < d3 < d4
