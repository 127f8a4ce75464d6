"""Cross-ratio, cross-ratio distortion, and break-geometry predictions.

All arithmetic runs on lifted vectors (strictly increasing reals), never on
raw circle points.  The distortion of a quadruple under a map composes
multiplicatively along iterates, which the experiment code exploits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circle import arc_length, circle_distance, lift_vector
from .errors import (
    BreakInMiddleInterval,
    DegenerateQuadruple,
    MultipleBreaks,
    NotCircularlyOrdered,
)
from .maps import PHomeomorphism

__all__ = [
    "Quadruple", "BreakGeometry", "cross_ratio", "distortion",
    "distortion_lifts", "g_function", "f_function",
    "break_distortion_prediction", "distortion_chain",
]


@dataclass(frozen=True)
class Quadruple:
    """Four circle points in strict counterclockwise order, with cached lifts."""

    z1: float
    z2: float
    z3: float
    z4: float

    def __post_init__(self):
        pts = (self.z1, self.z2, self.z3, self.z4)
        if len({*pts}) != 4:
            raise DegenerateQuadruple(f"coincident points in {pts}")
        try:
            lifts = lift_vector(pts, base=self.z1)
        except NotCircularlyOrdered as exc:
            raise DegenerateQuadruple(str(exc)) from exc
        object.__setattr__(self, "_lifts", lifts)

    @property
    def lifts(self) -> np.ndarray:
        return self._lifts

    def points(self):
        return (self.z1, self.z2, self.z3, self.z4)


def cross_ratio(lifts) -> float:
    """(z2-z1)(z4-z3) / ((z3-z1)(z4-z2)) for strictly increasing reals."""
    z1, z2, z3, z4 = (float(v) for v in lifts)
    if not z1 < z2 < z3 < z4:
        raise DegenerateQuadruple(f"lifts not strictly increasing: {lifts}")
    return ((z2 - z1) * (z4 - z3)) / ((z3 - z1) * (z4 - z2))


def _as_lifts(q) -> np.ndarray:
    return q.lifts if isinstance(q, Quadruple) else np.asarray(q, dtype=float)


def distortion(q, f: PHomeomorphism) -> float:
    """Cr(f(z1..z4)) / Cr(z1..z4) on lifted vectors."""
    lifts = _as_lifts(q)
    image = np.array([f.eval_lift(t) for t in lifts])
    return cross_ratio(image) / cross_ratio(lifts)


def distortion_lifts(lifts, f: PHomeomorphism):
    """(distortion, image lifts) in one pass, for multiplicative chains."""
    image = np.array([f.eval_lift(t) for t in lifts])
    return cross_ratio(image) / cross_ratio(lifts), image


def distortion_chain(lifts, f: PHomeomorphism, steps: int):
    """Per-step distortions of f along the orbit of a lifted quadruple.

    Returns (factors, trajectory) with trajectory[i] the lifted quadruple
    after i steps; prod(factors) equals the distortion of f^steps up to
    rounding.
    """
    cur = np.asarray(lifts, dtype=float)
    factors = np.empty(steps)
    trajectory = [cur]
    for i in range(steps):
        d, cur = distortion_lifts(cur, f)
        factors[i] = d
        trajectory.append(cur)
    return factors, trajectory


def g_function(x: float, sigma: float) -> float:
    """sigma (1 + x) / (sigma + x); the x -> infinity limit is sigma."""
    if x <= 0.0 or sigma <= 0.0:
        raise ValueError("need x > 0 and sigma > 0")
    return sigma * (1.0 + x) / (sigma + x)


def f_function(x: float, t: float, sigma: float) -> float:
    """[sigma + (1-sigma) t](1 + x) / (sigma + (1-sigma) t + x).

    Interpolates the break position inside the edge interval:
    F(x, 0, s) = G(x, s) and F(x, 1, s) = 1.
    """
    if x <= 0.0 or sigma <= 0.0 or not 0.0 <= t <= 1.0:
        raise ValueError("need x > 0, sigma > 0, t in [0, 1]")
    s = sigma + (1.0 - sigma) * t
    return s * (1.0 + x) / (s + x)


@dataclass(frozen=True)
class BreakGeometry:
    """Gap geometry of a quadruple relative to a break at lift b_lift."""

    alpha: float
    beta: float
    gamma: float
    tau: float
    xi: float
    zeta: float
    eta: float
    vartheta: float
    b_lift: float
    sigma: float
    side: str


def break_distortion_prediction(q: Quadruple, f: PHomeomorphism, b: float):
    """Predicted one-step distortion when the only break sits in an edge interval.

    Returns (predicted, geometry, side) with side "left" for b in [z1, z2]
    and "right" for b in [z3, z4].
    """
    lifts = q.lifts
    z1, z2, z3, z4 = q.points()
    genuine = [bp.location for bp in f.breaks
               if _inside_span(q, bp.location)]
    if len(genuine) > 1:
        raise MultipleBreaks(f"breaks {genuine} inside the quadruple span")

    alpha = lifts[1] - lifts[0]
    beta = lifts[2] - lifts[1]
    gamma = lifts[3] - lifts[2]
    if _in_arc(z1, z2, b):
        side = "left"
        b_lift = lifts[0] + arc_length(z1, b)
    elif _in_arc(z3, z4, b):
        side = "right"
        b_lift = lifts[2] + arc_length(z3, b)
    elif _in_arc(z2, z3, b) and b != z2 and b != z3:
        raise BreakInMiddleInterval(f"break {b} inside the middle interval")
    else:
        raise ValueError(f"break {b} outside the quadruple span")

    tau = lifts[1] - b_lift
    xi = beta / alpha
    zeta = tau / alpha
    eta = beta / gamma
    vartheta = (b_lift - lifts[2]) / gamma
    sigma = f.jump_ratio_at(b)
    geom = BreakGeometry(alpha, beta, gamma, tau, xi, zeta, eta, vartheta,
                         b_lift, sigma, side)
    if side == "left":
        predicted = f_function(xi, min(max(zeta, 0.0), 1.0), sigma)
    else:
        # The right-edge case is the mirror image of the left one, which
        # inverts the jump ratio: a Taylor expansion around the break gives
        # F(eta, theta, 1/sigma), and the residual is linear in the span.
        predicted = f_function(eta, min(max(vartheta, 0.0), 1.0), 1.0 / sigma)
    return predicted, geom, side


def _in_arc(a: float, b: float, x: float) -> bool:
    if x == a or x == b:
        return True
    return arc_length(a, x) <= arc_length(a, b)


def _inside_span(q: Quadruple, x: float) -> bool:
    return arc_length(q.z1, x) <= arc_length(q.z1, q.z4)
