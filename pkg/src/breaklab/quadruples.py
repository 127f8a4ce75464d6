"""Renormalization-window test quadruples and the admissibility conditions.

For an odd level n the construction pulls the first break back to the
generator pair, centers a window [t0, f^{q_{n-1}}(t0)] on that preimage,
and places four points whose gap pattern is pinned to the window length
and the probe parameter eps.  The second break's preimage selects one of
four cases: inside/outside the eps-neighbourhood, left/right of the
centre.  The outside-right case is the mirror image of the inside-right
one and is flagged as mirrored in reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .circle import Arc, arc_length, circle_distance, frac
from .crossratio import Quadruple
from .errors import BreakOnBoundary, ConstructionOutOfWindow
from .maps import PHomeomorphism
from .partition import (
    DEFAULT_X0,
    build_dynamical_partition,
    middle_point_t0,
    qn_preimage_of_break,
)
from .rotation import rotation_data

__all__ = ["QuadrupleScenario", "construct_test_quadruple",
           "check_conditions_C", "ConditionsCReport"]


@dataclass(frozen=True)
class QuadrupleScenario:
    n: int
    eps: float
    x0: float
    t0: float
    window_length: float          # l([t0, f^{q_{n-1}}(t0)])
    a_bar: float                  # q_n-preimage of the first break
    b_bar: float                  # q_n-preimage of the second break
    l_index: int                  # f^l(a_bar) = first break
    p_index: int                  # f^p(b_bar) = second break
    delta_n: float
    gamma_n: float
    U: Arc
    V: Arc
    case: str                     # in_left | in_right | out_left | out_right
    mirrored: bool                # out_right uses the mirrored construction
    b_active: bool                # second break's preimage inside an edge interval
    quadruple: Quadruple

    @property
    def lifts(self):
        return self.quadruple.lifts


def construct_test_quadruple(f: PHomeomorphism, n: int, eps: float,
                             x0: float = DEFAULT_X0,
                             break_a: float | None = None,
                             break_b: float | None = None,
                             max_retries: int = 8) -> QuadrupleScenario:
    """Build the level-n probe quadruple for the given eps.

    Requires n odd and a map with two nominal break locations (a ratio of 1
    at one of them is fine; it simply never deflects the distortion).
    """
    if n % 2 != 1:
        raise ValueError("construction is set up for odd levels only")
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")
    locs = f.nominal_breaks
    if break_a is None or break_b is None:
        if len(locs) < 2:
            raise ValueError("map must carry two nominal break locations")
        break_a = locs[0] if break_a is None else break_a
        break_b = locs[1] if break_b is None else break_b

    _, cf = rotation_data(f)
    x_try = x0
    last_exc = None
    for _ in range(max_retries):
        try:
            return _construct(f, n, eps, x_try, break_a, break_b, cf)
        except BreakOnBoundary as exc:
            last_exc = exc
            x_try = frac(x_try + 1.3e-3)
    raise last_exc


def _construct(f, n, eps, x0, break_a, break_b, cf):
    part_x0 = build_dynamical_partition(f, x0, n)
    x0 = part_x0.x0
    rec_a = qn_preimage_of_break(part_x0, break_a)
    a_bar = rec_a.preimage
    t0 = middle_point_t0(f, a_bar, n, cf)
    part_t0 = build_dynamical_partition(f, t0, n, nudge=False)
    rec_b = qn_preimage_of_break(part_t0, break_b)
    b_bar = rec_b.preimage

    qn1 = cf.q[n - 1]
    right_end = f.iterate(t0, qn1)
    L = arc_length(t0, right_end)
    t0_hat = t0
    a_hat = t0_hat + arc_length(t0, a_bar)
    if abs(a_hat - (t0_hat + 0.5 * L)) > 1e-9:
        raise BreakOnBoundary("preimage is not centred in the window")

    # lift the second preimage into the window frame
    if part_t0.generator_short.contains(b_bar):
        b_hat = t0_hat - arc_length(b_bar, t0)
    else:
        b_hat = t0_hat + arc_length(t0, b_bar)

    delta = 0.25 * L * math.sqrt(eps)
    gamma = 0.5 * L * eps ** 0.25
    U = Arc(frac(a_hat - delta), frac(a_hat + delta))
    V = Arc(frac(a_hat - gamma), frac(a_hat + gamma))

    left = b_hat < a_hat
    inside = abs(b_hat - a_hat) < delta
    if inside and left:
        case = "in_left"
        lifts = (a_hat - gamma, a_hat, a_hat + 0.25 * L, a_hat + 0.5 * L)
        pts = (frac(lifts[0]), a_bar, frac(lifts[2]), frac(lifts[3]))
    elif inside:
        case = "in_right"
        lifts = (a_hat - 0.5 * L, a_hat - 0.25 * L, a_hat, a_hat + gamma)
        pts = (frac(lifts[0]), frac(lifts[1]), a_bar, frac(lifts[3]))
    elif left:
        case = "out_left"
        lifts = (a_hat - delta, a_hat, a_hat + 0.25 * L, a_hat + 0.5 * L)
        pts = (frac(lifts[0]), a_bar, frac(lifts[2]), frac(lifts[3]))
    else:
        case = "out_right"
        lifts = (a_hat - 0.5 * L, a_hat - 0.25 * L, a_hat, a_hat + delta)
        pts = (frac(lifts[0]), frac(lifts[1]), a_bar, frac(lifts[3]))

    if lifts[0] < t0_hat - 1e-12 or lifts[3] > t0_hat + L + 1e-12:
        raise ConstructionOutOfWindow(
            f"quadruple [{lifts[0]}, {lifts[3]}] exits "
            f"[{t0_hat}, {t0_hat + L}] (n={n} too small for eps={eps})")

    quad = Quadruple(*pts)
    edge_left = Arc(pts[0], pts[1])
    edge_right = Arc(pts[2], pts[3])
    b_active = edge_left.contains(b_bar) or edge_right.contains(b_bar)
    return QuadrupleScenario(
        n=n, eps=eps, x0=x0, t0=t0, window_length=L, a_bar=a_bar,
        b_bar=b_bar, l_index=rec_a.index, p_index=rec_b.index,
        delta_n=delta, gamma_n=gamma, U=U, V=V, case=case,
        mirrored=(case == "out_right"), b_active=b_active, quadruple=quad)


@dataclass(frozen=True)
class ConditionsCReport:
    """Admissibility margins of a quadruple relative to a base point.

    Each margin is (quantity)/(its bound) arranged to be >= 1 on a pass;
    comparisons carry 1e-9 relative slack.  Distances to the base point are
    circle distances (the construction windows are two-sided around x0).
    """

    r1: float
    eps: float
    l12: float
    l23: float
    l34: float
    max_dist_x0: float
    margin_a_low: float
    margin_a_high: float
    margin_b_low: float
    margin_b_high: float
    margin_c: float

    @property
    def pass_a(self) -> bool:
        return min(self.margin_a_low, self.margin_a_high) >= 1.0 - 1e-9

    @property
    def pass_b(self) -> bool:
        return min(self.margin_b_low, self.margin_b_high) >= 1.0 - 1e-9

    @property
    def pass_c(self) -> bool:
        return self.margin_c >= 1.0 - 1e-9

    @property
    def all_pass(self) -> bool:
        return self.pass_a and self.pass_b and self.pass_c

    def margins(self):
        return {"a_low": self.margin_a_low, "a_high": self.margin_a_high,
                "b_low": self.margin_b_low, "b_high": self.margin_b_high,
                "c": self.margin_c}


def check_conditions_C(quadruple, x0: float, r1: float, eps: float) -> ConditionsCReport:
    """Check the three admissibility inequalities and report margins.

    (a) r1^-1 l23 sqrt(eps) <= l12 <= r1 l23 eps^(1/4)
    (b) r1^-1 l23 <= l34 <= r1 l23
    (c) max_i dist(x0, z_i) <= r1 l23
    """
    if isinstance(quadruple, Quadruple):
        lifts = quadruple.lifts
        pts = quadruple.points()
    else:
        lifts = quadruple
        pts = tuple(frac(t) for t in lifts)
    l12 = float(lifts[1] - lifts[0])
    l23 = float(lifts[2] - lifts[1])
    l34 = float(lifts[3] - lifts[2])
    dmax = max(circle_distance(frac(x0), z) for z in pts)
    a_low = l12 / (l23 * math.sqrt(eps) / r1)
    a_high = (r1 * l23 * eps ** 0.25) / l12
    b_low = l34 / (l23 / r1)
    b_high = (r1 * l23) / l34
    c_m = (r1 * l23) / dmax if dmax > 0 else math.inf
    return ConditionsCReport(r1=r1, eps=eps, l12=l12, l23=l23, l34=l34,
                             max_dist_x0=dmax, margin_a_low=a_low,
                             margin_a_high=a_high, margin_b_low=b_low,
                             margin_b_high=b_high, margin_c=c_m)
