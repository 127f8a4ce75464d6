"""Dynamical partitions, q_n-smallness, break preimages, middle points.

The level-n partition of a base point x0 consists of the arcs cut by the
first q_n + q_{n-1} orbit points of x0.  Every orbit point is the left
endpoint of exactly one arc, which identifies each arc as an iterate of one
of the two generators; the construction verifies that the combinatorial
successor structure matches, which fails loudly when the rotation number is
not known precisely enough for the requested level.

All endpoints are produced by iterating the analytic map forward from x0;
interval lengths are never accumulated.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .circle import Arc, arc_length, circle_distance, frac
from .errors import (
    BisectionFailed,
    BreakOnBoundary,
    DegenerateGenerator,
    InsufficientRhoPrecision,
)
from .maps import PHomeomorphism
from .rotation import rotation_data

__all__ = [
    "DynamicalPartition", "build_dynamical_partition", "is_qn_small",
    "qn_preimage_of_break", "middle_point_t0", "decay_report",
    "PreimageRecord", "DecayReport", "DEFAULT_X0",
]

DEFAULT_X0 = 0.107  # arbitrary non-special seed


def _rho_gate(f: PHomeomorphism, n: int):
    """Rotation data precise enough to trust level n; raises otherwise."""
    need_depth = n + 1
    rot, cf = rotation_data(f, tol=1e-9)
    if cf.depth < need_depth:
        raise InsufficientRhoPrecision(
            f"continued fraction certified to depth {cf.depth} < {need_depth}")
    gate = 1.0 / (4.0 * cf.q[n + 1] ** 2)
    if rot.error_bound >= gate:
        rot, cf = rotation_data(f, tol=gate / 4.0)
        if cf.depth < need_depth or rot.error_bound >= gate:
            raise InsufficientRhoPrecision(
                f"rotation error {rot.error_bound:.3e} >= gate {gate:.3e} "
                f"for level {n}")
    return rot, cf


@dataclass(frozen=True)
class PreimageRecord:
    """q_n-preimage of a break: f^index(preimage) == break_location."""

    break_location: float
    preimage: float
    index: int
    generator: str  # "long" -> index < q_n, "short" -> index < q_{n-1}


@dataclass(frozen=True)
class DecayReport:
    levels: tuple
    max_lengths: tuple
    fitted_rate: float
    lambda_theoretical: float

    @property
    def within_bound(self) -> bool:
        return self.fitted_rate <= self.lambda_theoretical + 0.05


class DynamicalPartition:
    """Level-n partition of the circle by the orbit of x0.

    For n odd the short generator is [f^{q_n}(x0), x0] and the long one is
    [x0, f^{q_{n-1}}(x0)]; for n even the orientations mirror, recorded in
    ``parity``.
    """

    def __init__(self, f: PHomeomorphism, x0: float, n: int, cf, orbit: np.ndarray):
        self.f = f
        self.x0 = x0
        self.n = n
        self.cf = cf
        self.qn = cf.q[n]
        self.qn1 = cf.q[n - 1]
        self.orbit = orbit  # x0 .. f^(qn+qn1-1)(x0)
        self.parity = "odd" if n % 2 == 1 else "even"
        self._order = np.argsort(orbit)
        self._sorted = orbit[self._order]
        self._verify_structure()

    # interval k (orbit index as left endpoint for odd n): see _arc_for

    def _successor_index(self, k: int) -> int:
        """Orbit index whose point is the right endpoint of interval at k."""
        if self.n % 2 == 1:
            return k + self.qn1 if k < self.qn else k - self.qn
        return k + self.qn if k < self.qn1 else k - self.qn1

    def _kind_index(self, k: int):
        if self.n % 2 == 1:
            return ("long", k) if k < self.qn else ("short", k - self.qn)
        return ("short", k) if k < self.qn1 else ("long", k - self.qn1)

    def _verify_structure(self):
        total = self.qn + self.qn1
        pos = np.empty(total, dtype=np.int64)
        pos[self._order] = np.arange(total)
        for k in range(total):
            succ = self._successor_index(k)
            if self._sorted[(pos[k] + 1) % total] != self.orbit[succ]:
                raise InsufficientRhoPrecision(
                    f"partition combinatorics broken at level {self.n}: "
                    f"orbit point {k} is not followed by {succ}")

    def __len__(self) -> int:
        return self.qn + self.qn1

    def intervals(self):
        """Yield (kind, index, Arc) over all q_n + q_{n-1} intervals."""
        for k in range(len(self)):
            kind, i = self._kind_index(k)
            yield kind, i, Arc(self.orbit[k], self.orbit[self._successor_index(k)])

    def interval(self, kind: str, i: int) -> Arc:
        if self.n % 2 == 1:
            k = i if kind == "long" else self.qn + i
        else:
            k = i if kind == "short" else self.qn1 + i
        return Arc(self.orbit[k], self.orbit[self._successor_index(k)])

    @property
    def generator_long(self) -> Arc:
        return self.interval("long", 0)

    @property
    def generator_short(self) -> Arc:
        return self.interval("short", 0)

    def lengths(self) -> np.ndarray:
        total = len(self)
        return np.array([arc_length(self._sorted[i],
                                    self._sorted[(i + 1) % total])
                         for i in range(total)])

    def max_length(self) -> float:
        return float(self.lengths().max())

    def total_length(self) -> float:
        return float(self.lengths().sum())

    def locate(self, x: float):
        """(kind, index, Arc) of the interval whose interior or left endpoint
        holds x; raises BreakOnBoundary when x sits on an endpoint."""
        total = len(self)
        j = int(np.searchsorted(self._sorted, x, side="right")) - 1
        j %= total
        k = int(self._order[j])
        if x == self.orbit[k] or x == self.orbit[self._successor_index(k)]:
            raise BreakOnBoundary(f"{x} is a partition endpoint at level {self.n}")
        kind, i = self._kind_index(k)
        return kind, i, Arc(self.orbit[k], self.orbit[self._successor_index(k)])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["level", "kind", "index", "left", "right", "length"])
            for kind, i, arc in self.intervals():
                w.writerow([self.n, kind, i, repr(arc.a), repr(arc.b),
                            repr(arc.length())])


def build_dynamical_partition(f: PHomeomorphism, x0: float, n: int,
                              nudge: bool = True,
                              max_nudges: int = 50) -> DynamicalPartition:
    """Level-n dynamical partition of x0.

    Retries with x0 nudged by 1e-3 when a break collides with the orbit
    (within 1e-12) or lands on an interval boundary, unless nudge=False.
    """
    if n < 1:
        raise ValueError("level must be >= 1")
    rot, cf = _rho_gate(f, n)
    total = cf.q[n] + cf.q[n - 1]
    breaks = [b.location for b in f.breaks] + list(f.nominal_breaks)
    x = frac(x0)
    for _ in range(max_nudges if nudge else 1):
        orbit = f.orbit(x, total)
        collision = any(
            min(circle_distance(b, p) for p in orbit) < 1e-12 for b in breaks
        ) if breaks else False
        if not collision:
            gen_len = min(arc_length(x, f.iterate(x, cf.q[n])),
                          arc_length(f.iterate(x, cf.q[n]), x))
            if gen_len < 1e-14:
                raise DegenerateGenerator(
                    f"generator length {gen_len:.3e} at level {n}")
            return DynamicalPartition(f, x, n, cf, orbit)
        if not nudge:
            break
        x = frac(x + 1e-3)
    raise BreakOnBoundary(
        f"could not find a base point clear of break orbits near {x0}")


def is_qn_small(arc: Arc, f: PHomeomorphism, n: int, cf=None) -> bool:
    """Whether f^i(arc), 0 <= i < q_n, have pairwise disjoint interiors.

    Uses the return-time order criterion: the arc must not overrun the
    displacement of f^{q_{n-1}} on the appropriate side.
    """
    if arc.a == arc.b:
        raise ValueError("arc is degenerate")
    if cf is None:
        _, cf = rotation_data(f, tol=1e-9)
        if cf.depth < n:
            raise InsufficientRhoPrecision(f"need continued fraction depth {n}")
    qn1 = cf.q[n - 1]
    pn1 = cf.p[n - 1]

    def disp(x: float) -> float:
        lift = x
        for _ in range(qn1):
            lift = f.eval_lift(lift)
        return lift - x - pn1

    length = arc.length()
    d_left = disp(arc.a)
    if d_left == 0.0:
        raise InsufficientRhoPrecision("f^{q_{n-1}} has a fixed point")
    if d_left > 0.0:
        # image interval sits to the right; arc must not overrun it
        return length <= d_left
    return length <= -disp(arc.b)


def qn_preimage_of_break(partition: DynamicalPartition, b: float) -> PreimageRecord:
    """Pull the break back to the generator pair with analytic inverses."""
    b = frac(b)
    kind, i, _ = partition.locate(b)
    x = b
    for _ in range(i):
        x = partition.f.inverse(x)
    gen = (partition.generator_long if kind == "long"
           else partition.generator_short)
    if not gen.contains(x):
        raise InsufficientRhoPrecision(
            f"pulled-back break {x} missed the {kind} generator")
    return PreimageRecord(break_location=b, preimage=x, index=i, generator=kind)


def middle_point_t0(f: PHomeomorphism, a_bar: float, n: int, cf=None,
                    tol: float = 1e-12) -> float:
    """t0 with a_bar the midpoint of [t0, f^{q_{n-1}}(t0)], by bisection.

    The map t -> (t + fhat^{q_{n-1}}(t))/2 is continuous and strictly
    increasing, so the bracket is refined monotonically.
    """
    if cf is None:
        _, cf = rotation_data(f, tol=1e-9)
    qn1 = cf.q[n - 1]
    pn1 = cf.p[n - 1]
    a_hat = frac(a_bar)

    def midpoint(t: float) -> float:
        lift = t
        for _ in range(qn1):
            lift = f.eval_lift(lift)
        return 0.5 * (t + (lift - pn1))

    hi = a_hat
    m_hi = midpoint(hi)
    if m_hi < a_hat:
        raise BisectionFailed("f^{q_{n-1}} moves the wrong way for this parity")
    step = 2.0 * (m_hi - a_hat) + 1e-12
    lo = hi - step
    guard = 0
    while midpoint(lo) > a_hat:
        step *= 2.0
        lo = hi - step
        guard += 1
        if guard > 60 or step > 0.5:
            raise BisectionFailed("no lower bracket for the middle point")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if midpoint(mid) > a_hat:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-16:
            break
    t0 = 0.5 * (lo + hi)
    if abs(midpoint(t0) - a_hat) > tol:
        raise BisectionFailed(
            f"middle-point residual {abs(midpoint(t0) - a_hat):.3e} > {tol}")
    return frac(t0)


def decay_report(f: PHomeomorphism, x0: float = DEFAULT_X0,
                 n_max: int = 10) -> DecayReport:
    """Per-level max interval lengths with a fitted geometric decay rate."""
    levels = []
    maxima = []
    for n in range(1, n_max + 1):
        part = build_dynamical_partition(f, x0, n)
        levels.append(n)
        maxima.append(part.max_length())
    slope = np.polyfit(levels, np.log(maxima), 1)[0]
    v = f.total_variation_log_df()
    lam = (1.0 + math.exp(-v)) ** -0.5
    return DecayReport(tuple(levels), tuple(maxima), float(math.exp(slope)), lam)
