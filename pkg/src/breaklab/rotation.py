"""Rotation numbers, continued fractions, and tuning to a target rotation.

The rotation number is bracketed between rationals by Stern-Brocot mediant
refinement: for a map with no periodic orbit the sign of fhat^q(0) - p is
constant in the starting point and decides whether rho is above or below
p/q, and the mediant path turns exactly at the continued-fraction
convergents.  Periodic orbits are detected by return-value stagnation and
yield the rotation number as an exact rational.

Target rotation numbers for experiments are quadratic irrationals whose
partial quotients are known exactly, so convergent denominators stay exact
integers at any depth and tuning brackets stay honest at double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from . import _kernels as K
from .errors import BracketNotFound, BudgetExceeded
from .maps import PHomeomorphism

__all__ = [
    "RotationNumber", "ContinuedFraction", "RotationTarget",
    "GOLDEN_MEAN", "SILVER_MEAN", "rotation_number", "continued_fraction",
    "tune_to_target_rho", "rotation_data", "quotient_bound_report",
]

_LOCK_TOL = 1e-13  # tie-break: orbit declared periodic below this defect


@dataclass(frozen=True)
class RotationNumber:
    value: float
    error_bound: float
    method: str  # "convergent-bracketing" | "orbit-average"
    bracket: tuple | None = None  # ((lo_p, lo_q), (hi_p, hi_q))
    rational: bool = False


@dataclass(frozen=True)
class RotationTarget:
    """Quadratic irrational with an exactly known periodic quotient pattern."""

    name: str
    value: float
    pattern: tuple  # periodic partial-quotient pattern, e.g. (1,)

    def quotient(self, n: int) -> int:
        return self.pattern[(n - 1) % len(self.pattern)]

    def convergents(self, depth: int):
        """Exact integer convergents p_1/q_1 .. p_depth/q_depth."""
        p = [0, 1]
        q = [1, self.quotient(1)]
        for n in range(2, depth + 1):
            k = self.quotient(n)
            p.append(k * p[-1] + p[-2])
            q.append(k * q[-1] + q[-2])
        return p, q

    def continued_fraction(self, depth: int = 40) -> "ContinuedFraction":
        return ContinuedFraction([self.quotient(n) for n in range(1, depth + 1)])


GOLDEN_MEAN = RotationTarget("golden", (math.sqrt(5.0) - 1.0) / 2.0, (1,))
SILVER_MEAN = RotationTarget("silver", math.sqrt(2.0) - 1.0, (2,))

NAMED_TARGETS = {"golden": GOLDEN_MEAN, "silver": SILVER_MEAN}


@dataclass
class ContinuedFraction:
    """Partial quotients with exact integer convergents.

    Convention: q_0 = 1, q_1 = k_1, q_{n+1} = k_{n+1} q_n + q_{n-1} and
    p_0 = 0, p_1 = 1, same recursion; p_n/q_n = [k_1, ..., k_n].
    """

    quotients: list
    terminated_rational: bool = False
    p: list = field(init=False)
    q: list = field(init=False)

    def __post_init__(self):
        p = [0, 1]
        q = [1]
        if self.quotients:
            q.append(self.quotients[0])
        for k in self.quotients[1:]:
            p.append(k * p[-1] + p[-2])
            q.append(k * q[-1] + q[-2])
        self.p = p[: len(q)]
        self.q = q

    @property
    def depth(self) -> int:
        return len(self.quotients)

    def convergent(self, n: int) -> Fraction:
        return Fraction(self.p[n], self.q[n])

    @classmethod
    def from_value(cls, rho: float, depth: int = 40, eps: float = 1e-12):
        """Gauss-map expansion of a float in (0, 1)."""
        if not 0.0 < rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        ks = []
        x = rho
        terminated = False
        for _ in range(depth):
            if x < eps:
                terminated = True
                break
            inv = 1.0 / x
            k = math.floor(inv)
            if k >= 1e15:
                terminated = True
                break
            ks.append(int(k))
            x = inv - k
        return cls(ks, terminated_rational=terminated)

    @classmethod
    def from_fraction(cls, p: int, q: int):
        """Exact Euclid expansion of p/q in (0, 1)."""
        if not 0 < p < q:
            raise ValueError("need 0 < p/q < 1")
        ks = []
        a, b = q, p
        while b:
            ks.append(a // b)
            a, b = b, a % b
        return cls(ks, terminated_rational=True)


def continued_fraction(rho, depth: int = 40) -> ContinuedFraction:
    """Continued fraction of rho (float, Fraction, or RotationTarget)."""
    if depth > 40:
        raise ValueError("depth capped at 40: convergent gaps underflow doubles")
    if isinstance(rho, RotationTarget):
        return rho.continued_fraction(depth)
    if isinstance(rho, Fraction):
        return ContinuedFraction.from_fraction(rho.numerator, rho.denominator)
    return ContinuedFraction.from_value(float(rho), depth)


@dataclass(frozen=True)
class QuotientBoundReport:
    depth: int
    max_odd: int
    max_even: int

    @property
    def in_m_odd(self) -> bool:
        """Bounded odd-indexed quotients over the computed depth."""
        return True  # finite depth is always bounded; the bound is max_odd

    def __str__(self):
        return (f"quotients to depth {self.depth}: "
                f"max odd k = {self.max_odd}, max even k = {self.max_even}")


def quotient_bound_report(cf: ContinuedFraction) -> QuotientBoundReport:
    odd = [k for i, k in enumerate(cf.quotients) if i % 2 == 0]  # k_1, k_3, ...
    even = [k for i, k in enumerate(cf.quotients) if i % 2 == 1]
    return QuotientBoundReport(cf.depth, max(odd, default=0), max(even, default=0))


# -- rotation number measurement ------------------------------------------------


def _displacement(joints, coefs, p, q, x):
    xf = x - math.floor(x)
    if xf >= 1.0:
        xf = 0.0
    return K.lift_iterate_minus(xf, q, p, joints, coefs)


def _refine_extremum(joints, coefs, p, q, a, b, want_max, iters=90):
    """Golden-section search for an extremum of the displacement on [a, b]."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc = _displacement(joints, coefs, p, q, c)
    fd = _displacement(joints, coefs, p, q, d)
    for _ in range(iters):
        take_c = (fc > fd) if want_max else (fc < fd)
        if take_c:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = _displacement(joints, coefs, p, q, c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = _displacement(joints, coefs, p, q, d)
        if b - a < 1e-16:
            break
    return max(fc, fd) if want_max else min(fc, fd)


def _probe_lock(joints, coefs, p: int, q: int, grid: int = 128):
    """Detect rho == p/q: the displacement fhat^q(x) - x - p changes sign or
    has a tangential zero, certifying a periodic orbit.  Tangential zeros
    (plateau edges, e.g. a map tuned to have a fixed point) are resolved by
    refining the one-signed extremum."""
    ds = [_displacement(joints, coefs, p, q, i / grid) for i in range(grid)]
    dmin, dmax = min(ds), max(ds)
    if dmin < _LOCK_TOL and dmax > -_LOCK_TOL:
        return True
    if dmax <= -_LOCK_TOL:
        i = ds.index(dmax)
        ref = _refine_extremum(joints, coefs, p, q,
                               (i - 1) / grid, (i + 1) / grid, want_max=True)
        return ref > -_LOCK_TOL
    if dmin >= _LOCK_TOL:
        i = ds.index(dmin)
        ref = _refine_extremum(joints, coefs, p, q,
                               (i - 1) / grid, (i + 1) / grid, want_max=False)
        return ref < _LOCK_TOL
    return False


def rotation_number(f: PHomeomorphism, tol: float = 1e-10,
                    max_steps: int = 10 ** 7) -> RotationNumber:
    """Rotation number with certified error bound at most tol.

    Brackets rho between Stern-Brocot neighbours by the sign of
    fhat^q(0) - p, detecting periodic orbits exactly; falls back to the
    orbit average (fhat^N(0))/N inside the BudgetExceeded error if the
    step budget runs out first.
    """
    if tol < 1e-15:
        raise ValueError("tol below double resolution")
    joints, coefs, _ = f.kernel_data()
    lo_p, lo_q = 0, 1
    hi_p, hi_q = 1, 1
    steps = 0
    run = 0          # consecutive same-side refinements
    run_side = 0

    def result():
        lo = lo_p / lo_q
        hi = hi_p / hi_q
        return RotationNumber(value=(lo + hi) / 2.0, error_bound=(hi - lo) / 2.0,
                              method="convergent-bracketing",
                              bracket=((lo_p, lo_q), (hi_p, hi_q)))

    while True:
        width = 1.0 / (lo_q * hi_q)
        if width <= tol:
            return result()
        m_p, m_q = lo_p + hi_p, lo_q + hi_q
        if steps + m_q > max_steps:
            n_avg = min(10 ** 6, max_steps)
            avg = K.orbit_average_displacement(0.0, n_avg, joints, coefs)
            raise BudgetExceeded(
                f"rotation bracketing exceeded {max_steps} steps at width {width:.3e}",
                bracket=((lo_p, lo_q), (hi_p, hi_q)),
                estimate=RotationNumber(value=avg, error_bound=width,
                                        method="orbit-average",
                                        bracket=((lo_p, lo_q), (hi_p, hi_q))))
        u = K.lift_iterate_minus(0.0, m_q, m_p, joints, coefs)
        steps += m_q
        if abs(u) < _LOCK_TOL:
            return RotationNumber(value=m_p / m_q, error_bound=_LOCK_TOL,
                                  method="convergent-bracketing",
                                  bracket=((m_p, m_q), (m_p, m_q)), rational=True)
        side = 1 if u > 0.0 else -1
        if side == run_side:
            run += 1
        else:
            run, run_side = 1, side
        if run >= 25:
            # one endpoint is static; rho may equal it exactly
            p_s, q_s = (hi_p, hi_q) if side > 0 else (lo_p, lo_q)
            steps += 128 * q_s
            if _probe_lock(joints, coefs, p_s, q_s):
                return RotationNumber(value=p_s / q_s, error_bound=_LOCK_TOL,
                                      method="convergent-bracketing",
                                      bracket=((p_s, q_s), (p_s, q_s)), rational=True)
            run = 0
        if side > 0:
            lo_p, lo_q = m_p, m_q
        else:
            hi_p, hi_q = m_p, m_q


def verify_bracket(f: PHomeomorphism, rot: RotationNumber) -> bool:
    """Independent recheck of the bracket side conditions."""
    if rot.bracket is None:
        return False
    joints, coefs, _ = f.kernel_data()
    (lo_p, lo_q), (hi_p, hi_q) = rot.bracket
    if rot.rational:
        return True
    ok_lo = lo_p == 0 or K.lift_iterate_minus(0.0, lo_q, lo_p, joints, coefs) > 0
    ok_hi = (hi_p, hi_q) == (1, 1) or K.lift_iterate_minus(0.0, hi_q, hi_p, joints, coefs) < 0
    return bool(ok_lo and ok_hi)


# -- comparison against a quadratic-irrational target and offset tuning -----------


def compare_to_target(f: PHomeomorphism, target: RotationTarget,
                      tol: float, q_budget: int = 10 ** 8) -> int:
    """-1, +1, or 0 (undecided within tol) for rho(f) versus target.

    Walks the target's exact convergents; odd convergents lie above the
    target and even ones below, so one decisive sign test settles the
    comparison.  Undecided means |rho(f) - target| <= tol.
    """
    joints, coefs, _ = f.kernel_data()
    p_prev, q_prev = 0, 1
    p_cur, q_cur = 1, target.quotient(1)
    n = 1
    while True:
        u = K.lift_iterate_minus(0.0, q_cur, p_cur, joints, coefs)
        odd = n % 2 == 1
        if abs(u) < _LOCK_TOL:
            return 1 if odd else -1  # rho equals a convergent, which brackets target
        if odd and u > 0.0:
            return 1
        if not odd and u < 0.0:
            return -1
        n += 1
        k = target.quotient(n)
        p_prev, p_cur = p_cur, k * p_cur + p_prev
        q_prev, q_cur = q_cur, k * q_cur + q_prev
        if 1.0 / (q_prev * q_cur) <= tol or q_cur > q_budget:
            return 0


def tune_to_target_rho(descriptor, target: RotationTarget, tol: float = 1e-9,
                       q_budget: int = 10 ** 8, max_bisections: int = 200):
    """Map from the offset family with |rho - target| <= tol.

    Bisects the offset; each candidate is compared to the target through
    exact periodic-orbit sign tests at the target's convergents, so the
    bracket is guaranteed correct.  The returned map carries certified
    rotation data (target value, error bound, exact continued fraction).
    """
    if isinstance(target, (int, Fraction)) or (isinstance(target, float)):
        raise ValueError("target must be a RotationTarget (irrational surrogate)")

    def decide(t):
        return compare_to_target(descriptor.with_offset(t).build(), target,
                                 tol, q_budget)

    t_lo, t_hi = -1.0, 1.0
    d_lo = decide(t_lo)
    d_hi = decide(t_hi)
    if d_lo == 0:
        t_hi = t_lo
    elif d_hi == 0:
        t_lo = t_hi
    elif d_lo > 0 or d_hi < 0:
        raise BracketNotFound(
            f"family cannot reach {target.name} on offset range [-1, 1]")
    else:
        for _ in range(max_bisections):
            mid = 0.5 * (t_lo + t_hi)
            d = decide(mid)
            if d == 0:
                t_lo = t_hi = mid
                break
            if d < 0:
                t_lo = mid
            else:
                t_hi = mid
            if t_hi - t_lo < 1e-15:
                raise BracketNotFound(
                    f"offset bisection exhausted double precision before "
                    f"reaching tolerance {tol}")
        else:
            raise BracketNotFound("bisection budget exhausted")

    f = descriptor.with_offset(t_lo).build()
    # certified error: undecided through the convergent ladder down to tol
    bound = _undecided_bound(target, tol, q_budget)
    f._rotation_cache = (
        RotationNumber(value=target.value, error_bound=bound,
                       method="convergent-bracketing"),
        target.continued_fraction(40),
        target,
    )
    return f


def _undecided_bound(target: RotationTarget, tol: float, q_budget: int) -> float:
    """Bracket width at the depth where compare_to_target stops refining."""
    _, q = target.convergents(90)
    for n in range(2, len(q)):
        if 1.0 / (q[n - 1] * q[n]) <= tol or q[n] > q_budget:
            return 1.0 / (q[n - 1] * q[n])
    return tol


def rotation_data(f: PHomeomorphism, tol: float = 1e-9, depth: int = 40):
    """(RotationNumber, ContinuedFraction) with certified quotients.

    Tuned maps carry exact target data; otherwise the rotation number is
    measured and the continued fraction is the common Euclid prefix of the
    bracket endpoints, which certifies every quotient it keeps.
    """
    cache = getattr(f, "_rotation_cache", None)
    if cache is not None and cache[0].error_bound <= tol:
        return cache[0], cache[1]
    rot = rotation_number(f, tol=tol)
    if rot.rational:
        (p, q), _ = rot.bracket
        cf = (ContinuedFraction.from_fraction(p, q) if p > 0
              else ContinuedFraction([], terminated_rational=True))
    else:
        (lp, lq), (hp, hq) = rot.bracket
        cf_lo = (ContinuedFraction.from_fraction(lp, lq) if lp > 0
                 else ContinuedFraction([]))
        cf_hi = ContinuedFraction.from_fraction(hp, hq)
        common = []
        for a, b in zip(cf_lo.quotients, cf_hi.quotients):
            if a != b:
                break
            common.append(a)
        if common:
            common.pop()  # final shared digit can disagree with the interior
        cf = ContinuedFraction(common[:depth])
    f._rotation_cache = (rot, cf, None)
    return rot, cf
