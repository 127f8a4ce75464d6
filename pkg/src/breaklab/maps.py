"""Circle homeomorphisms with derivative breaks.

A map is a cyclic chain of closed-form pieces (affine or Moebius), each
strictly increasing, meeting continuously at the joints.  Both the pieces
and their inverses are closed-form, so backward iteration is exact and
second derivatives exist off the joints by construction.

Every piece is stored as a row (A, B, C, D) of the fractional-linear form
t -> (A t + B)/(C t + D) on a lift interval; affine pieces are the C = 0
case.  Composition of pieces is 2x2 matrix multiplication, which is what
``compose_closed_form`` and ``conjugate_map`` exploit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from .circle import arc_length, circle_distance, frac
from .errors import (
    InfeasibleDescriptor,
    InvalidMap,
    IterationBudgetExceeded,
    NotABreakPoint,
)

__all__ = [
    "MapPiece", "BreakPoint", "PHomeomorphism", "MapDiagnostics",
    "RigidRotation", "TwoBreakPL", "TwoBreakMoebius", "OneBreakMoebius",
    "build_family", "affine_piece", "moebius_piece",
    "compose_closed_form", "conjugate_map", "c1_moebius_twist",
]

_BREAK_REL_TOL = 1e-12


@dataclass(frozen=True)
class MapPiece:
    """One closed-form increasing piece on a lift interval [lo, hi]."""

    lo: float
    hi: float
    mat: tuple  # (A, B, C, D), det > 0

    @property
    def kind(self) -> str:
        return "affine" if self.mat[2] == 0.0 else "moebius"

    def value(self, t: float) -> float:
        a, b, c, d = self.mat
        return (a * t + b) / (c * t + d)

    def deriv(self, t: float) -> float:
        a, b, c, d = self.mat
        den = c * t + d
        return (a * d - b * c) / (den * den)

    def deriv2(self, t: float) -> float:
        a, b, c, d = self.mat
        den = c * t + d
        return -2.0 * c * (a * d - b * c) / (den * den * den)

    def inverse(self, y: float) -> float:
        a, b, c, d = self.mat
        return (d * y - b) / (-c * y + a)


@dataclass(frozen=True)
class BreakPoint:
    """Location where the one-sided derivatives of the lift differ."""

    location: float
    left_derivative: float
    right_derivative: float

    @property
    def jump_ratio(self) -> float:
        return self.left_derivative / self.right_derivative


@dataclass
class MapDiagnostics:
    valid: bool
    c1: float
    c2: float
    continuity_max: float
    violations: list = field(default_factory=list)


def affine_piece(lo: float, hi: float, y_lo: float, slope: float) -> MapPiece:
    return MapPiece(lo, hi, (slope, y_lo - slope * lo, 0.0, 1.0))


def moebius_piece(lo: float, hi: float, y_lo: float, y_hi: float, s: float) -> MapPiece:
    """Increasing fractional-linear piece [lo,hi] -> [y_lo,y_hi].

    The shape s > 0 is the normalized boundary derivative: the piece
    derivative is s*(dy/dx) at lo and (dy/dx)/s at hi.  s = 1 degenerates
    to the affine piece.
    """
    dx = hi - lo
    dy = y_hi - y_lo
    if dx <= 0 or dy <= 0 or s <= 0:
        raise InfeasibleDescriptor(f"degenerate piece: dx={dx}, dy={dy}, s={s}")
    c = (s - 1.0) / dx
    d = 1.0 - c * lo
    a = y_lo * c + dy * s / dx
    b = y_lo * d - dy * s / dx * lo
    return MapPiece(lo, hi, (a, b, c, d))


class PHomeomorphism:
    """Orientation-preserving circle homeomorphism with break points.

    Immutable after construction.  ``pieces`` must chain over one full turn:
    pieces[j].hi == pieces[j+1].lo and pieces[-1].hi == pieces[0].lo + 1.
    Validation of continuity/monotonicity is reported by :meth:`validate`;
    the constructor only enforces the chain structure so that deliberately
    broken maps can be built and flagged in tests.
    """

    def __init__(self, pieces, nominal_breaks=(), descriptor=None,
                 max_iterations: int = 10 ** 7):
        if not pieces:
            raise InfeasibleDescriptor("no pieces")
        pieces = list(pieces)
        for p, q in zip(pieces, pieces[1:]):
            if p.hi != q.lo:
                raise InfeasibleDescriptor("piece domains must chain")
        if not math.isclose(pieces[-1].hi, pieces[0].lo + 1.0, abs_tol=1e-12):
            raise InfeasibleDescriptor("piece domains must cover one full turn")
        self.pieces = tuple(pieces)
        self.descriptor = descriptor
        self.max_iterations = int(max_iterations)
        self.holder_alpha = 1.0  # pieces are analytic

        self._joints = np.array([p.lo for p in pieces] + [pieces[0].lo + 1.0])
        self._coefs = np.array([p.mat for p in pieces], dtype=float)
        img = [p.value(p.lo) for p in pieces]
        img.append(img[0] + 1.0)
        self._img = np.array(img)

        self.nominal_breaks = tuple(frac(b) for b in nominal_breaks)
        self.breaks = self._detect_breaks()
        self._c1, self._c2 = self._derivative_bounds()
        self._rotation_cache = None  # set by breaklab.rotation

    # -- construction helpers -------------------------------------------

    def _detect_breaks(self):
        out = []
        n = len(self.pieces)
        for j in range(n):
            t = self.pieces[j].lo
            left = self.pieces[j - 1].deriv(t if j > 0 else t + 1.0)
            right = self.pieces[j].deriv(t)
            if abs(left - right) > _BREAK_REL_TOL * max(left, right):
                out.append(BreakPoint(frac(t), left, right))
        return tuple(out)

    def _derivative_bounds(self):
        vals = []
        for p in self.pieces:
            vals.append(p.deriv(p.lo))
            vals.append(p.deriv(p.hi))
        return min(vals), max(vals)

    # -- basic queries ----------------------------------------------------

    @property
    def c1(self) -> float:
        return self._c1

    @property
    def c2(self) -> float:
        return self._c2

    @property
    def window_start(self) -> float:
        return float(self._joints[0])

    def kernel_data(self):
        return self._joints, self._coefs, self._img

    # -- evaluation --------------------------------------------------------

    def __call__(self, x: float) -> float:
        return float(K.eval_circle(frac(x), self._joints, self._coefs))

    def eval(self, x: float) -> float:
        return self(x)

    def eval_lift(self, t: float) -> float:
        """Canonical lift: eval_lift(t + 1) = eval_lift(t) + 1 exactly."""
        m = math.floor(t)
        return float(K.lift_image(t - m, self._joints, self._coefs)) + m

    def inverse(self, y: float) -> float:
        return float(K.inverse_circle(frac(y), self._img, self._coefs))

    def inverse_lift(self, u: float) -> float:
        x = self.inverse(frac(u))
        return x + round(u - self.eval_lift(x))

    def _piece_at(self, x: float, side: str = "right"):
        """Piece index governing circle point x from the given side."""
        t = x if x >= self._joints[0] else x + 1.0
        j = int(np.searchsorted(self._joints, t, side="right")) - 1
        j = min(j, len(self.pieces) - 1)
        if side == "left" and t == self._joints[j]:
            if j == 0:
                return len(self.pieces) - 1, self._joints[-1]
            return j - 1, t
        return j, t

    def one_sided_derivative(self, x: float, side: str = "right") -> float:
        if side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")
        j, t = self._piece_at(frac(x), side)
        return self.pieces[j].deriv(t)

    def derivative(self, x: float) -> float:
        """Two-sided derivative; at a break returns the right value."""
        return self.one_sided_derivative(x, "right")

    def second_derivative(self, x: float, side: str = "right") -> float:
        j, t = self._piece_at(frac(x), side)
        return self.pieces[j].deriv2(t)

    # -- breaks -------------------------------------------------------------

    def jump_ratio(self, b: float) -> float:
        """sigma_f(b) = Df_-(b)/Df_+(b) for a genuine break b."""
        b = frac(b)
        for bp in self.breaks:
            if circle_distance(bp.location, b) <= 1e-12:
                return bp.jump_ratio
        raise NotABreakPoint(f"{b} is not a break point of this map")

    def jump_ratio_at(self, x: float) -> float:
        """Df_-(x)/Df_+(x) at any point (1.0 where the map is C^1)."""
        return (self.one_sided_derivative(x, "left")
                / self.one_sided_derivative(x, "right"))

    def jump_ratio_product(self) -> float:
        """Product of jump ratios over the nominal break locations.

        Multiplies all left derivatives before dividing by the product of
        right derivatives, so PL maps whose slope factors cancel give
        exactly 1.0.
        """
        locs = self.nominal_breaks or tuple(b.location for b in self.breaks)
        num = 1.0
        den = 1.0
        for b in locs:
            num *= self.one_sided_derivative(b, "left")
            den *= self.one_sided_derivative(b, "right")
        return num / den

    # -- iteration -----------------------------------------------------------

    def iterate(self, x: float, n: int) -> float:
        if abs(n) > self.max_iterations:
            raise IterationBudgetExceeded(f"|n|={abs(n)} exceeds {self.max_iterations}")
        x = frac(x)
        if n >= 0:
            return float(K.iterate_circle(x, n, self._joints, self._coefs))
        return float(K.iterate_backward(x, -n, self._img, self._coefs))

    def orbit(self, x: float, n: int) -> np.ndarray:
        """Array [x, f(x), ..., f^{n-1}(x)]."""
        if n > self.max_iterations:
            raise IterationBudgetExceeded(f"n={n} exceeds {self.max_iterations}")
        out = np.empty(n)
        K.orbit_circle(frac(x), n, self._joints, self._coefs, out)
        return out

    def backward_orbit(self, x: float, n: int) -> np.ndarray:
        """Array [f^{-1}(x), ..., f^{-n}(x)]."""
        out = np.empty(n)
        K.orbit_backward(frac(x), n, self._img, self._coefs, out)
        return out

    def derivative_product(self, x: float, k: int) -> float:
        """prod_{i<k} Df(f^i(x))."""
        return float(K.deriv_product(frac(x), k, self._joints, self._coefs))

    # -- global quantities ----------------------------------------------------

    def total_variation_log_df(self) -> float:
        """Var log Dfhat over one period: piece variation plus |log sigma| jumps.

        log Df is monotone on each affine or Moebius piece, so the piece term
        is the absolute endpoint difference.
        """
        v = 0.0
        for p in self.pieces:
            v += abs(math.log(p.deriv(p.hi)) - math.log(p.deriv(p.lo)))
        for bp in self.breaks:
            v += abs(math.log(bp.jump_ratio))
        return v

    def validate(self, grid: int = 2048) -> MapDiagnostics:
        violations = []
        cont = 0.0
        n = len(self.pieces)
        for j in range(n):
            prev = self.pieces[j - 1]
            t = self._joints[j]
            left_val = prev.value(t if j > 0 else t + 1.0) - (0.0 if j > 0 else 1.0)
            gap = abs(left_val - self.pieces[j].value(t))
            cont = max(cont, gap)
            if gap > 1e-12:
                violations.append(f"continuity gap {gap:.3e} at joint {frac(t)}")

        ts = self._joints[0] + np.linspace(0.0, 1.0, grid, endpoint=False)
        vals = np.array([self.eval_lift(t) for t in ts])
        if np.any(np.diff(vals) <= 0.0):
            violations.append("monotonicity violated on grid")
        if abs(self.eval_lift(ts[0] + 1.0) - vals[0] - 1.0) > 1e-12:
            violations.append("degree-one periodicity violated")

        if self._c1 <= 0.0:
            violations.append(f"derivative lower bound {self._c1} <= 0")
        for p in self.pieces:
            for t in (p.lo, p.hi):
                d = p.deriv(t)
                if not (self._c1 <= d <= self._c2):
                    violations.append("derivative outside [c1, c2]")

        declared = {round(b, 12) for b in self.nominal_breaks}
        for bp in self.breaks:
            if declared and round(bp.location, 12) not in declared:
                violations.append(f"undeclared break at {bp.location}")

        return MapDiagnostics(valid=not violations, c1=self._c1, c2=self._c2,
                              continuity_max=cont, violations=violations)


# -- families ------------------------------------------------------------------


@dataclass(frozen=True)
class RigidRotation:
    rho: float
    offset: float = 0.0

    def with_offset(self, t: float) -> "RigidRotation":
        return replace(self, offset=t)

    def build(self) -> PHomeomorphism:
        shift = self.rho + self.offset
        f = PHomeomorphism([affine_piece(0.0, 1.0, shift, 1.0)], descriptor=self)
        return f


@dataclass(frozen=True)
class TwoBreakPL:
    """Piecewise-linear map, breaks at a and b only; jump product is 1."""

    a: float
    b: float
    interior_slope: float
    offset: float = 0.0

    def with_offset(self, t: float) -> "TwoBreakPL":
        return replace(self, offset=t)

    def build(self) -> PHomeomorphism:
        a, b, si = self.a, self.b, self.interior_slope
        if not (0.0 < a < b < 1.0) or si <= 0.0:
            raise InfeasibleDescriptor(f"need 0 < a < b < 1 and slope > 0: {self}")
        lin = b - a
        so = (1.0 - si * lin) / (1.0 - lin)
        if so <= 0.0:
            raise InfeasibleDescriptor(f"outer slope {so} <= 0 for {self}")
        y0 = self.offset
        ya = y0 + so * a
        yb = ya + si * lin
        pieces = [
            affine_piece(0.0, a, y0, so),
            affine_piece(a, b, ya, si),
            affine_piece(b, 1.0, yb, so),
        ]
        return _checked(PHomeomorphism(pieces, nominal_breaks=(a, b), descriptor=self))


@dataclass(frozen=True)
class TwoBreakMoebius:
    """Two Moebius pieces with prescribed jump ratios at a and b.

    The jump product sigma_a*sigma_b is free.  shape fixes the remaining
    degree of freedom (the normalized boundary derivative of the first
    piece); None picks the symmetric shape (sigma_a*sigma_b)**-0.25.
    """

    a: float
    b: float
    sigma_a: float
    sigma_b: float
    shape: float | None = None
    offset: float = 0.0

    def with_offset(self, t: float) -> "TwoBreakMoebius":
        return replace(self, offset=t)

    def with_b(self, b: float) -> "TwoBreakMoebius":
        return replace(self, b=b)

    def build(self) -> PHomeomorphism:
        a, b = frac(self.a), frac(self.b)
        sa, sb = self.sigma_a, self.sigma_b
        if sa <= 0.0 or sb <= 0.0:
            raise InfeasibleDescriptor("jump ratios must be positive")
        if a == b:
            raise InfeasibleDescriptor("break points must be distinct")
        L1 = arc_length(a, b)
        L2 = 1.0 - L1
        q = math.sqrt(sa / sb)
        M1 = L1 / (L1 + q * L2)
        M2 = 1.0 - M1
        s1 = self.shape if self.shape is not None else (sa * sb) ** -0.25
        if s1 <= 0.0:
            raise InfeasibleDescriptor("shape must be positive")
        s2 = (sa * sb) ** -0.5 / s1
        ah = a
        ya = a + self.offset
        pieces = [
            moebius_piece(ah, ah + L1, ya, ya + M1, s1),
            moebius_piece(ah + L1, ah + 1.0, ya + M1, ya + 1.0, s2),
        ]
        return _checked(PHomeomorphism(pieces, nominal_breaks=(a, b), descriptor=self))


@dataclass(frozen=True)
class OneBreakMoebius:
    """Single Moebius piece over the full turn: one break at b with ratio sigma."""

    b: float
    sigma: float
    offset: float = 0.0

    def with_offset(self, t: float) -> "OneBreakMoebius":
        return replace(self, offset=t)

    def build(self) -> PHomeomorphism:
        if self.sigma <= 0.0:
            raise InfeasibleDescriptor("sigma must be positive")
        bh = frac(self.b)
        s = self.sigma ** -0.5
        y = bh + self.offset
        pieces = [moebius_piece(bh, bh + 1.0, y, y + 1.0, s)]
        return _checked(PHomeomorphism(pieces, nominal_breaks=(bh,), descriptor=self))


def _checked(f: PHomeomorphism) -> PHomeomorphism:
    diag = f.validate(grid=512)
    if not diag.valid:
        raise InvalidMap(f"constructed map failed validation: {diag.violations}")
    return f


def build_family(descriptor) -> PHomeomorphism:
    """Build and validate a map from a family descriptor."""
    if not hasattr(descriptor, "build"):
        raise InfeasibleDescriptor(f"not a family descriptor: {descriptor!r}")
    return descriptor.build()


# -- closed-form composition ----------------------------------------------------


def _matmul2(m1, m2):
    a1, b1, c1, d1 = m1
    a2, b2, c2, d2 = m2
    return (a1 * a2 + b1 * c2, a1 * b2 + b1 * d2,
            c1 * a2 + d1 * c2, c1 * b2 + d1 * d2)


def _normalize(mat):
    a, b, c, d = mat
    det = a * d - b * c
    s = math.sqrt(abs(det))
    return (a / s, b / s, c / s, d / s)


def _translate(mat, m_pre, m_post):
    """Matrix of t -> piece(t + m_pre) + m_post."""
    a, b, c, d = mat
    a2, b2, c2, d2 = a, b + a * m_pre, c, d + c * m_pre
    return (a2 + m_post * c2, b2 + m_post * d2, c2, d2)


class _Stage:
    """One map in a composition chain, applied forward or inverted."""

    def __init__(self, f: PHomeomorphism, inverted: bool = False):
        self.f = f
        self.inverted = inverted

    def apply(self, x: float) -> float:
        return self.f.inverse(x) if self.inverted else self.f(x)

    def pull_joints(self):
        """Joint locations of this stage in its own input space."""
        if self.inverted:
            return [frac(v) for v in self.f._img[:-1]]
        return [frac(t) for t in self.f._joints[:-1]]

    def local_matrix(self, x: float):
        """(matrix, lift) so matrix(lift-of-x) continues the chain at x."""
        f = self.f
        if not self.inverted:
            j, t = f._piece_at(frac(x), "right")
            return f.pieces[j].mat, t
        u = frac(x)
        v0 = f._img[0]
        uv = u if u >= v0 else u + 1.0
        j = int(np.searchsorted(f._img, uv, side="right")) - 1
        j = min(j, len(f.pieces) - 1)
        a, b, c, d = f.pieces[j].mat
        return (d, -b, -c, a), uv


def compose_closed_form(stages) -> PHomeomorphism:
    """Closed-form composition of a chain of stages, applied left to right.

    Each stage is a PHomeomorphism or (PHomeomorphism, inverted) tuple.  The
    result is a fresh PHomeomorphism whose pieces are matrix products of the
    stage pieces, exact up to rounding.
    """
    chain = [s if isinstance(s, _Stage) else
             (_Stage(*s) if isinstance(s, tuple) else _Stage(s)) for s in stages]

    joint_set = set()
    for i, st in enumerate(chain):
        for u in st.pull_joints():
            x = u
            for back in reversed(chain[:i]):
                x = (back.f(x) if back.inverted else back.f.inverse(x))
            joint_set.add(frac(x))
    joints = sorted(joint_set) or [0.0]
    w0 = joints[0]
    ext = joints + [w0 + 1.0]

    mats = []
    for lo, hi in zip(ext[:-1], ext[1:]):
        tm = (lo + hi) / 2.0
        x = frac(tm)
        cur_mat = (1.0, 0.0, 0.0, 1.0)
        cur_lift = tm
        for st in chain:
            m, local_lift = st.local_matrix(x)
            shift = local_lift - cur_lift
            mshift = round(shift)
            if abs(shift - mshift) > 1e-9:
                raise InvalidMap("composition lift misalignment")
            stage_mat = _translate(m, float(mshift), 0.0)
            cur_mat = _matmul2(stage_mat, cur_mat)
            a, b, c, d = stage_mat
            cur_lift = (a * cur_lift + b) / (c * cur_lift + d)
            x = st.apply(x)
        mats.append(_normalize(cur_mat))

    # The per-arc walks may land on lift branches an integer apart; re-align
    # so consecutive pieces meet continuously.
    pieces = [MapPiece(ext[0], ext[1], mats[0])]
    for i in range(1, len(mats)):
        lo, hi = ext[i], ext[i + 1]
        prev_val = pieces[-1].value(lo)
        cur = MapPiece(lo, hi, mats[i])
        delta = round(prev_val - cur.value(lo))
        if delta != 0:
            cur = MapPiece(lo, hi, _translate(mats[i], 0.0, float(delta)))
        pieces.append(cur)
    if abs(pieces[-1].value(ext[-1]) - pieces[0].value(ext[0]) - 1.0) > 1e-9:
        raise InvalidMap("composition is not degree one")
    return PHomeomorphism(pieces)


def conjugate_map(f: PHomeomorphism, h: PHomeomorphism) -> PHomeomorphism:
    """h o f o h^{-1} in closed form; rotation number is inherited exactly."""
    g = compose_closed_form([(h, True), f, h])
    nominal = tuple(sorted(frac(h(b)) for b in f.nominal_breaks))
    g.nominal_breaks = nominal
    g._rotation_cache = getattr(f, "_rotation_cache", None)
    return g


def c1_moebius_twist(c: float, d: float, s: float) -> PHomeomorphism:
    """C^1 piecewise-Moebius circle diffeomorphism fixing c.

    Two reciprocal-shape pieces meeting at c and d with matching first
    derivatives (second derivatives jump).  s != 1 makes it genuinely
    nonlinear; s = 1 is the identity.
    """
    ch, dh = frac(c), frac(d)
    if ch == dh:
        raise InfeasibleDescriptor("joints must be distinct")
    L1 = arc_length(ch, dh)
    pieces = [
        moebius_piece(ch, ch + L1, ch, ch + L1, s),
        moebius_piece(ch + L1, ch + 1.0, ch + L1, ch + 1.0, 1.0 / s),
    ]
    return _checked(PHomeomorphism(pieces))
