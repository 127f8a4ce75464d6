"""Invariant measures, conjugacies to the rotation, and singularity profiles.

The conjugacy to the rigid rotation is built from orbit order: on orbit
points it satisfies the conjugacy equation exactly by construction, and
monotone piecewise-linear interpolation fills the gaps, so interpolation is
the only (reported) error term.  The conjugacy between two maps composes the
two tables, which is again exact on orbit points.

For experiment-scale evaluation (where table resolution is too coarse) a
bracket evaluator runs the two orbits in lockstep and pins psi between the
orbit points adjacent to each target; validity of a bracket of depth M only
needs the two rotation numbers to agree to ~1/M^2, which the tuned pairs
provide.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .circle import Arc, arc_length, circle_distance, frac, frac_array
from .errors import InfeasibleDescriptor, RotationMismatch, ScaleTooFine
from .maps import PHomeomorphism
from .partition import DEFAULT_X0, build_dynamical_partition
from .rotation import rotation_data, tune_to_target_rho

__all__ = [
    "ConjugacyFunction", "QuotientProfile", "MeasureEstimate",
    "conjugacy_to_rotation", "invariant_measure_of_arc", "build_conjugacy_psi",
    "quotient_profile", "match_measure_condition", "PsiBracketEvaluator",
    "lebesgue_fraction_for_mass",
]


class ConjugacyFunction:
    """Monotone degree-one circle map given by an ordered sample table.

    Values are exact on the table knots; between knots the lift is linear.
    """

    def __init__(self, xs, ys, anchor, n_orbit: int, meta=None):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        order = np.argsort(xs, kind="stable")
        x = xs[order]
        y = ys[order]
        if np.unique(x).size != x.size:
            raise RotationMismatch("duplicate abscissae in conjugacy table")
        y_un = np.where(y >= y[0], y, y + 1.0)
        if np.any(np.diff(y_un) <= 0.0):
            raise RotationMismatch(
                "table is not circularly monotone; rotation numbers disagree "
                "beyond table resolution")
        self._x = x
        self._y = y_un
        self._xe = np.concatenate([x, [x[0] + 1.0]])
        self._ye = np.concatenate([y_un, [y_un[0] + 1.0]])
        self.anchor = anchor
        self.n_orbit = n_orbit
        self.meta = meta or {}

    @property
    def table(self):
        return self._x, frac_array(self._y.copy())

    def lift_values(self, t) -> np.ndarray:
        """Piecewise-linear lift of the table at lift coordinates t."""
        t = np.asarray(t, dtype=float)
        base = self._xe[0]
        m = np.floor(t - base)
        tr = t - m
        vals = np.interp(tr, self._xe, self._ye)
        return vals + m

    def __call__(self, x):
        if np.isscalar(x) or isinstance(x, float):
            return float(frac(float(self.lift_values(np.array([x]))[0])))
        return frac_array(self.lift_values(x))

    def inverse(self, y):
        scalar = np.isscalar(y) or isinstance(y, float)
        t = np.atleast_1d(np.asarray(y, dtype=float))
        base = self._ye[0]
        m = np.floor(t - base)
        tr = t - m
        vals = np.interp(tr, self._ye, self._xe) + m
        out = frac_array(vals)
        return float(out[0]) if scalar else out

    def conjugacy_residual(self, f1: PHomeomorphism, f2: PHomeomorphism,
                           grid: int = 512) -> float:
        """sup over a grid of the circle distance psi(f1 x) vs f2(psi x)."""
        worst = 0.0
        for i in range(grid):
            x = i / grid
            lhs = self(f1(x))
            rhs = f2(self(x))
            worst = max(worst, circle_distance(lhs, rhs))
        return worst

    def to_csv(self, path):
        xs, ys = self.table
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "psi(x)"])
            for a, b in zip(xs, ys):
                w.writerow([repr(float(a)), repr(float(b))])


def conjugacy_to_rotation(f: PHomeomorphism, N: int, x0: float = 0.0,
                          anchor_value: float = 0.0,
                          rho: float | None = None) -> ConjugacyFunction:
    """Conjugacy phi with phi(f(x)) = phi(x) + rho, from N orbit points.

    phi(f^k(x0)) = anchor_value + k rho (mod 1) exactly by construction.
    """
    if N < 10 ** 3:
        raise ValueError("need N >= 1000 orbit points")
    if rho is None:
        rot, _ = rotation_data(f)
        rho = rot.value
    orbit = f.orbit(x0, N)
    vals = frac_array(anchor_value + rho * np.arange(N, dtype=float))
    phi = ConjugacyFunction(orbit, vals, anchor=(x0, anchor_value),
                            n_orbit=N, meta={"rho": rho})
    return phi


@dataclass(frozen=True)
class MeasureEstimate:
    value: float        # phi-image length
    birkhoff: float     # orbit visit frequency
    error_estimate: float

    @property
    def consistent(self) -> bool:
        return abs(self.value - self.birkhoff) <= self.error_estimate


def invariant_measure_of_arc(f: PHomeomorphism, arc: Arc, N: int = 10 ** 4,
                             phi: ConjugacyFunction | None = None,
                             x0: float = DEFAULT_X0) -> MeasureEstimate:
    """mu_f(arc) as phi-image length, cross-checked by visit frequency."""
    if N < 10 ** 4:
        raise ValueError("need N >= 10^4")
    if phi is None:
        phi = conjugacy_to_rotation(f, N, x0=x0)
    value = arc_length(phi(arc.a), phi(arc.b)) if arc.a != arc.b else 0.0
    orbit = f.orbit(x0, N)
    if arc.a == arc.b:
        freq = 0.0
    elif arc.a < arc.b:
        freq = float(np.mean((orbit >= arc.a) & (orbit < arc.b)))
    else:
        freq = float(np.mean((orbit >= arc.a) | (orbit < arc.b)))
    return MeasureEstimate(value=value, birkhoff=freq,
                           error_estimate=3.0 / math.sqrt(N))


def build_conjugacy_psi(f1: PHomeomorphism, f2: PHomeomorphism, N: int,
                        anchor1: float, anchor2: float,
                        k_negative: int = 1000,
                        rho_gate: float | None = None) -> ConjugacyFunction:
    """psi with psi(f1(x)) = f2(psi(x)) and psi(anchor1) = anchor2.

    The table pairs the two orbits index by index, so psi is exact on the
    orbit of anchor1 (including k_negative backward iterates).
    """
    if f1 is not f2:
        rot1, _ = rotation_data(f1)
        rot2, _ = rotation_data(f2)
        gate = rho_gate if rho_gate is not None else 1.0 / (4.0 * N * N)
        mismatch = abs(rot1.value - rot2.value)
        budget = rot1.error_bound + rot2.error_bound
        if mismatch > budget + gate or budget > gate:
            raise RotationMismatch(
                f"rotation numbers differ by {mismatch:.3e} with error budget "
                f"{budget:.3e}; gate is {gate:.3e} for N={N}")
    a1 = frac(anchor1)
    a2 = frac(anchor2)
    xs = np.concatenate([f1.backward_orbit(a1, k_negative)[::-1], f1.orbit(a1, N)])
    ys = np.concatenate([f2.backward_orbit(a2, k_negative)[::-1], f2.orbit(a2, N)])
    psi = ConjugacyFunction(xs, ys, anchor=(a1, a2), n_orbit=N + k_negative,
                            meta={"k_negative": k_negative})
    return psi


@dataclass
class QuotientProfile:
    """Difference quotients of a monotone circle function at one scale."""

    h: float
    quotients: np.ndarray
    bin_edges: np.ndarray = field(default=None)
    masses: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.bin_edges is None:
            self.bin_edges = np.concatenate(
                [[0.0], np.geomspace(1e-3, 8.0, 40), [np.inf]])
        counts, _ = np.histogram(self.quotients, bins=self.bin_edges)
        self.masses = counts / self.quotients.size

    @property
    def mean_quotient(self) -> float:
        return float(self.quotients.mean())

    def singularity_index(self, eps: float) -> float:
        """Lebesgue fraction of grid cells with quotient below eps."""
        return float(np.mean(self.quotients < eps))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["h", "bin_left", "bin_right", "mass"])
            for lo, hi, m in zip(self.bin_edges[:-1], self.bin_edges[1:],
                                 self.masses):
                w.writerow([repr(self.h), repr(float(lo)), repr(float(hi)),
                            repr(float(m))])


def quotient_profile(psi: ConjugacyFunction, h: float) -> QuotientProfile:
    """(psi(x+h) - psi(x))/h over the uniform grid of step h."""
    if h < 4.0 / psi.n_orbit:
        raise ScaleTooFine(f"h={h} below table resolution 4/N={4.0 / psi.n_orbit}")
    m = int(round(1.0 / h))
    if abs(m * h - 1.0) > 1e-12:
        raise ValueError("h must divide 1 (use dyadic scales)")
    grid = np.arange(m + 1) * h
    vals = psi.lift_values(grid)
    quotients = np.diff(vals) / h
    return QuotientProfile(h=h, quotients=quotients)


def match_measure_condition(f1: PHomeomorphism, a1: float, b1: float,
                            f2_family, target, N: int = 10 ** 5,
                            tol: float | None = None,
                            tune_tol: float = 1e-11,
                            coarse_tol: float = 1e-9,
                            max_bisections: int = 60):
    """Tune the free break b2 of the f2 family so the break arcs carry equal
    invariant mass: mu2([a2, b2]) = mu1([a1, b1]).

    Each candidate b2 retunes the family offset to the target rotation
    number before measuring.  Returns (f2, report dict).
    """
    mu1 = invariant_measure_of_arc(f1, Arc(frac(a1), frac(b1)), N).value
    if tol is None:
        tol = 3.0 / math.sqrt(N)
    if mu1 < 0.01 or mu1 > 0.99:
        raise InfeasibleDescriptor(
            f"target measure {mu1:.4f} leaves no room for distinct breaks")
    a2 = frac(f2_family.a)

    def measure_at(u: float, tt: float):
        fb = tune_to_target_rho(f2_family.with_b(frac(a2 + u)), target, tol=tt)
        est = invariant_measure_of_arc(fb, Arc(a2, frac(a2 + u)), N)
        return fb, est.value

    lo_u, hi_u = 0.02, 0.98
    _, mu_lo = measure_at(lo_u, coarse_tol)
    _, mu_hi = measure_at(hi_u, coarse_tol)
    if not (mu_lo < mu1 < mu_hi):
        raise InfeasibleDescriptor(
            f"measure target {mu1:.4f} outside family range "
            f"[{mu_lo:.4f}, {mu_hi:.4f}]")
    for _ in range(max_bisections):
        mid = 0.5 * (lo_u + hi_u)
        _, mu_mid = measure_at(mid, coarse_tol)
        if mu_mid < mu1:
            lo_u = mid
        else:
            hi_u = mid
        if hi_u - lo_u < 1e-12 or abs(mu_mid - mu1) < 0.2 * tol:
            break
    u = 0.5 * (lo_u + hi_u)
    f2 = tune_to_target_rho(f2_family.with_b(frac(a2 + u)), target, tol=tune_tol)
    mu2 = invariant_measure_of_arc(f2, Arc(a2, frac(a2 + u)), N).value
    if abs(mu2 - mu1) > tol:
        raise InfeasibleDescriptor(
            f"measure matching stalled: |{mu2:.6f} - {mu1:.6f}| > {tol:.2e}")
    report = {"mu1": mu1, "mu2": mu2, "b2": frac(a2 + u), "tol": tol}
    return f2, report


class PsiBracketEvaluator:
    """High-precision psi values by running the two orbits in lockstep.

    For each target x it keeps the closest orbit points left and right of x
    together with their companions on the second circle; monotonicity of psi
    pins psi(x) between the companions.  Linear interpolation inside the
    bracket gives the value; the bracket width is the certified uncertainty.
    """

    def __init__(self, f1: PHomeomorphism, anchor1: float,
                 f2: PHomeomorphism, anchor2: float,
                 n_steps: int = 10 ** 8, k_backward: int = 2000,
                 rho_mismatch: float | None = None):
        self.f1 = f1
        self.f2 = f2
        self.anchor1 = frac(anchor1)
        self.anchor2 = frac(anchor2)
        self.k_backward = int(k_backward)
        if rho_mismatch is None:
            if f1 is f2:
                rho_mismatch = 0.0
            else:
                rho_mismatch = (rotation_data(f1)[0].error_bound
                                + rotation_data(f2)[0].error_bound)
        # Brackets deeper than the order-valid range of the two orbits are
        # meaningless: the orbit orders agree only while q_m q_{m+1} stays
        # below 1/|rho1 - rho2|.
        order_safe = int(0.5 / math.sqrt(rho_mismatch + 1e-16))
        self.effective_steps = min(int(n_steps), order_safe)
        self.rho_mismatch = rho_mismatch

    def values(self, targets):
        """(psi_values, uncertainties) for an array of circle points."""
        targets = np.asarray(targets, dtype=float)
        order = np.argsort(targets)
        ts = targets[order]
        nt = ts.size
        gmax_x = np.full(nt + 1, -1.0)
        gmax_y = np.full(nt + 1, np.nan)
        gmin_x = np.full(nt + 1, 2.0)
        gmin_y = np.full(nt + 1, np.nan)

        j1, c1, i1 = self.f1.kernel_data()
        j2, c2, i2 = self.f2.kernel_data()
        x1 = float(K.iterate_backward(self.anchor1, self.k_backward, i1, c1))
        x2 = float(K.iterate_backward(self.anchor2, self.k_backward, i2, c2))
        K.bracket_pass(x1, j1, c1, x2, j2, c2, ts,
                       self.effective_steps + self.k_backward,
                       gmax_x, gmax_y, gmin_x, gmin_y)

        lo_x = np.empty(nt)
        lo_y = np.empty(nt)
        hi_x = np.empty(nt)
        hi_y = np.empty(nt)
        best_x, best_y = -np.inf, np.nan
        for g in range(nt + 1):
            if gmax_x[g] > best_x:
                best_x, best_y = gmax_x[g], gmax_y[g]
            if g < nt:
                lo_x[g], lo_y[g] = best_x, best_y
        best_x, best_y = np.inf, np.nan
        for g in range(nt, -1, -1):
            if gmin_x[g] < best_x:
                best_x, best_y = gmin_x[g], gmin_y[g]
            if g > 0:
                hi_x[g - 1], hi_y[g - 1] = best_x, best_y
        # wrap around the seam for targets with no neighbour on one side
        wrap_lo = ~np.isfinite(lo_x) | (lo_x < 0.0)
        wrap_hi = ~np.isfinite(hi_x) | (hi_x > 1.0)
        glob_max_i = int(np.nanargmax(np.where(gmax_x > -1.0, gmax_x, -np.inf)))
        glob_min_i = int(np.nanargmin(np.where(gmin_x < 2.0, gmin_x, np.inf)))
        lo_x[wrap_lo] = gmax_x[glob_max_i] - 1.0
        lo_y[wrap_lo] = gmax_y[glob_max_i] - 1.0
        hi_x[wrap_hi] = gmin_x[glob_min_i] + 1.0
        hi_y[wrap_hi] = gmin_y[glob_min_i] + 1.0

        y_un = np.where(hi_y >= lo_y, hi_y, hi_y + 1.0)
        width = y_un - lo_y
        t = np.where(hi_x > lo_x, (ts - lo_x) / (hi_x - lo_x), 0.5)
        vals = frac_array(lo_y + width * t)
        out = np.empty(nt)
        unc = np.empty(nt)
        out[order] = vals
        unc[order] = width
        return out, unc


def lebesgue_fraction_for_mass(f: PHomeomorphism, level: int, mass: float = 0.9,
                               N: int = 10 ** 5, x0: float = DEFAULT_X0,
                               phi: ConjugacyFunction | None = None) -> float:
    """Smallest Lebesgue fraction of level-n intervals carrying the given
    invariant mass: sort by density, accumulate to the mass target."""
    if phi is None:
        phi = conjugacy_to_rotation(f, N, x0=x0)
    part = build_dynamical_partition(f, x0, level)
    rows = []
    for _, _, arc in part.intervals():
        mu = arc_length(phi(arc.a), phi(arc.b))
        rows.append((mu / arc.length(), arc.length(), mu))
    rows.sort(key=lambda r: -r[0])
    acc_mass = 0.0
    acc_len = 0.0
    for _, length, mu in rows:
        acc_mass += mu
        acc_len += length
        if acc_mass >= mass:
            break
    return acc_len
