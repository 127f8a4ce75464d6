"""Numba kernels for orbit-scale computation.

A map is passed to every kernel as three arrays:

  joints : (K+1,) increasing lift coordinates, joints[0] in [0,1),
           joints[K] = joints[0] + 1
  coefs  : (K, 4) rows (A, B, C, D) of the piece t -> (A t + B)/(C t + D),
           strictly increasing on its piece (A D - B C > 0)
  img    : (K+1,) image lift values at the joints, img[K] = img[0] + 1

All kernels work on circle points in [0, 1) and track windings as exact
integers, so lift bookkeeping never loses precision to large magnitudes.
"""

import numpy as np
from numba import njit

__all__ = [
    "eval_circle", "lift_image", "deriv_right", "orbit_circle",
    "orbit_backward", "lift_iterate_minus", "orbit_average_displacement",
    "deriv_product", "inverse_circle", "bracket_pass",
]


@njit(cache=True, inline="always")
def _piece_index(joints, t):
    # rightmost j with joints[j] <= t; t in [joints[0], joints[-1])
    lo = 0
    hi = joints.shape[0] - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if joints[mid] <= t:
            lo = mid
        else:
            hi = mid
    return lo


@njit(cache=True, inline="always")
def _apply(coefs, j, t):
    a = coefs[j, 0]
    b = coefs[j, 1]
    c = coefs[j, 2]
    d = coefs[j, 3]
    return (a * t + b) / (c * t + d)


@njit(cache=True, inline="always")
def _apply_deriv(coefs, j, t):
    a = coefs[j, 0]
    b = coefs[j, 1]
    c = coefs[j, 2]
    d = coefs[j, 3]
    den = c * t + d
    return (a * d - b * c) / (den * den)


@njit(cache=True, inline="always")
def lift_image(x, joints, coefs):
    """Value of the canonical lift at x in [0, 1); lies in (img0 - 1, img0 + 1)."""
    w0 = joints[0]
    if x >= w0:
        return _apply(coefs, _piece_index(joints, x), x)
    t = x + 1.0
    return _apply(coefs, _piece_index(joints, t), t) - 1.0


@njit(cache=True, inline="always")
def eval_circle(x, joints, coefs):
    """f(x) as a circle point in [0, 1)."""
    v = lift_image(x, joints, coefs)
    v -= np.floor(v)
    if v >= 1.0:
        v = 0.0
    return v


@njit(cache=True, inline="always")
def deriv_right(x, joints, coefs):
    """Right-sided derivative at circle point x (two-sided off joints)."""
    w0 = joints[0]
    if x >= w0:
        return _apply_deriv(coefs, _piece_index(joints, x), x)
    t = x + 1.0
    return _apply_deriv(coefs, _piece_index(joints, t), t)


@njit(cache=True, inline="always")
def inverse_circle(y, img, coefs):
    """f^{-1}(y) as a circle point in [0, 1)."""
    v0 = img[0]
    yv = y - np.floor(y - v0)  # into [v0, v0+1)
    lo = 0
    hi = img.shape[0] - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if img[mid] <= yv:
            lo = mid
        else:
            hi = mid
    a = coefs[lo, 0]
    b = coefs[lo, 1]
    c = coefs[lo, 2]
    d = coefs[lo, 3]
    t = (d * yv - b) / (-c * yv + a)
    t -= np.floor(t)
    if t >= 1.0:
        t = 0.0
    return t


@njit(cache=True)
def iterate_circle(x0, n, joints, coefs):
    x = x0
    for _ in range(n):
        x = eval_circle(x, joints, coefs)
    return x


@njit(cache=True)
def iterate_backward(x0, n, img, coefs):
    x = x0
    for _ in range(n):
        x = inverse_circle(x, img, coefs)
    return x


@njit(cache=True)
def orbit_circle(x0, n, joints, coefs, out):
    """Fill out[0..n-1] with x0, f(x0), ..., f^{n-1}(x0)."""
    x = x0
    for i in range(n):
        out[i] = x
        x = eval_circle(x, joints, coefs)


@njit(cache=True)
def orbit_backward(x0, n, img, coefs, out):
    """Fill out[0..n-1] with f^{-1}(x0), f^{-2}(x0), ..., f^{-n}(x0)."""
    x = x0
    for i in range(n):
        x = inverse_circle(x, img, coefs)
        out[i] = x


@njit(cache=True)
def lift_iterate_minus(x0, q, p, joints, coefs):
    """fhat^q(x0) - x0 - p with exact integer winding bookkeeping."""
    x = x0
    wind = 0
    for _ in range(q):
        v = lift_image(x, joints, coefs)
        m = int(np.floor(v))
        x = v - m
        if x >= 1.0:
            x = 0.0
            m += 1
        wind += m
    return (wind - p) + (x - x0)


@njit(cache=True)
def advance_winding(x, q, joints, coefs):
    """q steps from circle point x; returns (endpoint, winding count)."""
    wind = 0
    for _ in range(q):
        v = lift_image(x, joints, coefs)
        m = int(np.floor(v))
        x = v - m
        if x >= 1.0:
            x = 0.0
            m += 1
        wind += m
    return x, wind


@njit(cache=True)
def orbit_average_displacement(x0, n, joints, coefs):
    """(fhat^n(x0) - x0) / n."""
    x = x0
    wind = 0
    for _ in range(n):
        v = lift_image(x, joints, coefs)
        m = int(np.floor(v))
        x = v - m
        if x >= 1.0:
            x = 0.0
            m += 1
        wind += m
    return (wind + (x - x0)) / n


@njit(cache=True)
def deriv_product(x0, k, joints, coefs):
    """Product of Df along the orbit x0, ..., f^{k-1}(x0)."""
    x = x0
    prod = 1.0
    for _ in range(k):
        prod *= deriv_right(x, joints, coefs)
        x = eval_circle(x, joints, coefs)
    return prod


@njit(cache=True)
def bracket_pass(x1, j1, c1, x2, j2, c2, targets, nsteps,
                 gmax_x, gmax_y, gmin_x, gmin_y):
    """Advance the paired orbits x1 (map 1) and x2 (map 2) nsteps, tracking,
    for every gap between consecutive sorted targets, the extreme map-1 orbit
    points that landed there together with their map-2 companions.

    Gap g receives map-1 points x with targets[g-1] < x <= targets[g]
    (g = len(targets) collects x above every target).  Arrays must be
    preinitialized to -1 (gmax_x) and 2 (gmin_x).
    """
    nt = targets.shape[0]
    a = x1
    b = x2
    for _ in range(nsteps):
        lo = 0
        hi = nt
        while lo < hi:
            mid = (lo + hi) // 2
            if targets[mid] < a:
                lo = mid + 1
            else:
                hi = mid
        g = lo
        if a > gmax_x[g]:
            gmax_x[g] = a
            gmax_y[g] = b
        if a < gmin_x[g]:
            gmin_x[g] = a
            gmin_y[g] = b
        a = eval_circle(a, j1, c1)
        b = eval_circle(b, j2, c2)
    return a, b
