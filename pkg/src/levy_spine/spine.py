"""The spine: the curve in the right half-plane on which ``f`` is positive.

For every radius ``r`` there is a unique angle ``theta(r)`` such that
``Im f(r e^{i alpha})`` is negative for ``alpha < theta(r)`` and positive
for ``alpha > theta(r)``.  The spine point is ``zeta(r) = r e^{i theta(r)}``
and the eigenvalue curve is ``lambda(r) = f(zeta(r))``.

When ``Im f`` keeps one sign on the whole open half-circle the angle is
clamped to ``+-pi/2`` and ``zeta(r) = +-i r`` lies on the imaginary axis; such
radii are outside ``Z`` and ``lambda`` is then the boundary limit of ``f``.

Derivatives ``zeta'(r)`` and ``lambda'(r)`` come from implicit
differentiation of ``Im f(r e^{i theta}) = 0``, which only needs ``f'``.
:func:`spine_point` can also use a central difference instead, which serves as
an independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import diff_central
from .process import RogersFn

__all__ = [
    "SpineError",
    "MonotonicityViolation",
    "EmptySpine",
    "SpinePoint",
    "SpineArrays",
    "spine_angle",
    "spine_angles",
    "spine_arrays",
    "spine_point",
    "spine_table",
    "dist_to_spine",
    "z_segments",
]

MARGIN = 1e-9
HALF_PI = np.pi / 2


class SpineError(RuntimeError):
    pass


class MonotonicityViolation(SpineError):
    pass


class EmptySpine(SpineError):
    pass


@dataclass(frozen=True)
class SpinePoint:
    r: float
    theta: float
    zeta: complex
    lam: float
    dzeta_abs: float
    in_Z: bool
    dzeta: complex = 0j
    dlam: float = 0.0
    residual: float = 0.0
    flagged: bool = False

    @property
    def a(self) -> float:
        return self.zeta.real

    @property
    def b(self) -> float:
        return self.zeta.imag


@dataclass(frozen=True)
class SpineArrays:
    r: np.ndarray
    theta: np.ndarray
    zeta: np.ndarray
    lam: np.ndarray
    dzeta: np.ndarray
    dlam: np.ndarray
    in_Z: np.ndarray
    residual: np.ndarray

    def point(self, i: int) -> SpinePoint:
        lam = float(self.lam[i])
        flagged = bool(self.in_Z[i] and self.residual[i] > 1e-8 * max(1.0, abs(lam)))
        return SpinePoint(
            float(self.r[i]), float(self.theta[i]), complex(self.zeta[i]), lam,
            float(abs(self.dzeta[i])), bool(self.in_Z[i]), complex(self.dzeta[i]),
            float(self.dlam[i]), float(self.residual[i]), flagged,
        )


def spine_angles(f: RogersFn, r, x_tol: float = 1e-12) -> np.ndarray:
    """Vectorised bisection for ``theta(r)`` over an array of radii."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    lo = np.full(r.shape, -HALF_PI + MARGIN)
    hi = np.full(r.shape, HALF_PI - MARGIN)
    with np.errstate(all="ignore"):
        im_lo = np.imag(f(r * np.exp(1j * lo)))
        im_hi = np.imag(f(r * np.exp(1j * hi)))
    theta = np.full(r.shape, np.nan)
    theta[im_lo > 0] = -HALF_PI
    theta[(im_hi < 0) & np.isnan(theta)] = HALF_PI
    theta[(im_lo == 0) & np.isnan(theta)] = lo[0]
    theta[(im_hi == 0) & np.isnan(theta)] = hi[0]
    active = np.isnan(theta)
    while np.any(active) and np.max(hi[active] - lo[active]) > x_tol:
        mid = 0.5 * (lo + hi)
        with np.errstate(all="ignore"):
            im_mid = np.imag(f(r[active] * np.exp(1j * mid[active])))
        sub_mid = mid[active]
        new_lo, new_hi = lo[active], hi[active]
        exact = im_mid == 0
        new_lo = np.where(im_mid < 0, sub_mid, new_lo)
        new_hi = np.where(im_mid > 0, sub_mid, new_hi)
        new_lo = np.where(exact, sub_mid, new_lo)
        new_hi = np.where(exact, sub_mid, new_hi)
        lo[active], hi[active] = new_lo, new_hi
        active = active & (hi - lo > x_tol)
    unresolved = np.isnan(theta)
    theta[unresolved] = 0.5 * (lo[unresolved] + hi[unresolved])
    return theta


def spine_angle(f: RogersFn, r: float, x_tol: float = 1e-12) -> float:
    if not r > 0:
        raise ValueError("r must be positive")
    return float(spine_angles(f, np.array([r]), x_tol)[0])


def spine_arrays(f: RogersFn, r, x_tol: float = 1e-12) -> SpineArrays:
    r = np.atleast_1d(np.asarray(r, dtype=float))
    theta = spine_angles(f, r, x_tol)
    in_z = np.abs(theta) < HALF_PI - 0.5 * MARGIN
    zeta = r * np.exp(1j * theta)
    lam = np.empty(r.shape)
    dzeta = np.empty(r.shape, dtype=complex)
    dlam = np.empty(r.shape)
    residual = np.zeros(r.shape)
    if np.any(in_z):
        z = zeta[in_z]
        with np.errstate(all="ignore"):
            val = f(z)
            fp = f.derivative(z)
            w = fp * np.exp(1j * theta[in_z])
            dtheta = -w.imag / (r[in_z] * w.real)
        lam[in_z] = val.real
        residual[in_z] = np.abs(val.imag)
        dz = np.exp(1j * theta[in_z]) * (1 + 1j * r[in_z] * dtheta)
        dzeta[in_z] = dz
        dlam[in_z] = (fp * dz).real
    out = ~in_z
    if np.any(out):
        sgn = np.sign(theta[out])
        s = -r[out] * sgn
        with np.errstate(all="ignore"):
            bv = np.asarray(f.boundary(s), dtype=complex)
            fp = np.asarray(f.derivative(1j * sgn * r[out]), dtype=complex)
        lam[out] = bv.real
        dzeta[out] = 1j * sgn
        dlam[out] = (1j * sgn * fp).real
        zeta[out] = 1j * sgn * r[out]
    return SpineArrays(r, theta, zeta, lam, dzeta, dlam, in_z, residual)


def spine_point(f: RogersFn, r: float, method: str = "implicit", x_tol: float = 1e-12) -> SpinePoint:
    """One spine sample.

    ``method="central"`` replaces the implicit derivative by a central
    difference with step ``1e-5 r`` (one-sided near the edge of ``Z``).
    """
    if not r > 0:
        raise ValueError("r must be positive")
    arr = spine_arrays(f, np.array([r]), x_tol)
    pt = arr.point(0)
    if method == "implicit":
        return pt
    if method != "central":
        raise ValueError(f"unknown method {method!r}")
    h = 1e-5 * r

    def zeta_of(rr: float) -> complex:
        return complex(r if rr == r else rr) * np.exp(1j * spine_angle(f, rr, x_tol))

    edge = not pt.in_Z or abs(pt.theta) > HALF_PI - 10 * h / r
    if edge:
        up = zeta_of(r + h)
        dz = (up - pt.zeta) / h if abs(np.angle(up)) < HALF_PI else (pt.zeta - zeta_of(r - h)) / h
    else:
        dz = diff_central(zeta_of, r, h)
    return SpinePoint(pt.r, pt.theta, pt.zeta, pt.lam, float(abs(dz)), pt.in_Z, complex(dz), pt.dlam,
                      pt.residual, pt.flagged or edge)


def spine_table(f: RogersFn, r_grid, x_tol: float = 1e-12) -> list[SpinePoint]:
    r_grid = np.asarray(r_grid, dtype=float)
    if r_grid.ndim != 1 or r_grid.size == 0 or np.any(r_grid <= 0) or np.any(np.diff(r_grid) <= 0):
        raise ValueError("r_grid must be a non-empty, strictly increasing list of positive radii")
    arr = spine_arrays(f, r_grid, x_tol)
    drop = np.diff(arr.lam) < -1e-10 * np.maximum(1.0, np.abs(arr.lam[1:]))
    if np.any(drop):
        i = int(np.argmax(drop))
        raise MonotonicityViolation(
            f"lambda decreases between r={r_grid[i]:.6g} and r={r_grid[i + 1]:.6g} "
            f"({arr.lam[i]:.12g} -> {arr.lam[i + 1]:.12g})"
        )
    return [arr.point(i) for i in range(r_grid.size)]


def dist_to_spine(table: list[SpinePoint], z: complex) -> float:
    """Distance from ``z`` to the sampled spine, refined on adjacent chords."""
    pts = np.array([p.zeta for p in table if p.in_Z])
    if pts.size == 0:
        raise EmptySpine("no spine points with positive real part in the table")
    d = np.abs(pts - z)
    i = int(np.argmin(d))
    best = d[i]
    for j in (i - 1, i + 1):
        if 0 <= j < pts.size:
            p, q = pts[min(i, j)], pts[max(i, j)]
            seg = q - p
            t = np.clip(((z - p) * np.conj(seg)).real / max(abs(seg) ** 2, 1e-300), 0.0, 1.0)
            best = min(best, abs(z - (p + t * seg)))
    return float(best)


def _refine_edge(f: RogersFn, lo: float, hi: float, rel: float = 1e-13) -> float:
    """Bisect in log-radius for the point where membership in ``Z`` flips."""
    inside_lo = bool(spine_arrays(f, np.array([lo])).in_Z[0])
    while hi - lo > rel * hi:
        mid = np.sqrt(lo * hi) if lo > 0 else 0.5 * hi
        if bool(spine_arrays(f, np.array([mid])).in_Z[0]) == inside_lo:
            lo = mid
        else:
            hi = mid
    return lo if inside_lo else hi


def z_segments(f: RogersFn, r_lo: float = 1e-7, r_hi: float = 1e7, per_decade: int = 16) -> list[tuple[float, float]]:
    """Maximal intervals of ``Z`` detected on a geometric scan.

    An interval that is still open at ``r_lo`` starts at 0; one still open at
    ``r_hi`` extends to infinity.  Gaps narrower than the scan spacing are not
    seen.
    """
    n = int(np.ceil(np.log10(r_hi / r_lo) * per_decade)) + 1
    grid = np.geomspace(r_lo, r_hi, n)
    inside = spine_arrays(f, grid).in_Z
    segments = []
    start = 0.0 if inside[0] else None
    for i in range(1, n):
        if inside[i] and not inside[i - 1]:
            start = _refine_edge(f, grid[i - 1], grid[i])
        elif inside[i - 1] and not inside[i]:
            segments.append((start, _refine_edge(f, grid[i - 1], grid[i])))
            start = None
    if start is not None:
        segments.append((start, np.inf))
    return segments
