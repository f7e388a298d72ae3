"""Spectral formulas over the spine.

Every headline quantity is an integral over ``Z`` of the form

    (2/pi) int_Z e^{-t lambda(r)} W(r) |zeta'(r)| dr,

with ``W`` built from the eigenfunctions of :mod:`levy_spine.eigen`:

* killed heat kernel      ``W = F_plus(r; y) F_minus(r; x)``
* supremum CDF            ``W = F_plus(r; y) LF_minus(r; 0+)``
* infimum tail            ``W = LF_plus(r; 0+) F_minus(r; x)``
* bivariate Laplace form  ``W = LF_plus(r; xi) LF_minus(r; eta)``

The Laplace form holds for every process, so :func:`laplace_identity`
compares it against an independent route (the factor product of
``sigma + f`` inverted numerically in ``sigma``) and serves as a universal
self-test.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .eigen import EigenData, laplace_F_minus, laplace_F_plus, eval_F_minus, eval_F_plus, make_eigen
from .numerics import Tolerance, gauss_kronrod, talbot_inversion
from .process import RogersFn
from .spine import HALF_PI, SpinePoint, spine_angles, spine_arrays, z_segments
from .wiener_hopf import wh_product_spine

__all__ = [
    "SpectralError",
    "InvalidArgument",
    "TruncationFailure",
    "NegativeMass",
    "AdmissibilityViolation",
    "SpectralResult",
    "AssumptionReport",
    "EigenCache",
    "heat_kernel",
    "heat_kernel_many",
    "sup_cdf",
    "sup_cdf_many",
    "inf_tail",
    "inf_tail_many",
    "laplace_identity",
    "pecherskii_check",
    "check_assumptions",
]

DEFAULT_TOL = Tolerance(1e-10, 1e-8, 2_000_000)
MIN_T = 0.05
COS_EXCLUDE = 1e-6


class SpectralError(RuntimeError):
    pass


class InvalidArgument(ValueError):
    """A precondition on the arguments (times, positions, the process) is violated."""


class TruncationFailure(SpectralError):
    pass


class NegativeMass(SpectralError):
    pass


class AdmissibilityViolation(InvalidArgument):
    pass


@dataclass(frozen=True)
class SpectralResult:
    value: float
    error_estimate: float
    r_truncation: float
    grid_size: int
    warnings: tuple = ()


@dataclass(frozen=True)
class AssumptionReport:
    eps_estimate: float
    growth_beta_fit: float
    sup_arg_neg_side: float
    inf_arg_pos_side: float
    verdicts: dict
    beta_threshold: float = float("nan")
    notes: tuple = ()


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("LEVY_SPINE_THREADS", "1")))
    except ValueError:
        return 1


class EigenCache:
    """Spine points and eigen data keyed by radius, built once per ``r``."""

    def __init__(self, f: RogersFn, threads: int | None = None):
        self.f = f
        self.threads = threads if threads is not None else _threads()
        self._store: dict[float, tuple[SpinePoint, EigenData | None]] = {}
        self._segments = None
        self.excluded = 0

    @property
    def segments(self) -> list[tuple[float, float]]:
        if self._segments is None:
            self._segments = z_segments(self.f)
        return self._segments

    def get(self, r: np.ndarray) -> list[tuple[SpinePoint, EigenData | None]]:
        r = np.asarray(r, dtype=float)
        missing = np.array(sorted({float(x) for x in r if float(x) not in self._store}))
        if missing.size:
            arr = spine_arrays(self.f, missing)
            points = [arr.point(i) for i in range(missing.size)]

            def build(p: SpinePoint):
                if not p.in_Z or np.cos(p.theta) < COS_EXCLUDE:
                    return None
                return make_eigen(self.f, p)

            if self.threads > 1 and missing.size > 8:
                with ThreadPoolExecutor(self.threads) as pool:
                    eig = list(pool.map(build, points))
            else:
                eig = [build(p) for p in points]
            for p, e in zip(points, eig):
                if e is None and p.in_Z:
                    self.excluded += 1
                self._store[p.r] = (p, e)
        return [self._store[float(x)] for x in r]


def _require_unkilled(f: RogersFn) -> None:
    if getattr(f, "killing", 0.0) != 0.0:
        raise InvalidArgument("spectral formulas require a non-killed process (killing = 0)")


def _check_t(t: float, allow_small_t: bool) -> None:
    if not t > 0:
        raise InvalidArgument("t must be positive")
    if t < MIN_T and not allow_small_t:
        raise InvalidArgument(f"t={t} is below the small-time guard {MIN_T}; pass allow_small_t=True to override")


def _truncation_radius(cache: EigenCache, r_start: float, t: float, growth: float, target: float) -> tuple[float, float]:
    """Radius beyond which the eigenfunction envelope integrates below ``target``.

    The envelope is ``4 exp(|Im zeta| * growth - t lambda) |zeta'|``; its tail
    integral is computed on a geometric grid.  Returns ``(R, tail_bound)``.
    """
    lo = max(r_start, 1e-8 * max(cache.f.scale(), 1.0))
    grid = np.geomspace(lo, max(1e9, 10 * lo), 1200)
    arr = spine_arrays(cache.f, grid)
    log_env = np.log(4.0) + np.abs(arr.zeta.imag) * growth - t * arr.lam + np.log(np.maximum(np.abs(arr.dzeta), 1e-300))
    log_env = np.where(arr.in_Z, log_env, -np.inf)
    # The integrand in d(log r) is env * r; the top of the grid must be negligible.
    log_w = log_env + np.log(grid)
    if log_w[-1] > np.log(target) - 10:
        raise TruncationFailure(
            f"eigenfunction envelope does not decay by r={grid[-1]:.3g} (t={t}, growth={growth})"
        )
    dlog = np.log(grid[1] / grid[0])
    with np.errstate(under="ignore"):
        w = np.exp(np.minimum(log_w, 700.0))
    tail = np.cumsum((w * dlog)[::-1])[::-1]
    ok = np.nonzero(tail < 0.01 * target)[0]
    R = grid[ok[0]] if ok.size else grid[-1]
    return float(R), float(tail[ok[0]] if ok.size else tail[-1])


def _integrate_spine(
    cache: EigenCache,
    weight,
    n_out: int,
    t: float | None,
    growth: float,
    tol: Tolerance,
    oscillation: float = 0.0,
):
    """``(2/pi) int_Z e^{-t lambda} W |zeta'| dr`` for a vector of outputs.

    ``weight(points, eigen)`` returns an ``(n_out, n)`` array for the valid
    spine samples.  ``t=None`` means no exponential damping; the infinite
    segment is then mapped onto ``[0, 1)``.
    """
    total = np.zeros(n_out)
    err = 0.0
    evals = 0
    r_trunc = 0.0
    warnings: list[str] = []

    def spine_values(r: np.ndarray) -> np.ndarray:
        data = cache.get(r)
        out = np.zeros((n_out, r.size))
        idx = [i for i, (_, e) in enumerate(data) if e is not None]
        if idx:
            pts = [data[i][0] for i in idx]
            eig = [data[i][1] for i in idx]
            w = np.asarray(weight(pts, eig), dtype=float).reshape(n_out, len(idx))
            lam = np.array([p.lam for p in pts])
            dz = np.array([p.dzeta_abs for p in pts])
            damp = np.exp(-t * lam) if t is not None else 1.0
            out[:, idx] = (2.0 / np.pi) * w * damp * dz
        return out

    for r1, r2 in cache.segments:
        hi = r2
        if t is not None:
            R, tail = _truncation_radius(cache, r1 if r1 > 0 else 0.0, t, growth, tol.abs_tol)
            if R < hi:
                hi = R
                err += tail
            if hi <= r1:
                continue
        if np.isfinite(hi):
            width = hi - r1
            panels = int(np.clip(np.ceil(width * oscillation / np.pi), 4, 400))

            def integrand(u, r1=r1, width=width):
                r = r1 + width * (3 * u**2 - 2 * u**3)
                jac = 6 * width * u * (1 - u)
                return spine_values(r) * jac[None, :]

            res = gauss_kronrod(integrand, 0.0, 1.0, tol.abs_tol, tol.rel_tol, tol.max_evals, min_panels=panels)
            r_trunc = max(r_trunc, hi)
        else:
            L = max(r1, cache.f.scale(), 1.0)

            def integrand(u, r1=r1, L=L):
                one_minus = 1.0 - u
                r = r1 + L * u / one_minus
                return spine_values(r) * (L / one_minus**2)[None, :]

            res = gauss_kronrod(integrand, 0.0, 1.0, tol.abs_tol, tol.rel_tol, tol.max_evals, min_panels=8)
            r_trunc = np.inf
        total += np.asarray(res.value, dtype=float).reshape(n_out)
        err += res.abs_error_estimate
        evals += res.evaluations
    if cache.excluded:
        warnings.append(f"{cache.excluded} spine samples with cos(theta) < {COS_EXCLUDE} excluded")
    return total, err, r_trunc, evals, warnings


def _results(values, err, r_trunc, evals, warnings, cdf: bool, tol: Tolerance) -> list[SpectralResult]:
    out = []
    for v in values:
        w = list(warnings)
        if cdf and not (-1e-6 <= v <= 1 + 1e-6):
            w.append(f"CDF value {v:.6g} outside [0, 1]")
        out.append(SpectralResult(float(v), float(err), float(r_trunc), int(evals), tuple(w)))
    return out


def heat_kernel_many(
    f: RogersFn,
    t: float,
    x,
    y,
    tol: Tolerance = DEFAULT_TOL,
    cache: EigenCache | None = None,
    allow_small_t: bool = False,
) -> list[SpectralResult]:
    """Killed heat kernel ``p_t^+(x, y)`` at paired arrays ``x``, ``y``, sharing one r-integration."""
    _require_unkilled(f)
    _check_t(t, allow_small_t)
    xs, ys = np.broadcast_arrays(np.atleast_1d(np.asarray(x, float)), np.atleast_1d(np.asarray(y, float)))
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise InvalidArgument("x and y must be positive")
    cache = cache or EigenCache(f)

    def weight(pts, eig):
        return np.array([eval_F_plus(e, ys) * eval_F_minus(e, xs) for e in eig]).T

    vals, err, R, evals, warn = _integrate_spine(
        cache, weight, xs.size, t, float(np.max(xs + ys)), tol, oscillation=float(np.max(np.maximum(xs, ys))))
    floor = 10 * err + 10 * tol.abs_tol
    if np.any(vals < -floor):
        k = int(np.argmin(vals))
        raise NegativeMass(f"heat kernel {vals[k]:.3g} < 0 at x={xs[k]}, y={ys[k]} beyond the error estimate")
    return _results(vals, err, R, evals, warn, False, tol)


def heat_kernel(f: RogersFn, t: float, x: float, y: float, tol: Tolerance = DEFAULT_TOL, **kw) -> SpectralResult:
    return heat_kernel_many(f, t, x, y, tol, **kw)[0]


def sup_cdf_many(f: RogersFn, t: float, y, tol: Tolerance = DEFAULT_TOL, cache: EigenCache | None = None,
                 allow_small_t: bool = False) -> list[SpectralResult]:
    """``P(sup_{s<=t} X_s < y)`` for an array of levels ``y``."""
    _require_unkilled(f)
    _check_t(t, allow_small_t)
    ys = np.atleast_1d(np.asarray(y, float))
    if np.any(ys <= 0):
        raise InvalidArgument("y must be positive")
    cache = cache or EigenCache(f)

    def weight(pts, eig):
        return np.array([eval_F_plus(e, ys) * e.lf_minus_zero for e in eig]).T

    vals, err, R, evals, warn = _integrate_spine(cache, weight, ys.size, t, float(ys.max()), tol,
                                                 oscillation=float(ys.max()))
    return _results(vals, err, R, evals, warn, True, tol)


def sup_cdf(f: RogersFn, t: float, y: float, tol: Tolerance = DEFAULT_TOL, **kw) -> SpectralResult:
    return sup_cdf_many(f, t, y, tol, **kw)[0]


def inf_tail_many(f: RogersFn, t: float, x, tol: Tolerance = DEFAULT_TOL, cache: EigenCache | None = None,
                  allow_small_t: bool = False) -> list[SpectralResult]:
    """``P(inf_{s<=t} X_s > -x)`` for an array of depths ``x``."""
    _require_unkilled(f)
    _check_t(t, allow_small_t)
    xs = np.atleast_1d(np.asarray(x, float))
    if np.any(xs <= 0):
        raise InvalidArgument("x must be positive")
    cache = cache or EigenCache(f)

    def weight(pts, eig):
        return np.array([e.lf_plus_zero * eval_F_minus(e, xs) for e in eig]).T

    vals, err, R, evals, warn = _integrate_spine(cache, weight, xs.size, t, float(xs.max()), tol,
                                                 oscillation=float(xs.max()))
    return _results(vals, err, R, evals, warn, True, tol)


def inf_tail(f: RogersFn, t: float, x: float, tol: Tolerance = DEFAULT_TOL, **kw) -> SpectralResult:
    return inf_tail_many(f, t, x, tol, **kw)[0]


def _check_admissible(f: RogersFn, xi: float, eta: float) -> None:
    """Spine-angle condition on ``xi`` and ``eta``.

    An endpoint of ``Z`` (for instance ``r = 2`` for the risk process, where
    ``zeta = -2i``) is accepted: both sides of the identities are continuous
    there, while they separate as soon as the point moves past it.
    """
    if not (xi > 0 and eta > 0):
        raise InvalidArgument("xi and eta must be positive")
    margin = 1e-6
    nudge = np.array([1.0, 1 - 1e-7, 1 + 1e-7])
    if np.all(spine_angles(f, xi * nudge) >= HALF_PI - margin):
        raise AdmissibilityViolation(f"Arg zeta({xi}) is not below pi/2")
    if np.all(spine_angles(f, eta * nudge) <= -HALF_PI + margin):
        raise AdmissibilityViolation(f"Arg zeta({eta}) is not above -pi/2")


def _laplace_weight(xi: float, eta: float, sigma: float | None = None):
    def weight(pts, eig):
        w = np.array([(laplace_F_plus(e, xi) * laplace_F_minus(e, eta)).real for e in eig])
        if sigma is not None:
            w = w / (sigma + np.array([p.lam for p in pts]))
        return w[None, :]
    return weight


def _laplace_lhs_pecherskii(f: RogersFn, t: float, xi: float, eta: float, m: int) -> float:
    def transform(sigma):
        return 1.0 / ((xi + eta) * wh_product_spine(f, sigma, xi, eta))
    return talbot_inversion(transform, t, m)


def _laplace_lhs_kernel(f: RogersFn, t: float, xi: float, eta: float, n: int, tol: Tolerance,
                        cache: EigenCache) -> float:
    nodes, weights = np.polynomial.laguerre.laggauss(n)
    x, y = np.meshgrid(nodes / eta, nodes / xi, indexing="ij")
    wx, wy = np.meshgrid(weights / eta, weights / xi, indexing="ij")
    # Gauss-Laguerre absorbs e^{-eta x - xi y}; undo it for the kernel values.
    res = heat_kernel_many(f, t, x.ravel(), y.ravel(), tol, cache=cache, allow_small_t=True)
    p = np.array([r.value for r in res]).reshape(x.shape)
    return float(np.sum(wx * wy * p))


def laplace_identity(
    f: RogersFn,
    t: float,
    xi: float,
    eta: float,
    tol: Tolerance = DEFAULT_TOL,
    lhs_method: str = "pecherskii",
    talbot_m: int = 20,
    kernel_nodes: int = 24,
    cache: EigenCache | None = None,
) -> tuple[float, float, float]:
    """``(rhs, lhs, rel_diff)`` for the double Laplace transform of the killed kernel.

    ``rhs`` is the spine integral of ``LF_plus(xi) LF_minus(eta)``.  ``lhs``
    is either the factor product of ``sigma + f`` inverted in ``sigma``
    (``"pecherskii"``) or a Gauss--Laguerre tensor quadrature of spectral
    heat-kernel values (``"kernel"``).
    """
    _require_unkilled(f)
    if not t > 0:
        raise InvalidArgument("t must be positive")
    _check_admissible(f, xi, eta)
    cache = cache or EigenCache(f)
    vals, *_ = _integrate_spine(cache, _laplace_weight(xi, eta), 1, t, 0.0, tol)
    rhs = float(vals[0])
    if lhs_method == "pecherskii":
        lhs = _laplace_lhs_pecherskii(f, t, xi, eta, talbot_m)
    elif lhs_method == "kernel":
        lhs = _laplace_lhs_kernel(f, t, xi, eta, kernel_nodes, tol, cache)
    else:
        raise ValueError(f"unknown lhs_method {lhs_method!r}")
    return rhs, lhs, abs(rhs - lhs) / max(abs(lhs), 1e-300)


def pecherskii_check(
    f: RogersFn,
    sigma: float,
    xi: float,
    eta: float,
    tol: Tolerance = DEFAULT_TOL,
    cache: EigenCache | None = None,
) -> tuple[float, float, float]:
    """``(lhs, rhs, rel_diff)``: factor product versus the time-integrated eigen expansion."""
    _require_unkilled(f)
    if not sigma > 0:
        raise InvalidArgument("sigma must be positive")
    _check_admissible(f, xi, eta)
    lhs = 1.0 / ((xi + eta) * wh_product_spine(f, sigma, xi, eta))
    cache = cache or EigenCache(f)
    vals, *_ = _integrate_spine(cache, _laplace_weight(xi, eta, sigma), 1, None, 0.0, tol)
    rhs = float(vals[0])
    return lhs, rhs, abs(lhs - rhs) / max(abs(lhs), 1e-300)


# ----- assumption checker -------------------------------------------------------

@dataclass
class _Params:
    eps: float | None = None
    beta: float | None = None
    delta: float = 0.2
    rho: float = 1.0
    t: float = 1.0
    r_min: float = 1e-4
    r_max: float = 1e14
    per_decade: int = 60
    notes: list = field(default_factory=list)


def _log_growth(log_r, lam, im_part, dz_abs, in_z, s, t):
    """``log int_Z exp(s * im_part - t lambda) |zeta'| dr`` on a log-spaced grid."""
    h = s * im_part - t * lam + np.log(np.maximum(dz_abs, 1e-300)) + log_r
    h = np.where(in_z, h, -np.inf)
    top = np.max(h)
    if not np.isfinite(top):
        return -np.inf, -1
    dlog = log_r[1] - log_r[0]
    return float(top + np.log(np.sum(np.exp(h - top)) * dlog)), int(np.argmax(h))


def _fit_beta(arr, side_im, t, notes) -> float:
    """Exponent ``beta`` in ``int_Z e^{s*im - t lambda}|zeta'| ~ exp(C s^beta)``."""
    log_r = np.log(arr.r)
    base, _ = _log_growth(log_r, arr.lam, side_im, np.abs(arr.dzeta), arr.in_Z, 0.0, t)
    s_ladder = np.geomspace(1.0, 1e3, 19)
    usable_s, growth = [], []
    for s in s_ladder:
        val, k = _log_growth(log_r, arr.lam, side_im, np.abs(arr.dzeta), arr.in_Z, s, t)
        if k >= arr.r.size - arr.r.size // 14:
            break
        usable_s.append(s)
        growth.append(val - base)
    growth = np.array(growth)
    if not usable_s:
        notes.append("growth integrand still rising at the end of the radius grid; integral treated as divergent")
        return float("inf")
    if len(usable_s) < 4:
        notes.append("growth integral peaks at the end of the radius grid; growth exponent not resolved")
        return float("nan")
    if np.all(growth < 1e-8 * np.maximum(1.0, np.array(usable_s))):
        return 0.0
    s = np.array(usable_s)
    keep = growth > 1e-12
    s, growth = s[keep], growth[keep]
    half = max(3, s.size // 2)
    slope = np.polyfit(np.log1p(s[-half:]), np.log(growth[-half:]), 1)[0]
    return float(slope)


def _arg_extreme(f: RogersFn, side: int, delta: float, rho: float) -> float:
    r = np.geomspace(rho * 1e-6, rho * (1 - 1e-9), 400)
    if delta == 0.0:
        vals = np.asarray(f.boundary(side * r), dtype=complex)
    else:
        point = (-1j * np.exp(1j * delta) if side > 0 else 1j * np.exp(-1j * delta)) * r
        vals = np.asarray(f(point), dtype=complex)
    args = np.angle(vals)
    return float(np.max(args) if side > 0 else np.min(args))


def _verdict(margin: float, beta_fit: float, threshold: float, extra_ok: bool | None = None) -> str:
    if np.isnan(beta_fit) or not np.isfinite(margin):
        return "inconclusive"
    if margin <= 1e-6:
        return "fail"
    if beta_fit >= threshold * 1.02:
        return "fail"
    if beta_fit > threshold * 0.98:
        return "inconclusive"
    if extra_ok is False:
        return "fail"
    return "pass"


def check_assumptions(f: RogersFn, table=None, params: dict | None = None) -> AssumptionReport:
    """Sampled verdicts on the conditions behind the spectral formulas.

    * tail angle margin ``eps = pi/2 - max |Arg zeta|`` over the last decade;
    * growth exponent from a log-log fit of the envelope integral against
      ``1 + s``, compared with ``1 + eps/(pi/2 - eps)``;
    * argument signs of ``f`` near the origin along the tilted rays
      (supremum and infimum formulas only).
    """
    p = _Params(**(params or {}))
    notes: list[str] = []
    if table is not None and len(table) > 0:
        r_tab = np.array([q.r for q in table])
        theta_tab = np.array([q.theta for q in table])
        last = r_tab >= r_tab[-1] / 10
        max_abs, max_up, min_dn = (np.max(np.abs(theta_tab[last])), np.max(theta_tab[last]),
                                   np.min(theta_tab[last]))
        if r_tab[-1] / r_tab[0] < 1e3:
            notes.append("spine table spans fewer than three decades")
    else:
        r0 = max(1e5, 1e4 * float(f.tail_radius()))
        r_tail = np.geomspace(r0, 10 * r0, 41)
        th = spine_arrays(f, r_tail).theta
        max_abs, max_up, min_dn = np.max(np.abs(th)), np.max(th), np.min(th)

    eps_heat = float(p.eps if p.eps is not None else HALF_PI - max_abs)
    eps_sup = float(p.eps if p.eps is not None else HALF_PI - max_up)
    eps_inf = float(p.eps if p.eps is not None else HALF_PI + min_dn)

    n = int(np.log10(p.r_max / p.r_min) * p.per_decade) + 1
    arr = spine_arrays(f, np.geomspace(p.r_min, p.r_max, n))
    im = arr.zeta.imag
    beta_heat = _fit_beta(arr, np.abs(im), p.t, notes)
    beta_sup = _fit_beta(arr, np.maximum(im, 0.0), p.t, notes)
    beta_inf = _fit_beta(arr, np.maximum(-im, 0.0), p.t, notes)

    def threshold(eps):
        if p.beta is not None:
            return p.beta
        return 1.0 + eps / (HALF_PI - eps) if eps < HALF_PI else np.inf

    sup_arg = _arg_extreme(f, +1, p.delta, p.rho)
    inf_arg = _arg_extreme(f, -1, p.delta, p.rho)
    verdicts = {
        "heat": _verdict(eps_heat, beta_heat, threshold(eps_heat)),
        "sup": _verdict(eps_sup, beta_sup, threshold(eps_sup), sup_arg < 0),
        "inf": _verdict(eps_inf, beta_inf, threshold(eps_inf), inf_arg > 0),
    }
    return AssumptionReport(
        eps_estimate=eps_heat,
        growth_beta_fit=beta_heat,
        sup_arg_neg_side=sup_arg,
        inf_arg_pos_side=inf_arg,
        verdicts=verdicts,
        beta_threshold=float(threshold(eps_heat)),
        notes=tuple(notes),
    )
