"""Generalised eigenfunctions attached to one spine point.

For ``zeta = a + i b`` on the spine,

    F_plus(y)  = exp(b y)  sin(a y + c_plus)  - G_plus(y),
    F_minus(x) = exp(-b x) sin(a x + c_minus) - G_minus(x),

where the phases come from the Wiener--Hopf factors of the difference
quotient ``f(r; .)`` and ``G_plus``, ``G_minus`` are completely monotone.
Their Laplace transforms are explicit:

    L F_plus(xi) = norm_plus * f_plus(r; xi) / ((xi + i zeta)(xi - i conj zeta)),

with ``norm_plus = a / |f_plus(r; -i zeta)|`` (and the mirror for the minus
side).  ``G`` is evaluated pointwise as the Laplace transform of its
representing measure, which is read off the boundary values of the factor on
the negative half-line:

    G_plus(y) = (norm_plus / pi) int exp(-s y) Im f_plus(r; -s + i0) / (a^2 + (b + s)^2) ds,

and with ``(b - s)^2`` on the minus side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import Tolerance, integrate_log_scale
from .process import RogersFn
from .spine import SpinePoint
from .wiener_hopf import WhFactors, quotient_fn, wh_factorize

__all__ = [
    "NearPole",
    "EigenData",
    "make_eigen",
    "laplace_F_plus",
    "laplace_F_minus",
    "laplace_G",
    "eval_G",
    "eval_F_plus",
    "eval_F_minus",
]


class NearPole(ValueError):
    pass


@dataclass(frozen=True)
class EigenData:
    point: SpinePoint
    a: float
    b: float
    c_plus: float
    c_minus: float
    norm_plus: float
    norm_minus: float
    wh: WhFactors
    lf_plus_zero: float
    lf_minus_zero: float

    @property
    def r(self) -> float:
        return self.point.r


def make_eigen(f: RogersFn, p: SpinePoint, tol: Tolerance | None = None) -> EigenData:
    if not p.in_Z:
        raise ValueError(f"spine point r={p.r} is outside Z")
    wh = wh_factorize(quotient_fn(f, p), tol) if tol is not None else wh_factorize(quotient_fn(f, p))
    zeta = complex(p.zeta)
    fp = complex(wh.plus(np.array([-1j * zeta]))[0])
    fm = complex(wh.minus(np.array([1j * zeta]))[0])
    a, b = zeta.real, zeta.imag
    norm_plus, norm_minus = a / abs(fp), a / abs(fm)
    r2 = p.r**2
    at_zero = wh.plus(np.array([0.0 + 0j]))[0], wh.minus(np.array([0.0 + 0j]))[0]
    return EigenData(
        point=p, a=a, b=b,
        c_plus=float(-np.angle(fp)), c_minus=float(np.angle(fm)),
        norm_plus=norm_plus, norm_minus=norm_minus, wh=wh,
        lf_plus_zero=float(norm_plus * at_zero[0].real / r2),
        lf_minus_zero=float(norm_minus * at_zero[1].real / r2),
    )


def _check_poles(xi: np.ndarray, poles: tuple[complex, complex], r: float) -> None:
    for pole in poles:
        if np.any(np.abs(xi - pole) < 1e-8 * r):
            raise NearPole(f"argument within 1e-8 r of the pole {pole}")


def laplace_F_plus(e: EigenData, xi):
    zeta = complex(e.point.zeta)
    xi_arr = np.asarray(xi, dtype=complex)
    _check_poles(xi_arr, (-1j * zeta, 1j * np.conj(zeta)), e.r)
    out = e.norm_plus * e.wh.plus(xi_arr) / ((xi_arr + 1j * zeta) * (xi_arr - 1j * np.conj(zeta)))
    return out if out.ndim else complex(out)


def laplace_F_minus(e: EigenData, eta):
    zeta = complex(e.point.zeta)
    eta_arr = np.asarray(eta, dtype=complex)
    _check_poles(eta_arr, (1j * zeta, -1j * np.conj(zeta)), e.r)
    out = e.norm_minus * e.wh.minus(eta_arr) / ((eta_arr - 1j * zeta) * (eta_arr + 1j * np.conj(zeta)))
    return out if out.ndim else complex(out)


def laplace_G(e: EigenData, side: str, xi):
    """Laplace transform of ``G`` from the oscillatory part minus ``L F``."""
    zeta = complex(e.point.zeta)
    xi = np.asarray(xi, dtype=complex)
    if side == "plus":
        return (-np.exp(-1j * e.c_plus) / (xi + 1j * zeta)).imag - laplace_F_plus(e, xi).real
    return (np.exp(1j * e.c_minus) / (xi - 1j * zeta)).imag - laplace_F_minus(e, xi).real


def _measure_denominator(e: EigenData, side: str, s):
    shift = e.b if side == "plus" else -e.b
    return e.a**2 + (shift + s) ** 2


def eval_G(e: EigenData, side: str, z, tol: Tolerance = Tolerance(1e-11, 1e-9, 200_000)):
    """Pointwise ``G_plus`` / ``G_minus``; vectorised over ``z > 0``."""
    if side not in ("plus", "minus"):
        raise ValueError("side must be 'plus' or 'minus'")
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(z_arr <= 0):
        raise ValueError("z must be positive")
    norm = e.norm_plus if side == "plus" else e.norm_minus
    total = np.zeros(z_arr.shape)
    for s_j, mass in e.wh.atoms(side):
        total += norm / np.pi * mass * np.exp(-s_j * z_arr) / _measure_denominator(e, side, s_j)
    if not e.wh.stepwise:

        def integrand(s):
            dens = e.wh.density(side, s) / _measure_denominator(e, side, s)
            return np.exp(-np.outer(z_arr, s)) * dens[None, :]

        L = max(e.r, 1e-300)
        marks = np.concatenate([L * np.array([0.01, 0.1, 1.0, 10.0]), 1.0 / z_arr])
        hi = 800.0 / float(z_arr.min())
        res = integrate_log_scale(integrand, 1e-16 * min(L, 1.0), hi, marks, tol)
        total += norm / np.pi * np.asarray(res.value).reshape(z_arr.shape).real
    return total if np.ndim(z) else float(total[0])


def eval_F_plus(e: EigenData, y):
    y_arr = np.asarray(y, dtype=float)
    osc = np.exp(e.b * y_arr) * np.sin(e.a * y_arr + e.c_plus)
    out = osc - eval_G(e, "plus", y_arr)
    return out if np.ndim(y) else float(out)


def eval_F_minus(e: EigenData, x):
    x_arr = np.asarray(x, dtype=float)
    osc = np.exp(-e.b * x_arr) * np.sin(e.a * x_arr + e.c_minus)
    out = osc - eval_G(e, "minus", x_arr)
    return out if np.ndim(x) else float(out)
