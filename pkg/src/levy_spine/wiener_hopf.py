"""Difference quotients, Wiener--Hopf factors and spine-integral factor products.

A Rogers function ``g`` factorises as ``g(xi) = g_plus(-i xi) * g_minus(i xi)``
with complete Bernstein factors

    log g_plus(z) = log c_plus + (1/pi) int_0^inf phi(s) (1/(1+s) - 1/(z+s)) ds

(and ``phi(-s)`` for ``g_minus``).  The constant ``c = c_plus * c_minus`` is
recovered from one value of ``g`` and split symmetrically,
``c_plus = c_minus = sqrt(c)``.

Two evaluation routes share the same representation:

* **stepwise** boundary angles (values in {0, pi} between finitely many
  breakpoints, which is what hyperexponential mixtures produce): every piece
  integrates in closed form, so the factors are exact rational functions and
  their boundary measures are finite sums of atoms;
* **smooth** boundary angles (stable laws, custom functions): adaptive
  Gauss--Kronrod quadrature of the representation, principal values for the
  boundary modulus.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from .numerics import (
    TailNotDecaying,
    Tolerance,
    gauss_kronrod,
    integrate_log_scale,
)
from .process import MixtureRogers, RogersFn, _real_roots, phi_from_boundary
from .spine import SpinePoint, spine_arrays, z_segments

__all__ = [
    "WienerHopfError",
    "DerivativeVanishes",
    "FactorisationResidual",
    "QuotientFn",
    "ShiftedFn",
    "Piece",
    "WhFactors",
    "quotient_fn",
    "shifted_fn",
    "wh_factorize",
    "wh_boundary",
    "wh_product_spine",
    "factorisation_residual",
]


class WienerHopfError(RuntimeError):
    pass


class DerivativeVanishes(WienerHopfError):
    pass


class FactorisationResidual(WienerHopfError):
    pass


def _polys_of(f: RogersFn):
    if isinstance(f, MixtureRogers):
        return f.boundary_polynomials
    return getattr(f, "boundary_polynomials", None)


class QuotientFn(RogersFn):
    """``(xi - zeta)(xi + conj zeta) / (f(xi) - lambda)`` at one spine point."""

    def __init__(self, f: RogersFn, point: SpinePoint, patch_rel: float = 1e-4):
        if not point.in_Z:
            raise ValueError("difference quotients need a spine point inside Z")
        self.f = f
        self.point = point
        self.zeta = complex(point.zeta)
        self.lam = float(point.lam)
        self.stepwise = f.stepwise
        self.descriptor = f"quotient({f.descriptor}; r={point.r:.6g})"
        fp = complex(np.asarray(f.derivative(np.array([self.zeta])))[0])
        if not abs(fp) > 1e-12 * abs(self.lam) / max(point.r, 1e-300):
            raise DerivativeVanishes(f"|f'(zeta)| = {abs(fp):.3e} at r={point.r}")
        self.value_at_zeta = 2.0 * self.zeta.real / fp
        self.delta = patch_rel * point.r
        d = 4.0 * self.delta
        probe = self.zeta + d * np.array([1, -1, 1j, -1j])
        v = self._raw(probe)
        self.slope_at_zeta = 0.5 * ((v[0] - v[1]) / (2 * d) + (v[2] - v[3]) / (2j * d))

    def _raw(self, xi):
        return (xi - self.zeta) * (xi + np.conj(self.zeta)) / (self.f(xi) - self.lam)

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=complex)
        with np.errstate(all="ignore"):
            out = self._raw(xi)
        near = np.abs(xi - self.zeta) < self.delta
        if np.any(near):
            out = np.where(near, self.value_at_zeta + (xi - self.zeta) * self.slope_at_zeta, out)
        return out

    def boundary(self, s):
        s = np.asarray(s, dtype=float)
        a, b = self.zeta.real, self.zeta.imag
        with np.errstate(all="ignore"):
            return -((s + b) ** 2 + a**2) / (np.asarray(self.f.boundary(s)) - self.lam)

    def breakpoints(self) -> np.ndarray:
        polys = _polys_of(self.f)
        if polys is None:
            return np.empty(0)
        num, den = polys
        pts = np.concatenate([_real_roots(P.polysub(num, self.lam * den)), _real_roots(den)])
        return np.unique(pts[pts != 0])

    def reference_point(self) -> complex:
        th = self.point.theta
        gamma = float(np.clip(th - 0.8 if th > 0 else th + 0.8, -1.2, 1.2))
        return self.point.r * np.exp(1j * gamma)

    def scale(self) -> float:
        return self.point.r


class ShiftedFn(RogersFn):
    """``sigma + f`` for ``sigma > 0``."""

    def __init__(self, f: RogersFn, sigma: float):
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        self.f, self.sigma = f, float(sigma)
        self.stepwise = f.stepwise
        self.descriptor = f"{sigma:g}+{f.descriptor}"

    def __call__(self, xi):
        return self.sigma + self.f(xi)

    def derivative(self, xi):
        return self.f.derivative(xi)

    def boundary(self, s):
        return self.sigma + np.asarray(self.f.boundary(s))

    def breakpoints(self) -> np.ndarray:
        polys = _polys_of(self.f)
        if polys is None:
            return np.empty(0)
        num, den = polys
        pts = np.concatenate([_real_roots(P.polyadd(num, self.sigma * den)), _real_roots(den)])
        return np.unique(pts[pts != 0])

    def scale(self) -> float:
        return self.f.scale()


def quotient_fn(f: RogersFn, p: SpinePoint) -> QuotientFn:
    return QuotientFn(f, p)


def shifted_fn(f: RogersFn, sigma: float) -> ShiftedFn:
    return ShiftedFn(f, sigma)


@dataclass(frozen=True)
class Piece:
    """An interval ``(lo, hi)`` of ``s > 0`` on which the boundary angle is ``phi``."""

    lo: float
    hi: float
    phi: float


def _stepwise_pieces(g: RogersFn, side: int) -> list[Piece]:
    bps = np.asarray(g.breakpoints(), dtype=float)
    cuts = np.unique(np.abs(bps[np.sign(bps) == side]))
    edges = np.concatenate([[0.0], cuts, [np.inf]])
    probe = np.where(np.isinf(edges[1:]), 2.0 * edges[:-1] + 1.0, 0.5 * (edges[:-1] + edges[1:]))
    phis = phi_from_boundary(np.asarray(g.boundary(side * probe)), side * probe)
    pieces: list[Piece] = []
    for lo, hi, ph in zip(edges[:-1], edges[1:], phis):
        ph = float(ph)
        if pieces and abs(pieces[-1].phi - ph) < 1e-12:
            pieces[-1] = Piece(pieces[-1].lo, hi, ph)
        else:
            pieces.append(Piece(float(lo), float(hi), ph))
    return [p for p in pieces if p.phi > 0]


def _stepwise_log(pieces: list[Piece], z: np.ndarray) -> np.ndarray:
    out = np.zeros(z.shape, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        for p in pieces:
            term = np.log(z + p.lo) - np.log1p(p.lo)
            if np.isfinite(p.hi):
                term = term + np.log1p(p.hi) - np.log(z + p.hi)
            out = out + (p.phi / np.pi) * term
    return out


def _stepwise_log_abs_boundary(pieces: list[Piece], s0: np.ndarray) -> np.ndarray:
    out = np.zeros(s0.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        for p in pieces:
            term = np.log(np.abs(p.lo - s0)) - np.log1p(p.lo)
            if np.isfinite(p.hi):
                term = term + np.log1p(p.hi) - np.log(np.abs(p.hi - s0))
            out = out + (p.phi / np.pi) * term
    return out


def _s_marks(marks: np.ndarray, L: float) -> np.ndarray:
    """Panel breaks in ``s``: the given points plus decades around ``L`` and 1.

    The representation kernel has its own scale ``s = 1``, which sits far from
    ``L = r`` when ``r`` is tiny or huge.
    """
    s = np.concatenate([np.asarray(marks, dtype=float), L * np.array([1e-3, 1e-2, 0.1, 1, 10, 100, 1e3]),
                        [0.01, 0.1, 1.0, 10.0, 100.0]])
    s = np.unique(s[(s > 0) & np.isfinite(s)])
    # Merge near-coincident marks; a sliver panel between them only costs evaluations.
    return s[np.concatenate([[True], np.diff(np.log(s)) > 1e-6])] if s.size else s


def _s_range(marks: np.ndarray) -> tuple[float, float]:
    """Integration range wide enough that both truncated tails are negligible."""
    return 1e-16 * float(marks.min()), 1e16 * float(marks.max())


def _phi_at(g: RogersFn, side: int, s: np.ndarray) -> np.ndarray:
    signed = side * np.asarray(s, dtype=float)
    return phi_from_boundary(np.asarray(g.boundary(signed)), signed)


@dataclass
class WhFactors:
    """Evaluators for the two factors of ``base``.

    ``plus(z)`` and ``minus(z)`` are holomorphic on ``C \\ (-inf, 0]`` and
    satisfy ``base(xi) = plus(-i xi) * minus(i xi)``.
    """

    base: RogersFn
    tol: Tolerance
    stepwise: bool
    pieces: dict[int, list[Piece]] = field(default_factory=dict)
    log_c: float = 0.0
    c_residual: float = 0.0
    norm_convention: str = "c_plus = c_minus = sqrt(c)"

    # ----- log-factor evaluation -------------------------------------------------
    def _scale(self) -> float:
        return max(float(self.base.scale()), 1e-300)

    def _smooth_log(self, side: int, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex).ravel()
        g = self.base

        def integrand(s):
            phi = _phi_at(g, side, s)
            kern = 1.0 / (1.0 + s)[None, :] - 1.0 / (z[:, None] + s[None, :])
            return phi[None, :] * kern / np.pi

        marks = _s_marks(np.abs(z), self._scale())
        res = integrate_log_scale(integrand, *_s_range(marks), marks, self.tol)
        return np.asarray(res.value, dtype=complex).reshape(-1)

    def log_factor(self, side: int, z) -> np.ndarray:
        z_arr = np.asarray(z, dtype=complex)
        flat = z_arr.ravel()
        if self.stepwise:
            val = _stepwise_log(self.pieces[side], flat)
        else:
            val = np.empty(flat.shape, dtype=complex)
            zero = flat == 0
            if np.any(zero):
                val[zero] = self._log_at_zero(side)
            if np.any(~zero):
                val[~zero] = self._smooth_log(side, flat[~zero])
        return (0.5 * self.log_c + val).reshape(z_arr.shape)

    def _log_at_zero(self, side: int) -> complex:
        g = self.base
        L = self._scale()
        if _phi_at(g, side, np.array([1e-12 * L]))[0] > 1e-6:
            return -np.inf + 0j
        marks = _s_marks(np.empty(0), L)
        res = integrate_log_scale(lambda s: -_phi_at(g, side, s) / (s * (1 + s)) / np.pi,
                                  *_s_range(marks), marks, self.tol)
        return complex(res.value)

    def plus(self, z):
        with np.errstate(under="ignore"):
            return np.exp(self.log_factor(+1, z))

    def minus(self, z):
        with np.errstate(under="ignore"):
            return np.exp(self.log_factor(-1, z))

    def factor(self, which: str, z):
        return self.plus(z) if which == "plus" else self.minus(z)

    # ----- boundary values on the negative half-line --------------------------
    def boundary(self, which: str, s0) -> tuple[np.ndarray, np.ndarray]:
        side = _side(which)
        s0 = np.atleast_1d(np.asarray(s0, dtype=float))
        arg = _phi_at(self.base, side, s0)
        if self.stepwise:
            log_mod = 0.5 * self.log_c + _stepwise_log_abs_boundary(self.pieces[side], s0)
        else:
            log_mod = 0.5 * self.log_c + self._smooth_log_abs(side, s0)
        return np.exp(log_mod), arg

    def _smooth_log_abs(self, side: int, s0: np.ndarray) -> np.ndarray:
        """Principal-value log-modulus at ``-s0``, vectorised over ``s0``.

        Uses ``PV int_0^inf (1/(1+s) - 1/(s-s0)) ds = log s0`` to subtract the
        pole, leaving a bounded integrand ``(phi(s) - phi(s0)) * kernel``.
        """
        g = self.base
        phi0 = _phi_at(g, side, s0)

        def integrand(s):
            diff = s[None, :] - s0[:, None]
            with np.errstate(divide="ignore", invalid="ignore"):
                kern = (-1.0 - s0[:, None]) / ((1.0 + s)[None, :] * diff)
            kern = np.where(diff == 0.0, 0.0, kern)
            dphi = _phi_at(g, side, s)[None, :] - phi0[:, None]
            return dphi * kern

        marks = _s_marks(s0 if s0.size <= 64 else np.empty(0), self._scale())
        res = integrate_log_scale(integrand, *_s_range(marks), marks, self.tol)
        return (phi0 * np.log(s0) + np.asarray(res.value).real.reshape(s0.shape)) / np.pi

    def density(self, which: str, s0) -> np.ndarray:
        """Absolutely continuous part of ``Im factor(-s + i0)``."""
        mod, arg = self.boundary(which, s0)
        if self.stepwise:
            return np.zeros_like(mod)
        return mod * np.sin(arg)

    def atoms(self, which: str) -> list[tuple[float, float]]:
        """Point masses ``(s_j, m_j)`` of the boundary measure ``Im factor(-s+i0) ds``."""
        if not self.stepwise:
            return []
        side = _side(which)
        pieces = self.pieces[side]
        out = []
        for k, p in enumerate(pieces):
            if not np.isfinite(p.hi) or abs(p.phi - np.pi) > 1e-9:
                continue
            z = np.array([-p.hi + 0j])
            rest = [q for j, q in enumerate(pieces) if j != k]
            residue = (p.lo - p.hi) * (1.0 + p.hi) / (1.0 + p.lo)
            with np.errstate(divide="ignore", invalid="ignore"):
                others = np.exp(0.5 * self.log_c + _stepwise_log(rest, z))[0]
            mass = -np.pi * (residue * others).real
            out.append((p.hi, float(mass)))
        return out


def _side(which: str) -> int:
    if which not in ("plus", "minus"):
        raise ValueError("which must be 'plus' or 'minus'")
    return +1 if which == "plus" else -1


def wh_factorize(g: RogersFn, tol: Tolerance = Tolerance(1e-12, 1e-11, 400_000)) -> WhFactors:
    stepwise = bool(g.stepwise)
    w = WhFactors(base=g, tol=tol, stepwise=stepwise)
    if stepwise:
        w.pieces = {+1: _stepwise_pieces(g, +1), -1: _stepwise_pieces(g, -1)}
        if any(abs(p.phi - np.pi) > 1e-9 for side in w.pieces.values() for p in side):
            # Non-real boundary values: fall back to quadrature.
            w.stepwise = False
            w.pieces = {}
    xi0 = complex(g.reference_point())
    log_g = complex(np.log(np.asarray(g(np.array([xi0])))[0]))
    w.log_c = 0.0
    rep = w.log_factor(+1, np.array([-1j * xi0]))[0] + w.log_factor(-1, np.array([1j * xi0]))[0]
    log_c = log_g - rep
    imag = (log_c.imag + np.pi) % (2 * np.pi) - np.pi
    w.log_c = float(log_c.real)
    w.c_residual = float(abs(imag))
    if w.c_residual > 1e-6:
        raise FactorisationResidual(
            f"factorisation constant has phase {imag:.3e} (expected 0) for {g.descriptor}"
        )
    return w


def factorisation_residual(w: WhFactors, xi) -> float:
    """Largest relative mismatch of ``g(xi)`` and ``plus(-i xi) minus(i xi)``."""
    xi = np.asarray(xi, dtype=complex)
    g = w.base(xi)
    prod = w.plus(-1j * xi) * w.minus(1j * xi)
    return float(np.max(np.abs(g - prod) / np.abs(g)))


def wh_boundary(w: WhFactors, which: str, s: float) -> tuple[float, float]:
    if not s > 0:
        raise ValueError("s must be positive")
    mod, arg = w.boundary(which, np.array([s]))
    return float(mod[0]), float(arg[0])


def wh_product_spine(
    f: RogersFn,
    sigma,
    xi: float,
    eta: float,
    table: "list[SpinePoint] | None" = None,
    tol: Tolerance = Tolerance(1e-12, 1e-11, 400_000),
):
    """``f_sigma_plus(xi) * f_sigma_minus(eta)`` from the spine integral.

    ``sigma`` may be a complex array (the result is holomorphic in sigma off
    the negative half-line), which is what Laplace inversion in time needs.
    """
    if not (xi > 0 and eta > 0):
        raise ValueError("xi and eta must be positive")
    sig = np.atleast_1d(np.asarray(sigma, dtype=complex))
    lam0 = float(spine_arrays(f, np.array([1e-12 * max(1.0, f.scale())])).lam[0])
    if abs(lam0) > 1e-6:
        raise ValueError("the spine-integral product needs f(0+) = 0 (no killing)")
    L = max(f.scale(), xi, eta, 1e-12)
    edges = []
    for lo, hi in z_segments(f):
        edges += [lo, hi]
    if table:
        edges += [p.r for p in table[1:] if p.in_Z != table[0].in_Z]
    marks = np.array([e for e in edges + [xi, eta, L] if 0 < e < np.inf], dtype=float)

    def integrand(u):
        one_minus = 1.0 - u
        r = L * u / one_minus
        sp = spine_arrays(f, r)
        psi = np.angle(sp.zeta + 1j * eta) - np.angle(sp.zeta - 1j * xi)
        weight = psi * sp.dlam * (L / one_minus**2) / np.pi
        return weight[None, :] / (sig[:, None] + sp.lam[None, :])

    res = gauss_kronrod(integrand, 0.0, 1.0, tol.abs_tol, tol.rel_tol, tol.max_evals,
                        points=marks / (L + marks))
    # The integrand decays like r^-2; a non-decaying far tail means the
    # integral above is not trustworthy.
    far = integrand(np.array([1 - 1e-6, 1 - 1e-7]))
    if np.any(np.abs(far[:, 1]) > 10 * np.abs(far[:, 0]) + 1e-8):
        raise TailNotDecaying("spine integrand does not decay at large r")
    out = sig * np.exp(np.asarray(res.value).reshape(-1))
    if np.ndim(sigma) == 0:
        value = out[0]
        return float(value.real) if np.isrealobj(sigma) or np.imag(sigma) == 0 else complex(value)
    return out
