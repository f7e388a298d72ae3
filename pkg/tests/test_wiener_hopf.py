import numpy as np
import pytest

import levy_spine.eigen as eigen_mod
from levy_spine import build_rogers
from levy_spine.eigen import eval_F_minus, eval_F_plus, eval_G, laplace_F_minus, laplace_F_plus, make_eigen
from levy_spine.process import CustomComplexFn, ProcessSpec, check_rogers, sample_half_plane
from levy_spine.spine import spine_point, z_segments
from levy_spine.wiener_hopf import (
    DerivativeVanishes,
    factorisation_residual,
    quotient_fn,
    shifted_fn,
    wh_boundary,
    wh_factorize,
    wh_product_spine,
)

from conftest import SPECS, bm_exp, brownian, risk, stable


def _inner_radii(f, n=4):
    lo, hi = z_segments(f)[0]
    hi = min(hi, 10.0)
    lo = max(lo, 0.05)
    return np.geomspace(lo * 1.05, hi * 0.95, n)


def _quotient(spec, r):
    f = build_rogers(spec)
    return quotient_fn(f, spine_point(f, r))


def test_brownian_quotient_is_two():
    for b in (0.0, 0.5):
        g = _quotient(brownian(b), 1.3)
        xi = sample_half_plane(50, seed=1)
        np.testing.assert_allclose(g(xi), 2.0, rtol=1e-9)
        w = wh_factorize(g)
        np.testing.assert_allclose(w.plus(np.array([0.5, 3.0 + 1j])), np.sqrt(2), rtol=1e-12)
        np.testing.assert_allclose(w.minus(np.array([0.5, 3.0 + 1j])), np.sqrt(2), rtol=1e-12)
        mod, arg = wh_boundary(w, "plus", 2.0)
        assert mod == pytest.approx(np.sqrt(2), rel=1e-12) and arg == pytest.approx(0.0, abs=1e-12)


def test_risk_quotient_and_factors():
    g = _quotient(risk(), 1.0)
    xi = sample_half_plane(50, seed=2)
    np.testing.assert_allclose(g(xi), 1 - 1j * xi, rtol=1e-9)
    w = wh_factorize(g)
    plus = w.plus(np.array([0.0, 1.0, 2.0]))
    assert plus[2] / plus[1] == pytest.approx(1.5, rel=1e-12)
    assert plus[1] / plus[0] == pytest.approx(2.0, rel=1e-12)
    minus = w.minus(np.array([0.1, 1.0, 10.0 + 3j]))
    np.testing.assert_allclose(minus, minus[0], rtol=1e-12)
    # plus(xi) = k (1 + xi): the boundary value at -2 is -k.
    mod, arg = wh_boundary(w, "plus", 2.0)
    assert mod == pytest.approx(abs(plus[0].real), rel=1e-12)
    assert arg == pytest.approx(np.pi, abs=1e-12)


def test_bm_exp_quotient_and_factors():
    beta = 0.5
    g = _quotient(bm_exp(), np.sqrt(2.0))
    xi = sample_half_plane(50, seed=4)
    np.testing.assert_allclose(g(xi), 2 * (xi + 1j) / (xi + (1 + 2 * beta) * 1j), rtol=1e-8)
    w = wh_factorize(g)
    plus = w.plus(np.array([0.0, 1.0]))
    assert (plus[1] / plus[0]).real == pytest.approx(2 * (1 + 2 * beta) / (2 + 2 * beta), rel=1e-12)
    # Rational continuation 2(1 - 3)/(1 + 1 - 3) = 4 relative to plus(0) = 1.
    mod, arg = wh_boundary(w, "plus", 3.0)
    assert mod / plus[0].real == pytest.approx(4.0, rel=1e-6)
    assert arg == pytest.approx(0.0, abs=1e-12)


def test_smooth_boundary_matches_rational_limit():
    # The stable quotient goes through the principal-value route; its boundary
    # value must agree with the limit of the holomorphic factor.
    f = build_rogers(stable(1.5, 0.2))
    w = wh_factorize(quotient_fn(f, spine_point(f, 1.0)))
    for which in ("plus", "minus"):
        s = np.array([0.3, 1.0, 4.0])
        mod, arg = w.boundary(which, s)
        # Richardson step on the approach from the upper half-plane.
        limit = 2 * w.factor(which, -s + 1e-5j) - w.factor(which, -s + 2e-5j)
        np.testing.assert_allclose(mod, np.abs(limit), rtol=1e-7)
        np.testing.assert_allclose(arg, np.angle(limit), atol=1e-7)
        assert np.all(mod * np.sin(arg) >= 0)


def test_factorisation_identity(rogers):
    xi = sample_half_plane(200, seed=5, r_min=1e-2, r_max=1e2)
    for r in _inner_radii(rogers, 3):
        w = wh_factorize(quotient_fn(rogers, spine_point(rogers, r)))
        assert factorisation_residual(w, xi) <= 1e-6
    w = wh_factorize(shifted_fn(rogers, 0.7))
    assert factorisation_residual(w, xi) <= 1e-6


def test_complete_bernstein_angle_bound(rogers):
    z = sample_half_plane(200, seed=6) * 1j
    z = z[z.imag > 0]
    for r in _inner_radii(rogers, 2):
        w = wh_factorize(quotient_fn(rogers, spine_point(rogers, r)))
        for which in ("plus", "minus"):
            ang = np.angle(w.factor(which, z))
            assert np.all(ang >= -1e-9)
            assert np.all(ang <= np.angle(z) + 1e-9)


def test_factors_positive_and_nondecreasing(rogers):
    x = np.geomspace(1e-3, 1e3, 60)
    w = wh_factorize(shifted_fn(rogers, 1.0))
    for which in ("plus", "minus"):
        v = w.factor(which, x)
        assert np.all(np.abs(v.imag) <= 1e-10 * np.abs(v.real))
        assert np.all(v.real > 0)
        assert np.all(np.diff(v.real) >= -1e-10 * v.real[1:])


def test_quotient_is_a_rogers_function(rogers):
    for r in _inner_radii(rogers, 2):
        g = quotient_fn(rogers, spine_point(rogers, r))
        assert check_rogers(g, sample_half_plane(500, seed=7)).min_re_ratio >= -1e-10


def test_removable_singularity_is_patched():
    f = build_rogers(bm_exp())
    p = spine_point(f, 1.2)
    g = quotient_fn(f, p)
    z = p.zeta
    inside = g(np.array([z, z + 1e-6 * p.r]))
    outside = g(np.array([z + 1e-3 * p.r]))
    assert np.all(np.isfinite(inside))
    assert inside[0] == pytest.approx(2 * z.real / complex(f.derivative(np.array([z]))[0]), rel=1e-12)
    assert abs(inside[1] - outside[0]) < 1e-2 * abs(outside[0])


def test_quotient_requires_spine_point_in_z():
    f = build_rogers(risk())
    with pytest.raises(ValueError):
        quotient_fn(f, spine_point(f, 3.0))


def test_derivative_vanishing_is_reported():
    spec = ProcessSpec(closed_form=CustomComplexFn(lambda xi: xi * xi, "flat", lambda xi: 0 * xi))
    f = build_rogers(spec)
    with pytest.raises(DerivativeVanishes):
        quotient_fn(f, spine_point(f, 1.0))


def test_brownian_factor_product_closed_form():
    f = build_rogers(brownian())
    # 1 + xi^2/2 = (1 - i xi/sqrt2)(1 + i xi/sqrt2), so the product is (1 + 1/sqrt2)^2.
    val = wh_product_spine(f, 1.0, 1.0, 1.0)
    assert val == pytest.approx((1 + 1 / np.sqrt(2)) ** 2, rel=1e-10)
    val = wh_product_spine(f, 1.0, 0.5, 2.0)
    assert val == pytest.approx((1 + 0.5 / np.sqrt(2)) * (1 + 2 / np.sqrt(2)), rel=1e-10)


def test_risk_factor_product_closed_form():
    # 1 + xi^2/(1 - i xi) = (xi^2 - i xi + 1)/(1 - i xi) vanishes at xi = -i q_small
    # and xi = i q_big, with q_small, q_big the roots of q^2 -/+ q - 1.  The pole
    # and the lower zero belong to the plus factor, the upper zero to minus.
    f = build_rogers(risk())
    q_small, q_big = (np.sqrt(5) - 1) / 2, (np.sqrt(5) + 1) / 2

    def plus(z):
        return (1 + z / q_small) / (1 + z)

    def minus(z):
        return 1 + z / q_big

    for xi, eta in [(1.0, 1.0), (0.5, 2.0)]:
        assert wh_product_spine(f, 1.0, xi, eta) == pytest.approx(plus(xi) * minus(eta), rel=1e-10)


def test_route_equivalence(rogers):
    for sigma, xi, eta in [(1.0, 1.0, 1.0), (0.5, 2.0, 0.3), (3.0, 0.2, 5.0)]:
        w = wh_factorize(shifted_fn(rogers, sigma))
        direct = (w.plus(np.array([xi])) * w.minus(np.array([eta])))[0].real
        assert wh_product_spine(rogers, sigma, xi, eta) == pytest.approx(direct, rel=1e-5)


def test_product_tends_to_sigma_at_the_origin(rogers):
    assert wh_product_spine(rogers, 0.8, 1e-7, 1e-7) == pytest.approx(0.8, rel=1e-5)


def test_product_is_holomorphic_in_sigma():
    f = build_rogers(bm_exp())
    sig = np.array([1.0 + 0.5j, 2.0 - 1.0j])
    h = 1e-4
    vals = wh_product_spine(f, np.array([1.0 - h, 1.0 + h, 1.0 - 1j * h, 1.0 + 1j * h]), 1.0, 1.0)
    # Cauchy-Riemann: d/dsigma along the real and imaginary directions agree.
    d_re = (vals[1] - vals[0]) / (2 * h)
    d_im = (vals[3] - vals[2]) / (2j * h)
    assert d_re == pytest.approx(d_im, rel=1e-6)
    assert np.all(np.isfinite(wh_product_spine(f, sig, 1.0, 1.0)))


def test_product_rejects_killing():
    f = build_rogers(ProcessSpec(0.5, 0.0, 0.3))
    with pytest.raises(ValueError):
        wh_product_spine(f, 1.0, 1.0, 1.0)


class _Rescaled:
    """Factors of the same function with the constant split as (k, 1/k)."""

    def __init__(self, w, k):
        self.w, self.k = w, k
        self.stepwise = w.stepwise

    def plus(self, z):
        return self.k * self.w.plus(z)

    def minus(self, z):
        return self.w.minus(z) / self.k

    def factor(self, which, z):
        return self.plus(z) if which == "plus" else self.minus(z)

    def density(self, which, s):
        return self.w.density(which, s) * (self.k if which == "plus" else 1 / self.k)

    def atoms(self, which):
        scale = self.k if which == "plus" else 1 / self.k
        return [(s, m * scale) for s, m in self.w.atoms(which)]


@pytest.mark.parametrize("name", ["bm_exp", "stable_1.2", "two_sided"])
def test_downstream_quantities_ignore_the_constant_split(name, monkeypatch):
    f = build_rogers(SPECS[name])
    p = spine_point(f, 0.9)
    base = make_eigen(f, p)
    monkeypatch.setattr(eigen_mod, "wh_factorize", lambda g, *a: _Rescaled(wh_factorize(g), 3.7))
    other = eigen_mod.make_eigen(f, p)
    assert other.c_plus == pytest.approx(base.c_plus, abs=1e-12)
    assert other.c_minus == pytest.approx(base.c_minus, abs=1e-12)
    assert other.lf_plus_zero == pytest.approx(base.lf_plus_zero, rel=1e-12)
    assert other.lf_minus_zero == pytest.approx(base.lf_minus_zero, rel=1e-12)
    assert laplace_F_plus(other, 1.3) == pytest.approx(laplace_F_plus(base, 1.3), rel=1e-12)
    assert laplace_F_minus(other, 1.3) == pytest.approx(laplace_F_minus(base, 1.3), rel=1e-12)
    y = np.array([0.2, 1.0, 3.0])
    np.testing.assert_allclose(eval_G(other, "plus", y), eval_G(base, "plus", y), rtol=1e-9, atol=1e-14)
    np.testing.assert_allclose(eval_F_plus(other, y), eval_F_plus(base, y), rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(eval_F_minus(other, y), eval_F_minus(base, y), rtol=1e-9, atol=1e-12)
