import cmath

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levy_spine.process import (
    CustomComplexFn,
    DomainViolation,
    ExpComponent,
    ProcessSpec,
    ProcessSpecError,
    RogersFn,
    Stable,
    StableDrift,
    boundary_arg,
    build_rogers,
    check_rogers,
    dual_spec,
    eval_f,
    sample_half_plane,
)

from conftest import SPECS, bm_exp, risk


components = st.builds(
    ExpComponent,
    side=st.sampled_from(["positive", "negative"]),
    w=st.floats(0.05, 5.0),
    rho=st.floats(0.1, 10.0),
)


@st.composite
def mixtures(draw):
    jumps = draw(st.lists(components, min_size=0, max_size=4))
    gaussian = draw(st.floats(0.0, 2.0))
    if not jumps and gaussian == 0.0:
        gaussian = 0.5
    drift = draw(st.floats(-3.0, 3.0))
    return ProcessSpec(gaussian, drift, 0.0, tuple(jumps))


def test_risk_exponent_closed_form():
    f = build_rogers(risk())
    for xi in [1.0, 0.3 + 2j, 5 - 1j]:
        assert eval_f(f, xi) == pytest.approx(xi * xi / (1 - 1j * xi), rel=1e-14)
    assert eval_f(f, 1.0) == pytest.approx(0.5 + 0.5j, rel=1e-15)


def test_bm_exp_exponent_closed_form():
    f = build_rogers(bm_exp())
    xi = 0.7 + 0.4j
    assert eval_f(f, xi) == pytest.approx(xi * xi / 2 + xi * xi / (1 - 1j * xi), rel=1e-14)


def test_brownian_with_drift_exponent():
    f = build_rogers(ProcessSpec.from_path_drift(0.5, 0.7, []))
    xi = 1.3 + 0.2j
    assert eval_f(f, xi) == pytest.approx(xi * xi / 2 - 0.7j * xi, rel=1e-14)


def test_stable_exponent():
    f = build_rogers(ProcessSpec(closed_form=Stable(1.5, 2.0, 0.2)))
    assert eval_f(f, 2.0) == pytest.approx(2.0 * (2 * cmath.exp(-0.2j)) ** 1.5, rel=1e-14)
    g = build_rogers(ProcessSpec(closed_form=StableDrift(1.5, 1.0, 0.0, 0.4)))
    assert eval_f(g, 1.0) == pytest.approx(1 - 0.4j, rel=1e-14)


def test_killing_is_value_at_origin():
    f = build_rogers(ProcessSpec(0.5, 0.0, 0.25))
    assert eval_f(f, 1e-12) == pytest.approx(0.25, rel=1e-9)


def test_path_drift_round_trip():
    jumps = [ExpComponent("positive", 2.0, 3.0), ExpComponent("negative", 1.0, 0.5)]
    spec = ProcessSpec.from_path_drift(0.1, -0.7, jumps)
    assert spec.path_drift == pytest.approx(-0.7, rel=1e-14)


def test_invalid_specs():
    with pytest.raises(ProcessSpecError):
        ExpComponent("up", 1.0, 1.0)
    with pytest.raises(ProcessSpecError):
        ExpComponent("positive", -1.0, 1.0)
    with pytest.raises(ProcessSpecError):
        ExpComponent("positive", 1.0, 0.0)
    with pytest.raises(ProcessSpecError):
        ProcessSpec(0.0, 1.0)
    with pytest.raises(ProcessSpecError):
        ProcessSpec(-0.1, 0.0)
    with pytest.raises(ProcessSpecError):
        Stable(1.5, 1.0, 0.6)
    with pytest.raises(ProcessSpecError):
        Stable(2.5)
    with pytest.raises(ProcessSpecError):
        ProcessSpec(0.5, closed_form=Stable(1.5))


def test_domain_violation():
    f = build_rogers(risk())
    with pytest.raises(DomainViolation):
        eval_f(f, -1.0)
    with pytest.raises(DomainViolation):
        eval_f(f, 2j)


def test_risk_boundary_angle():
    f = build_rogers(risk())
    assert boundary_arg(f, 0.5) == pytest.approx(np.pi)
    assert boundary_arg(f, 3.0) == pytest.approx(0.0)
    assert boundary_arg(f, -2.0) == pytest.approx(np.pi)
    # Pole at s = 1: midpoint of the one-sided limits.
    assert boundary_arg(f, 1.0) == pytest.approx(np.pi / 2)
    with pytest.raises(ValueError):
        boundary_arg(f, 0.0)


def test_stable_boundary_angle_is_constant():
    f = build_rogers(ProcessSpec(closed_form=Stable(1.2, 1.0, 0.3)))
    up = [boundary_arg(f, s) for s in (0.01, 1.0, 100.0)]
    down = [boundary_arg(f, s) for s in (-0.01, -1.0, -100.0)]
    assert np.ptp(up) < 1e-12 and np.ptp(down) < 1e-12
    assert 0 <= up[0] <= np.pi and 0 <= down[0] <= np.pi


def test_generic_boundary_limit_matches_exact_boundary():
    f = build_rogers(SPECS["two_sided"])
    s = np.array([-3.0, -0.2, 0.4, 2.5])
    generic = RogersFn.boundary(f, s)
    np.testing.assert_allclose(generic, f.boundary(s), rtol=1e-7)


def test_custom_function_spec():
    spec = ProcessSpec(closed_form=CustomComplexFn(lambda xi: xi**1.5, "sym-stable"))
    f = build_rogers(spec)
    assert eval_f(f, 4.0) == pytest.approx(8.0)
    assert check_rogers(f, sample_half_plane(200)).passed


def test_check_rogers_flags_a_non_rogers_function():
    bad = build_rogers(ProcessSpec(closed_form=CustomComplexFn(lambda xi: -xi * xi, "bad")))
    report = check_rogers(bad, sample_half_plane(100))
    assert not report.passed
    assert report.min_re_ratio < 0


def test_rogers_inequality_on_shipped_specs(rogers):
    report = check_rogers(rogers, sample_half_plane(1000, seed=3))
    assert report.min_re_ratio >= -1e-12


@settings(max_examples=40, deadline=None)
@given(mixtures(), st.integers(0, 2**31))
def test_rogers_inequality_on_random_mixtures(spec, seed):
    f = build_rogers(spec)
    assert check_rogers(f, sample_half_plane(1000, seed=seed)).min_re_ratio >= -1e-12


@settings(max_examples=40, deadline=None)
@given(mixtures(), st.integers(0, 2**31))
def test_reflection_symmetry(spec, seed):
    f = build_rogers(spec)
    xi = sample_half_plane(50, seed=seed)
    # A real-valued process has f(conj(-xi)) = conj(f(xi)).
    np.testing.assert_allclose(f(np.conj(-xi)), np.conj(f(xi)), rtol=1e-12, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(mixtures(), st.integers(0, 2**31))
def test_dual_spec_conjugates_exponent(spec, seed):
    f, g = build_rogers(spec), build_rogers(dual_spec(spec))
    xi = sample_half_plane(50, seed=seed)
    np.testing.assert_allclose(g(xi), np.conj(f(np.conj(xi))), rtol=1e-12, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(mixtures())
def test_derivative_matches_finite_difference(spec):
    f = build_rogers(spec)
    xi = np.array([0.4 + 0.3j, 2.0 - 1.0j, 7.0 + 0.0j])
    np.testing.assert_allclose(f.derivative(xi), RogersFn.derivative(f, xi), rtol=1e-6, atol=1e-8)
