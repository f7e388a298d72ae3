import numpy as np
import pytest
from scipy import integrate, stats

from levy_spine import ExpComponent, ProcessSpec
from levy_spine.oracles import (
    McConfig,
    OracleError,
    PathLaw,
    SpecUnsupported,
    bm_exp_inf_tail,
    brownian_drift_heat_kernel,
    empirical_cdf,
    risk_sup_cdf,
    risk_sup_cdf_R,
    simulate,
)

from conftest import bm_exp, brownian, risk, stable
from test_spectral import BM_EXP_INF, LEVELS, RISK_SUP, TIMES


@pytest.mark.parametrize("i", range(3))
def test_risk_oracle_matches_high_precision_values(i):
    got = [risk_sup_cdf(TIMES[i], y) for y in LEVELS]
    np.testing.assert_allclose(got, RISK_SUP[i], rtol=1e-10)


@pytest.mark.parametrize("i", range(3))
def test_bm_exp_oracle_matches_high_precision_values(i):
    got = [bm_exp_inf_tail(TIMES[i], x) for x in LEVELS]
    np.testing.assert_allclose(got, BM_EXP_INF[i], rtol=1e-10)


def test_small_drift_risk_oracle():
    assert risk_sup_cdf_R(1.5, 1.0, 1.0) == pytest.approx(0.47550423534624648, rel=1e-10)
    for t, y in [(0.5, 0.5), (1.0, 2.0), (2.0, 1.0)]:
        assert risk_sup_cdf_R(1.0, t, y) == pytest.approx(risk_sup_cdf(t, y), rel=1e-10)


def test_small_drift_risk_is_monotone_in_R():
    # More frequent jumps push the supremum up.
    vals = [risk_sup_cdf_R(R, 1.0, 1.0) for R in (1.0, 1.2, 1.5, 2.0)]
    assert np.all(np.diff(vals) < 0)


def test_oracle_limits():
    assert risk_sup_cdf(1.0, 60.0) == pytest.approx(1.0, abs=1e-12)
    assert bm_exp_inf_tail(1.0, 20.0) == pytest.approx(1.0, abs=1e-9)
    # Downward drift leaves an atom at zero: P(sup = 0) > 0, approached from the right.
    assert risk_sup_cdf(1.0, 1e-4) == pytest.approx(risk_sup_cdf(1.0, 1e-3), abs=2e-3)
    assert 0.4 < risk_sup_cdf(1.0, 1e-4) < risk_sup_cdf(1.0, 0.1)


def test_oracle_refuses_unconverged_quadrature():
    # Far out the oscillatory integrand defeats the quadrature; that must be loud.
    with pytest.raises(OracleError):
        bm_exp_inf_tail(1.0, 30.0)


def test_brownian_heat_kernel_oracle():
    # Killed Gaussian kernel: mass equals the reflection survival probability.
    t, x = 1.3, 0.8
    mass, _ = integrate.quad(lambda y: brownian_drift_heat_kernel(0.0, t, x, y), 0, np.inf)
    assert mass == pytest.approx(2 * stats.norm.cdf(x / np.sqrt(t)) - 1, rel=1e-10)
    b = 0.4
    ratio = brownian_drift_heat_kernel(b, t, x, 2.0) / brownian_drift_heat_kernel(b, t, 2.0, x)
    assert ratio == pytest.approx(np.exp(2 * b * (2.0 - x)), rel=1e-12)


def test_oracle_argument_checks():
    with pytest.raises(ValueError):
        risk_sup_cdf(0.0, 1.0)
    with pytest.raises(ValueError):
        risk_sup_cdf_R(0.5, 1.0, 1.0)
    with pytest.raises(ValueError):
        bm_exp_inf_tail(1.0, -1.0)
    with pytest.raises(ValueError):
        brownian_drift_heat_kernel(0.0, 1.0, 0.0, 1.0)


def test_brownian_simulation_against_reflection():
    n, steps = 10_000, 10_000
    rec = simulate(brownian(), McConfig(n, steps, 1.0, seed=3))
    est = empirical_cdf(rec.sup[-1], 1.0)
    exact = 2 * stats.norm.cdf(1.0) - 1
    # The grid maximum misses about 0.5826 sqrt(dt) of the true supremum.
    bias = 0.5826 * np.sqrt(1.0 / steps) * 2 * stats.norm.pdf(1.0)
    assert abs(est.estimate - exact) <= 4 * est.std_error + 2 * bias
    assert np.mean(rec.x_t[-1]) == pytest.approx(0.0, abs=4 / np.sqrt(n))
    assert np.var(rec.x_t[-1]) == pytest.approx(1.0, rel=0.05)


def test_skeleton_bias_is_one_sided_and_shrinks_with_steps():
    exact = 2 * stats.norm.cdf(1.0) - 1
    errs, ses = [], []
    for steps in (25, 100):
        rec = simulate(brownian(), McConfig(40_000, steps, 1.0, seed=8))
        est = empirical_cdf(rec.sup[-1], 1.0)
        errs.append(est.estimate - exact)
        ses.append(est.std_error)
    # The grid maximum undershoots, so P(sup < 1) is overestimated.
    assert errs[0] > 4 * ses[0] and errs[1] > -4 * ses[1]
    # Quadrupling the steps halves the level bias.
    assert errs[1] <= 0.5 * errs[0] + 4 * ses[1]


def test_deterministic_path():
    rec = simulate(PathLaw(0.0, 1.5), McConfig(5, 10, 2.0, horizons=(1.0,)))
    np.testing.assert_allclose(rec.sup[rec.row(1.0)], 1.5)
    np.testing.assert_allclose(rec.sup[-1], 3.0)
    np.testing.assert_allclose(rec.inf, 0.0)
    np.testing.assert_allclose(rec.x_t[-1], 3.0)
    down = simulate(PathLaw(0.0, -1.0), McConfig(3, 10, 2.0))
    np.testing.assert_allclose(down.inf[-1], -2.0)
    assert down.survived_half_line(2.5).all() and not down.survived_half_line(1.5).any()


def test_risk_simulation_is_exact_in_time():
    rec = simulate(risk(), McConfig(40_000, 1, 2.0, seed=11, horizons=(0.5, 1.0)))
    for i, t in enumerate(TIMES):
        row = rec.row(t)
        for j, y in enumerate(LEVELS):
            est = empirical_cdf(rec.sup[row], y)
            assert abs(est.estimate - RISK_SUP[i][j]) <= 5 * est.std_error


def test_bm_exp_simulation():
    rec = simulate(bm_exp(), McConfig(20_000, 4_000, 1.0, seed=5))
    for j, x in enumerate(LEVELS):
        survived = rec.survived_half_line(x)
        p = survived.mean()
        se = np.sqrt(p * (1 - p) / survived.size)
        # Grid bias for the Gaussian part: about 0.5826 sqrt(dt) in level.
        assert abs(p - BM_EXP_INF[1][j]) <= 5 * se + 0.6 * np.sqrt(1 / 4_000)


def test_jump_sizes_and_rates():
    rec = simulate(PathLaw(0.0, 0.0, (ExpComponent("negative", 3.0, 2.0),)), McConfig(50_000, 1, 1.0, seed=2))
    x = rec.x_t[-1]
    # Compound Poisson with intensity w/rho = 1.5 and mean jump 1/rho = 0.5.
    assert x.mean() == pytest.approx(-0.75, abs=4 * np.sqrt(0.75 / 50_000))
    assert x.var() == pytest.approx(0.75, rel=0.05)
    assert np.all(np.abs(rec.sup[-1]) <= 1e-12)


def test_simulation_is_reproducible_and_thread_independent(monkeypatch):
    cfg = McConfig(1000, 200, 1.0, seed=42, chunk=128)
    a = simulate(bm_exp(), cfg)
    b = simulate(bm_exp(), cfg)
    monkeypatch.setenv("LEVY_SPINE_THREADS", "3")
    c = simulate(bm_exp(), cfg)
    for arr in ("sup", "inf", "x_t"):
        np.testing.assert_array_equal(getattr(a, arr), getattr(b, arr))
        np.testing.assert_array_equal(getattr(a, arr), getattr(c, arr))
    d = simulate(bm_exp(), McConfig(1000, 200, 1.0, seed=43, chunk=128))
    assert not np.array_equal(a.sup, d.sup)


def test_empirical_cdf():
    est = empirical_cdf(np.arange(10.0), 4.0)
    assert est.estimate == 0.4 and est.n_effective == 10
    assert est.std_error == pytest.approx(np.sqrt(0.4 * 0.6 / 10))
    rng = np.random.default_rng(0)
    small = empirical_cdf(rng.random(1_000), 0.5).std_error
    large = empirical_cdf(rng.random(100_000), 0.5).std_error
    assert small / large == pytest.approx(10.0, rel=0.01)
    with pytest.raises(ValueError):
        empirical_cdf([], 1.0)


def test_simulation_rejects_what_it_cannot_sample():
    with pytest.raises(SpecUnsupported):
        simulate(stable(1.5, 0.1), McConfig(10, 10, 1.0))
    with pytest.raises(SpecUnsupported):
        simulate(ProcessSpec(0.5, 0.0, 0.3), McConfig(10, 10, 1.0))
    with pytest.raises(ValueError):
        McConfig(0, 10, 1.0)
    with pytest.raises(ValueError):
        McConfig(10, 10, 1.0, horizons=(2.0,))
    with pytest.raises(KeyError):
        simulate(brownian(), McConfig(4, 4, 1.0)).row(0.5)
