import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from speakerprint.stats import (
    ErrorModel, LognormalFit, entropy_bits, error_curve, false_negative_rate,
    false_positive_rate, fit_lognormal, fit_similarities, multi_sample_error,
    neglected_fp_term, optimal_threshold, scale_convergence, similarity_under_noise,
    snr_requirement, total_error,
)

PUBLISHED = ErrorModel.published()


def oracle_fp(model, a):
    f = model.fit_corr
    return sps.lognorm.cdf(1 - a, s=f.sigma, scale=math.exp(f.mu))


def oracle_fn(model, a):
    f = model.fit_self
    return sps.lognorm.sf(1 - a, s=f.sigma, scale=math.exp(f.mu))


def test_fit_round_trip():
    x = np.random.default_rng(0).lognormal(-1.0, 0.2, 100_000)
    fit = fit_lognormal(x)
    assert abs(fit.mu + 1.0) < 0.01 and abs(fit.sigma - 0.2) < 0.01
    assert fit.n == 100_000 and fit.ks < 0.01


def test_fit_degenerate_and_errors():
    fit = fit_lognormal(np.full(10, 0.25))
    assert fit.mu == pytest.approx(math.log(0.25)) and fit.sigma == 0 and fit.degenerate
    with pytest.raises(ValueError):
        fit_lognormal([])
    with pytest.raises(ValueError):
        fit_lognormal([0.1, 0.0])


def test_fit_similarities_excludes_ones():
    fit = fit_similarities([0.9, 0.8, 1.0, 1.0])
    assert fit.excluded == 2 and fit.n == 2
    assert fit.mu == pytest.approx(np.mean(np.log([0.1, 0.2])))


@pytest.mark.parametrize("a", [0.5, 0.6, 0.69, 0.7, 0.8, 0.9])
def test_rates_match_scipy_lognorm(a):
    assert false_positive_rate(PUBLISHED, a) == pytest.approx(oracle_fp(PUBLISHED, a), rel=1e-10)
    assert false_negative_rate(PUBLISHED, a) == pytest.approx(oracle_fn(PUBLISHED, a), rel=1e-10)


def test_frozen_values_at_069():
    # frozen from the scipy.stats.lognorm oracle
    assert false_positive_rate(PUBLISHED, 0.69) == pytest.approx(3.2735463e-05, rel=1e-6)
    assert false_negative_rate(PUBLISHED, 0.69) == pytest.approx(1.2212280e-04, rel=1e-6)
    assert total_error(PUBLISHED, 0.69) == pytest.approx(1.55e-4, rel=0.05)


def test_limits():
    assert false_positive_rate(PUBLISHED, 1.0) == 0
    assert false_positive_rate(PUBLISHED, 1.5) == 0
    assert false_positive_rate(PUBLISHED, -1.0) == pytest.approx(1.0, abs=1e-9)
    assert false_negative_rate(PUBLISHED, 0.999999) == pytest.approx(1.0, abs=1e-9)
    assert false_negative_rate(PUBLISHED, 1.0) == 1.0
    assert false_negative_rate(PUBLISHED, -0.999) == pytest.approx(0.0, abs=1e-12)


def test_optimal_threshold():
    a, err = optimal_threshold(PUBLISHED)
    assert 0.67 <= a <= 0.71
    assert err == pytest.approx(1.5464e-4, rel=1e-3)
    grid = np.linspace(0.5, 0.95, 45001)
    curve = error_curve(PUBLISHED, grid)[:, 3]
    assert abs(a - grid[np.argmin(curve)]) < 1e-4
    assert err == pytest.approx(curve.min(), rel=1e-6)


def test_degenerate_model_threshold_bounded():
    f = LognormalFit(-1.0, 0.3)
    a, err = optimal_threshold(ErrorModel(f, f))
    assert math.isfinite(a) and err <= 1.0 + 1e-12


def test_multi_sample():
    assert multi_sample_error(PUBLISHED, 0.69, 1) == total_error(PUBLISHED, 0.69)
    assert multi_sample_error(PUBLISHED, 0.68, 2) == pytest.approx(1.41e-8, rel=0.10)
    a3, e3 = optimal_threshold(PUBLISHED, k=3)
    assert 1.23e-13 < e3 < 1.23e-11
    with pytest.raises(ValueError):
        multi_sample_error(PUBLISHED, 0.7, 0)


@pytest.mark.parametrize("rate,bits", [(1.55e-4, 12.66), (0.5, 1.0), (1.41e-8, 26.08)])
def test_entropy(rate, bits):
    assert entropy_bits(rate) == pytest.approx(bits, abs=0.01)


def test_entropy_linear_in_k_when_rates_equal():
    from scipy.optimize import brentq
    a = brentq(lambda x: false_positive_rate(PUBLISHED, x) - false_negative_rate(PUBLISHED, x), 0.6, 0.8)
    fp = false_positive_rate(PUBLISHED, a)
    ent = [entropy_bits(multi_sample_error(PUBLISHED, a, k)) for k in (1, 2, 3, 4)]
    np.testing.assert_allclose(np.diff(ent), -math.log2(fp), rtol=1e-6)


fits = st.builds(LognormalFit, st.floats(-5, 0), st.floats(0.05, 1.5))


@settings(max_examples=50, deadline=None)
@given(fits, fits)
def test_rates_monotone(fs, fc):
    m = ErrorModel(fs, fc)
    curve = error_curve(m, np.linspace(-0.99, 0.999, 400))
    assert np.all(np.diff(curve[:, 1]) <= 1e-15)
    assert np.all(np.diff(curve[:, 2]) >= -1e-15)


def test_snr_requirement_values():
    r = snr_requirement(0.7)
    assert r.linear == pytest.approx(10.366865586814434, rel=1e-12)
    assert 10.0 <= r.db <= 10.5
    assert snr_requirement(0.0).linear == pytest.approx(1 / 3)
    assert snr_requirement(0.0).db == pytest.approx(-4.771, abs=1e-3)
    assert not snr_requirement(1.0).feasible
    assert snr_requirement(-0.5).linear == 0.0


@settings(max_examples=100, deadline=None)
@given(st.floats(-0.4, 0.995))
def test_snr_round_trip(a):
    r = snr_requirement(a)
    assert similarity_under_noise(r.linear) == pytest.approx(a, abs=1e-9)


@pytest.mark.parametrize("a", [0.3, 0.5, 0.7, 0.85])
def test_snr_monte_carlo(a):
    rng = np.random.default_rng(4)
    snr = snr_requirement(a).linear
    sims = []
    for _ in range(2000):
        x = rng.uniform(0.5, 1.5, 71)
        n = rng.standard_normal(71)
        n *= np.linalg.norm(x) / np.sqrt(snr) / np.linalg.norm(n)
        y = x + n
        sims.append(1 - np.linalg.norm(x / np.linalg.norm(x) - y / np.linalg.norm(y)))
    assert np.mean(sims) == pytest.approx(a, rel=0.02)


def test_neglected_term():
    val = neglected_fp_term(PUBLISHED, 0.69)
    # trapezoid oracle on a dense log-spaced distance grid
    d = np.exp(np.linspace(-14, math.log(0.31), 200_001))
    f = sps.lognorm.pdf(d, s=0.178714, scale=math.exp(-0.457726))
    F = sps.lognorm.sf(d, s=0.546804, scale=math.exp(-3.17698))
    assert val == pytest.approx(np.trapezoid(f * F, d), rel=1e-4)
    assert val < false_positive_rate(PUBLISHED, 0.69)
    assert neglected_fp_term(PUBLISHED, 1.0) == 0.0
    assert neglected_fp_term(PUBLISHED, 0.999999) < 1e-300 * 1e10


def test_neglected_term_zero_when_corr_below_alpha():
    # corr similarity sits around 1 - exp(0.5) < -0.6: nothing reaches 0.5
    m = ErrorModel(LognormalFit(-3.0, 0.3), LognormalFit(0.5, 0.01))
    assert neglected_fp_term(m, 0.5) == pytest.approx(0.0, abs=1e-300)


def test_scale_convergence(desk_experiment):
    r = desk_experiment
    sizes = [2, 5, 10, 20, 30, 40, 45, 50]
    rows = scale_convergence(r.features, r.labels, sizes, seed=3, repeats=30)
    full = fit_similarities(r.cross_similarities)
    assert rows[-1].fit.mu == pytest.approx(full.mu, rel=1e-9)
    assert rows[-1].fit.sigma == pytest.approx(full.sigma, rel=1e-9)
    spreads = [row.mu_spread for row in rows]
    assert all(b < a for a, b in zip(spreads, spreads[1:]))
    assert abs(rows[-1].fit.mu - rows[-2].fit.mu) < 0.01 * abs(full.mu)
    assert rows[0].fit.n == 3600 and rows[0].fit.sigma > 0
    with pytest.raises(ValueError):
        scale_convergence(r.features, r.labels, [1])


def test_scale_convergence_single_order_matches_direct_fit(desk_experiment):
    from speakerprint.stats import cross_similarities
    r = desk_experiment
    row, = scale_convergence(r.features, r.labels, [7])
    devices = sorted(set(r.labels.tolist()))[:7]
    direct = fit_similarities(cross_similarities(r.features, r.labels, devices))
    assert row.fit.mu == pytest.approx(direct.mu, rel=1e-9)
    assert row.fit.sigma == pytest.approx(direct.sigma, rel=1e-7)
