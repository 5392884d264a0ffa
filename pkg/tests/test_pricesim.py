from datetime import date

import numpy as np
import pytest
from hypothesis import given, strategies as st

from builders import booking, package
from coldpack.behavior import build_user_vector
from coldpack.pricesim import (
    SeasonalIndex,
    fit_price_model,
    fit_seasonal_index,
    price_feature_names,
    price_similarity,
    seasonal_ratio,
    user_spending_stats,
)
from coldpack.synthgen import GeneratorConfig, generate_dataset

money = st.integers(0, 10**7)  # integer minor units
positive = st.floats(1e-3, 1e5, allow_nan=False)


def test_similarity_examples():
    assert price_similarity(9000, 9000, 0.0) == 1.0
    assert price_similarity(12000, 10000, 1000.0, omega=1000.0, r=1.0) == pytest.approx(0.5, abs=1e-15)
    assert price_similarity(12000, 10000, 3000.0) > price_similarity(12000, 10000, 1000.0)
    with pytest.raises(ValueError):
        price_similarity(1, 2, 0.0, omega=0.0)


@given(money, money, st.floats(0, 1e5), positive, st.floats(1e-3, 10))
def test_similarity_in_unit_interval_and_one_iff_equal(p, q, sigma, omega, r):
    s = price_similarity(p, q, sigma, omega, r)
    assert 0 < s <= 1
    assert (s == 1.0) == (p == q)


@given(money, st.integers(0, 10**6), st.integers(1, 10**6), st.floats(0, 1e5), positive, st.floats(1e-3, 10))
def test_similarity_strictly_decreasing_in_gap(ref, gap, extra, sigma, omega, r):
    near = price_similarity(ref + gap, ref, sigma, omega, r)
    far = price_similarity(ref + gap + extra, ref, sigma, omega, r)
    assert far < near


@given(st.floats(1, 1e5), st.floats(0, 1e5), st.floats(1, 1e5), st.floats(1e-3, 10), st.floats(1e-2, 1e2))
def test_similarity_invariant_to_joint_scaling(gap, sigma, omega, r, c):
    a = price_similarity(gap, 0.0, sigma, omega, r)
    b = price_similarity(c * gap, 0.0, c * sigma, c * omega, r)
    assert b == pytest.approx(a, rel=1e-12)


@given(st.floats(1, 1e5), st.floats(0, 1e5), st.floats(1, 1e5), positive)
def test_similarity_increases_with_spending_deviation(gap, sigma, more, omega):
    assert price_similarity(gap, 0, sigma + more, omega) > price_similarity(gap, 0, sigma, omega)


def test_seasonal_ratio_examples():
    vals = [1.0] * 12
    vals[5], vals[11] = 1.2, 0.8
    idx = SeasonalIndex(tuple(vals))
    assert seasonal_ratio(idx, 4, 4) == 1.0
    assert seasonal_ratio(idx, 6, 12) == pytest.approx(1.5, abs=1e-15)


@given(st.lists(st.floats(0.1, 10), min_size=12, max_size=12), st.integers(1, 12), st.integers(1, 12))
def test_seasonal_ratio_reciprocity(vals, a, b):
    idx = SeasonalIndex(tuple(vals))
    assert seasonal_ratio(idx, a, b) * seasonal_ratio(idx, b, a) == pytest.approx(1.0, rel=1e-12)


def test_seasonal_index_imputes_empty_months():
    ps = [package("A", start=date(2013, 3, 1), price=900), package("B", start=date(2013, 4, 1), price=1100)]
    idx = fit_seasonal_index(ps)
    assert idx[3] == pytest.approx(0.9) and idx[4] == pytest.approx(1.1)
    assert idx[1] == 1.0 and idx[12] == 1.0


@pytest.fixture(scope="module")
def seasonal_corpus():
    return generate_dataset(GeneratorConfig(n_users=50, n_courses=200, seed=2))


def test_recovered_seasonal_ratios_within_five_percent(seasonal_corpus):
    ds, gt, _ = seasonal_corpus
    assert len(ds.packages) >= 10000
    rec = np.array(fit_seasonal_index(ds.packages).values)
    planted = np.array(gt.seasonal_index)
    ratio = (rec[:, None] / rec[None, :]) / (planted[:, None] / planted[None, :])
    assert np.abs(ratio - 1).max() < 0.05
    assert np.corrcoef(rec, planted)[0, 1] >= 0.9


def test_spending_stats_examples_and_consistency():
    one = [booking("U", package("P", price=9000), date(2013, 1, 1))]
    assert user_spending_stats(one) == (9000.0, 0.0)
    two = [booking("U", package("P1", price=8000), date(2013, 1, 1)),
           booking("U", package("P2", price=12000), date(2013, 1, 2))]
    assert user_spending_stats(two) == (10000.0, 2000.0)
    with pytest.raises(ValueError):
        user_spending_stats([])
    ds, _, _ = generate_dataset(GeneratorConfig(n_users=100, n_courses=10, seed=3))
    for hist in ds.bookings_by_user.values():
        v = build_user_vector(hist, ds.course_ratings)
        assert user_spending_stats(hist) == (v.avg_spending, v.std_spending)


def test_feature_dimension():
    # intercept, 11 month + 6 weekday dummies, 7 attributes, 3 promotions + shortness, 44 + 24 interactions
    assert len(price_feature_names()) == 1 + 11 + 6 + 7 + 4 + 44 + 24
    assert len(price_feature_names(())) == 29


def test_too_few_rows_rejected():
    ps = [package(f"P{i}", price=1000 + i) for i in range(50)]
    with pytest.raises(ValueError, match="need at least"):
        fit_price_model(ps)


def test_zero_noise_recovers_prices_and_planted_coefficients():
    cfg = GeneratorConfig(n_users=20, n_courses=2, n_packages_per_course_month=60, price_noise_sd=0, seed=2)
    ds, gt, _ = generate_dataset(cfg)
    s = gt.seasonal_index
    c = gt.coefficients
    for course in ds.courses:
        ps = [p for p in ds.packages if p.course_id == course.id]
        fit = fit_price_model(ps)
        assert np.abs(fit.residuals).max() < 1.0
        coef = dict(zip(fit.feature_names, fit.coefficients))
        # January is the baseline month, so flag main effects carry January's multiplier
        expected = {
            "caddie": s[0] * c["caddie"], "lunch": s[0] * c["lunch"],
            "month_6:caddie": (s[5] - s[0]) * c["caddie"], "month_10:lunch": (s[9] - s[0]) * c["lunch"],
            "shortness": c["shortness"], "dow_6": c["dow_6"], "dow_6:caddie": 0.0,
            "promo_member": c["promo_member"], "promo_last_minute": c["promo_last_minute"],
            "min_party_size": c["min_party_size"], "num_laps": c["num_laps"],
        }
        for k, v in expected.items():
            assert coef[k] == pytest.approx(v, abs=0.05), k


def test_default_noise_fit_quality_and_heteroscedasticity():
    ds, _, _ = generate_dataset(GeneratorConfig(n_users=50, n_courses=20, seed=1))
    preds, res = [], []
    for course in ds.courses:
        fit = fit_price_model([p for p in ds.packages if p.course_id == course.id])
        assert fit.r_squared >= 0.9
        preds.append(fit.predictions)
        res.append(fit.residuals)
    pred, r = np.concatenate(preds), np.concatenate(res)
    lo, hi = np.quantile(pred, [0.25, 0.75])
    assert r[pred >= hi].std() > r[pred <= lo].std()
