import math
from dataclasses import replace
from datetime import date, timedelta

import pytest
from hypothesis import given, strategies as st

from builders import booking, ov, package
from coldpack.domain import Course, Dataset
from coldpack.evalharness import emp_at_n, emp_curve, jaccard_similarity, run_experiment, temporal_split
from coldpack.persist import ARTIFACTS, save_model
from coldpack.ranker import RecommenderConfig, fit_recommender
from coldpack.synthgen import GeneratorConfig, generate_dataset


def test_emp_examples():
    assert emp_at_n({"u": ["a", "b"]}, {"u": {"a"}}, 1) == 1.0
    assert emp_at_n({"u": ["a", "x", "y"]}, {"u": {"a", "b"}}, 3) == 0.5
    assert emp_at_n({"u": ["a"], "v": ["x"]}, {"u": {"a"}, "v": {"b"}}, 1) == 0.5


def test_emp_excludes_empty_truth_and_is_undefined_without_users():
    assert emp_at_n({"u": ["a"], "v": ["b"]}, {"u": {"a"}, "v": set()}, 1) == 1.0
    assert math.isnan(emp_at_n({"u": ["a"]}, {}, 1))
    assert math.isnan(emp_at_n({"u": ["a"]}, {"u": set()}, 1))


recs_and_truth = st.dictionaries(
    st.text("uvwxyz", min_size=1, max_size=3),
    st.tuples(st.lists(st.sampled_from("abcdefghij"), unique=True, max_size=10),
              st.sets(st.sampled_from("abcdefghij"), min_size=1, max_size=4)),
    min_size=1, max_size=8,
)


@given(recs_and_truth)
def test_emp_curve_is_non_decreasing_and_bounded(data):
    recs = {u: r for u, (r, _) in data.items()}
    truth = {u: t for u, (_, t) in data.items()}
    curve = emp_curve(recs, truth, 12)
    assert all(0 <= v <= 1 for v in curve)
    assert all(b >= a for a, b in zip(curve, curve[1:]))


@given(recs_and_truth, st.randoms())
def test_emp_is_invariant_to_user_order(data, rnd):
    items = list(data.items())
    rnd.shuffle(items)
    a = emp_at_n({u: r for u, (r, _) in data.items()}, {u: t for u, (_, t) in data.items()}, 5)
    b = emp_at_n({u: r for u, (r, _) in items}, {u: t for u, (_, t) in items}, 5)
    assert a == pytest.approx(b, abs=1e-15)


def test_jaccard_examples():
    a = package("A", options=ov("lunch", "caddie"), promotion_type="member")
    assert jaccard_similarity(a, a) == 1.0
    # lunch + laps=2 vs lunch + laps=1; the remaining tokens coincide, so compare on the tokens that differ
    x = package("X", options=ov("lunch", num_laps=2))
    y = package("Y", options=ov("lunch", num_laps=1))
    shared = {"min_party_size=1", "min_num_parties=1", "promotion_type=none"}
    assert jaccard_similarity(x, y) == pytest.approx((1 + len(shared)) / (3 + len(shared)), abs=1e-15)


def test_jaccard_on_bare_sets():
    from coldpack.ranker import _jaccard_sets

    assert _jaccard_sets(frozenset({"lunch", "num_laps=2"}), frozenset({"lunch", "num_laps=1"})) == pytest.approx(1 / 3)
    assert _jaccard_sets(frozenset({"lunch"}), frozenset({"caddie"})) == 0.0
    assert _jaccard_sets(frozenset(), frozenset()) == 1.0


flag_sets = st.sets(st.sampled_from(["lunch", "caddie", "competition", "holiday", "pair_party"]))


@given(flag_sets, flag_sets, st.integers(1, 4), st.integers(1, 4))
def test_jaccard_symmetric_and_one_only_for_equal_sets(f1, f2, l1, l2):
    a = package("A", options=ov(*f1, num_laps=l1))
    b = package("B", options=ov(*f2, num_laps=l2))
    s = jaccard_similarity(a, b)
    assert s == jaccard_similarity(b, a)
    assert (s == 1.0) == (f1 == f2 and l1 == l2)


def split_fixture():
    cutoff = date(2013, 5, 31)
    p = package("P", start=date(2013, 5, 1), days=60)
    days = {"B1": -3, "B2": 0, "B3": 1, "B4": 15, "B5": 16, "B6": 8}
    bs = [booking(u, p, cutoff + timedelta(days=d), date(2013, 6, 28)) for u, d in days.items()]
    return Dataset.build([Course("C1", 3.0)], [p], bs), cutoff


def test_split_boundaries():
    ds, cutoff = split_fixture()
    s = temporal_split(ds, cutoff, 15)
    assert {b.user_id for b in s.train} == {"B1", "B2"}
    assert {b.user_id for b in s.test} == {"B3", "B4", "B6"}
    assert set(s.truth) == {"B3", "B4", "B6"}
    assert not set(s.train) & set(s.test)
    assert s.window == (date(2013, 6, 1), date(2013, 6, 15))


def test_split_rejects_empty_sides():
    ds, cutoff = split_fixture()
    with pytest.raises(ValueError, match="no training"):
        temporal_split(ds, cutoff - timedelta(days=10), 2)
    with pytest.raises(ValueError, match="no test"):
        temporal_split(ds, cutoff + timedelta(days=30), 15)


@pytest.fixture(scope="module")
def small():
    return generate_dataset(GeneratorConfig(n_users=600, n_courses=25, seed=8))[0]


def test_single_setting_report_and_empty_settings(small):
    cutoff = date(2013, 5, 31)
    rep = run_experiment(small, cutoff, settings=["jaccard"], N=10, tune=False)
    assert list(rep.curves) == ["jaccard"] and len(rep.curves["jaccard"]) == 10
    assert rep.relative_improvement("full_with_r", "jaccard") is None
    with pytest.raises(ValueError):
        run_experiment(small, cutoff, settings=[])


def test_experiment_curves_monotone_and_active(small):
    rep = run_experiment(small, date(2013, 5, 31), N=20, max_rounds=10)
    assert rep.inactive_recommendations == 0
    for curve in rep.curves.values():
        assert all(b >= a for a, b in zip(curve, curve[1:]))
    for v in rep.validation.values():
        assert v["tuned"] >= v["uniform"]
    summary = rep.summary()
    assert set(summary["relative_improvement_at_5"]) == {"full_with_r_vs_jaccard", "full_with_r_vs_opt_only"}


def test_test_window_does_not_reach_trained_artifacts(small, tmp_path):
    cutoff = date(2013, 5, 31)
    cfg = RecommenderConfig(cutoff=cutoff)
    perturbed = []
    for b in small.bookings:
        if b.booked_at > cutoff:
            b = replace(b, price_paid=b.price_paid * 3 + 7, party_size=b.party_size + 2)
        perturbed.append(b)
    # an extra test-window booking by a brand new user
    perturbed.append(replace(small.bookings[-1], user_id="U_canary"))
    save_model(fit_recommender(small, cfg), tmp_path / "a")
    save_model(fit_recommender(small.with_bookings(perturbed), cfg), tmp_path / "b")
    for name in ARTIFACTS.values():
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
