import itertools
import math
from datetime import date

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from builders import booking, package
from coldpack.coursecf import CooccurrenceMatrix, build_cooccurrence, course_scores, filter_courses


def bookings_from(user_courses: dict[str, list[str]]):
    out = []
    for u, cs in user_courses.items():
        for i, c in enumerate(cs):
            out.append(booking(u, package(f"{u}-{i}", c), date(2013, 1, 1 + i)))
    return out


def brute_force(user_courses: dict[str, list[str]], ids: list[str]) -> np.ndarray:
    m = np.zeros((len(ids), len(ids)), dtype=int)
    for a, ca in enumerate(ids):
        for b, cb in enumerate(ids):
            for cs in user_courses.values():
                if ca in cs and cb in cs:
                    m[a, b] += 1
    return m


def random_fixture(rng, n_users=20, n_courses=6):
    ids = [f"C{i}" for i in range(n_courses)]
    return {f"U{u:02d}": [ids[j] for j in rng.integers(0, n_courses, size=rng.integers(1, 6))]
            for u in range(n_users)}, ids


def test_small_examples():
    m = build_cooccurrence(bookings_from({"U": ["A", "B"]}))
    assert (m["A", "B"], m["A", "A"], m["B", "B"]) == (1, 1, 1)
    m2 = build_cooccurrence(bookings_from({"U": ["A", "A", "B"]}))
    assert m2["A", "B"] == 1 and m2["A", "A"] == 1


def test_fifty_random_fixtures_match_double_loop():
    rng = np.random.default_rng(0)
    for _ in range(50):
        uc, ids = random_fixture(rng)
        m = build_cooccurrence(bookings_from(uc), ids)
        np.testing.assert_array_equal(m.counts, brute_force(uc, ids))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_matrix_invariants_and_order_independence(seed):
    rng = np.random.default_rng(seed)
    uc, ids = random_fixture(rng)
    bs = bookings_from(uc)
    m = build_cooccurrence(bs, ids)
    c = m.counts
    assert np.array_equal(c, c.T) and c.min() >= 0
    d = np.diag(c)
    assert np.all(c <= np.minimum.outer(d, d))
    perm = [bs[i] for i in rng.permutation(len(bs))]
    assert np.array_equal(build_cooccurrence(perm, ids).counts, c)
    cos = m.cosine
    assert cos.min() >= 0 and cos.max() <= 1 + 1e-12


def test_score_examples():
    m = build_cooccurrence(bookings_from({"U": ["A", "B"]}))
    assert course_scores(["A"], m)["B"] == 1.0
    m2 = build_cooccurrence(bookings_from({"U": ["A"], "V": ["B", "C"]}))
    assert course_scores(["A"], m2)["C"] == 0.0
    assert course_scores([], m2) == {}


def test_five_course_fixture_matches_hand_cosine_means():
    uc = {"U1": ["A", "B"], "U2": ["A", "C", "D"], "U3": ["B", "C"], "U4": ["A", "B", "E"], "U5": ["E"]}
    m = build_cooccurrence(bookings_from(uc))
    users = {c: {u for u, cs in uc.items() if c in cs} for c in "ABCDE"}

    def cos(i, j):
        return len(users[i] & users[j]) / math.sqrt(len(users[i]) * len(users[j]))

    history = bookings_from({"X": ["A", "C", "A"]})
    got = course_scores(history, m)
    for j in "ABCDE":
        assert got[j] == pytest.approx((cos("A", j) + cos("C", j)) / 2, abs=1e-12)


def test_filter_rules():
    scores = {"C1": 0.9, "C2": 0.5, "C3": 0.7}
    assert filter_courses(scores, 2) == ["C1", "C3"]
    tied = {"C5": 0.4, "C2": 0.4, "C9": 0.8}
    assert filter_courses(tied, 2) == ["C9", "C2"]
    out = filter_courses(scores, 2, reference_course="C2")
    assert out == ["C1", "C3", "C2"] and len(out) == 3
    with pytest.raises(ValueError):
        filter_courses(scores, 0)


def test_csv_round_trip(tmp_path):
    uc, ids = random_fixture(np.random.default_rng(1))
    ids.append("C_unused")
    m = build_cooccurrence(bookings_from(uc), ids)
    m.save_csv(tmp_path / "m.csv")
    again = CooccurrenceMatrix.load_csv(tmp_path / "m.csv")
    assert again.course_ids == m.course_ids
    np.testing.assert_array_equal(again.counts, m.counts)
