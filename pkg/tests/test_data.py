import random

import numpy as np
import pytest

from corrbandit import data
from corrbandit.data import RatingRecord, SplitSpec
from corrbandit.errors import ConfigError, IngestError


def _rec(u, i, r=3.0, genres=()):
    return RatingRecord(u, i, float(r), tuple(genres))


def test_split_hand_trace():
    recs = [_rec("u1", f"i{j}") for j in range(10)] + [_rec("u2", f"i{j}") for j in range(2)]
    train, test = data.split_by_activity(recs, 0.5)
    assert {r.user for r in train} == {"u1"} and len(train) == 10
    assert {r.user for r in test} == {"u2"}


def test_split_dominant_user_near_one():
    recs = [_rec("big", f"i{j}") for j in range(1000)] + [_rec("a", "i0"), _rec("b", "i1")]
    train, test = data.split_by_activity(recs, 1 - 1e-2)
    assert {r.user for r in train} == {"big"}
    assert {r.user for r in test} == {"a", "b"}


def test_split_is_order_independent_and_partitions():
    rng = random.Random(0)
    recs = [_rec(f"u{rng.randrange(30)}", f"i{rng.randrange(20)}") for _ in range(500)]
    train, test = data.split_by_activity(recs, SplitSpec(0.5))
    shuffled = recs[:]
    rng.shuffle(shuffled)
    train2, test2 = data.split_by_activity(shuffled, SplitSpec(0.5))
    assert sorted(map(repr, train)) == sorted(map(repr, train2))
    assert len(train) + len(test) == len(recs)
    assert not ({r.user for r in train} & {r.user for r in test})
    assert len(train) >= 0.5 * len(recs)


def test_split_errors():
    with pytest.raises(IngestError):
        data.split_by_activity([], 0.5)
    with pytest.raises(IngestError):
        data.split_by_activity([_rec("u", "i")], 0.5)
    with pytest.raises(ConfigError):
        SplitSpec(1.0)


def test_genre_assignment():
    recs = [_rec("u", "solo", genres=("Drama",)), _rec("u", "none")]
    out, skipped = data.derive_genre_arms(recs, seed=0)
    assert skipped == 1
    assert [r.genres for r in out] == [("Drama",)]


def test_genre_assignment_is_uniform_and_seeded():
    recs = [_rec("u", "pair", genres=("A", "B"))]
    picks = [data.derive_genre_arms(recs, seed=s)[0][0].genre for s in range(10_000)]
    assert picks.count("A") / len(picks) == pytest.approx(0.5, abs=0.02)
    assert data.derive_genre_arms(recs, 7)[0] == data.derive_genre_arms(recs, 7)[0]


def test_top_n_items():
    recs = ([_rec(f"u{j}", "b") for j in range(5)] + [_rec(f"u{j}", "a") for j in range(5)]
            + [_rec(f"u{j}", "c") for j in range(3)])
    assert data.top_n_items(recs, 2) == ["a", "b"]
    assert data.top_n_items(recs, 1) == ["a"]
    with pytest.raises(IngestError):
        data.top_n_items(recs, 4)


def test_fifty_and_twentyfive_item_arms_supported():
    recs = data.synthetic_corpus(n_users=60, n_arms=50, seed=1)
    assert len(data.top_n_items(recs, 50)) == 50
    assert len(data.top_n_items(recs, 25)) == 25


def test_half_point_rounding():
    np.testing.assert_array_equal(data.half_point([3.24, 3.25, 3.74, 3.75, 1.0]), [3.0, 3.5, 3.5, 4.0, 1.0])


def test_genre_ratings_use_rounded_user_mean():
    recs = [_rec("u", "x", 4, ("A",)), _rec("u", "y", 5, ("A",)), _rec("u", "z", 2, ("B",))]
    per_user = data.user_arm_ratings(recs, ["A", "B"], arm_mode="genres")
    assert per_user["u"] == {0: 4.5, 1: 2.0}


def test_read_write_round_trip(tmp_path):
    recs = [_rec("u1", "i1", 4, ("A", "B")), _rec("u2", "i1", 2.5)]
    path = tmp_path / "r.csv"
    data.write_ratings(recs, path)
    assert data.read_ratings(path) == recs


def test_read_other_delimiters(tmp_path):
    p = tmp_path / "r.dat"
    p.write_text("1::10::5::Comedy|Drama\n2::10::3::Comedy\n")
    recs = data.read_ratings(p)
    assert recs[0] == RatingRecord("1", "10", 5.0, ("Comedy", "Drama"))
    p.write_text("u\ti\t4\n")
    assert data.read_ratings(p)[0].rating == 4.0


def test_read_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("u,i,4\nu,j,nine\n")
    with pytest.raises(IngestError):
        data.read_ratings(p)
    p.write_text("u,i,7\n")
    with pytest.raises(IngestError):
        data.read_ratings(p)
    p.write_text("")
    with pytest.raises(IngestError):
        data.read_ratings(p)


def test_empirical_env_from_test_split():
    recs = data.synthetic_corpus(n_users=80, n_arms=5, seed=2)
    train, test = data.split_by_activity(recs, 0.5)
    arms = data.top_n_items(recs, 5)
    env = data.build_empirical_env(test, arms)
    m = data.rating_matrix(test, arms)
    np.testing.assert_allclose(env.true_means(), np.nanmean(m, axis=0))
    assert env.K == 5 and env.B == 5.0


def test_synthetic_corpus_is_deterministic_and_valid():
    a = data.synthetic_corpus(50, 6, seed=3)
    assert a == data.synthetic_corpus(50, 6, seed=3)
    assert all(1 <= r.rating <= 5 for r in a)
    assert len({r.user for r in a}) == 50
