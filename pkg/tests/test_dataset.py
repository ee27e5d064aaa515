import warnings

import numpy as np
import pytest

from trustwebrank.dataset import (
    CommunitySpec,
    DatasetFormatError,
    EmptyDatasetError,
    RatingsDataset,
    clean,
    load,
    split,
    synthesize_community_dataset,
)
from trustwebrank.graph import TrustGraph, strongly_connected_components


def write(tmp_path, ratings, trust):
    r, t = tmp_path / "r.csv", tmp_path / "t.csv"
    r.write_text(ratings)
    t.write_text(trust)
    return r, t


def test_load_minimal(tmp_path):
    ds = load(*write(tmp_path, "1,10,5\n2,10,3\n2,11,4\n", "1,2\n"))
    assert ds.n_ratings == 3
    assert ds.trust.tolist() == [[1, 2]]
    assert ds.timestamp is None


def test_load_header_and_timestamp(tmp_path):
    ds = load(*write(tmp_path, "user_id,item_id,stars,timestamp\n1,10,5,100\n2,10,3,\n",
                     "truster_id,trustee_id\n1,2\n"))
    assert ds.n_ratings == 2
    assert ds.timestamp[0] == 100.0 and np.isnan(ds.timestamp[1])


def test_load_bad_stars_names_line(tmp_path):
    with pytest.raises(DatasetFormatError) as err:
        load(*write(tmp_path, "1,10,5\n1,11,6\n", "1,2\n"))
    assert err.value.lineno == 2
    assert str(err.value).startswith(f"{tmp_path / 'r.csv'}:2:")


@pytest.mark.parametrize("ratings,trust,where", [
    ("1,10\n", "", "r"),
    ("1,x,3\n", "", "r"),
    ("1,10,3\n", "1,2,3\n", "t"),
    ("1,10,3\n", "a,b\nc,d\n", "t"),
])
def test_load_malformed(tmp_path, ratings, trust, where):
    with pytest.raises(DatasetFormatError) as err:
        load(*write(tmp_path, ratings, trust))
    assert err.value.path.endswith("r.csv" if where == "r" else "t.csv")


def test_load_duplicates_and_unknown(tmp_path):
    ds = load(*write(tmp_path, "1,10,5\n1,10,2\n2,10,4\n", "1,2\n1,2\n1,9\n2,2\n"))
    assert ds.n_ratings == 2
    assert ds.stars[ds.user == 1].tolist() == [2]
    rep = ds.report["load"]
    assert rep["duplicate_ratings"] == 1
    assert rep["unknown_user_edges"] == 1
    assert rep["duplicate_edges"] == 1
    assert rep["self_trust_edges"] == 1


def _ds(ratings, trust):
    u, o, r = zip(*ratings)
    return RatingsDataset(u, o, r, trust)


def test_clean_drops_untrusting_user():
    ds = _ds([(1, 0, 5), (2, 0, 4), (3, 1, 3)], [(1, 2), (2, 1)])
    out = clean(ds)
    assert set(out.users.tolist()) == {1, 2}


def test_clean_keeps_largest_scc():
    cyc_a = [(1, 2), (2, 3), (3, 1)]
    cyc_b = [(4, 5), (5, 6), (6, 7), (7, 4)]
    ratings = [(u, u % 2, 4) for u in range(1, 8)]
    out = clean(_ds(ratings, cyc_a + cyc_b))
    assert set(out.users.tolist()) == {4, 5, 6, 7}
    assert out.report["clean"]["users"] == 4


def test_clean_iterates_to_fixed_point():
    # 3 is only attached through 4, who has no reviews
    ratings = [(1, 0, 5), (2, 0, 4), (3, 0, 3)]
    trust = [(1, 2), (2, 1), (3, 4), (4, 3), (2, 3)]
    out = clean(_ds(ratings, trust))
    assert set(out.users.tolist()) == {1, 2}


def test_clean_empty_raises():
    with pytest.raises(EmptyDatasetError):
        clean(_ds([(1, 0, 5), (2, 0, 4)], [(1, 2)]))


def _post_clean_strongly_connected(ds):
    users = ds.users
    index = {u: n for n, u in enumerate(users.tolist())}
    g = TrustGraph(users.size)
    for a, b in ds.trust.tolist():
        g.add_edge(index[a], index[b], 1.0)
    return len(strongly_connected_components(g)) == 1


def test_clean_synthetic_idempotent_and_connected():
    ds = clean(synthesize_community_dataset(CommunitySpec(users_per_community=60,
                                                          items_per_community=80, seed=3)))
    again = clean(ds)
    np.testing.assert_array_equal(again.user, ds.user)
    np.testing.assert_array_equal(again.trust, ds.trust)
    assert _post_clean_strongly_connected(ds)
    reviewers = set(ds.user.tolist())
    linked = set(ds.trust.ravel().tolist())
    assert reviewers == linked == set(ds.users.tolist())


def test_split_counts_and_determinism():
    ds = _ds([(u, u, 3) for u in range(100)], [(0, 1)])
    a, b = split(ds, 0.2, seed=7), split(ds, 0.2, seed=7)
    np.testing.assert_array_equal(a.is_test, b.is_test)
    n_test = int(a.is_test.sum())
    assert a.report["split"]["test"] == n_test
    assert a.report["split"]["train"] + n_test == 100
    # binomial(100, 0.2): 4 standard deviations
    assert abs(n_test - 20) <= 16
    assert a.trust.tolist() == ds.trust.tolist()
    assert not split(ds, 0.2, seed=8).is_test.tolist() == a.is_test.tolist()


def test_split_two_ratings_warns_or_fills_both():
    ds = _ds([(0, 0, 3), (1, 1, 4)], [(0, 1)])
    for seed in range(20):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            out = split(ds, 0.5, seed=seed)
        n_test = int(out.is_test.sum())
        if n_test in (0, 2):
            assert caught, seed
        else:
            assert not caught


@pytest.mark.parametrize("frac", [0.0, 1.0, -0.5])
def test_split_fraction_range(frac):
    with pytest.raises(ValueError):
        split(_ds([(0, 0, 3)], []), frac)


def test_synth_no_cross_links_two_components():
    spec = CommunitySpec(users_per_community=40, items_per_community=50, cross_trust_prob=0.0, seed=1)
    ds = synthesize_community_dataset(spec)
    users = ds.users
    g = TrustGraph(users.size)
    index = {u: n for n, u in enumerate(users.tolist())}
    for a, b in ds.trust.tolist():
        g.add_edge(index[a], index[b], 1.0)
    big = [c for c in strongly_connected_components(g) if len(c) > 1]
    assert len(big) == 2


def test_synth_star_share_at_10k():
    spec = CommunitySpec(users_per_community=500, ratings_per_user=10, seed=2)
    ds = synthesize_community_dataset(spec)
    assert ds.n_ratings == 10_000
    assert abs(ds.star_share() - 0.75) <= 0.02


def test_synth_deterministic():
    spec = CommunitySpec(users_per_community=30, items_per_community=40, seed=4)
    a, b = synthesize_community_dataset(spec), synthesize_community_dataset(spec)
    np.testing.assert_array_equal(a.stars, b.stars)
    np.testing.assert_array_equal(a.trust, b.trust)
    c = synthesize_community_dataset(CommunitySpec(users_per_community=30, items_per_community=40, seed=5))
    assert not np.array_equal(a.trust, c.trust)


def test_counts_and_save_roundtrip(tmp_path):
    ds = synthesize_community_dataset(CommunitySpec(users_per_community=20, items_per_community=30))
    c = ds.counts()
    assert c["reviews"] == ds.n_ratings
    assert c["sparsity"] == pytest.approx(1 - c["reviews"] / (c["users"] * c["products"]))
    r, t = tmp_path / "r.csv", tmp_path / "t.csv"
    ds.save(r, t)
    back = load(r, t)
    np.testing.assert_array_equal(back.stars, ds.stars)
    np.testing.assert_array_equal(back.trust, ds.trust)
