import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hugmodel.errors import DomainError
from hugmodel.inference import (GridSpec, cluster_mass_check, contact_probability_grid,
                                count_regions, cumulative_means, deduplicate, kmeans,
                                level_set, sequential_kmeans, suggested_cluster_count,
                                ward_dendrogram)
from hugmodel.model import HugStatistics
from hugmodel.sampler import ChainTrace, TraceRecord
from oracles import brute_force_ward_increments


def _recount(configs, K, plane_dims, cells):
    """Cell-by-cell recount straight from the definition."""
    i, j = plane_dims
    p = np.zeros((cells, cells))
    for ix in range(cells):
        for iy in range(cells):
            lo_x, hi_x = ix / cells, (ix + 1) / cells
            lo_y, hi_y = iy / cells, (iy + 1) / cells
            hit = 0
            for s in configs:
                for x, y in s[:, [i, j]]:
                    in_x = lo_x <= x < hi_x or (ix == cells - 1 and x == 1.0)
                    in_y = lo_y <= y < hi_y or (iy == cells - 1 and y == 1.0)
                    if in_x and in_y:
                        hit += 1
                        break
            p[ix, iy] = hit / len(configs)
    return p


def test_grid_matches_recount():
    rng = np.random.default_rng(0)
    configs = [rng.random((int(rng.integers(0, 6)), 3)) for _ in range(40)]
    configs[3] = np.array([[1.0, 1.0, 0.0], [0.0, 0.5, 1.0]])
    g = contact_probability_grid(configs, GridSpec(2, cell_length=0.1))
    np.testing.assert_allclose(g.prob, _recount(configs, 3, (0, 2), 10))


def test_source_counted_once_per_configuration():
    # three sources in cell (5, 5), one in cell (6, 5)
    configs = [np.array([[0.101, 0.101], [0.105, 0.109], [0.108, 0.102], [0.125, 0.105]])]
    g = contact_probability_grid(configs, GridSpec(1, 0.02))
    assert g.prob[5, 5] == 1.0 and g.prob[6, 5] == 1.0 and g.prob.sum() == 2.0


def test_grid_spec_validation():
    assert GridSpec(1, 0.02).cells == 50
    with pytest.raises(ValueError):
        GridSpec(1, 0.03).cells


def test_grid_rows_are_cell_centres():
    g = contact_probability_grid([np.array([[0.05, 0.95]])], GridSpec(1, 0.1))
    rows = g.rows()
    assert len(rows) == 100
    assert (0.05, 0.95, 1.0) in [(round(x, 10), round(y, 10), p) for x, y, p in rows]


def test_regions_use_eight_neighbourhood():
    configs = [np.array([[0.01, 0.01], [0.03, 0.03], [0.51, 0.51]])]
    g = contact_probability_grid(configs, GridSpec(1, 0.02))
    assert count_regions(g, 0.5) == 2


@given(st.lists(arrays(np.float64, st.tuples(st.integers(0, 5), st.just(2)),
                       elements=st.floats(0, 1)), min_size=1, max_size=15),
       st.floats(0, 1), st.floats(0, 1))
def test_level_sets_are_nested(configs, a, b):
    lo, hi = sorted((a, b))
    g = contact_probability_grid(configs, GridSpec(1, 0.1), K=2)
    assert level_set(g, hi) <= level_set(g, lo)
    assert np.all((g.prob >= 0) & (g.prob <= 1))


def _trace(stats_rows, keep=500):
    recs = [TraceRecord(i, 1.0, [1, 1, 1, 1], 1, np.zeros((0, 2)),
                        [HugStatistics(*row)]) for i, row in enumerate(stats_rows)]
    return ChainTrace({"K": 2, "schedule": {"keep_last": keep}}, recs)


def test_cumulative_means():
    tr = _trace([(1.0, 0.0, 3, 0), (3.0, 0.5, 5, 2), (2.0, 1.0, 4, 1)])
    cm = cumulative_means(tr, 1)
    np.testing.assert_allclose(cm[-1], [2.0, 0.5, 4.0, 1.0])
    np.testing.assert_allclose(cm[0], [1.0, 0.0, 3.0, 0.0])


def test_cumulative_means_use_kept_window():
    tr = _trace([(9.0, 0, 0, 0)] + [(1.0, 0, 0, 0)] * 4, keep=4)
    assert cumulative_means(tr, 1)[-1, 0] == 1.0


def test_suggested_cluster_count():
    assert suggested_cluster_count([np.zeros((4, 2)), np.zeros((5, 2)), np.zeros((4, 2))]) == 4


# --- k-means ------------------------------------------------------------------------------

def _blobs(rng, centers, n=60, sd=0.01):
    return np.vstack([c + sd * rng.standard_normal((n, len(c))) for c in centers])


def test_kmeans_recovers_separated_blobs():
    rng = np.random.default_rng(1)
    centers = np.array([[0.2, 0.2], [0.8, 0.2], [0.5, 0.8]])
    res = kmeans(_blobs(rng, centers), 3, seed=0)
    got = res.centers[np.argsort(res.centers[:, 0] + 10 * res.centers[:, 1])]
    want = centers[np.argsort(centers[:, 0] + 10 * centers[:, 1])]
    np.testing.assert_allclose(got, want, atol=0.01)
    assert sorted(res.sizes.tolist()) == [60, 60, 60]


def test_kmeans_inertia_never_increases():
    rng = np.random.default_rng(2)
    res = kmeans(rng.random((300, 3)), 6, seed=3, n_init=1)
    assert np.all(np.diff(res.inertia_history) <= 1e-9)


def test_kmeans_identity_clustering():
    x = np.random.default_rng(3).random((7, 2))
    res = kmeans(x, 7, seed=0)
    assert sorted(res.sizes.tolist()) == [1] * 7
    assert res.inertia == pytest.approx(0.0)


def test_kmeans_medians_are_coordinatewise():
    x = np.array([[0.0, 0.0], [0.1, 0.9], [0.2, 0.1]])
    res = kmeans(x, 1)
    np.testing.assert_allclose(res.medians[0], [0.1, 0.1])


def test_kmeans_rejects_too_few_points():
    with pytest.raises(DomainError):
        kmeans(np.zeros((2, 2)), 3)


def test_cluster_mass_check():
    rng = np.random.default_rng(4)
    centers = np.array([[0.2, 0.2], [0.8, 0.2], [0.5, 0.8], [0.5, 0.5]])
    x = np.vstack([_blobs(rng, centers, n=100), rng.random((10, 2))])
    mass = cluster_mass_check(x, range(5, 8), top=4)
    assert set(mass) == {5, 6, 7}
    assert all(v >= 0.85 for v in mass.values())


# --- sequential k-means ----------------------------------------------------------------------

def test_sequential_fixed_point():
    pts = np.array([[0.2, 0.3, 0.4], [0.7, 0.3, 0.9], [0.2, 0.8, 0.9]])
    s = np.repeat(pts, [5, 3, 2], axis=0)
    res = sequential_kmeans(s, {1: 3, 2: 3, 3: 3}, seed=0)
    np.testing.assert_allclose(res.collapsed, s, rtol=0, atol=1e-12)
    assert sorted(res.multiplicity.tolist()) == [2, 3, 5]


def test_sequential_single_plane_k1_collapses_to_centroid():
    x = np.random.default_rng(5).random((20, 2))
    res = sequential_kmeans(x, {1: 1})
    assert len(res.distinct) == 1
    np.testing.assert_allclose(res.distinct[0], x.mean(axis=0))


def test_sequential_recovers_hidden_fourth_source():
    # each plane shows only 3 groups, the 3-D view has 4
    rng = np.random.default_rng(6)
    truth = np.array([[0.29, 0.32, 0.33], [0.67, 0.32, 0.33], [0.67, 0.67, 0.33],
                      [0.67, 0.67, 0.76]])
    s = _blobs(rng, truth, n=50, sd=0.01)
    res = sequential_kmeans(s, {1: 3, 2: 3, 3: 3}, seed=1)
    assert len(res.distinct) == 4
    for t in truth:
        assert np.abs(res.distinct - t).max(axis=1).min() < 0.01


def test_sequential_outputs_are_plane_cluster_centres():
    rng = np.random.default_rng(7)
    s = rng.random((80, 3))
    res = sequential_kmeans(s, {1: 3, 2: 4, 3: 2}, seed=2, order="fixed")
    assert res.order == [1, 2, 3]
    labs = res.labels
    for q in range(len(res.distinct)):
        assert np.all(np.abs(res.collapsed[labs == q] - res.distinct[q]) <= 1e-9)


def test_sequential_errors():
    s = np.random.default_rng(8).random((10, 3))
    with pytest.raises(ValueError):
        sequential_kmeans(s, {1: 2, 2: 2})
    with pytest.raises(DomainError):
        sequential_kmeans(np.repeat(s[:2], 3, axis=0), {1: 3, 2: 2, 3: 2})
    with pytest.raises(ValueError):
        sequential_kmeans(s, {1: 2, 2: 2, 3: 2}, order="sorted")


def test_sequential_is_reproducible():
    s = np.random.default_rng(9).random((60, 3))
    a = sequential_kmeans(s, {1: 3, 2: 3, 3: 3}, seed=4)
    b = sequential_kmeans(s, {1: 3, 2: 3, 3: 3}, seed=4)
    np.testing.assert_array_equal(a.collapsed, b.collapsed)
    assert a.order == b.order


def test_deduplicate():
    reps, counts = deduplicate(np.array([[1.0, 2.0], [3.0, 4.0], [1.0, 2.0 + 1e-12]]))
    assert counts.tolist() == [2, 1]
    np.testing.assert_array_equal(reps[0], [1.0, 2.0])


# --- Ward ---------------------------------------------------------------------------------------

def test_ward_increments_match_naive_agglomeration():
    rng = np.random.default_rng(10)
    for _ in range(10):
        x = rng.random((int(rng.integers(3, 12)), 2))
        dend = ward_dendrogram(x)
        np.testing.assert_allclose(np.sort(dend.increments),
                                   np.sort(brute_force_ward_increments(x)), atol=1e-10)


def test_ward_within_ss_endpoints():
    x = np.random.default_rng(11).random((15, 3))
    dend = ward_dendrogram(x)
    assert dend.within_ss(15) == 0.0
    assert dend.within_ss(1) == pytest.approx(dend.total_ss)
    ws = [dend.within_ss(k) for k in range(1, 16)]
    assert np.all(np.diff(ws) <= 1e-12)
