import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hugmodel.errors import DomainError
from hugmodel.model import (HugData, ModelParams, ThetaPrior, close_pairs, compute_statistics,
                            data_energy, interaction_energy, log_density_ratio, plane_pair,
                            plane_pairs, sample_theta_tempered, theta_prior_logpdf,
                            total_energy)
from scipy.spatial import ConvexHull

from oracles import brute_force_hull, ccw_order, inside_by_triangles

SQUARE_DATA = np.array([[0.25, 0.25, 0.5], [0.75, 0.25, 0.5], [0.75, 0.75, 0.2],
                        [0.25, 0.75, 0.8], [0.5, 0.5, 0.5]])


def test_plane_numbering():
    assert plane_pairs(3) == [(0, 1), (0, 2), (1, 2)]
    assert len(plane_pairs(5)) == 10
    assert plane_pair(3, 3) == (1, 2)
    with pytest.raises(ValueError):
        plane_pair(4, 3)


def test_statistics_when_sources_equal_data_hull():
    s = SQUARE_DATA[:4]
    st_ = compute_statistics(s, SQUARE_DATA, 1, ModelParams())
    assert st_.g == 0.0 and st_.n_e == 0.0 and st_.n == 4 and st_.n_r == 0


def test_statistics_of_empty_configuration():
    assert compute_statistics(np.empty((0, 3)), SQUARE_DATA, 1, ModelParams()).as_tuple() == (
        1.0, 1.0, 0, 0)


def test_g_is_relative_area_error():
    s = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
    st_ = compute_statistics(s, SQUARE_DATA, 1, ModelParams())
    assert st_.g == pytest.approx(1.0 / 0.25 - 1.0)
    assert st_.n_e == 0.0


def test_unexplained_fraction():
    s = np.array([[0.2, 0.2, 0], [0.6, 0.2, 0], [0.2, 0.6, 0]])
    st_ = compute_statistics(s, SQUARE_DATA, 1, ModelParams())
    # (0.25, 0.25) is the only sample in this triangle
    assert st_.n_e == pytest.approx(1 - 1 / 5)


def test_close_pairs_use_closed_balls():
    p = np.array([[0.0, 0.0], [0.01, 0.0], [0.5, 0.5], [0.5, 0.505]])
    assert close_pairs(p, 0.01) == 2
    assert close_pairs(p, 0.0099) == 1


def test_statistics_against_independent_oracle(exp1_dataset):
    from conftest import EXP1_SOURCES
    from hugmodel.data import apply_normalization

    d = exp1_dataset.normalized
    s = apply_normalization(EXP1_SOURCES, exp1_dataset.spec)
    for v, (i, j) in enumerate(plane_pairs(3), start=1):
        st_ = compute_statistics(s, d, v, ModelParams())
        # qhull is an independent implementation; its "volume" is the area in 2-D
        a_s = ConvexHull(s[:, [i, j]]).volume
        a_d = ConvexHull(d[:, [i, j]]).volume
        assert st_.g == pytest.approx(abs(a_s / a_d - 1), abs=1e-12)
        hull = ccw_order(brute_force_hull(s[:, [i, j]]))
        inside = sum(inside_by_triangles(hull, p) for p in d[:, [i, j]])
        assert st_.n_e == pytest.approx(1 - inside / len(d), abs=1e-12)
        # every sample is a mixture of the sources, so nothing is left unexplained
        assert st_.n_e == 0.0


def test_degenerate_data_plane_raises():
    d = np.array([[0.1, 0.5, 0.1], [0.2, 0.5, 0.3], [0.3, 0.5, 0.2]])
    hd = HugData(d)
    assert hd.valid_planes() == [2, 3] or 1 not in hd.valid_planes()
    with pytest.raises(DomainError):
        compute_statistics(d, hd, 1, ModelParams())


def test_energy_decomposition():
    p = ModelParams(2.0, 3.0, 0.5, 7.0)
    s = np.array([[0.1, 0.1, 0.1], [0.9, 0.1, 0.1], [0.1, 0.9, 0.1], [0.105, 0.1, 0.3]])
    st_ = compute_statistics(s, SQUARE_DATA, 1, p)
    assert st_.n_r == 1
    assert total_energy(s, SQUARE_DATA, 1, p) == pytest.approx(
        2 * st_.g + 3 * st_.n_e + 0.5 * 4 + 7 * 1)
    assert data_energy(st_, p) + interaction_energy(st_, p) == pytest.approx(
        total_energy(s, SQUARE_DATA, 1, p))


def test_isolated_interior_source_costs_theta3():
    p = ModelParams()
    s = SQUARE_DATA[:4]
    s2 = np.vstack([s, [[0.4, 0.6, 0.5]]])
    assert log_density_ratio(s2, s, SQUARE_DATA, 1, p) == pytest.approx(-p.theta3)


def test_local_stability_of_interaction_term():
    # exp(-dU_i) <= exp(-theta3) for any added point and positive weights
    rng = np.random.default_rng(2)
    violations = 0
    for _ in range(10_000):
        n = int(rng.integers(0, 8))
        s = rng.random((n, 2)) * rng.choice([1.0, 0.03])
        xi = rng.random(2) * 0.03 if rng.random() < 0.5 else rng.random(2)
        t3, t4 = rng.exponential(1.0, 2)
        r = float(rng.choice([0.01, 0.05, 0.3]))
        d_ui = t3 + t4 * (close_pairs(np.vstack([s, xi]), r) - close_pairs(s, r))
        violations += math.exp(-d_ui) > math.exp(-t3) * (1 + 1e-15)
    assert violations == 0


def test_prior_logpdf_matches_scipy():
    from scipy.stats import norm

    prior = ThetaPrior()
    t = np.array([10.0, 255.0, 0.3, 0.9])
    ref = sum(norm.logpdf(t[i], prior.means[i], math.sqrt(prior.variances[i])) for i in range(4))
    assert theta_prior_logpdf(t, prior) == pytest.approx(ref)


def test_tempered_theta_draws_have_scaled_variance():
    rng = np.random.default_rng(3)
    prior = ThetaPrior()
    T = 0.25
    draws = np.array([sample_theta_tempered(prior, T, rng).theta for _ in range(20_000)])
    assert np.all(draws > 0)
    np.testing.assert_allclose(draws.mean(axis=0), prior.means, rtol=0.01)
    np.testing.assert_allclose(draws.var(axis=0), np.array(prior.variances) * T, rtol=0.05)


def test_tempered_theta_stays_positive_at_high_temperature():
    rng = np.random.default_rng(4)
    for _ in range(200):
        assert np.all(sample_theta_tempered(ThetaPrior(), 1e4, rng).theta > 0)


def test_prior_validation():
    with pytest.raises(ValueError):
        ThetaPrior(variances=(1.0, 0.0, 1.0, 1.0))


unit = st.floats(0.0, 1.0, allow_nan=False)


@given(arrays(np.float64, st.tuples(st.integers(1, 10), st.just(3)), elements=unit),
       st.integers(1, 3))
def test_statistics_ranges(s, v):
    st_ = compute_statistics(s, SQUARE_DATA, v, ModelParams())
    assert st_.g >= 0.0
    assert 0.0 <= st_.n_e <= 1.0
    assert st_.n == len(s)
    assert 0 <= st_.n_r <= len(s) * (len(s) - 1) // 2


@given(arrays(np.float64, st.tuples(st.integers(1, 10), st.just(3)), elements=unit),
       st.integers(1, 3))
def test_statistics_are_permutation_invariant(s, v):
    a = compute_statistics(s, SQUARE_DATA, v, ModelParams())
    b = compute_statistics(s[::-1], SQUARE_DATA, v, ModelParams())
    assert a.n == b.n and a.n_r == b.n_r and a.n_e == b.n_e
    assert a.g == pytest.approx(b.g, abs=1e-12)
