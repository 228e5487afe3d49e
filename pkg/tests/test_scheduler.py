import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from costsched.config import ScenarioConfig
from costsched.drop import generate_drop
from costsched.scheduler import (GWC, RS, VisibilityMatrix, active_clusters, activity_sets,
                                 build_v_matrix, common_cluster_count, estimation_load,
                                 gus_mincorr, gus_threshold, gwc, mean_common_clusters,
                                 random_selection, semi_orthogonal)

HAND_V = VisibilityMatrix([[1.0, 0.0], [0.0, 1.0], [0.9, 0.1]])


def pairwise_cosines(v, sel):
    v = np.asarray(v)
    out = []
    for a, b in itertools.combinations(sel, 2):
        na, nb = np.linalg.norm(v[a]), np.linalg.norm(v[b])
        out.append(abs(v[a] @ v[b]) / (na * nb) if na * nb > 0 else 0.0)
    return out


def test_hand_fixture_both_variants():
    assert sorted(gus_threshold(HAND_V, 2, 0.5).selected) == [0, 1]
    assert sorted(gus_mincorr(HAND_V, 2).selected) == [0, 1]


def test_threshold_stops_when_pool_empties():
    # user 2 is pruned by user 0, so only two users survive even for K_s = 3
    assert gus_threshold(HAND_V, 3, 0.5).selected == [0, 1]


def test_ties_broken_by_lowest_id():
    v = VisibilityMatrix([[0.0, 1.0], [1.0, 0.0], [1.0, 0.0]])
    assert gus_threshold(v, 1, 0.5).selected == [0]


def test_visibility_matrix_rejects_bad_entries():
    with pytest.raises(ValueError):
        VisibilityMatrix([[1.0, -0.1]])
    with pytest.raises(ValueError):
        VisibilityMatrix([[np.nan, 1.0]])


@settings(max_examples=1000, deadline=None)
@given(arrays(float, st.tuples(st.integers(2, 20), st.integers(1, 6)),
              elements=st.floats(0, 1)),
       st.integers(1, 10), st.floats(0.05, 1.0))
def test_threshold_pruning_invariant(v, k_s, eps):
    res = gus_threshold(VisibilityMatrix(v), k_s, eps)
    assert len(res.selected) <= k_s
    # the scheduler and this check round the cosine independently
    assert all(c < eps + 1e-12 for c in pairwise_cosines(v, res.selected))


def test_activity_threshold():
    assert active_clusters([1.0, 0.2, 0.05], eta=0.01) == {0, 1}
    assert active_clusters([0.0, 0.0]) == set()
    sets = [{0, 1}, {1, 2}, {3}]
    assert common_cluster_count(0, 1, sets) == 1
    assert mean_common_clusters([0, 1, 2], sets) == pytest.approx(1 / 3)


def test_v_matrix_factorization():
    cfg = ScenarioConfig(k_users=20, m_antennas=16, k_selected=4, cell_size=200)
    drop = generate_drop(cfg, 0, seed=1)
    v = build_v_matrix(drop)
    g = drop.gains
    np.testing.assert_allclose(v, np.sqrt(g.path_gain)[:, None] * g.a_vr * np.sqrt(g.a_c))
    # every user sees at least its own local cluster
    assert all(s for s in activity_sets(v))


def test_sus_orthogonal_columns_all_selected():
    h = np.eye(6)[:, :4] * np.array([1.0, 3.0, 2.0, 0.5])
    res = semi_orthogonal(h, 4, 0.1)
    assert res.selected == [1, 2, 0, 3]


def test_sus_skips_columns_in_span():
    h = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [0.0, 0.0, 0.0]])
    res = semi_orthogonal(h, 3, 1.01)
    assert len(res.selected) == 2


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 0.9))
def test_sus_picks_strongest_first_and_respects_threshold(seed, eps):
    rng = np.random.default_rng(seed)
    h = rng.standard_normal((8, 12)) + 1j * rng.standard_normal((8, 12))
    res = semi_orthogonal(h, 6, eps)
    assert res.selected[0] == int(np.argmax(np.linalg.norm(h, axis=0)))
    assert len(res.selected) == len(set(res.selected)) <= 6


def test_gwc_grid_keeps_best_rate():
    rng = np.random.default_rng(3)
    h = rng.standard_normal((8, 12)) + 1j * rng.standard_normal((8, 12))
    rate = lambda hs: float(np.linalg.norm(hs))  # noqa: E731
    grid = (0.2, 0.5, 0.8)
    best = gwc(h, 4, grid=grid, rate_fn=rate)
    assert rate(h[:, best.selected]) == max(rate(h[:, semi_orthogonal(h, 4, e).selected])
                                            for e in grid)
    with pytest.raises(ValueError):
        gwc(h, 4)


def test_random_selection():
    res = random_selection(10, 10, 0)
    assert sorted(res.selected) == list(range(10))
    assert random_selection(10, 3, 5).selected == random_selection(10, 3, 5).selected
    with pytest.raises(ValueError):
        random_selection(3, 4, 0)


def test_estimation_load():
    assert estimation_load(GWC, 100, 400, 40) == 40_000
    assert estimation_load(RS, 100, 400, 40) == 4_000
    with pytest.raises(ValueError):
        estimation_load("other", 1, 1, 1)
