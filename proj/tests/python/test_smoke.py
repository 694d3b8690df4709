import math

import numpy as np
import pytest

import hypercurv as hc


def test_distance_round_trip():
    x = hc.to_hyperboloid(np.array([0.3, -0.2]), 1.5)
    y = hc.to_hyperboloid(np.array([-0.1, 0.4]), 1.5)
    v = hc.log_map(x, y, 1.5)
    assert np.allclose(hc.exp_map(x, v, 1.5), y, atol=1e-10)
    assert math.isclose(math.sqrt(hc.lorentz_inner(v, v)), hc.distance(x, y, 1.5), rel_tol=1e-10)


def test_off_manifold_point_is_rejected():
    with pytest.raises(Exception):
        hc.distance(np.array([1.0, 1.0, 0.0]), np.array([1.0, 0.0, 0.0]), 1.0)


def test_tree_is_zero_hyperbolic_and_cycle_is_one():
    n, edges = hc.balanced_binary_tree(3)
    assert hc.gromov_delta(n, edges)["delta"] == 0.0
    assert hc.gromov_delta(4, [(0, 1), (1, 2), (2, 3), (3, 0)])["delta"] == 1.0


def test_sarkar_tree_has_negative_curvature_estimate():
    n, edges = hc.balanced_binary_tree(5)
    emb = hc.sarkar_tree_embedding(n, edges, 1.5, 1.0)
    assert emb.shape == (63, 3)
    assert hc.estimate_kappa(n, edges, emb, 1.0, 2, 0)["kappa"] < 0.0
    report = hc.embedding_distortion(n, edges, emb, 1.0)
    assert report["pairs_used"] == 63 * 62
    assert 0.0 <= report["mean_distortion"] < 1.0


def test_update_zeta_fixed_point_and_bounds():
    assert hc.update_zeta(1.0, -1.0, 0.2) == pytest.approx(1.0)
    assert hc.update_zeta(1.0, -4.0, 0.2) == pytest.approx(0.9)
    assert 0.1 <= hc.update_zeta(1.0, 0.3, 0.2) <= 10.0


def test_matching_pennies():
    eq = hc.nash_equilibrium_2x2([[1, -1], [-1, 1]], [[-1, 1], [1, -1]])
    assert eq["pi_hgnn"] == [0.5, 0.5]
    assert eq["pi_ace"] == [0.5, 0.5]


def test_roc_auc_ties():
    assert hc.roc_auc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == 0.5
    assert hc.roc_auc([0.9, 0.8, 0.1], [1, 1, 0]) == 1.0


def test_short_training_run_is_deterministic():
    n, edges = hc.balanced_binary_tree(5)
    rng = np.random.default_rng(3)
    feats = rng.normal(size=(n, 8))
    a = hc.train(n, edges, feats, epochs=4, seed=11, distortion_every=2)
    b = hc.train(n, edges, feats, epochs=4, seed=11, distortion_every=2)
    assert a["records"] == b["records"]
    assert len(a["records"]) == 4
    assert 0.0 <= a["test_metric"] <= 1.0
    assert all(r["test_metric"] is None for r in a["records"])


def test_unknown_config_key_is_an_error():
    n, edges = hc.balanced_binary_tree(5)
    with pytest.raises(ValueError):
        hc.train(n, edges, np.ones((n, 2)), epochs=1, learning_rate=0.1)
