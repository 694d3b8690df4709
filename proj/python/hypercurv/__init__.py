"""Hyperbolic graph learning with adaptive per-layer curvature."""

import json

from ._hypercurv import (
    DataError,
    balanced_binary_tree,
    distance,
    embedding_distortion,
    estimate_kappa,
    exp_map,
    gromov_delta,
    log_map,
    lorentz_inner,
    nash_equilibrium_2x2,
    parallel_transport,
    roc_auc,
    sarkar_tree_embedding,
    to_hyperboloid,
    transfer_curvature,
    update_zeta,
)
from ._hypercurv import _train_json

__all__ = [
    "DataError",
    "balanced_binary_tree",
    "distance",
    "embedding_distortion",
    "estimate_kappa",
    "exp_map",
    "gromov_delta",
    "log_map",
    "lorentz_inner",
    "nash_equilibrium_2x2",
    "parallel_transport",
    "roc_auc",
    "sarkar_tree_embedding",
    "to_hyperboloid",
    "train",
    "transfer_curvature",
    "update_zeta",
]


def train(n, edges, features=None, labels=None, **config):
    """Train on an in-memory graph.

    `config` takes the same keys as a checkpoint's config block, e.g.
    ``epochs=50, lr=5e-4, seed=1, rl=False``. Returns a dict with the best
    checkpoint's metrics and the per-epoch records.
    """
    return json.loads(_train_json(n, list(edges), features, list(labels or []), json.dumps(config)))
