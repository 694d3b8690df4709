#pragma once

// Synthetic graphs and embeddings used by tests, the acceptance suite and
// the CLI demo mode.

#include <cstddef>
#include <cstdint>

#include "hypercurv/graph.hpp"
#include "hypercurv/manifold.hpp"
#include "hypercurv/tensor.hpp"

namespace hypercurv::synthetic {

/// Complete binary tree with `depth` levels below the root (2^(depth+1) - 1
/// nodes). Node k has children 2k+1 and 2k+2.
Graph balanced_binary_tree(std::size_t depth);

/// Cycle graph on n nodes.
Graph cycle(std::size_t n);

/// Seeded Erdos-Renyi G(n, p).
Graph erdos_renyi(std::size_t n, double p, std::uint64_t seed);

/// Greedy Sarkar-style embedding of a tree into H^2 at curvature `k`: the
/// root sits at the origin and each child lies at distance `edge_length`
/// from its parent, with the children of a node spread evenly in angle
/// around the direction back to the parent. Returns N x 3 ambient points.
Tensor sarkar_tree_embedding(const Graph& tree, double edge_length, Curvature k);

/// Node features for a tree: the root draws N(0, I_{dim-1}), each child adds
/// N(0, noise^2 I) to its parent's vector, and the last column holds the
/// node degree. Columns are then scaled so the largest row norm is `max_norm`.
Tensor hierarchical_features(const Graph& tree, std::size_t dim, double noise, double max_norm,
                             std::uint64_t seed);

}  // namespace hypercurv::synthetic
