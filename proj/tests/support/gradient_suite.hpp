#pragma once

// Gradient-check fixtures shared by the unit tests and the acceptance suite.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hypercurv/autodiff.hpp"
#include "hypercurv/graph.hpp"
#include "hypercurv/hgnn.hpp"

namespace hypercurv::oracle {

struct PrimitiveCase {
  std::string name;
  std::function<ad::Var(ad::Var)> f;
  double lo, hi;  // input range, away from kinks and clamps
  std::size_t rows = 3, cols = 4;
};

/// One scalar-valued case per autodiff primitive.
std::vector<PrimitiveCase> primitive_cases();

/// Worst finite-difference error over all primitive cases at seeded inputs.
double primitive_gradient_error(std::uint64_t seed, std::string* worst_name = nullptr);

/// 15-node tree, two layers of width 4, curvatures {1, 1.7}.
struct SmallLossProblem {
  Graph g;
  hgnn::MessageGraph mg;
  Tensor X;
  std::vector<int> labels;
  std::vector<std::size_t> nodes;
  std::vector<Edge> pos, neg;
  std::vector<double> zetas{1.0, 1.7};

  SmallLossProblem();
  hgnn::ModelConfig config(hgnn::Task task) const;
  /// Loss with parameter tensor `which` (ModelParams::tensors() order) replaced by x.
  ad::Var loss(const hgnn::ModelParams& params, const hgnn::ModelConfig& cfg, std::size_t which,
               ad::Var x) const;
};

/// Glorot init with the attention weights redrawn from N(0, 1). At Glorot
/// scale the receiver half of the attention MLP nearly cancels in the softmax
/// and its partials fall to 1e-9, below what h = 1e-5 resolves.
hgnn::ModelParams conditioned_params(const hgnn::ModelConfig& cfg, std::size_t in_dim,
                                     std::size_t n_classes, std::uint64_t seed);

}  // namespace hypercurv::oracle
