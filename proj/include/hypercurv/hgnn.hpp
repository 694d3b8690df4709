#pragma once

// Hyperbolic graph attention layers with a curvature per layer, the two task
// decoders, their losses, and an Adam optimizer over the parameter tensors.
//
// Points are N x (n+1) hyperboloid rows. Tangent vectors at the origin are
// carried as their n spatial coordinates (the time coordinate is zero).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hypercurv/autodiff.hpp"
#include "hypercurv/graph.hpp"
#include "hypercurv/rng.hpp"
#include "hypercurv/tensor.hpp"

namespace hypercurv::hgnn {

enum class Task { kLinkPrediction, kNodeClassification };

struct ModelConfig {
  std::size_t n_layers = 2;
  std::size_t dim = 16;
  double dropout = 0.5;
  Task task = Task::kLinkPrediction;
  double fd_r = 2.0;
  double fd_t = 1.0;
};

/// One layer maps d_in -> d_out. The attention perceptron reads the 2*d_out
/// concatenation [log_o h_i || log_o h_j] through a sigmoid hidden layer of
/// width d_out.
struct LayerParams {
  Tensor W;       // d_out x d_in
  Tensor b;       // 1 x d_out, tangent vector at the origin
  Tensor att_w1;  // 2*d_out x d_out
  Tensor att_b1;  // 1 x d_out
  Tensor att_w2;  // d_out x 1
};

struct ModelParams {
  std::vector<LayerParams> layers;
  Tensor cls_w;  // dim x classes (node classification only)
  Tensor cls_b;  // 1 x classes

  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
};

/// Glorot-uniform weights, zero biases.
ModelParams init_params(const ModelConfig& cfg, std::size_t in_dim, std::size_t n_classes,
                        Rng& rng);

/// Directed message edges src -> dst including one self-loop per node,
/// grouped by destination.
struct MessageGraph {
  std::size_t n_nodes = 0;
  std::vector<std::size_t> src;
  std::vector<std::size_t> dst;
  // Edge positions with src != dst; the aggregation sums only over these.
  std::vector<std::size_t> non_self;
};

MessageGraph message_graph(const Graph& g);

// ------------------------------------------------- differentiable geometry

namespace geo {

/// Spatial tangent coordinates at the origin (N x n) -> points (N x (n+1)).
ad::Var expmap0(ad::Var v, double zeta);
/// Points -> spatial tangent coordinates at the origin.
ad::Var logmap0(ad::Var x, double zeta);
/// Row-wise exp_x(v) for ambient tangent vectors v at x.
ad::Var expmap(ad::Var x, ad::Var v, double zeta);
/// Row-wise log_x(y).
ad::Var logmap(ad::Var x, ad::Var y, double zeta);
/// Transport of the origin tangent vector (0, v) to T_y, row-wise.
ad::Var transport_from_origin(ad::Var y, ad::Var v, double zeta);
/// Row-wise geodesic distance -> N x 1.
ad::Var distance(ad::Var x, ad::Var y, double zeta);

}  // namespace geo

// ---------------------------------------------------------------- layer ops

struct BoundLayer {
  ad::Var W, b, att_w1, att_b1, att_w2;
};

struct BoundParams {
  std::vector<BoundLayer> layers;
  ad::Var cls_w, cls_b;
};

/// Registers every parameter tensor on `tape` as a variable.
BoundParams bind(ad::Tape& tape, const ModelParams& params);

/// (W ⊗ h) ⊕ b. `dropout_mask`, when given, scales log_o(h) elementwise.
ad::Var linear_transform(ad::Var h, ad::Var W, ad::Var b, double zeta,
                         std::optional<ad::Var> dropout_mask = std::nullopt);

/// E x 1 attention weights for the message edges, softmax-normalized per
/// destination node.
ad::Var attention_weights(ad::Var h, const MessageGraph& mg, const BoundLayer& layer, double zeta);

/// exp_{h_i}(sum_j w_ij log_{h_i}(h_j)).
ad::Var aggregate(ad::Var h, const MessageGraph& mg, ad::Var weights, double zeta);

/// exp_o^{zeta_out}(relu(log_o^{zeta_in}(h))).
ad::Var activation(ad::Var h, double zeta_in, double zeta_out);

struct LayerOutput {
  ad::Var aggregated;  // at zeta_in, before the activation
  ad::Var output;      // at zeta_out
};

/// One layer. Dropout is active when `dropout_rng` is non-null.
LayerOutput layer_forward(ad::Var h, const MessageGraph& mg, const BoundLayer& layer,
                          double zeta_in, double zeta_out, double dropout, Rng* dropout_rng);

struct ForwardResult {
  ad::Var embeddings;               // at zetas.back()
  std::vector<ad::Var> aggregated;  // per layer, at that layer's zeta
};

/// Lifts the features at zetas[0] and chains the layers; layer l runs at
/// zetas[l] and hands its output over at zetas[l + 1] (the last layer stays
/// at its own curvature).
ForwardResult model_forward(ad::Tape& tape, const MessageGraph& mg, const Tensor& features,
                            const BoundParams& params, std::span<const double> zetas,
                            const ModelConfig& cfg, Rng* dropout_rng);

// ------------------------------------------------------------------ decoders

/// 1 / (exp((d^2 - r) / t) + 1).
double fermi_dirac(double d, double r, double t);

/// Fermi-Dirac probabilities for node pairs, from plain embeddings.
std::vector<double> edge_probabilities(const Tensor& emb, std::span<const Edge> edges,
                                       double zeta, double r, double t);

/// Mean binary cross-entropy of the Fermi-Dirac probabilities.
ad::Var lp_loss(ad::Var emb, std::span<const Edge> pos, std::span<const Edge> neg, double zeta,
                double r, double t);

/// Affine map of log_o(emb) -> N x classes.
ad::Var nc_logits(ad::Var emb, double zeta, ad::Var cls_w, ad::Var cls_b);

/// Mean softmax cross-entropy over `nodes`.
ad::Var nc_loss(ad::Var logits, std::span<const std::size_t> nodes, std::span<const int> labels);

// ----------------------------------------------------------------- optimizer

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-3;  // L2 term added to the gradient
};

/// One Adam step; `grads[i]` belongs to `params[i]`.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const AdamConfig& cfg);

}  // namespace hypercurv::hgnn
