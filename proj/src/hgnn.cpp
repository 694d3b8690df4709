#include "hypercurv/hgnn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hypercurv/manifold.hpp"

namespace hypercurv::hgnn {

namespace {

constexpr double kMinNormSq = 1e-30;
// Caps |v| / zeta inside cosh/sinh so exp maps stay finite.
constexpr double kMaxTangentRatio = 50.0;
// r / sinh(r) is 1 to double precision below this.
constexpr double kMinRatio = 1e-8;

ad::Var clamp_max(ad::Var a, double hi) { return ad::neg(ad::clamp_min(ad::neg(a), -hi)); }

ad::Var row_norm(ad::Var v) {
  return ad::sqrt(ad::clamp_min(ad::sum(ad::mul(v, v), 1), kMinNormSq));
}

ad::Var lorentz_norm_rows(ad::Var v) {
  return ad::sqrt(ad::clamp_min(ad::lorentz_inner(v, v), kMinNormSq));
}

// Recomputes the time coordinate from the spatial part.
ad::Var project(ad::Var spatial, double zeta) {
  ad::Var x0 = ad::sqrt(ad::add_scalar(ad::sum(ad::mul(spatial, spatial), 1), zeta * zeta));
  const ad::Var parts[] = {x0, spatial};
  return ad::concat(parts, 1);
}

// zeta * arccosh(z) written as 2 zeta asinh(|y - x|_L / (2 zeta)); no cancellation
// in z - 1 when the points are close.
ad::Var chord_distance(ad::Var x, ad::Var y, double zeta) {
  ad::Var diff = ad::sub(y, x);
  ad::Var chord = ad::sqrt(ad::clamp_min(ad::lorentz_inner(diff, diff), kMinNormSq));
  return ad::scalar_mul(ad::asinh(ad::scalar_mul(chord, 0.5 / zeta)), 2.0 * zeta);
}

ad::Var spatial_of(ad::Var x) { return ad::slice_cols(x, 1, x.value().cols()); }

ad::Var time_of(ad::Var x) { return ad::slice_cols(x, 0, 1); }

Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

std::vector<std::size_t> pick(std::span<const std::size_t> from, std::span<const std::size_t> at) {
  std::vector<std::size_t> out;
  out.reserve(at.size());
  for (std::size_t i : at) out.push_back(from[i]);
  return out;
}

}  // namespace

std::vector<Tensor*> ModelParams::tensors() {
  std::vector<Tensor*> out;
  for (auto& l : layers) {
    for (Tensor* t : {&l.W, &l.b, &l.att_w1, &l.att_b1, &l.att_w2}) out.push_back(t);
  }
  if (!cls_w.empty()) {
    out.push_back(&cls_w);
    out.push_back(&cls_b);
  }
  return out;
}

std::vector<const Tensor*> ModelParams::tensors() const {
  auto mut = const_cast<ModelParams*>(this)->tensors();
  return {mut.begin(), mut.end()};
}

ModelParams init_params(const ModelConfig& cfg, std::size_t in_dim, std::size_t n_classes,
                        Rng& rng) {
  if (cfg.n_layers < 1 || cfg.dim < 1) throw std::invalid_argument("model needs L >= 1 and dim >= 1");
  if (in_dim < 1) throw std::invalid_argument("model needs at least one input feature");
  ModelParams p;
  std::size_t d_in = in_dim;
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::size_t d = cfg.dim;
    LayerParams layer;
    layer.W = glorot(d, d_in, rng);
    layer.b = Tensor::matrix(1, d);
    layer.att_w1 = glorot(2 * d, d, rng);
    layer.att_b1 = Tensor::matrix(1, d);
    layer.att_w2 = glorot(d, 1, rng);
    p.layers.push_back(std::move(layer));
    d_in = d;
  }
  if (cfg.task == Task::kNodeClassification) {
    if (n_classes < 2) throw std::invalid_argument("node classification needs at least 2 classes");
    p.cls_w = glorot(cfg.dim, n_classes, rng);
    p.cls_b = Tensor::matrix(1, n_classes);
  }
  return p;
}

MessageGraph message_graph(const Graph& g) {
  MessageGraph mg;
  mg.n_nodes = g.num_nodes();
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    mg.src.push_back(i);
    mg.dst.push_back(i);
    for (std::size_t j : g.neighbors(i)) {
      mg.non_self.push_back(mg.src.size());
      mg.src.push_back(j);
      mg.dst.push_back(i);
    }
  }
  return mg;
}

// ------------------------------------------------------------------ geo

namespace geo {

ad::Var expmap0(ad::Var v, double zeta) {
  ad::Var n = row_norm(v);
  ad::Var ratio = clamp_max(ad::scalar_mul(n, 1.0 / zeta), kMaxTangentRatio);
  ad::Var coef = ad::div(ad::scalar_mul(ad::sinh(ratio), zeta), n);
  return project(ad::mul(v, coef), zeta);
}

ad::Var logmap0(ad::Var x, double zeta) {
  ad::Var xs = spatial_of(x);
  ad::Var s = row_norm(xs);
  ad::Var r = ad::asinh(ad::scalar_mul(s, 1.0 / zeta));
  return ad::mul(xs, ad::div(ad::scalar_mul(r, zeta), s));
}

ad::Var expmap(ad::Var x, ad::Var v, double zeta) {
  ad::Var n = lorentz_norm_rows(v);
  ad::Var ratio = clamp_max(ad::scalar_mul(n, 1.0 / zeta), kMaxTangentRatio);
  ad::Var coef = ad::div(ad::scalar_mul(ad::sinh(ratio), zeta), n);
  ad::Var out = ad::add(ad::mul(x, ad::cosh(ratio)), ad::mul(v, coef));
  return project(spatial_of(out), zeta);
}

ad::Var logmap(ad::Var x, ad::Var y, double zeta) {
  ad::Var ip = ad::scalar_mul(ad::lorentz_inner(x, y), 1.0 / (zeta * zeta));
  ad::Var u = ad::add(y, ad::mul(x, ip));
  // |u|_L = zeta sinh(d / zeta) on the manifold, so the scale is r / sinh(r),
  // which stays smooth as y -> x.
  ad::Var r = ad::clamp_min(ad::scalar_mul(chord_distance(x, y, zeta), 1.0 / zeta), kMinRatio);
  return ad::mul(u, ad::div(r, ad::sinh(r)));
}

ad::Var transport_from_origin(ad::Var y, ad::Var v, double zeta) {
  ad::Var ys = spatial_of(y);
  ad::Var y0 = time_of(y);
  ad::Var ip = ad::sum(ad::mul(ys, v), 1);
  ad::Var denom = ad::add_scalar(ad::scalar_mul(y0, zeta), zeta * zeta);
  ad::Var coef = ad::div(ip, denom);
  ad::Var t0 = ad::mul(coef, ad::add_scalar(y0, zeta));
  ad::Var ts = ad::add(v, ad::mul(ys, coef));
  const ad::Var parts[] = {t0, ts};
  return ad::concat(parts, 1);
}

ad::Var distance(ad::Var x, ad::Var y, double zeta) { return chord_distance(x, y, zeta); }

}  // namespace geo

// ----------------------------------------------------------------- layers

BoundParams bind(ad::Tape& tape, const ModelParams& params) {
  BoundParams out;
  for (const auto& l : params.layers) {
    out.layers.push_back({tape.variable(l.W), tape.variable(l.b), tape.variable(l.att_w1),
                          tape.variable(l.att_b1), tape.variable(l.att_w2)});
  }
  if (!params.cls_w.empty()) {
    out.cls_w = tape.variable(params.cls_w);
    out.cls_b = tape.variable(params.cls_b);
  }
  return out;
}

ad::Var linear_transform(ad::Var h, ad::Var W, ad::Var b, double zeta,
                         std::optional<ad::Var> dropout_mask) {
  ad::Var u = geo::logmap0(h, zeta);
  if (dropout_mask) u = ad::mul(u, *dropout_mask);
  ad::Var wh = geo::expmap0(ad::matmul(u, ad::transpose(W)), zeta);
  return geo::expmap(wh, geo::transport_from_origin(wh, b, zeta), zeta);
}

ad::Var attention_weights(ad::Var h, const MessageGraph& mg, const BoundLayer& layer, double zeta) {
  ad::Var t = geo::logmap0(h, zeta);
  const ad::Var pair[] = {ad::gather_rows(t, mg.dst), ad::gather_rows(t, mg.src)};
  ad::Var hidden = ad::sigmoid(ad::add(ad::matmul(ad::concat(pair, 1), layer.att_w1), layer.att_b1));
  return ad::segment_softmax(ad::matmul(hidden, layer.att_w2), mg.dst, mg.n_nodes);
}

ad::Var aggregate(ad::Var h, const MessageGraph& mg, ad::Var weights, double zeta) {
  if (mg.non_self.empty()) return h;
  const auto dst = pick(mg.dst, mg.non_self);
  const auto src = pick(mg.src, mg.non_self);
  ad::Var logs = geo::logmap(ad::gather_rows(h, dst), ad::gather_rows(h, src), zeta);
  ad::Var weighted = ad::mul(logs, ad::gather_rows(weights, mg.non_self));
  return geo::expmap(h, ad::segment_sum(weighted, dst, mg.n_nodes), zeta);
}

ad::Var activation(ad::Var h, double zeta_in, double zeta_out) {
  return geo::expmap0(ad::relu(geo::logmap0(h, zeta_in)), zeta_out);
}

LayerOutput layer_forward(ad::Var h, const MessageGraph& mg, const BoundLayer& layer,
                          double zeta_in, double zeta_out, double dropout, Rng* dropout_rng) {
  std::optional<ad::Var> mask;
  if (dropout_rng && dropout > 0.0) {
    const std::size_t rows = h.value().rows(), cols = h.value().cols() - 1;
    Tensor m = Tensor::matrix(rows, cols);
    std::bernoulli_distribution keep(1.0 - dropout);
    for (double& v : m.values()) v = keep(*dropout_rng) ? 1.0 / (1.0 - dropout) : 0.0;
    mask = h.tape()->constant(std::move(m));
  }
  ad::Var lt = linear_transform(h, layer.W, layer.b, zeta_in, mask);
  ad::Var w = attention_weights(lt, mg, layer, zeta_in);
  ad::Var agg = aggregate(lt, mg, w, zeta_in);
  return {agg, activation(agg, zeta_in, zeta_out)};
}

ForwardResult model_forward(ad::Tape& tape, const MessageGraph& mg, const Tensor& features,
                            const BoundParams& params, std::span<const double> zetas,
                            const ModelConfig& cfg, Rng* dropout_rng) {
  const std::size_t L = params.layers.size();
  if (zetas.size() != L) throw std::invalid_argument("need one curvature per layer");
  if (features.rows() != mg.n_nodes) throw std::invalid_argument("feature rows do not match graph");
  if (features.cols() != params.layers[0].W.value().cols()) {
    throw std::invalid_argument("feature dimension does not match the first layer");
  }
  ForwardResult out;
  ad::Var h = geo::expmap0(tape.constant(features), zetas[0]);
  for (std::size_t l = 0; l < L; ++l) {
    const double zeta_out = zetas[std::min(l + 1, L - 1)];
    LayerOutput lo = layer_forward(h, mg, params.layers[l], zetas[l], zeta_out, cfg.dropout,
                                   dropout_rng);
    out.aggregated.push_back(lo.aggregated);
    h = lo.output;
  }
  out.embeddings = h;
  return out;
}

// --------------------------------------------------------------- decoders

double fermi_dirac(double d, double r, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("Fermi-Dirac temperature must be positive");
  return 1.0 / (std::exp((d * d - r) / t) + 1.0);
}

std::vector<double> edge_probabilities(const Tensor& emb, std::span<const Edge> edges,
                                       double zeta, double r, double t) {
  const Curvature k(zeta);
  std::vector<double> out;
  out.reserve(edges.size());
  for (const Edge& e : edges) {
    out.push_back(fermi_dirac(manifold::distance_unchecked(emb.row(e.u), emb.row(e.v), k), r, t));
  }
  return out;
}

namespace {

// Sum over pairs of -log sigmoid(sign * (r - d^2) / t).
ad::Var pair_bce_sum(ad::Var emb, std::span<const Edge> edges, double zeta, double r, double t,
                     double sign) {
  std::vector<std::size_t> us, vs;
  for (const Edge& e : edges) {
    us.push_back(e.u);
    vs.push_back(e.v);
  }
  ad::Var d = geo::distance(ad::gather_rows(emb, us), ad::gather_rows(emb, vs), zeta);
  ad::Var logit = ad::scalar_mul(ad::add_scalar(ad::neg(ad::mul(d, d)), r), sign / t);
  return ad::neg(ad::sum_all(ad::log_sigmoid(logit)));
}

}  // namespace

ad::Var lp_loss(ad::Var emb, std::span<const Edge> pos, std::span<const Edge> neg, double zeta,
                double r, double t) {
  if (pos.empty() || neg.empty()) throw std::invalid_argument("lp_loss needs positive and negative pairs");
  if (!(t > 0.0)) throw std::invalid_argument("Fermi-Dirac temperature must be positive");
  ad::Var total = ad::add(pair_bce_sum(emb, pos, zeta, r, t, 1.0),
                          pair_bce_sum(emb, neg, zeta, r, t, -1.0));
  return ad::scalar_mul(total, 1.0 / static_cast<double>(pos.size() + neg.size()));
}

ad::Var nc_logits(ad::Var emb, double zeta, ad::Var cls_w, ad::Var cls_b) {
  return ad::add(ad::matmul(geo::logmap0(emb, zeta), cls_w), cls_b);
}

ad::Var nc_loss(ad::Var logits, std::span<const std::size_t> nodes, std::span<const int> labels) {
  if (nodes.empty()) throw std::invalid_argument("nc_loss needs at least one node");
  const std::size_t classes = logits.value().cols();
  Tensor onehot = Tensor::matrix(nodes.size(), classes);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const int y = labels[nodes[i]];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw std::invalid_argument("node " + std::to_string(nodes[i]) + " has no valid label");
    }
    onehot(i, static_cast<std::size_t>(y)) = 1.0;
  }
  ad::Var picked = ad::mul(ad::gather_rows(ad::log_softmax(logits, 1), nodes),
                           logits.tape()->constant(std::move(onehot)));
  return ad::scalar_mul(ad::sum_all(picked), -1.0 / static_cast<double>(nodes.size()));
}

// -------------------------------------------------------------- optimizer

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam: params/grads mismatch");
  if (state.m.empty()) {
    for (Tensor* p : params) {
      state.m.push_back(Tensor::zeros_like(*p));
      state.v.push_back(Tensor::zeros_like(*p));
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = grads[k][i] + cfg.weight_decay * p[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      p[i] -= cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
    }
  }
}

}  // namespace hypercurv::hgnn
