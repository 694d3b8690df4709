#include "hypercurv/curvature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "hypercurv/rng.hpp"

namespace hypercurv::curvature {

DistortionReport embedding_distortion(const Graph& g, const Tensor& emb, Curvature k,
                                      std::uint64_t seed) {
  if (g.num_edges() == 0) throw std::invalid_argument("embedding distortion needs at least one edge");
  if (emb.rows() != g.num_nodes()) throw std::invalid_argument("embedding rows do not match node count");
  const std::size_t n = g.num_nodes();

  std::vector<std::size_t> sources(n);
  std::iota(sources.begin(), sources.end(), std::size_t{0});
  DistortionReport report;
  if (n > kExactDistortionLimit) {
    Rng rng(seed);
    std::shuffle(sources.begin(), sources.end(), rng);
    sources.resize(kDistortionSampleSources);
    std::sort(sources.begin(), sources.end());
    report.sampled = true;
    spdlog::debug("distortion: sampling {} sources x {} targets", sources.size(), n);
  }

  double total = 0.0;
  for (std::size_t s : sources) {
    const std::vector<double> path = hyperbolic_graph_distances_from(g, emb, k, s);
    for (std::size_t t = 0; t < n; ++t) {
      if (t == s) continue;
      if (!std::isfinite(path[t])) {
        ++report.pairs_excluded;
        continue;
      }
      ++report.pairs_used;
      if (path[t] == 0.0) continue;  // coincident endpoints: d = g = 0
      const double d = manifold::distance_unchecked(emb.row(s), emb.row(t), k);
      total += std::abs((d * d) / (path[t] * path[t]) - 1.0);
    }
  }
  if (report.pairs_used > 0) report.mean_distortion = total / static_cast<double>(report.pairs_used);
  return report;
}

double xi_triangle(double d_am, double d_bc, double d_ab, double d_ac) {
  return d_am * d_am + d_bc * d_bc / 4.0 - (d_ab * d_ab + d_ac * d_ac) / 2.0;
}

double xi_normalized(double d_am, double d_bc, double d_ab, double d_ac) {
  if (d_am == 0.0) throw std::domain_error("xi_normalized: d_am is zero");
  return xi_triangle(d_am, d_bc, d_ab, d_ac) / (2.0 * d_am);
}

CurvatureEstimate estimate_kappa(const Graph& g, const Tensor& emb, Curvature k, std::size_t n_s,
                                 std::uint64_t seed) {
  if (n_s < 1) throw std::invalid_argument("estimate_kappa needs n_s >= 1");
  if (emb.rows() != g.num_nodes()) throw std::invalid_argument("embedding rows do not match node count");
  const std::size_t n = g.num_nodes();
  CurvatureEstimate est;
  auto dist = [&](std::size_t i, std::size_t j) {
    return manifold::distance_unchecked(emb.row(i), emb.row(j), k);
  };
  bool any_eligible = false;
  for (std::size_t m = 0; m < n; ++m) {
    const auto nbrs = g.neighbors(m);
    if (nbrs.size() < 2) continue;
    if (n < 4) break;
    any_eligible = true;
    Rng rng(derive_seed(seed, m));
    double acc = 0.0;
    std::size_t used = 0;
    for (std::size_t s = 0; s < n_s; ++s) {
      const std::size_t b = nbrs[uniform_index(rng, nbrs.size())];
      std::size_t c;
      do c = nbrs[uniform_index(rng, nbrs.size())];
      while (c == b);
      std::size_t a;
      do a = uniform_index(rng, n);
      while (a == m || a == b || a == c);
      const double d_am = dist(a, m);
      if (d_am == 0.0) continue;
      acc += xi_normalized(d_am, dist(b, c), dist(a, b), dist(a, c));
      ++used;
    }
    if (used == 0) continue;
    est.nodes.push_back(m);
    est.per_node.push_back(acc / static_cast<double>(used));
    est.n_samples += used;
  }
  if (!any_eligible) {
    throw std::invalid_argument("estimate_kappa: no node of degree >= 2 in a graph of >= 4 nodes");
  }
  if (!est.per_node.empty()) {
    est.kappa = std::accumulate(est.per_node.begin(), est.per_node.end(), 0.0) /
                static_cast<double>(est.per_node.size());
  }
  return est;
}

double update_zeta(double zeta_prev, double kappa, double gamma, const CurvatureBounds& bounds) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
  if (kappa > kKappaCeiling) {
    spdlog::debug("update_zeta: kappa {} clamped to {}", kappa, kKappaCeiling);
    kappa = kKappaCeiling;
  }
  const double proposed = (1.0 - gamma) * zeta_prev + gamma / std::sqrt(-kappa);
  const double clamped = bounds.clamp(proposed);
  if (clamped != proposed) spdlog::debug("update_zeta: {} clamped to {}", proposed, clamped);
  return clamped;
}

Tensor remap_embeddings(const Tensor& emb, Curvature from, Curvature to) {
  return manifold::transfer_curvature_rows(emb, from, to);
}

double polar_distance_exact(double r, double theta, double r2, double theta2, double zeta) {
  if (r < 0.0 || r2 < 0.0) throw std::invalid_argument("radii must be nonnegative");
  const double a = r / zeta, b = r2 / zeta;
  const double z = std::cosh(a) * std::cosh(b) - std::sinh(a) * std::sinh(b) * std::cos(theta - theta2);
  return zeta * std::acosh(std::max(z, 1.0));
}

double polar_distance_approx(double r, double theta, double r2, double theta2, double zeta) {
  if (r < 0.0 || r2 < 0.0) throw std::invalid_argument("radii must be nonnegative");
  const double dtheta = std::fmod(std::abs(theta - theta2), 2.0 * std::numbers::pi);
  if (dtheta == 0.0) throw std::domain_error("polar_distance_approx is undefined at dtheta = 0");
  return r + r2 + 2.0 * zeta * std::log(std::sin(dtheta / 2.0));
}

}  // namespace hypercurv::curvature
