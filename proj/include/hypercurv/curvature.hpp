#pragma once

// Embedding distortion, parallelogram-law curvature estimation, curvature
// updates and remapping between curvatures.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hypercurv/graph.hpp"
#include "hypercurv/manifold.hpp"
#include "hypercurv/tensor.hpp"

namespace hypercurv::curvature {

struct DistortionReport {
  double mean_distortion = 0.0;
  std::uint64_t pairs_used = 0;
  std::uint64_t pairs_excluded = 0;  // disconnected pairs
  bool sampled = false;
};

/// Graphs above this size are measured on a seeded pair sample.
inline constexpr std::size_t kExactDistortionLimit = 2000;
inline constexpr std::size_t kDistortionSampleSources = 100;

/// Mean of |d_H(i,j)^2 / g_H(i,j)^2 - 1| over ordered connected pairs i != j,
/// where g_H sums embedded edge lengths along the shortest hop path. Above
/// kExactDistortionLimit nodes, pairs are (source, every node) for
/// kDistortionSampleSources seeded sources. Throws on a graph without edges.
DistortionReport embedding_distortion(const Graph& g, const Tensor& emb, Curvature k,
                                      std::uint64_t seed = 0);

/// d_am^2 + d_bc^2 / 4 - (d_ab^2 + d_ac^2) / 2.
double xi_triangle(double d_am, double d_bc, double d_ab, double d_ac);
/// xi / (2 d_am). Throws std::domain_error when d_am == 0.
double xi_normalized(double d_am, double d_bc, double d_ab, double d_ac);

struct CurvatureEstimate {
  double kappa = 0.0;
  std::size_t n_samples = 0;           // accepted triangles
  std::vector<std::size_t> nodes;      // eligible midpoints
  std::vector<double> per_node;        // mean normalized xi per midpoint
};

/// For every node m of degree >= 2, draws `n_s` triangles (b, c distinct
/// neighbours of m, a outside {m, b, c}) and averages the normalized xi of
/// their embedded distances; kappa is the mean over nodes. Node m uses the
/// stream derive_seed(seed, m). Throws when no node is eligible.
CurvatureEstimate estimate_kappa(const Graph& g, const Tensor& emb, Curvature k, std::size_t n_s,
                                 std::uint64_t seed);

inline constexpr double kKappaCeiling = -1e-4;

/// (1 - gamma) zeta_prev + gamma / sqrt(-kappa), kappa clamped to
/// <= kKappaCeiling, result clamped to `bounds`.
double update_zeta(double zeta_prev, double kappa, double gamma, const CurvatureBounds& bounds = {});

/// Row-wise transfer of the embeddings from one curvature to another.
Tensor remap_embeddings(const Tensor& emb, Curvature from, Curvature to);

/// Hyperbolic law of cosines for points at radii r, r2 with angle difference
/// dtheta.
double polar_distance_exact(double r, double theta, double r2, double theta2, double zeta);
/// r + r2 + 2 zeta ln(sin(dtheta / 2)). Throws std::domain_error at dtheta = 0.
double polar_distance_approx(double r, double theta, double r2, double theta2, double zeta);

}  // namespace hypercurv::curvature
