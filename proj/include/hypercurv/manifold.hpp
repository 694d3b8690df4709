#pragma once

// Variable-curvature hyperboloid geometry.
//
// Points live on the upper sheet {x : <x,x>_L = -zeta^2, x0 > 0} of
// (n+1)-dimensional Minkowski space; the sectional curvature is -1/zeta^2.
// All functions take ambient coordinates and are pure.

#include <cstddef>
#include <span>
#include <vector>

#include "hypercurv/tensor.hpp"

namespace hypercurv {

using Vector = std::vector<double>;

/// Curvature parameter zeta > 0 of H^{n,zeta}; curvature K = -1/zeta^2.
class Curvature {
 public:
  /// Throws std::invalid_argument unless zeta is finite and positive.
  explicit Curvature(double zeta);

  double zeta() const { return zeta_; }
  double zeta_sq() const { return zeta_ * zeta_; }
  double sectional() const { return -1.0 / (zeta_ * zeta_); }

  friend bool operator==(Curvature a, Curvature b) { return a.zeta_ == b.zeta_; }

 private:
  double zeta_;
};

struct CurvatureBounds {
  double min = 0.1;
  double max = 10.0;

  double clamp(double zeta) const;
};

namespace manifold {

/// Tolerance used when validating that a point lies on its hyperboloid.
inline constexpr double kConstraintTolerance = 1e-6;
/// Upper clamp for the arccosh argument.
inline constexpr double kMaxCoshArgument = 1e8;

double lorentz_inner(std::span<const double> u, std::span<const double> v);

/// sqrt(max(<v,v>_L, 0)); meaningful for tangent (spacelike) vectors.
double lorentz_norm(std::span<const double> v);

/// |<x,x>_L + zeta^2|.
double constraint_residual(std::span<const double> x, Curvature k);

/// Throws std::domain_error if x is non-finite, below the sheet, or off the
/// manifold by more than `tol`.
void require_on_manifold(std::span<const double> x, Curvature k,
                         double tol = kConstraintTolerance);

/// (zeta, 0, ..., 0) with `ambient_dim` coordinates.
Vector origin(std::size_t ambient_dim, Curvature k);

/// Geodesic distance zeta * arccosh(-<x,y>_L / zeta^2). Validates inputs.
double distance(std::span<const double> x, std::span<const double> y, Curvature k);

/// Same as distance() without validation; for hot loops over trusted points.
double distance_unchecked(std::span<const double> x, std::span<const double> y,
                          Curvature k);

/// Logarithmic map at x. Returns the zero vector when d(x, y) < 1e-12.
Vector log_map(std::span<const double> x, std::span<const double> y, Curvature k);

/// Exponential map at x. Returns x when ||v||_L is zero. The result is
/// re-projected onto the manifold.
Vector exp_map(std::span<const double> x, std::span<const double> v, Curvature k);

/// Parallel transport of v from T_x to T_y along the connecting geodesic.
Vector parallel_transport(std::span<const double> x, std::span<const double> y,
                          std::span<const double> v, Curvature k);

/// exp_o((0, x_e)) for a Euclidean vector x_e of length n.
Vector to_hyperboloid(std::span<const double> euclidean, Curvature k);

/// Spatial part of log_o(h), i.e. the Euclidean tangent coordinates at the
/// origin (the time component of log_o is always zero).
Vector to_tangent_at_origin(std::span<const double> h, Curvature k);

/// exp_o^{to}(log_o^{from}(h)).
Vector transfer_curvature(std::span<const double> h, Curvature from, Curvature to);

/// Recomputes x0 = sqrt(zeta^2 + sum_{i>=1} x_i^2).
Vector project_to_manifold(std::span<const double> raw, Curvature k);

/// Row-wise helpers over an N x (n+1) tensor of points.
Tensor to_hyperboloid_rows(const Tensor& euclidean, Curvature k);
Tensor transfer_curvature_rows(const Tensor& points, Curvature from, Curvature to);
double max_constraint_residual(const Tensor& points, Curvature k);

}  // namespace manifold
}  // namespace hypercurv
