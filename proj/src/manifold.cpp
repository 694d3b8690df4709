#include "hypercurv/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace hypercurv {

Curvature::Curvature(double zeta) : zeta_(zeta) {
  if (!std::isfinite(zeta) || zeta <= 0.0) {
    throw std::invalid_argument("curvature parameter must be positive and finite, got " +
                                std::to_string(zeta));
  }
}

double CurvatureBounds::clamp(double zeta) const { return std::clamp(zeta, min, max); }

namespace manifold {

namespace {

void require_same_size(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw std::invalid_argument("dimension mismatch: " + std::to_string(u.size()) +
                                " vs " + std::to_string(v.size()));
  }
  if (u.size() < 2) {
    throw std::invalid_argument("ambient vectors need at least 2 coordinates");
  }
}

double spatial_norm_sq(std::span<const double> x) {
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += x[i] * x[i];
  return s;
}

}  // namespace

double lorentz_inner(std::span<const double> u, std::span<const double> v) {
  require_same_size(u, v);
  double s = -u[0] * v[0];
  for (std::size_t i = 1; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

double lorentz_norm(std::span<const double> v) {
  return std::sqrt(std::max(lorentz_inner(v, v), 0.0));
}

double constraint_residual(std::span<const double> x, Curvature k) {
  return std::abs(lorentz_inner(x, x) + k.zeta_sq());
}

void require_on_manifold(std::span<const double> x, Curvature k, double tol) {
  for (double c : x) {
    if (!std::isfinite(c)) throw std::domain_error("point has non-finite coordinates");
  }
  if (x.size() < 2) throw std::domain_error("point needs at least 2 coordinates");
  if (x[0] <= 0.0) throw std::domain_error("point is not on the upper sheet");
  // Rounding in <x,x> grows with x0^2, so the tolerance is scaled for far points.
  const double scale = std::max(k.zeta_sq(), x[0] * x[0]) / k.zeta_sq();
  const double residual = constraint_residual(x, k);
  if (residual > tol * std::max(1.0, scale)) {
    throw std::domain_error("point violates the hyperboloid constraint (residual " +
                            std::to_string(residual) + ")");
  }
}

Vector origin(std::size_t ambient_dim, Curvature k) {
  Vector o(ambient_dim, 0.0);
  if (ambient_dim) o[0] = k.zeta();
  return o;
}

namespace {

double geodesic_length(std::span<const double> x, std::span<const double> y, Curvature k,
                       double max_arg) {
  const double z = -lorentz_inner(x, y) / k.zeta_sq();
  if (z >= 2.0) return k.zeta() * std::acosh(std::min(z, max_arg));
  // Near the diagonal use <x-y,x-y>_L = 2 zeta^2 (z - 1), which avoids the
  // cancellation in z - 1.
  double diff_sq = -(x[0] - y[0]) * (x[0] - y[0]);
  for (std::size_t i = 1; i < x.size(); ++i) diff_sq += (x[i] - y[i]) * (x[i] - y[i]);
  const double u = std::max(diff_sq, 0.0) / (2.0 * k.zeta_sq());
  return k.zeta() * std::log1p(u + std::sqrt(u * (u + 2.0)));
}

}  // namespace

double distance_unchecked(std::span<const double> x, std::span<const double> y,
                          Curvature k) {
  return geodesic_length(x, y, k, kMaxCoshArgument);
}

double distance(std::span<const double> x, std::span<const double> y, Curvature k) {
  require_same_size(x, y);
  require_on_manifold(x, k);
  require_on_manifold(y, k);
  return distance_unchecked(x, y, k);
}

Vector log_map(std::span<const double> x, std::span<const double> y, Curvature k) {
  require_same_size(x, y);
  require_on_manifold(x, k);
  require_on_manifold(y, k);
  // No upper clamp here: exp_x(v) for |v|/zeta past arccosh(1e8) must still invert.
  const double d = geodesic_length(x, y, k, std::numeric_limits<double>::infinity());
  Vector v(x.size(), 0.0);
  if (d < 1e-12) return v;
  const double c = lorentz_inner(x, y) / k.zeta_sq();
  for (std::size_t i = 0; i < x.size(); ++i) v[i] = y[i] + c * x[i];
  const double n = lorentz_norm(v);
  if (n <= 0.0) return Vector(x.size(), 0.0);
  for (double& vi : v) vi *= d / n;
  return v;
}

Vector exp_map(std::span<const double> x, std::span<const double> v, Curvature k) {
  require_same_size(x, v);
  const double n = lorentz_norm(v);
  if (n < 1e-15) return Vector(x.begin(), x.end());
  const double a = std::cosh(n / k.zeta());
  const double b = k.zeta() * std::sinh(n / k.zeta()) / n;
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b * v[i];
  return project_to_manifold(out, k);
}

Vector parallel_transport(std::span<const double> x, std::span<const double> y,
                          std::span<const double> v, Curvature k) {
  require_same_size(x, y);
  require_same_size(x, v);
  const double coef = lorentz_inner(y, v) / (k.zeta_sq() - lorentz_inner(x, y));
  Vector out(v.begin(), v.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += coef * (x[i] + y[i]);
  return out;
}

Vector to_hyperboloid(std::span<const double> euclidean, Curvature k) {
  Vector h(euclidean.size() + 1, 0.0);
  double n2 = 0.0;
  for (double e : euclidean) n2 += e * e;
  const double n = std::sqrt(n2);
  if (n > 0.0) {
    const double b = k.zeta() * std::sinh(n / k.zeta()) / n;
    for (std::size_t i = 0; i < euclidean.size(); ++i) h[i + 1] = b * euclidean[i];
  }
  h[0] = std::sqrt(k.zeta_sq() + spatial_norm_sq(h));
  return h;
}

Vector to_tangent_at_origin(std::span<const double> h, Curvature k) {
  Vector t(h.size() - 1, 0.0);
  const double ns = std::sqrt(spatial_norm_sq(h));
  if (ns == 0.0) return t;
  // On the manifold ||h_spatial|| = zeta sinh(r / zeta); asinh keeps small r exact.
  const double r = k.zeta() * std::asinh(ns / k.zeta());
  for (std::size_t i = 1; i < h.size(); ++i) t[i - 1] = h[i] * (r / ns);
  return t;
}

Vector transfer_curvature(std::span<const double> h, Curvature from, Curvature to) {
  if (from == to) return Vector(h.begin(), h.end());
  return to_hyperboloid(to_tangent_at_origin(h, from), to);
}

Vector project_to_manifold(std::span<const double> raw, Curvature k) {
  Vector x(raw.begin(), raw.end());
  x[0] = std::sqrt(k.zeta_sq() + spatial_norm_sq(x));
  return x;
}

Tensor to_hyperboloid_rows(const Tensor& euclidean, Curvature k) {
  Tensor out = Tensor::matrix(euclidean.rows(), euclidean.cols() + 1);
  for (std::size_t i = 0; i < euclidean.rows(); ++i) {
    const Vector h = to_hyperboloid(euclidean.row(i), k);
    std::copy(h.begin(), h.end(), out.row(i).begin());
  }
  return out;
}

Tensor transfer_curvature_rows(const Tensor& points, Curvature from, Curvature to) {
  Tensor out = points;
  if (from == to) return out;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const Vector h = transfer_curvature(points.row(i), from, to);
    std::copy(h.begin(), h.end(), out.row(i).begin());
  }
  return out;
}

double max_constraint_residual(const Tensor& points, Curvature k) {
  double worst = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    worst = std::max(worst, constraint_residual(points.row(i), k));
  }
  return worst;
}

}  // namespace manifold
}  // namespace hypercurv
