#include "hypercurv/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace hypercurv::synthetic {

Graph balanced_binary_tree(std::size_t depth) {
  const std::size_t n = (std::size_t{1} << (depth + 1)) - 1;
  std::vector<Edge> edges;
  for (std::size_t k = 1; k < n; ++k) edges.push_back({(k - 1) / 2, k});
  return Graph(n, edges);
}

Graph cycle(std::size_t n) {
  if (n < 3) throw std::invalid_argument("cycle needs at least 3 nodes");
  std::vector<Edge> edges;
  for (std::size_t k = 0; k < n; ++k) edges.push_back({k, (k + 1) % n});
  return Graph(n, edges);
}

Graph erdos_renyi(std::size_t n, double p, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (uniform01(rng) < p) edges.push_back({u, v});
  return Graph(n, edges);
}

Tensor sarkar_tree_embedding(const Graph& tree, double edge_length, Curvature k) {
  const std::size_t n = tree.num_nodes();
  if (n == 0) return Tensor::matrix(0, 3);
  if (tree.num_edges() + 1 != n || largest_component(tree).size() != n) {
    throw std::invalid_argument("sarkar_tree_embedding needs a tree");
  }
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const Vector o = manifold::origin(3, k);
  const Vector e1{0.0, 1.0, 0.0}, e2{0.0, 0.0, 1.0};

  Tensor out = Tensor::matrix(n, 3);
  std::vector<bool> placed(n, false);
  std::copy(o.begin(), o.end(), out.row(0).begin());
  placed[0] = true;

  const ShortestPathTree bfs = shortest_path_tree(tree, 0);
  for (std::size_t x : bfs.order) {
    const auto children_of = [&] {
      std::vector<std::size_t> c;
      for (std::size_t v : tree.neighbors(x))
        if (!placed[v]) c.push_back(v);
      return c;
    }();
    const std::size_t deg = tree.degree(x);
    const Vector here(out.row(x).begin(), out.row(x).end());
    const Vector b1 = manifold::parallel_transport(o, here, e1, k);
    const Vector b2 = manifold::parallel_transport(o, here, e2, k);

    double phi = 0.0;
    std::size_t slot = 0;
    if (x != 0) {
      const std::size_t p = bfs.parent[x];
      const Vector u = manifold::log_map(here, out.row(p), k);
      phi = std::atan2(manifold::lorentz_inner(u, b2), manifold::lorentz_inner(u, b1));
      slot = 1;
    }
    for (std::size_t c : children_of) {
      const double angle = phi + two_pi * static_cast<double>(slot++) / static_cast<double>(deg);
      Vector v(3);
      for (std::size_t i = 0; i < 3; ++i) {
        v[i] = edge_length * (std::cos(angle) * b1[i] + std::sin(angle) * b2[i]);
      }
      const Vector child = manifold::exp_map(here, v, k);
      std::copy(child.begin(), child.end(), out.row(c).begin());
      placed[c] = true;
    }
  }
  return out;
}

Tensor hierarchical_features(const Graph& tree, std::size_t dim, double noise, double max_norm,
                             std::uint64_t seed) {
  if (dim < 2) throw std::invalid_argument("hierarchical_features needs dim >= 2");
  const std::size_t n = tree.num_nodes();
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Tensor x = Tensor::matrix(n, dim);
  if (n == 0) return x;

  const ShortestPathTree bfs = shortest_path_tree(tree, 0);
  for (std::size_t v : bfs.order) {
    for (std::size_t j = 0; j + 1 < dim; ++j) {
      x(v, j) = v == 0 ? gauss(rng) : x(bfs.parent[v], j) + noise * gauss(rng);
    }
    x(v, dim - 1) = static_cast<double>(tree.degree(v));
  }
  double largest = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    double s = 0.0;
    for (double a : x.row(v)) s += a * a;
    largest = std::max(largest, std::sqrt(s));
  }
  if (largest > 0.0) {
    for (double& a : x.values()) a *= max_norm / largest;
  }
  return x;
}

}  // namespace hypercurv::synthetic
