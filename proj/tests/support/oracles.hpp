#pragma once

// Reference implementations used only by the test suites. They share no code
// with the library beyond the Graph container.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hypercurv/graph.hpp"
#include "hypercurv/tensor.hpp"

namespace hypercurv::oracle {

inline constexpr int kInf = 1 << 28;

/// 50-digit zeta * arccosh(-<x,y>_L / zeta^2).
double distance_mp(std::span<const double> x, std::span<const double> y, double zeta);

/// Distance between exp_o(e1) and exp_o(e2) with the lift also done in 50 digits.
double lifted_distance_mp(std::span<const double> e1, std::span<const double> e2, double zeta);

/// All-pairs hop distances; kInf for unreachable pairs.
std::vector<std::vector<int>> floyd_warshall(const Graph& g);

/// Max over every ordered 4-tuple of the four-point excess, halved.
double gromov_delta_brute(const Graph& g);

/// Path-sum distance i -> j, stepping back from j to its smallest-id
/// neighbour one hop closer to i.
double path_sum(const std::vector<std::vector<int>>& hops, const Graph& g, const Tensor& emb,
                double zeta, std::size_t i, std::size_t j);

/// Mean |d^2/g^2 - 1| over ordered connected pairs, long double accumulation.
double distortion_brute(const Graph& g, const Tensor& emb, double zeta);

/// Enumerates every simple path from i to j and returns the embedded lengths.
std::vector<double> all_simple_path_lengths(const Graph& g, const Tensor& emb, double zeta,
                                            std::size_t i, std::size_t j);

/// Random connected-or-not graph with edge probability p.
Graph random_graph(std::size_t n, double p, std::uint64_t seed);

}  // namespace hypercurv::oracle
