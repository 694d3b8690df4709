#pragma once

// Undirected graph model, dataset ingestion, train/val/test splits and
// shortest-path machinery.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hypercurv/manifold.hpp"
#include "hypercurv/rng.hpp"
#include "hypercurv/tensor.hpp"

namespace hypercurv {

/// Malformed or inconsistent input data. `line` is 1-based, 0 when unknown.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& what, std::string file = {}, std::size_t line = 0);

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

struct Edge {
  std::size_t u = 0;
  std::size_t v = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

inline constexpr int kUnlabeled = -1;

/// Undirected, deduplicated graph without self-loops. Immutable after
/// construction.
class Graph {
 public:
  Graph() = default;
  /// Self-loops are dropped, duplicates and reversed duplicates merged.
  /// Throws DataError on out-of-range ids, feature row count mismatch,
  /// non-finite features or out-of-range labels.
  Graph(std::size_t n_nodes, std::span<const Edge> edges, Tensor features = {},
        std::vector<int> labels = {});

  std::size_t num_nodes() const { return adjacency_.size(); }
  std::size_t num_edges() const { return num_edges_; }
  std::span<const std::size_t> neighbors(std::size_t node) const { return adjacency_[node]; }
  std::size_t degree(std::size_t node) const { return adjacency_[node].size(); }
  bool has_edge(std::size_t u, std::size_t v) const;

  /// Each undirected edge once as (u, v) with u < v, sorted.
  std::vector<Edge> edges() const;

  /// N x f feature matrix; N x 0 when the graph has no features.
  const Tensor& features() const { return features_; }
  std::size_t feature_dim() const { return features_.cols(); }

  bool has_labels() const { return !labels_.empty(); }
  /// Per-node class ids, kUnlabeled where missing.
  const std::vector<int>& labels() const { return labels_; }
  std::size_t num_classes() const { return num_classes_; }

  /// Same nodes, features and labels with a different edge set.
  Graph with_edges(std::span<const Edge> edges) const;

 private:
  std::vector<std::vector<std::size_t>> adjacency_;
  std::size_t num_edges_ = 0;
  Tensor features_ = Tensor::matrix(0, 0);
  std::vector<int> labels_;
  std::size_t num_classes_ = 0;
};

// ---------------------------------------------------------------- ingestion

/// "u<TAB>v" per line, 0-based ids, '#' starts a comment. Any whitespace is
/// accepted as separator.
std::vector<Edge> read_edge_list(const std::string& path);

/// CSV (one row per node, no header) or a JSON manifest
/// {"n": int, "f": int, "rows": [[...], ...]}; JSON is detected by a leading '{'.
Tensor read_features(const std::string& path);

/// CSV "node_id,class_id"; nodes without a line are unlabeled.
std::vector<int> read_labels(const std::string& path, std::size_t n_nodes);

/// Node count comes from the feature file when given, otherwise from the
/// largest edge id.
Graph load_graph(const std::string& edge_path, const std::optional<std::string>& feature_path = {},
                 const std::optional<std::string>& label_path = {});

// ------------------------------------------------------------------- splits

struct EdgeSplit {
  std::vector<Edge> train_pos;
  std::vector<Edge> val_pos;
  std::vector<Edge> val_neg;
  std::vector<Edge> test_pos;
  std::vector<Edge> test_neg;
  std::uint64_t seed = 0;
};

/// Seeded link-prediction split. Positives are partitioned; validation and
/// test negatives are distinct true non-edges of `g` with |neg| = |pos|.
EdgeSplit make_lp_split(const Graph& g, double val_frac, double test_frac, std::uint64_t seed);

struct NodeSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Seeded split of labeled nodes, stratified by class.
NodeSplit make_nc_split(const Graph& g, double train_frac, double val_frac, std::uint64_t seed);

/// `count` distinct non-edges of `g`, sampled uniformly with rejection.
/// Pairs in `exclude` are also rejected.
std::vector<Edge> sample_non_edges(const Graph& g, std::size_t count, Rng& rng,
                                   std::span<const Edge> exclude = {});

// ------------------------------------------------------------ shortest paths

inline constexpr std::uint32_t kUnreachable = std::numeric_limits<std::uint32_t>::max();

std::vector<std::uint32_t> hop_distances(const Graph& g, std::size_t source);

/// BFS hop counts plus the smallest-id predecessor on a shortest path.
struct ShortestPathTree {
  std::vector<std::uint32_t> hops;
  std::vector<std::size_t> parent;  // parent[source] == source; unreachable: num_nodes
  std::vector<std::size_t> order;   // reachable nodes in nondecreasing hop order
};

ShortestPathTree shortest_path_tree(const Graph& g, std::size_t source);

/// Sum of embedded edge lengths along the shortest hop path from i to j
/// (smallest-id predecessor tie-break). std::nullopt when disconnected.
std::optional<double> hyperbolic_graph_distance(const Graph& g, const Tensor& embeddings,
                                                Curvature k, std::size_t i, std::size_t j);

/// hyperbolic_graph_distance from `source` to every node; +inf if unreachable.
std::vector<double> hyperbolic_graph_distances_from(const Graph& g, const Tensor& embeddings,
                                                    Curvature k, std::size_t source);

/// Node ids of the largest connected component, sorted.
std::vector<std::size_t> largest_component(const Graph& g);

/// Induced subgraph on `nodes` (relabelled 0..k-1 in the given order).
Graph induced_subgraph(const Graph& g, std::span<const std::size_t> nodes);

// ---------------------------------------------------------- hyperbolicity

enum class DeltaMode { kExact, kSampled };

struct DeltaResult {
  double delta = 0.0;
  /// True for sampled mode: the value is a lower bound on the exact delta.
  bool lower_bound = false;
  std::uint64_t quadruples = 0;
  std::size_t component_size = 0;
};

/// Gromov four-point delta over hop distances of the largest component.
/// Throws std::invalid_argument when that component has fewer than 4 nodes.
DeltaResult gromov_delta(const Graph& g, DeltaMode mode, std::size_t n_samples = 100000,
                         std::uint64_t seed = 0);

}  // namespace hypercurv
